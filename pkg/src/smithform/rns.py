"""Residue number system bases and hardware-speed exact modular matrix kernels.

Integer matrices are reduced modulo a set of word-sized primes chosen so that
an n-term inner product of residues never exceeds 2^53 - 1.  Every per-prime
matrix product is then an ordinary double-precision BLAS multiplication whose
result is bit-exact, and the integer result is recovered with the Chinese
Remainder Theorem.

The module also hosts the batched LU factorization mod p used for CRT
determinants and for inverting a matrix modulo the lifting prime.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import gmpy2
import numpy as np

_FLOAT_LIMIT = 2**53 - 1

# digit-plane constants: entries are split into base-2^24 digits (3 bytes),
# and per-prime weights into 13/14-bit halves, so the conversion dgemm
# accumulates at most T * 2^24 * 2^14 < 2^53 terms for T <= 15000 planes.
_DIGIT_BITS = 24
_DIGIT_BYTES = 3
_W_SPLIT = 13


class BasisError(ValueError):
    """Raised when no admissible RNS basis exists for the request."""


def max_admissible_root(dim: int) -> int:
    """Largest x with dim*x^2 + x < 2^53 - 1 (admissible p satisfy p-1 <= x)."""
    x = math.isqrt((_FLOAT_LIMIT - 1) // dim)
    while dim * x * x + x >= _FLOAT_LIMIT:
        x -= 1
    while dim * (x + 1) * (x + 1) + (x + 1) < _FLOAT_LIMIT:
        x += 1
    return x


# descending primes per dimension, extended lazily and shared across bases
_prime_pools: dict = {}
_pool_lock = threading.Lock()


def _descending_primes(dim: int, count: int):
    with _pool_lock:
        pool = _prime_pools.setdefault(dim, [])
        if not pool:
            top = max_admissible_root(dim) + 1
            if top < 2:
                raise BasisError(f"no admissible prime for dimension {dim}")
            p = top
            while not gmpy2.is_prime(p):
                p -= 1
                if p < 2:
                    raise BasisError(f"no admissible prime for dimension {dim}")
            pool.append(p)
        while len(pool) < count:
            p = pool[-1] - 1
            while p >= 2 and not gmpy2.is_prime(p):
                p -= 1
            if p < 2:
                raise BasisError(f"prime pool exhausted for dimension {dim}")
            pool.append(p)
        return pool[:count]


class RnsBasis:
    """A set of distinct word-sized primes with precomputed CRT constants.

    All constants are computed once at construction: floating reciprocals for
    the fast reduction trick, Lagrange interpolants ``(product/p_i)`` and
    their inverses mod p_i for reconstruction, and the floating-point weights
    used by the Lagrange base-conversion shortcut.
    """

    def __init__(self, dim: int, primes):
        self.dim = dim
        self.primes = tuple(int(p) for p in primes)
        if len(set(self.primes)) != len(self.primes):
            raise ValueError("primes must be distinct")
        self.ell = len(self.primes)
        prod = 1
        for p in self.primes:
            prod *= p
        self.product = prod
        self.primes_f = np.array(self.primes, dtype=np.float64)
        self.primes_i = np.array(self.primes, dtype=np.int64)
        self.recip = 1.0 / self.primes_f
        # Lagrange interpolants M_i = product/p_i and y_i = M_i^{-1} mod p_i
        self.m_over_p = [prod // p for p in self.primes]
        self.y = [int(gmpy2.invert(self.m_over_p[i] % p, p)) for i, p in enumerate(self.primes)]
        self.y_i = np.array(self.y, dtype=np.int64)
        # weights for the float correction factor in base conversion
        self.lam = self.y_i.astype(np.float64) * self.recip
        self._crt_cache = None
        self._weight_cache: dict = {}

    def __repr__(self):
        return f"RnsBasis(dim={self.dim}, ell={self.ell}, bits={self.product.bit_length()})"

    def _crt_groups(self, group=32):
        """Two-level CRT tables: per-group coefficients and group interpolants."""
        if self._crt_cache is None:
            groups = []
            gstart = 0
            while gstart < self.ell:
                idx = range(gstart, min(gstart + group, self.ell))
                gprod = 1
                for i in idx:
                    gprod *= self.primes[i]
                coeffs = []
                for i in idx:
                    mi = gprod // self.primes[i]
                    yi = int(gmpy2.invert(mi % self.primes[i], self.primes[i]))
                    coeffs.append(gmpy2.mpz(mi * yi % gprod))
                groups.append((gmpy2.mpz(gprod), coeffs))
                gstart += group
            prod = gmpy2.mpz(self.product)
            interp = []
            for gprod, _ in groups:
                mg = prod // gprod
                yg = gmpy2.invert(mg % gprod, gprod)
                interp.append(mg * yg % prod)
            self._crt_cache = (groups, interp)
        return self._crt_cache

    def weight_planes(self, nplanes: int):
        """Split 2^(24t) mod p_i into 13-bit-halved float matrices (T x ell)."""
        key = nplanes
        cached = self._weight_cache.get(key)
        if cached is not None:
            return cached
        w = np.empty((nplanes, self.ell), dtype=np.int64)
        for i, p in enumerate(self.primes):
            base = pow(2, _DIGIT_BITS, p)
            acc = 1 % p
            col = np.empty(nplanes, dtype=np.int64)
            for t in range(nplanes):
                col[t] = acc
                acc = (acc * base) % p
            w[:, i] = col
        lo = (w & ((1 << _W_SPLIT) - 1)).astype(np.float64)
        hi = (w >> _W_SPLIT).astype(np.float64)
        self._weight_cache[key] = (lo, hi)
        return lo, hi


_basis_cache: dict = {}
_basis_lock = threading.Lock()


def build_basis(dim: int, target_bits: int) -> RnsBasis:
    """Basis of consecutive descending admissible primes with product >= 2^target_bits."""
    if dim < 1 or target_bits < 1:
        raise ValueError("dim and target_bits must be >= 1")
    key = (dim, target_bits)
    with _basis_lock:
        hit = _basis_cache.get(key)
    if hit is not None:
        return hit
    top = max_admissible_root(dim) + 1
    per_prime = max(math.log2(top) - 1.0, 1.0)
    count = max(1, math.ceil(target_bits / per_prime))
    while True:
        primes = _descending_primes(dim, count)
        prod_bits = sum(p.bit_length() - 1 for p in primes)  # lower bound
        if prod_bits >= target_bits:
            # trim to the shortest prefix that still reaches the target
            prod = 1
            for i, p in enumerate(primes):
                prod *= p
                if prod >= 1 << target_bits:
                    primes = primes[: i + 1]
                    break
            else:
                count += max(4, count // 4)
                continue
            break
        count += max(4, count // 4)
    basis = RnsBasis(dim, primes)
    with _basis_lock:
        _basis_cache[key] = basis
    return basis


@dataclass
class ResidueStack:
    """Per-prime residue matrices stored as exact doubles in [0, p_i)."""

    basis: RnsBasis
    rows: int
    cols: int
    planes: np.ndarray  # (ell, rows, cols) float64

    def copy(self) -> "ResidueStack":
        return ResidueStack(self.basis, self.rows, self.cols, self.planes.copy())


def _reduce_mod_inplace(w: np.ndarray, p, recip) -> None:
    """Reduce float64 integer values into [0, p) via the reciprocal trick.

    Exact for |values| < 2^53: q = floor(w/p) from the precomputed float
    reciprocal is off by at most one, fixed by a single correction pass.
    """
    q = np.floor(w * recip)
    w -= q * p
    np.add(w, p, out=w, where=w < 0)
    np.subtract(w, p, out=w, where=w >= p)


def digit_planes(flat_ints, nbytes: int):
    """Split |x| of every entry into base-2^24 digit planes.

    Returns (planes, negmask): planes is (N, T) float64 with digits < 2^24,
    negmask marks entries with x < 0.
    """
    n = len(flat_ints)
    nbytes = max(_DIGIT_BYTES, (nbytes + _DIGIT_BYTES - 1) // _DIGIT_BYTES * _DIGIT_BYTES)
    buf = bytearray(n * nbytes)
    neg = np.zeros(n, dtype=bool)
    for i, x in enumerate(flat_ints):
        x = int(x)
        if x < 0:
            neg[i] = True
            x = -x
        buf[i * nbytes : i * nbytes + (x.bit_length() + 7) // 8] = x.to_bytes(
            (x.bit_length() + 7) // 8, "little"
        )
    b = np.frombuffer(bytes(buf), dtype=np.uint8).reshape(n, nbytes)
    t = nbytes // _DIGIT_BYTES
    planes = (
        b[:, 0::3].astype(np.float64)
        + 256.0 * b[:, 1::3].astype(np.float64)
        + 65536.0 * b[:, 2::3].astype(np.float64)
    )
    assert planes.shape == (n, t)
    return planes, neg


def residues_from_planes(planes: np.ndarray, neg: np.ndarray, basis: RnsBasis) -> np.ndarray:
    """Residues (N, ell) float64 of the integers encoded by digit planes."""
    t = planes.shape[1]
    if t > 1 << 14:
        raise ValueError("too many digit planes for exact accumulation")
    lo, hi = basis.weight_planes(t)
    acc_lo = planes @ lo
    acc_hi = planes @ hi
    p = basis.primes_f
    _reduce_mod_inplace(acc_lo, p, basis.recip)
    _reduce_mod_inplace(acc_hi, p, basis.recip)
    r = acc_hi * float(1 << _W_SPLIT) + acc_lo
    _reduce_mod_inplace(r, p, basis.recip)
    np.subtract(p, r, out=r, where=neg[:, None] & (r != 0.0))
    return r


def _flat_residues(flat_ints, max_abs: int, basis: RnsBasis) -> np.ndarray:
    """(ell, N) float64 residues; picks int64 or digit-plane path by size."""
    n = len(flat_ints)
    if max_abs < 2**62:
        arr = np.fromiter((int(x) for x in flat_ints), dtype=np.int64, count=n)
        out = np.empty((basis.ell, n), dtype=np.float64)
        for i in range(basis.ell):
            out[i] = (arr % basis.primes_i[i]).astype(np.float64)
        return out
    nbytes = (max_abs.bit_length() + 7) // 8
    planes, neg = digit_planes(flat_ints, nbytes)
    return np.ascontiguousarray(residues_from_planes(planes, neg, basis).T)


def to_residues(a, basis: RnsBasis) -> ResidueStack:
    """Reduce an IntMat modulo every basis prime."""
    flat = a.entries
    max_abs = max((abs(int(x)) for x in flat), default=0)
    r = _flat_residues(flat, max_abs, basis)
    return ResidueStack(basis, a.rows, a.cols, r.reshape(basis.ell, a.rows, a.cols))


def _crt_entry(residues, basis: RnsBasis):
    """Exact CRT of one entry, symmetric range, via two-level combination."""
    groups, interp = basis._crt_groups()
    prod = basis.product
    x = gmpy2.mpz(0)
    gstart = 0
    for (gprod, coeffs), cg in zip(groups, interp):
        acc = gmpy2.mpz(0)
        for c, r in zip(coeffs, residues[gstart : gstart + len(coeffs)]):
            acc += c * int(r)
        x += (acc % gprod) * cg
        gstart += len(coeffs)
    x = x % prod
    if 2 * x > prod:
        x -= prod
    return int(x)


def from_residues(stack: ResidueStack, basis: RnsBasis = None):
    """CRT reconstruction into the symmetric range (-product/2, product/2]."""
    from .matcore import IntMat

    basis = basis or stack.basis
    if basis is not stack.basis:
        raise ValueError("stack does not belong to this basis")
    ell, rows, cols = stack.planes.shape
    flat = stack.planes.reshape(ell, rows * cols)
    ir = flat.astype(np.int64)
    entries = [None] * (rows * cols)
    for j in range(rows * cols):
        entries[j] = _crt_entry(ir[:, j], basis)
    return IntMat(rows, cols, tuple(entries))


def crt_combine_scalar(residues, basis: RnsBasis) -> int:
    return _crt_entry(list(residues), basis)


def rns_matmul(a: ResidueStack, b: ResidueStack) -> ResidueStack:
    """Per-prime double-precision product with exact reciprocal reduction."""
    if a.basis is not b.basis:
        raise ValueError("stacks must share a basis")
    if a.cols != b.rows:
        raise ValueError("inner dimensions do not agree")
    basis = a.basis
    if a.cols > basis.dim:
        raise ValueError(
            f"inner dimension {a.cols} exceeds the basis dimension bound {basis.dim}; "
            "accumulation could overflow 2^53 - 1"
        )
    out = np.matmul(a.planes, b.planes)
    _reduce_mod_inplace(out, basis.primes_f[:, None, None], basis.recip[:, None, None])
    return ResidueStack(basis, a.rows, b.cols, out)


def identity_stack(n: int, basis: RnsBasis) -> ResidueStack:
    planes = np.broadcast_to(np.eye(n), (basis.ell, n, n)).copy()
    return ResidueStack(basis, n, n, planes)


def base_convert(stack: ResidueStack, from_basis: RnsBasis, to_basis: RnsBasis) -> ResidueStack:
    """Convert residues to another basis by the Lagrange shortcut.

    The implied integer x = sum c_i M_i - alpha * product is formed directly
    modulo every target prime; the overflow multiple alpha is estimated by a
    floating-point sum of weights and checked against a guard band, with an
    exact CRT fallback for any entry too close to the rounding boundary.
    """
    if stack.basis is not from_basis:
        raise ValueError("stack does not belong to from_basis")
    if from_basis is to_basis:
        return stack.copy()
    ell, rows, cols = stack.planes.shape
    n = rows * cols
    r = stack.planes.reshape(ell, n).astype(np.int64)
    # c_i = r_i * y_i mod p_i ; products < p^2 < 2^54 fit in int64
    c = np.empty_like(r)
    for i in range(ell):
        c[i] = (r[i] * from_basis.y[i]) % from_basis.primes[i]
    cf = c.astype(np.float64)
    alpha_f = from_basis.recip @ cf  # sum c_i / p_i, true alpha = floor of exact sum
    alpha = np.floor(alpha_f)
    frac = alpha_f - alpha
    guard = 1e-6 * max(ell, 1)
    risky = (frac < guard) | (frac > 1.0 - guard)

    # target residues: (sum_i c_i * (M_i mod q) - alpha * (prod mod q)) mod q
    mi_mod = np.empty((ell, to_basis.ell), dtype=np.int64)
    for j, q in enumerate(to_basis.primes):
        for i in range(ell):
            mi_mod[i, j] = from_basis.m_over_p[i] % q
    lo = (mi_mod & ((1 << _W_SPLIT) - 1)).astype(np.float64)
    hi = (mi_mod >> _W_SPLIT).astype(np.float64)
    if ell * float(2**27) * float(1 << (27 - _W_SPLIT)) >= float(_FLOAT_LIMIT):
        raise ValueError("source basis too large for exact float accumulation")
    acc_lo = cf.T @ lo
    acc_hi = cf.T @ hi
    q = to_basis.primes_f
    _reduce_mod_inplace(acc_lo, q, to_basis.recip)
    _reduce_mod_inplace(acc_hi, q, to_basis.recip)
    out = acc_hi * float(1 << _W_SPLIT) + acc_lo
    prod_mod = np.array([from_basis.product % qq for qq in to_basis.primes], dtype=np.float64)
    out -= alpha[:, None] * prod_mod[None, :]
    _reduce_mod_inplace(out, q, to_basis.recip)
    _reduce_mod_inplace(out, q, to_basis.recip)

    if risky.any():
        ir = stack.planes.reshape(ell, n).astype(np.int64)
        for j in np.nonzero(risky)[0]:
            x = _crt_entry(ir[:, j], from_basis) % from_basis.product
            for t, qq in enumerate(to_basis.primes):
                out[j, t] = x % qq
    return ResidueStack(to_basis, rows, cols, np.ascontiguousarray(out.T).reshape(to_basis.ell, rows, cols))


def _prep_operand(flat_ints, max_abs: int):
    """Residue-ready form of a flat entry list: int64 vector or digit planes."""
    if max_abs < 2**62:
        arr = np.fromiter((int(x) for x in flat_ints), dtype=np.int64, count=len(flat_ints))
        return "i64", arr
    return "planes", digit_planes(flat_ints, (max_abs.bit_length() + 7) // 8)


def _group_residues(prep, basis: RnsBasis, g0: int, g1: int) -> np.ndarray:
    """(g1-g0, N) float64 residues for one contiguous slice of basis primes."""
    kind, data = prep
    if kind == "i64":
        arr = data
        out = np.empty((g1 - g0, arr.size), dtype=np.float64)
        for i in range(g0, g1):
            out[i - g0] = (arr % basis.primes_i[i]).astype(np.float64)
        return out
    planes, neg = data
    lo, hi = basis.weight_planes(planes.shape[1])
    p = basis.primes_f[g0:g1]
    recip = basis.recip[g0:g1]
    acc_lo = planes @ lo[:, g0:g1]
    acc_hi = planes @ hi[:, g0:g1]
    _reduce_mod_inplace(acc_lo, p, recip)
    _reduce_mod_inplace(acc_hi, p, recip)
    r = acc_hi * float(1 << _W_SPLIT) + acc_lo
    _reduce_mod_inplace(r, p, recip)
    np.subtract(p, r, out=r, where=neg[:, None] & (r != 0.0))
    return np.ascontiguousarray(r.T)


def matmul_exact_big(a, b, block_mem_mb: int = 256, group: int = 32):
    """Exact product of two IntMat via an automatically sized RNS pipeline.

    The basis is processed in prime groups and the product in output-column
    blocks, so peak memory stays near block_mem_mb regardless of entry size.
    """
    from .matcore import IntMat, mat_mul_exact

    inner = a.cols
    if inner != b.rows:
        raise ValueError("dimension mismatch")
    if inner <= 8:
        return mat_mul_exact(a, b)
    na = max(a.max_abs(), 1)
    nb = max(b.max_abs(), 1)
    bits = na.bit_length() + nb.bit_length() + inner.bit_length() + 2
    basis = build_basis(inner, bits)
    ell = basis.ell
    prep_a = _prep_operand(a.entries, na)
    col_block = max(1, min(b.cols, (block_mem_mb << 20) // max(1, ell * a.rows * 8)))
    out = [[0] * b.cols for _ in range(a.rows)]
    for c0 in range(0, b.cols, col_block):
        c1 = min(b.cols, c0 + col_block)
        b_flat = [b[i, jj] for i in range(b.rows) for jj in range(c0, c1)]
        prep_b = _prep_operand(b_flat, max((abs(v) for v in b_flat), default=0) + 1)
        planes_out = np.empty((ell, a.rows, c1 - c0), dtype=np.float64)
        for g0 in range(0, ell, group):
            g1 = min(ell, g0 + group)
            ra = _group_residues(prep_a, basis, g0, g1).reshape(g1 - g0, a.rows, inner)
            rb = _group_residues(prep_b, basis, g0, g1).reshape(g1 - g0, inner, c1 - c0)
            w = np.matmul(ra, rb)
            _reduce_mod_inplace(w, basis.primes_f[g0:g1, None, None], basis.recip[g0:g1, None, None])
            planes_out[g0:g1] = w
        blk = from_residues(ResidueStack(basis, a.rows, c1 - c0, planes_out))
        for i in range(a.rows):
            for jj in range(c0, c1):
                out[i][jj] = blk[i, jj - c0]
    return IntMat.from_rows(out)


# ---------------------------------------------------------------------------
# batched LU mod p: determinants over a basis, and A^{-1} mod a single prime


def _batched_lu(planes: np.ndarray, primes, block: int = 48):
    """In-place right-looking blocked LU mod p for a (g, n, n) residue batch.

    Returns (signs, zero_pivot_rows) where signs[i] is the permutation sign
    and the diagonal of planes[i] carries the pivots (0 for singular mod p).
    Trailing updates run as one exact dgemm per panel; the admissibility
    bound of the primes guarantees no accumulation exceeds 2^53 - 1.
    """
    g, n, _ = planes.shape
    pf = np.array([float(p) for p in primes])
    recip = 1.0 / pf
    signs = np.ones(g, dtype=np.int64)
    w = planes
    for k in range(0, n, block):
        kb = min(block, n - k)
        for j in range(k, k + kb):
            col = w[:, j:, j]
            nzmask = col != 0.0
            idx = np.argmax(nzmask, axis=1)
            has = np.take_along_axis(nzmask, idx[:, None], axis=1)[:, 0]
            move = has & (idx > 0)
            for i in np.nonzero(move)[0]:
                jj = j + idx[i]
                tmp = w[i, j, :].copy()
                w[i, j, :] = w[i, jj, :]
                w[i, jj, :] = tmp
                signs[i] = -signs[i]
            piv = w[:, j, j]
            inv = np.zeros(g)
            for i in range(g):
                v = int(piv[i])
                if v:
                    inv[i] = float(pow(v, int(primes[i]) - 2, int(primes[i])))
            if j + 1 < n:
                f = w[:, j + 1 :, j] * inv[:, None]
                _reduce_mod_inplace(f, pf[:, None], recip[:, None])
                w[:, j + 1 :, j] = f
                if j + 1 < k + kb:
                    blockview = w[:, j + 1 :, j + 1 : k + kb]
                    blockview -= f[:, :, None] * w[:, j, j + 1 : k + kb][:, None, :]
                    _reduce_mod_inplace(blockview, pf[:, None, None], recip[:, None, None])
        if k + kb < n:
            # U12 = L11^{-1} A12 by forward substitution over the panel
            for j in range(k, k + kb - 1):
                rr = w[:, j + 1 : k + kb, k + kb :]
                rr -= w[:, j + 1 : k + kb, j][:, :, None] * w[:, j, k + kb :][:, None, :]
                _reduce_mod_inplace(rr, pf[:, None, None], recip[:, None, None])
            trail = w[:, k + kb :, k + kb :]
            trail -= np.matmul(w[:, k + kb :, k : k + kb], w[:, k : k + kb, k + kb :])
            _reduce_mod_inplace(trail, pf[:, None, None], recip[:, None, None])
    return signs


def residue_determinants(a, basis: RnsBasis, group_mem_mb: int = 512):
    """det(a) mod p for every basis prime, via batched LU on residue planes."""
    n = a.rows
    flat = a.entries
    max_abs = max((abs(int(x)) for x in flat), default=0)
    per_plane = n * n * 8
    group = max(1, min(basis.ell, (group_mem_mb << 20) // max(per_plane, 1)))
    dets = []
    for start in range(0, basis.ell, group):
        primes = basis.primes[start : start + group]
        sub = RnsBasis(basis.dim, primes) if (start or start + group < basis.ell) else basis
        planes = _flat_residues(flat, max_abs, sub).reshape(len(primes), n, n)
        signs = _batched_lu(planes, primes)
        for i, p in enumerate(primes):
            d = 1
            for j in range(n):
                v = int(planes[i, j, j])
                if v == 0:
                    d = 0
                    break
                d = (d * v) % p
            dets.append((d * signs[i]) % p)
    return dets


def matmul_mod(a: np.ndarray, b: np.ndarray, p: int) -> np.ndarray:
    """(a @ b) mod p for float64 residue matrices; inner dim must satisfy the bound."""
    out = a @ b
    _reduce_mod_inplace(out, float(p), 1.0 / float(p))
    return out


def inverse_mod_prime(a, p: int):
    """A^{-1} mod p as a float64 residue matrix, or None if singular mod p.

    ``a`` may be an IntMat or an integer ndarray; p must be admissible for
    the matrix dimension so that blocked updates stay exact.
    """
    from .matcore import IntMat

    if isinstance(a, IntMat):
        n = a.rows
        flat = a.entries
        max_abs = max(abs(int(x)) for x in flat)
        if max_abs < 2**62:
            arr = np.fromiter((int(x) for x in flat), dtype=np.int64, count=n * n)
            w = (arr % p).astype(np.float64).reshape(n, n)
        else:
            sub = RnsBasis(n, (p,))
            w = _flat_residues(flat, max_abs, sub).reshape(n, n)
    else:
        n = a.shape[0]
        w = (np.asarray(a, dtype=np.int64) % p).astype(np.float64)
    lu, perm, ok = _lu_single(w, p)
    if not ok:
        return None
    inv = _lu_solve_identity(lu, perm, p)
    return inv


def _lu_single(w: np.ndarray, p: int, block: int = 48):
    """LU mod p with partial pivoting for one prime; returns (LU, perm, ok)."""
    n = w.shape[0]
    pf = float(p)
    recip = 1.0 / pf
    perm = np.arange(n)
    for k in range(0, n, block):
        kb = min(block, n - k)
        for j in range(k, k + kb):
            col = w[j:, j]
            nz = np.nonzero(col != 0.0)[0]
            if nz.size == 0:
                return w, perm, False
            jj = j + int(nz[0])
            if jj != j:
                w[[j, jj], :] = w[[jj, j], :]
                perm[[j, jj]] = perm[[jj, j]]
            inv = float(pow(int(w[j, j]), p - 2, p))
            if j + 1 < n:
                f = w[j + 1 :, j] * inv
                _reduce_mod_inplace(f, pf, recip)
                w[j + 1 :, j] = f
                if j + 1 < k + kb:
                    sub = w[j + 1 :, j + 1 : k + kb]
                    sub -= f[:, None] * w[j, j + 1 : k + kb][None, :]
                    _reduce_mod_inplace(sub, pf, recip)
        if k + kb < n:
            for j in range(k, k + kb - 1):
                rr = w[j + 1 : k + kb, k + kb :]
                rr -= w[j + 1 : k + kb, j][:, None] * w[j, k + kb :][None, :]
                _reduce_mod_inplace(rr, pf, recip)
            trail = w[k + kb :, k + kb :]
            trail -= w[k + kb :, k : k + kb] @ w[k : k + kb, k + kb :]
            _reduce_mod_inplace(trail, pf, recip)
    return w, perm, True


def _lu_solve_identity(lu: np.ndarray, perm: np.ndarray, p: int, block: int = 48):
    """Solve LU X = P I mod p, i.e. return A^{-1} mod p."""
    n = lu.shape[0]
    pf = float(p)
    recip = 1.0 / pf
    x = np.zeros((n, n))
    x[np.arange(n), perm] = 1.0
    # forward: L y = Pb (unit lower triangular), blocked
    for k in range(0, n, block):
        kb = min(block, n - k)
        for j in range(k, k + kb):
            if j + 1 < k + kb:
                sub = x[j + 1 : k + kb, :]
                sub -= lu[j + 1 : k + kb, j][:, None] * x[j, :][None, :]
                _reduce_mod_inplace(sub, pf, recip)
        if k + kb < n:
            tail = x[k + kb :, :]
            tail -= lu[k + kb :, k : k + kb] @ x[k : k + kb, :]
            _reduce_mod_inplace(tail, pf, recip)
    # backward: U x = y, blocked from the bottom
    for k in range(n, 0, -block):
        kb = min(block, k)
        for j in range(k - 1, k - kb - 1, -1):
            inv = float(pow(int(lu[j, j]), p - 2, p))
            row = x[j, :] * inv
            _reduce_mod_inplace(row, pf, recip)
            x[j, :] = row
            if j > k - kb:
                sub = x[k - kb : j, :]
                sub -= lu[k - kb : j, j][:, None] * x[j, :][None, :]
                _reduce_mod_inplace(sub, pf, recip)
        if k - kb > 0:
            head = x[: k - kb, :]
            head -= lu[: k - kb, k - kb : k] @ x[k - kb : k, :]
            _reduce_mod_inplace(head, pf, recip)
    return x
