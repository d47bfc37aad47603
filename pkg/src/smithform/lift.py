"""Linear system solving over the rationals by p-adic lifting.

The workhorse is Dixon lifting: invert A modulo a word-sized prime once,
then recover the solution digit by digit, with every inner product executed
as an exact double-precision BLAS call.  Rational reconstruction turns the
p-adic expansion into a numerator matrix over a single common denominator.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

import gmpy2
import numpy as np

from . import rns
from .matcore import IntMat, hadamard_bits, rem_mod


class SingularMatrix(ValueError):
    """The coefficient matrix has determinant zero."""


class NotIntegral(Exception):
    """Certification found a non-integral entry (expected Las Vegas failure)."""


@dataclass
class RationalSolution:
    """x = numerators / denominator in lowest common terms (denominator > 0)."""

    numerators: IntMat
    denominator: int


def choose_lifting_prime(dim: int, rng: random.Random) -> int:
    """A random admissible prime from the upper half of the range for dim."""
    top = rns.max_admissible_root(dim) + 1
    lo = max(top // 2, 3)
    while True:
        p = int(gmpy2.next_prime(rng.randrange(lo, top)))
        if p < top:
            return p


def _planes_signed_exact(arr: np.ndarray, beta: int):
    """Exact base-2^beta split of signed int64: arr == sum planes[t] * 2^(beta t).

    Low planes lie in [0, 2^beta); the final plane carries the sign.
    """
    planes = []
    work = arr.astype(object)  # python ints: exact shifts for negatives
    mask = (1 << beta) - 1
    maxabs = int(np.abs(arr).max()) if arr.size else 0
    steps = max(1, -(-max(maxabs, 1).bit_length() // beta))
    for t in range(steps):
        if t == steps - 1:
            planes.append(work.astype(np.float64))
        else:
            low = work & mask
            planes.append(low.astype(np.float64))
            work = (work - low) >> beta
    return planes


def _assemble_digits(digits, p: int):
    """Combine base-p digit matrices into python-int matrices, divide & conquer.

    digits: list of (n, m) int64 arrays.  Returns an (n, m) nested list of ints
    equal to sum digits[t] * p^t.
    """
    n, m = digits[0].shape

    def rec(lo, hi):
        if hi - lo == 1:
            d = digits[lo]
            return [[int(d[i, j]) for j in range(m)] for i in range(n)], gmpy2.mpz(p)
        mid = (lo + hi) // 2
        left, pl = rec(lo, mid)
        right, pr = rec(mid, hi)
        out = [[left[i][j] + pl * right[i][j] for j in range(m)] for i in range(n)]
        return out, pl * pr

    vals, _ = rec(0, len(digits))
    return vals


def rational_reconstruct(v: int, m: int, num_bound: int, den_bound: int):
    """Find num/den with v*den = num (mod m), |num| <= N, 0 < den <= D.

    Standard half-extended Euclidean scheme; requires 2*N*D < m for
    uniqueness.  Returns (num, den) or None.
    """
    r0, r1 = m, v % m
    t0, t1 = 0, 1
    while r1 > num_bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        t0, t1 = t1, t0 - q * t1
    if t1 == 0:
        return None
    den = abs(t1)
    num = r1 if t1 > 0 else -r1
    if den > den_bound or math.gcd(den, m) != 1:
        return None
    return num, den


def _srem(v, m):
    v = v % m
    return v - m if 2 * v > m else v


def dixon_solve_mod(a: IntMat, b_arr: np.ndarray, p: int, k: int, inv_mod_p=None):
    """x with A x = b (mod p^k), as nested python-int lists in [0, p^k).

    b_arr is an int64 (n, m) right-hand side; requires the int64 fast-path
    preconditions (see solve_rational).  Returns (x_lists, p^k, inv_mod_p).
    """
    n = a.rows
    c = inv_mod_p if inv_mod_p is not None else rns.inverse_mod_prime(a, p)
    if c is None:
        return None
    arr = np.fromiter((int(x) for x in a.entries), dtype=np.int64, count=n * n).reshape(n, n)
    beta = max(1, (2**53 - 1).bit_length() - 1 - (n * (p - 1)).bit_length())
    a_planes = _planes_signed_exact(arr, beta)
    r = b_arr.astype(object) if abs(b_arr).max(initial=0) >= 2**62 else b_arr.copy()
    use_obj = r.dtype == object
    digits = []
    pi = np.int64(p)
    for _ in range(k):
        rmod = (r % (p if use_obj else pi)).astype(np.float64)
        xd = rns.matmul_mod(c, rmod, p)
        if use_obj:
            ax = np.zeros(r.shape, dtype=object)
            for shift, pl in enumerate(a_planes):
                prod = (pl @ xd).astype(np.int64)  # exact: n * 2^beta * (p-1) < 2^53
                ax += prod.astype(object) * (1 << (beta * shift))
            r = (r - ax) // p
        else:
            ax = np.zeros(r.shape, dtype=np.int64)
            for shift, pl in enumerate(a_planes):
                ax += (pl @ xd).astype(np.int64) << np.int64(beta * shift)
            r = (r - ax) // pi
        digits.append(xd.astype(np.int64))
    x = _assemble_digits(digits, p)
    return x, gmpy2.mpz(p) ** k, c


def solve_rational(a: IntMat, b: IntMat, rng: random.Random, verify: bool = False) -> RationalSolution:
    """Solve A X = B exactly over the rationals (A nonsingular).

    Las Vegas only in the choice of lifting prime; the result is always
    exact.  Raises SingularMatrix when det(A) = 0.
    """
    n = a.rows
    if not a.is_square() or b.rows != n:
        raise ValueError("dimension mismatch")
    if n == 0:
        return RationalSolution(IntMat(0, b.cols, ()), 1)
    amax = a.max_abs()
    bmax = max(b.max_abs(), 1)
    p_top = rns.max_admissible_root(n) + 1
    # int64 residual safety: |r - A*x_digit| <= |b| + n*amax*p < 2^63 at every step
    if n * max(amax, 1) * p_top >= 2**61 or bmax >= 2**62:
        return _solve_rational_fractions(a, b)

    had = hadamard_bits(a)
    num_bits = had + bmax.bit_length() + n.bit_length() + 1
    den_bits = had
    b_arr = np.fromiter((int(x) for x in b.entries), dtype=np.int64, count=n * b.cols).reshape(n, b.cols)

    for attempt in range(4):
        p = choose_lifting_prime(n, rng)
        k = (num_bits + den_bits + 2) // (p.bit_length() - 1) + 1
        got = dixon_solve_mod(a, b_arr, p, k, None)
        if got is None:
            continue
        x, pk, _ = got
        num_bound = (1 << num_bits)
        den_bound = (1 << den_bits)
        if 2 * num_bound * den_bound >= pk:
            k = (num_bits + den_bits + 2) // (p.bit_length() - 1) + 2
            got = dixon_solve_mod(a, b_arr, p, k, None)
            x, pk, _ = got
        sol = _reconstruct_matrix(x, pk, num_bound, den_bound)
        if sol is None:
            continue  # fantastically unlikely with a correct bound; retry
        nums, den = sol
        out = RationalSolution(IntMat.from_rows(nums), den)
        if verify:
            _verify_solution(a, b, out)
        return out
    # every random prime divided det, or reconstruction failed: settle it exactly
    from .matcore import det_crt

    if det_crt(a) == 0:
        raise SingularMatrix("matrix is singular")
    return _solve_rational_fractions(a, b)


def _reconstruct_matrix(x, pk, num_bound, den_bound):
    """Common-denominator rational reconstruction of a p-adic solution."""
    den = gmpy2.mpz(1)
    n, m = len(x), len(x[0])
    for i in range(n):
        for j in range(m):
            cand = _srem(x[i][j] * den, pk)
            if abs(cand) <= num_bound * den:
                continue
            rec = rational_reconstruct(int(x[i][j]), int(pk), int(num_bound), int(den_bound))
            if rec is None:
                return None
            den = den * rec[1] // math.gcd(int(den), rec[1])
    nums = [[0] * m for _ in range(n)]
    g = int(den)
    for i in range(n):
        for j in range(m):
            v = int(_srem(x[i][j] * den, pk))
            nums[i][j] = v
            g = math.gcd(g, v)
    if g > 1:
        nums = [[v // g for v in row] for row in nums]
        den = int(den) // g
    return nums, int(den)


def _verify_solution(a: IntMat, b: IntMat, sol: RationalSolution) -> None:
    lhs = rns.matmul_exact_big(a, sol.numerators)
    from .matcore import mat_scale

    rhs = mat_scale(b, sol.denominator)
    if lhs.entries != rhs.entries:
        raise AssertionError("rational solve verification failed")


def _solve_rational_fractions(a: IntMat, b: IntMat) -> RationalSolution:
    """Fraction-based fallback for inputs outside the fast path's word bounds."""
    from .oracle import solve_fraction

    cols = solve_fraction(a, b)
    if cols is None:
        raise SingularMatrix("matrix is singular")
    den = 1
    for col in cols:
        for v in col:
            den = den * v.denominator // math.gcd(den, v.denominator)
    nums = [[int(cols[j][i] * den) for j in range(b.cols)] for i in range(a.rows)]
    return RationalSolution(IntMat.from_rows(nums), den)


def integrality_certify(a: IntMat, s: int, j: IntMat, rng: random.Random) -> IntMat:
    """Return Rem(s * A^{-1} * J, s) if s * A^{-1} * J is integral.

    Lifts x = A^{-1} J modulo p^k with p^k larger than twice any possible
    entry of s * A^{-1} * J, reads off the unique symmetric-range candidate,
    and certifies it with one exact multiplication A * W = s * J.  Raises
    NotIntegral if the product is not an integer matrix.
    """
    n = a.rows
    if j.rows != n:
        raise ValueError("dimension mismatch")
    amax = max(a.max_abs(), 1)
    jmax = max(j.max_abs(), 1)
    if n * amax * (rns.max_admissible_root(n) + 1) >= 2**61 or jmax >= 2**62:
        return _integrality_certify_slow(a, s, j)
    had = hadamard_bits(a)
    bound_bits = s.bit_length() + had + jmax.bit_length() + n.bit_length() + 2
    b_arr = np.fromiter((int(x) for x in j.entries), dtype=np.int64, count=n * j.cols).reshape(n, j.cols)
    for _ in range(4):
        p = choose_lifting_prime(n, rng)
        inv = rns.inverse_mod_prime(a, p)
        if inv is not None:
            break
    else:
        from .matcore import det_crt

        if det_crt(a) == 0:
            raise SingularMatrix("matrix is singular")
        raise RuntimeError("all lifting primes divided a nonzero determinant")
    k = bound_bits // (p.bit_length() - 1) + 2
    # The p-adic digit stack is k int64 planes of shape (n, block); cap its
    # footprint so wide projections do not swamp memory.
    block = max(4, min(j.cols, (320 << 20) // max(1, k * n * 8)))
    out = [[0] * j.cols for _ in range(n)]
    for c0 in range(0, j.cols, block):
        c1 = min(j.cols, c0 + block)
        x, pk, _ = dixon_solve_mod(a, b_arr[:, c0:c1], p, k, inv)
        w = [[int(_srem(s * x[i][t], pk)) for t in range(c1 - c0)] for i in range(n)]
        wmat = IntMat(n, c1 - c0, tuple(v for row in w for v in row))
        lhs = rns.matmul_exact_big(a, wmat)
        for i in range(n):
            for t in range(c1 - c0):
                if lhs[i, t] != s * j[i, c0 + t]:
                    raise NotIntegral("s * A^-1 * J has a non-integral entry")
                out[i][c0 + t] = w[i][t] % s
    return IntMat.from_rows(out)


def _integrality_certify_slow(a: IntMat, s: int, j: IntMat) -> IntMat:
    sol = _solve_rational_fractions(a, j)
    if s % sol.denominator:
        raise NotIntegral("s * A^-1 * J has a non-integral entry")
    f = s // sol.denominator
    vals = [[(sol.numerators[i, c] * f) % s for c in range(j.cols)] for i in range(a.rows)]
    return IntMat.from_rows(vals)
