"""Three-phase Las Vegas computation of the Smith form and Smith massager.

Phase 1 finds (a divisor of) the largest invariant factor s_n from the
denominators of a random rational solve.  Phase 2 iteratively extracts
batches of invariant factors: a random projection of s * A^{-1} is certified
integral, reduced to the current working modulus, and decomposed by a
reverse Smith elimination mod s.  Phase 3 certifies the result by comparing
the product of the invariant factors against the determinant: together with
the constructive integrality of the massager this proves S is the Smith
form, and any randomness failure forces a restart from Phase 1.
"""

from __future__ import annotations

import math
import random
import time
from dataclasses import dataclass, field

from . import lift, rns
from .matcore import IntMat, SmithDiagonal, det_crt, rem_mod


class SingularInput(ValueError):
    """The input matrix is singular; no nonsingular Smith massager exists."""


class RestartLimitExceeded(RuntimeError):
    """Certification kept failing past cfg.max_restarts (astronomically rare)."""


class RetryNeeded(Exception):
    """Internal Las Vegas failure; discard all state and restart from Phase 1."""


@dataclass
class MassagerConfig:
    k: int = 4  # extra projection columns
    r_init: int = 0  # 0 = choose max(4, ceil(n/16)) at run time
    max_restarts: int = 20
    seed: int = None

    def resolve_r_init(self, n: int) -> int:
        return self.r_init if self.r_init >= 1 else max(4, -(-n // 16))


@dataclass
class SmithMassager:
    u: IntMat
    m: IntMat
    t: IntMat
    s: SmithDiagonal


@dataclass
class WorkState:
    a: IntMat
    n: int
    extracted: list  # of (r_i, SmithDiagonal block, U_i, M_i, T_i)
    m: int  # columns massaged so far
    s: int  # current working modulus
    s1: int  # Phase-1 modulus (certification always runs against this)


@dataclass
class MassagerStats:
    restarts: int = 0
    iterations: list = field(default_factory=list)  # (r_i, modulus_bits)
    lif_s: float = 0.0
    im_s: float = 0.0
    uc_s: float = 0.0
    total_s: float = 0.0
    seed: int = None


_J_CAP = 1 << 62  # box cap for projection entries; uniform sampling below min(s, cap)


def largest_invariant_factor(a: IntMat, rng: random.Random, cols: int = 2) -> int:
    """lcm of the denominators of A^{-1} J for a random n x cols matrix J.

    The result always divides s_n; it equals s_n with high probability, and
    underestimates are caught by Phase-3 certification.  More columns lower
    the miss probability at the cost of a wider rational solve.
    """
    n = a.rows
    j2 = IntMat(n, cols, tuple(rng.randrange(_J_CAP) for _ in range(cols * n)))
    try:
        sol = lift.solve_rational(a, j2, rng)
    except lift.SingularMatrix as exc:
        raise SingularInput(str(exc)) from exc
    return int(sol.denominator)


def adaptive_schedule(prev_r: int, prev_bits: int, cur_bits: int, remaining: int) -> int:
    """Next batch size, driven by how fast the modulus shrank."""
    if cur_bits <= 62:
        return remaining
    return min(remaining, prev_r * max(2, prev_bits // max(1, cur_bits)))


def modular_reverse_smith(p1: IntMat, s: int, rng: random.Random = None, want_c: bool = False):
    """Reverse Smith decomposition of P1 modulo s.

    Returns (U, M, D) with U (w x n), M (n x w) and D a reversed divisibility
    chain d_1, ..., d_w (d_{i+1} | d_i | s; d_i = s encodes a zero class)
    such that, up to a unimodular-mod-s column transform C folded into the
    random projection, -U * P1 * C = D and P1 * C = M * D (mod s).  With
    want_c=True the transform C is returned for direct verification.
    """
    n, w = p1.rows, p1.cols
    s = int(s)
    rng = rng if rng is not None else random.Random(0)
    cid = [[1 if i == j else 0 for i in range(w)] for j in range(w)]  # columns
    if s == 1:
        out = (IntMat.zeros(w, n), IntMat.zeros(n, w), (1,) * w)
        return out + (IntMat.from_rows(cid),) if want_c else out

    ent = [int(v) % s for v in p1.entries]
    g0 = 0
    for v in ent:
        g0 = math.gcd(g0, v)
        if g0 == 1:
            break
    g0 = math.gcd(g0, s) if g0 else s
    if g0 == s:  # zero projection
        out = (IntMat.zeros(w, n), IntMat.zeros(n, w), (s,) * w)
        return out + (IntMat.from_rows(cid),) if want_c else out

    sm = s // g0
    wmat = [[ent[i * w + j] // g0 for j in range(w)] for i in range(n)]
    vcols = [[wmat[i][j] for i in range(n)] for j in range(w)]  # column-op shadow of P1/g0
    ccols = [list(col) for col in cid] if want_c else None
    rrows = {i: {i: 1} for i in range(n)}
    active = list(range(n))
    pivots, piv_rows = [], []

    def attains(e):
        return e != 0 and math.gcd(e, sm) == g

    t = 0
    while t < w:
        g = 0
        for i in active:
            row = wmat[i]
            for j in range(t, w):
                if row[j]:
                    g = math.gcd(g, row[j])
            if g == 1:
                break
        if g == 0:
            break  # remaining block is zero mod sm: padding classes
        g = math.gcd(g, sm)
        found = None
        for i in active:
            row = wmat[i]
            for j in range(t, w):
                if attains(row[j]):
                    found = (i, j)
                    break
            if found:
                break
        tries = 0
        while found is None:
            # No single entry attains the content: fold a random combination
            # of every other active row (or column) into one and look there.
            # Pairwise combinations are not enough when each row carries its
            # own forced prime divisor, as structured inverses often do.
            tries += 1
            if tries > 40:
                raise RetryNeeded("reverse Smith stabilization failed")
            if len(active) >= 2 and (w - t < 2 or rng.random() < 0.5):
                i1 = rng.choice(active)
                r1, d1 = wmat[i1], rrows[i1]
                for i2 in active:
                    if i2 == i1:
                        continue
                    c = rng.randrange(sm)
                    if not c:
                        continue
                    r2 = wmat[i2]
                    for j in range(t, w):
                        r1[j] = (r1[j] + c * r2[j]) % sm
                    for kk, vv in rrows[i2].items():
                        d1[kk] = (d1.get(kk, 0) + c * vv) % sm
                for j in range(t, w):
                    if attains(r1[j]):
                        found = (i1, j)
                        break
            else:
                j1 = rng.randrange(t, w)
                v1 = vcols[j1]
                for j2 in range(t, w):
                    if j2 == j1:
                        continue
                    c = rng.randrange(sm)
                    if not c:
                        continue
                    for i in active:
                        wmat[i][j1] = (wmat[i][j1] + c * wmat[i][j2]) % sm
                    v2 = vcols[j2]
                    for i in range(n):
                        v1[i] = (v1[i] + c * v2[i]) % sm
                    if want_c:
                        c1, c2 = ccols[j1], ccols[j2]
                        for i in range(w):
                            c1[i] = (c1[i] + c * c2[i]) % sm
                for i in active:
                    if attains(wmat[i][j1]):
                        found = (i, j1)
                        break
        pi, pj = found
        if pj != t:
            for i in active:
                row = wmat[i]
                row[t], row[pj] = row[pj], row[t]
            vcols[t], vcols[pj] = vcols[pj], vcols[t]
            if want_c:
                ccols[t], ccols[pj] = ccols[pj], ccols[t]
        # scale the pivot row by a unit so the pivot becomes exactly g
        prow = wmat[pi]
        u = prow[t] // g
        mg = sm // g
        omega = int(rns.gmpy2.invert(u % mg, mg)) if mg > 1 else 1
        while math.gcd(omega, sm) != 1:
            omega += mg
        if omega != 1:
            for j in range(t, w):
                prow[j] = (omega * prow[j]) % sm
            rrows[pi] = {kk: (omega * vv) % sm for kk, vv in rrows[pi].items()}
        # clear column t with the single multiplier e/g (pivot is exactly g)
        rp = rrows[pi]
        for i in active:
            if i == pi:
                continue
            row = wmat[i]
            e = row[t]
            if e:
                c = e // g
                for j in range(t, w):
                    row[j] = (row[j] - c * prow[j]) % sm
                di = rrows[i]
                for kk, vv in rp.items():
                    nv = (di.get(kk, 0) - c * vv) % sm
                    if nv:
                        di[kk] = nv
                    elif kk in di:
                        del di[kk]
        # clear row t by column operations (only the pivot row is affected)
        vt = vcols[t]
        for j in range(t + 1, w):
            e = prow[j]
            if e:
                c = e // g
                prow[j] = 0
                vj = vcols[j]
                for i in range(n):
                    vj[i] = (vj[i] - c * vt[i]) % sm
                if want_c:
                    cj, ct = ccols[j], ccols[t]
                    for i in range(w):
                        cj[i] = (cj[i] - c * ct[i]) % sm
        pivots.append(g)
        piv_rows.append(rrows[pi])
        active.remove(pi)
        t += 1

    nfound = len(pivots)
    pad = w - nfound
    # reversed chain: padding (d = s) first, then pivots by descending g,
    # ties keeping discovery order (so identity projections map to themselves)
    order = sorted(range(nfound), key=lambda j: pivots[j], reverse=True)
    dvals = [s] * pad
    urows = [[0] * n for _ in range(w)]
    mcols = [[0] * n for _ in range(w)]
    for pos, j in enumerate(order):
        g = pivots[j]
        dvals.append(g0 * g)
        row = urows[pad + pos]
        for kk, vv in piv_rows[j].items():
            row[kk] = (-vv) % sm
        col = vcols[j]
        mcols[pad + pos] = [c // g for c in col]  # entries of P1*C/g0 in [0, sm) are divisible by g
    umat = IntMat.from_rows(urows)
    mment = []
    for i in range(n):
        mment.extend(mcols[j][i] for j in range(w))
    mmat = IntMat(n, w, tuple(mment))
    if want_c:
        cmat = IntMat.from_rows([[ccols[j][i] for j in range(w)] for i in range(w)])
        return umat, mmat, tuple(dvals), cmat
    return umat, mmat, tuple(dvals)


def _mul_mod(a: IntMat, b: IntMat, s: int) -> IntMat:
    return rem_mod(rns.matmul_exact_big(a, b), s)


def _project(state: WorkState, acc, w: int, rng: random.Random, j_override: IntMat = None) -> IntMat:
    """P1 = the current-modulus projection of the massaged inverse.

    Certification always runs against the original A with the fixed Phase-1
    modulus; the result is brought down to the working modulus by an exact
    division whose failure signals a randomness fault.
    """
    n, s1, s = state.n, state.s1, state.s
    hi = min(s, _J_CAP)
    if j_override is not None:
        j = j_override
    else:
        j = IntMat(n, w, tuple(rng.randrange(hi) for _ in range(n * w)))
    x = lift.integrality_certify(state.a, s1, j, rng)  # may raise NotIntegral
    if acc is not None:
        u_acc, t_rows, m_acc, factors = acc
        y = _mul_mod(u_acc, x, s1)
        # z = T^{-1} y by back substitution (T unit upper triangular)
        kacc = y.rows
        z = [list(y.row(i)) for i in range(kacc)]
        for i in range(kacc - 2, -1, -1):
            ti = t_rows[i]
            zi = z[i]
            for jj in range(i + 1, kacc):
                c = ti[jj]
                if c:
                    zj = z[jj]
                    for col in range(w):
                        zi[col] = zi[col] - c * zj[col]
            for col in range(w):
                zi[col] %= s1
        mz = _mul_mod(m_acc, IntMat.from_rows(z), s1)
        p = IntMat(n, w, tuple((xv + mv) % s1 for xv, mv in zip(x.entries, mz.entries)))
    else:
        p = x
    q = s1 // s
    if q == 1:
        return p
    ent = []
    for v in p.entries:
        d, r = divmod(v, q)
        if r:
            raise RetryNeeded("projection not divisible by the modulus ratio")
        ent.append(d % s)
    return IntMat(n, w, tuple(ent))


def index_massager(state: WorkState, r: int, cfg: MassagerConfig, rng: random.Random,
                   j_override: IntMat = None, _acc=None):
    """Extract the next batch of r invariant factors, or report RetryNeeded."""
    w = r + cfg.k
    try:
        p1 = _project(state, _acc, w, rng, j_override)
        u, m, d = modular_reverse_smith(p1, state.s, rng)
    except (RetryNeeded, lift.NotIntegral) as exc:
        return RetryNeeded(str(exc) or type(exc).__name__)
    keep = range(w - r, w)
    factors = [state.s // d[j] for j in keep]
    u_i = IntMat.from_rows([list(u.row(j)) for j in keep])
    m_i = IntMat(state.n, r, tuple(m[i, j] for i in range(state.n) for j in keep))
    t_i = IntMat.identity(r)
    try:
        block = SmithDiagonal.of(factors)
    except ValueError as exc:
        return RetryNeeded(f"batch factors violate the chain: {exc}")
    return u_i, m_i, t_i, block


def _normalize(u_rows, m_cols, t_rows, factors, n):
    """Reduce M col j mod s_j, U row i mod s_i (compensating T), T col j mod s_j."""
    for jj, f in enumerate(factors):
        col = m_cols[jj]
        for i in range(n):
            col[i] %= f
    q_rows = []
    for i, f in enumerate(factors):
        row = u_rows[i]
        qr = [0] * n
        for kk in range(n):
            qr[kk], row[kk] = divmod(row[kk], f)
        q_rows.append(qr)
    if any(any(qr) for qr in q_rows):
        qmat = IntMat.from_rows(q_rows)
        mmat = IntMat(n, n, tuple(m_cols[j][i] for i in range(n) for j in range(n)))
        comp = rns.matmul_exact_big(qmat, mmat)
        for i in range(n):
            fi = factors[i]
            ti = t_rows[i]
            for jj in range(i + 1, n):
                ti[jj] += fi * comp[i, jj]
    for i in range(n):
        ti = t_rows[i]
        for jj in range(i + 1, n):
            ti[jj] %= factors[jj]


def compute_smith_massager(a: IntMat, cfg: MassagerConfig = None):
    """Smith form and massager of a nonsingular A, with run statistics."""
    if not a.is_square() or a.rows == 0:
        raise SingularInput("a nonzero square matrix is required")
    cfg = cfg or MassagerConfig()
    rng = random.Random(cfg.seed)
    n = a.rows
    stats = MassagerStats(seed=cfg.seed)
    t_start = time.perf_counter()
    det_cache = [None]

    def det_a():
        if det_cache[0] is None:
            det_cache[0] = det_crt(a)
        return det_cache[0]

    for attempt in range(cfg.max_restarts + 1):
        try:
            result = _attempt(a, cfg, rng, stats, det_a)
            stats.restarts = attempt
            stats.total_s = time.perf_counter() - t_start
            return result, stats
        except RetryNeeded:
            stats.iterations = []
            continue
    raise RestartLimitExceeded(f"no certified result after {cfg.max_restarts} restarts")


def _attempt(a: IntMat, cfg: MassagerConfig, rng: random.Random, stats, det_a):
    n = a.rows
    t0 = time.perf_counter()
    s1 = largest_invariant_factor(a, rng, cols=4)
    stats.lif_s += time.perf_counter() - t0

    t0 = time.perf_counter()
    state = WorkState(a=a, n=n, extracted=[], m=0, s=s1, s1=s1)
    u_rows, m_cols, t_rows, factors = [], [], [], []
    prev_r = prev_bits = None
    while state.m < n and state.s > 1:
        remaining = n - state.m
        if prev_r is None:
            r = min(remaining, cfg.resolve_r_init(n))
        else:
            r = adaptive_schedule(prev_r, prev_bits, state.s.bit_length(), remaining)
        acc = None
        if u_rows:
            u_acc = IntMat.from_rows(u_rows)
            m_acc = IntMat(n, len(m_cols), tuple(m_cols[j][i] for i in range(n) for j in range(len(m_cols))))
            acc = (u_acc, t_rows, m_acc, factors)
        got = index_massager(state, r, cfg, rng, _acc=acc)
        if isinstance(got, RetryNeeded):
            stats.im_s += time.perf_counter() - t0
            raise got
        u_i, m_i, t_i, block = got
        bf = list(block)
        # interaction block keeps (T + U*M)*S^{-1} integral across batches
        if m_cols:
            g = rns.matmul_exact_big(u_i, IntMat(n, len(m_cols), tuple(m_cols[j][i] for i in range(n) for j in range(len(m_cols)))))
            z = [[(-g[i, jj]) % factors[jj] for jj in range(len(factors))] for i in range(r)]
        else:
            z = [[] for _ in range(r)]
        new_t = [[1 if jj == i else 0 for jj in range(r)] + z[i] for i in range(r)]
        t_rows = new_t + [[0] * r + row for row in t_rows]
        u_rows = [list(u_i.row(i)) for i in range(r)] + u_rows
        m_cols = [[m_i[i, jj] for i in range(n)] for jj in range(r)] + m_cols
        factors = bf + factors
        state.extracted.insert(0, (r, block, u_i, m_i, t_i))
        state.m += r
        stats.iterations.append((r, state.s.bit_length()))
        prev_r, prev_bits = r, state.s.bit_length()
        state.s = bf[0]
    if state.m < n:
        fill = n - state.m
        t_rows = [[1 if jj == i else 0 for jj in range(fill)] + [0] * len(factors) for i in range(fill)] \
            + [[0] * fill + row for row in t_rows]
        u_rows = [[0] * n for _ in range(fill)] + u_rows
        m_cols = [[0] * n for _ in range(fill)] + m_cols
        factors = [1] * fill + factors
        state.m = n
        state.s = 1
    _normalize(u_rows, m_cols, t_rows, factors, n)
    try:
        smith = SmithDiagonal.of(factors)
    except ValueError as exc:
        stats.im_s += time.perf_counter() - t0
        raise RetryNeeded(str(exc)) from exc
    stats.im_s += time.perf_counter() - t0

    t0 = time.perf_counter()
    det = det_a()
    if det == 0:
        raise SingularInput("matrix is singular")
    ok = abs(det) == smith.product()
    stats.uc_s += time.perf_counter() - t0
    if not ok:
        raise RetryNeeded("determinant does not match the invariant factor product")
    u = IntMat.from_rows(u_rows)
    m = IntMat(n, n, tuple(m_cols[j][i] for i in range(n) for j in range(n)))
    t = IntMat.from_rows(t_rows)
    return SmithMassager(u=u, m=m, t=t, s=smith)
