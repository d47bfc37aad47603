"""Slow, independent reference algorithms used to cross-check the fast path.

Everything here is written for clarity over speed and shares no code with the
production pipeline beyond the IntMat container.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .matcore import IntMat, SmithDiagonal


def det_bareiss(a: IntMat) -> int:
    """Determinant by fraction-free Bareiss elimination."""
    if not a.is_square():
        raise ValueError("determinant needs a square matrix")
    n = a.rows
    if n == 0:
        return 1
    m = [list(a.row(i)) for i in range(n)]
    sign = 1
    prev = 1
    for k in range(n - 1):
        if m[k][k] == 0:
            for i in range(k + 1, n):
                if m[i][k] != 0:
                    m[k], m[i] = m[i], m[k]
                    sign = -sign
                    break
            else:
                return 0
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
            m[i][k] = 0
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def matmul_schoolbook(a: IntMat, b: IntMat) -> IntMat:
    """Triple-loop integer product."""
    if a.cols != b.rows:
        raise ValueError("dimension mismatch")
    out = [[0] * b.cols for _ in range(a.rows)]
    for i in range(a.rows):
        for k in range(a.cols):
            aik = a[i, k]
            if aik == 0:
                continue
            for j in range(b.cols):
                out[i][j] += aik * b[k, j]
    return IntMat.from_rows(out)


def solve_fraction(a: IntMat, b: IntMat):
    """Solve A x = b over the rationals by Gaussian elimination on Fractions.

    Returns a list of columns of Fractions, or None if A is singular.
    """
    n = a.rows
    m = [[Fraction(a[i, j]) for j in range(n)] + [Fraction(b[i, j]) for j in range(b.cols)] for i in range(n)]
    for k in range(n):
        piv = next((i for i in range(k, n) if m[i][k] != 0), None)
        if piv is None:
            return None
        m[k], m[piv] = m[piv], m[k]
        pv = m[k][k]
        m[k] = [v / pv for v in m[k]]
        for i in range(n):
            if i != k and m[i][k] != 0:
                f = m[i][k]
                m[i] = [vi - f * vk for vi, vk in zip(m[i], m[k])]
    return [[m[i][n + j] for i in range(n)] for j in range(b.cols)]


def smith_bruteforce(a: IntMat) -> SmithDiagonal:
    """Smith normal form by repeated elementary row/column reduction.

    Classical textbook procedure: bring the smallest nonzero entry to the
    pivot, reduce the rest of its row and column, repeat, then repair the
    divisibility chain with gcd/lcm fixups.  Exponential-free but slow;
    intended for small dense test matrices only.
    """
    if not a.is_square():
        raise ValueError("square input required")
    n = a.rows
    m = [list(a.row(i)) for i in range(n)]
    diag = []
    for t in range(n):
        while True:
            best = None
            for i in range(t, n):
                for j in range(t, n):
                    v = abs(m[i][j])
                    if v and (best is None or v < best[0]):
                        best = (v, i, j)
            if best is None:
                raise ValueError("singular matrix has no nonsingular Smith form here")
            _, bi, bj = best
            m[t], m[bi] = m[bi], m[t]
            for row in m:
                row[t], row[bj] = row[bj], row[t]
            piv = m[t][t]
            clean = True
            for i in range(t + 1, n):
                q = m[i][t] // piv
                if q:
                    m[i] = [vi - q * vt for vi, vt in zip(m[i], m[t])]
                if m[i][t]:
                    clean = False
            for j in range(t + 1, n):
                q = m[t][j] // piv
                if q:
                    for row in m:
                        row[j] -= q * row[t]
                if m[t][j]:
                    clean = False
            if clean:
                break
        diag.append(abs(m[t][t]))
    # repair divisibility: replace neighbouring pairs by (gcd, lcm) until sorted
    changed = True
    while changed:
        changed = False
        for i in range(len(diag) - 1):
            if diag[i + 1] % diag[i]:
                g = math.gcd(diag[i], diag[i + 1])
                diag[i], diag[i + 1] = g, diag[i] * diag[i + 1] // g
                changed = True
    return SmithDiagonal.of(diag)
