"""Certification checks over a computed Smith massager.

The four checks: the divisibility chain of S, agreement with an independent
oracle (optional, small n), the Eq. (1) integrality conditions (A*M*S^{-1}
and (T + U*M)*S^{-1} integer), and the determinant product identity that
certifies unimodularity of the massaged matrix.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import rns
from .matcore import IntMat, SmithDiagonal, det_crt, mat_add


@dataclass
class Report:
    divisibility: bool
    integrality: bool
    unimodular: bool
    oracle: bool = None  # None when the oracle comparison was skipped

    def all_pass(self) -> bool:
        return (
            self.divisibility
            and self.integrality
            and self.unimodular
            and self.oracle is not False
        )

    def to_dict(self) -> dict:
        return {
            "divisibility": self.divisibility,
            "integrality": self.integrality,
            "unimodular": self.unimodular,
            "oracle": self.oracle,
            "all_pass": self.all_pass(),
        }


def check_divisibility(s: SmithDiagonal) -> bool:
    """s_1 | s_2 | ... | s_n with every factor positive."""
    factors = list(s)
    return all(f > 0 for f in factors) and all(
        factors[i + 1] % factors[i] == 0 for i in range(len(factors) - 1)
    )


def _columns_divisible(prod: IntMat, s: SmithDiagonal) -> bool:
    for j in range(prod.cols):
        sj = s[j]
        for i in range(prod.rows):
            if prod[i, j] % sj:
                return False
    return True


def check_integrality(a: IntMat, u: IntMat, m: IntMat, t: IntMat, s: SmithDiagonal) -> bool:
    """True iff A*M*S^{-1} and (T + U*M)*S^{-1} are integer matrices."""
    am = rns.matmul_exact_big(a, m)
    if not _columns_divisible(am, s):
        return False
    tum = mat_add(t, rns.matmul_exact_big(u, m))
    return _columns_divisible(tum, s)


def check_unimodular(a: IntMat, s: SmithDiagonal) -> bool:
    """|det A| equals the product of the invariant factors.

    Combined with massager integrality this certifies that the massaged
    matrix is unimodular and hence that S is the full Smith form.
    """
    return abs(det_crt(a)) == s.product()


def verify_massager(a: IntMat, massager, with_oracle: bool = False, oracle_limit: int = 200) -> Report:
    """Run all checks; pure and deterministic."""
    s = massager.s
    div = check_divisibility(s)
    integ = check_integrality(a, massager.u, massager.m, massager.t, s)
    uni = check_unimodular(a, s)
    orc = None
    if with_oracle and a.rows <= oracle_limit:
        from .oracle import smith_bruteforce

        try:
            orc = tuple(smith_bruteforce(a)) == tuple(s)
        except ValueError:
            orc = False
    return Report(divisibility=div, integrality=integ, unimodular=uni, oracle=orc)
