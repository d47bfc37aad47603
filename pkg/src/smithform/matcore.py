"""Dense arbitrary-precision integer matrices and exact operations on them.

``IntMat`` is the exact carrier used throughout the package: a row-major
list of Python ints.  Heavy multiplications are done elsewhere (see
:mod:`smithform.rns`); everything here is straightforward exact arithmetic
that the rest of the code can trust as ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class MatrixFormatError(ValueError):
    """Raised when a matrix text file does not parse."""


@dataclass(frozen=True)
class IntMat:
    """Dense integer matrix with arbitrary-precision entries.

    Entries are stored row-major in a flat tuple, so instances are
    immutable and hashable enough to share freely between threads.
    """

    rows: int
    cols: int
    entries: tuple

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("matrix dimensions must be >= 1")
        if len(self.entries) != self.rows * self.cols:
            raise ValueError(
                f"expected {self.rows * self.cols} entries, got {len(self.entries)}"
            )

    @staticmethod
    def from_rows(rows_of_entries) -> "IntMat":
        rows = len(rows_of_entries)
        cols = len(rows_of_entries[0])
        if any(len(r) != cols for r in rows_of_entries):
            raise ValueError("ragged rows")
        flat = tuple(int(x) for row in rows_of_entries for x in row)
        return IntMat(rows, cols, flat)

    @staticmethod
    def identity(n: int) -> "IntMat":
        return IntMat(n, n, tuple(1 if i == j else 0 for i in range(n) for j in range(n)))

    @staticmethod
    def zeros(rows: int, cols: int) -> "IntMat":
        return IntMat(rows, cols, (0,) * (rows * cols))

    @staticmethod
    def diag(values) -> "IntMat":
        vals = [int(v) for v in values]
        n = len(vals)
        return IntMat(n, n, tuple(vals[i] if i == j else 0 for i in range(n) for j in range(n)))

    def __getitem__(self, ij):
        i, j = ij
        return self.entries[i * self.cols + j]

    def row(self, i: int):
        return self.entries[i * self.cols : (i + 1) * self.cols]

    def to_lists(self):
        return [list(self.row(i)) for i in range(self.rows)]

    def transpose(self) -> "IntMat":
        return IntMat.from_rows(
            [[self[i, j] for i in range(self.rows)] for j in range(self.cols)]
        )

    def max_abs(self) -> int:
        return max(abs(e) for e in self.entries)

    def is_square(self) -> bool:
        return self.rows == self.cols

    def __eq__(self, other):
        return (
            isinstance(other, IntMat)
            and self.rows == other.rows
            and self.cols == other.cols
            and self.entries == other.entries
        )


@dataclass(frozen=True)
class SmithDiagonal:
    """Invariant factors s_1 | s_2 | ... | s_n as a nondecreasing-divisibility list."""

    factors: tuple

    def __post_init__(self):
        facs = self.factors
        if any(f < 1 for f in facs):
            raise ValueError("invariant factors must be positive")
        for a, b in zip(facs, facs[1:]):
            if b % a != 0:
                raise ValueError(f"divisibility chain violated: {a} does not divide {b}")

    @staticmethod
    def of(values) -> "SmithDiagonal":
        return SmithDiagonal(tuple(int(v) for v in values))

    def __len__(self):
        return len(self.factors)

    def __getitem__(self, i):
        return self.factors[i]

    def __iter__(self):
        return iter(self.factors)

    def product(self) -> int:
        p = 1
        for f in self.factors:
            p *= f
        return p


def mat_mul_exact(a: IntMat, b: IntMat) -> IntMat:
    """Exact integer product, schoolbook.  Reference for the RNS kernel."""
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.rows}x{a.cols} * {b.rows}x{b.cols}")
    bt = [b.entries[j :: b.cols] for j in range(b.cols)]  # columns of b
    out = []
    for i in range(a.rows):
        arow = a.row(i)
        out.append([sum(x * y for x, y in zip(arow, bcol)) for bcol in bt])
    return IntMat.from_rows(out)


def mat_add(a: IntMat, b: IntMat) -> IntMat:
    if (a.rows, a.cols) != (b.rows, b.cols):
        raise ValueError("shape mismatch")
    return IntMat(a.rows, a.cols, tuple(x + y for x, y in zip(a.entries, b.entries)))


def mat_scale(a: IntMat, c: int) -> IntMat:
    return IntMat(a.rows, a.cols, tuple(c * x for x in a.entries))


def rem_mod(a: IntMat, s: int) -> IntMat:
    """Entrywise remainder in [0, s)."""
    if s <= 0:
        raise ValueError("modulus must be positive")
    return IntMat(a.rows, a.cols, tuple(x % s for x in a.entries))


def hadamard_bits(a: IntMat) -> int:
    """Bit bound b with |det a| < 2^b, from the row-norm determinant bound.

    Uses ceil(n*log2(sqrt(n)*max|a_ij|)) + 1, padded slightly so float
    rounding can never undercut the true bound.
    """
    if not a.is_square():
        raise ValueError("hadamard_bits needs a square matrix")
    n = a.rows
    norm = max(a.max_abs(), 1)
    b = math.ceil(n * (0.5 * math.log2(n) + math.log2(norm)) + 1e-9) + 1
    return b


def det_crt(a: IntMat) -> int:
    """Exact signed determinant via CRT over a word-prime residue basis.

    Returns 0 for singular input.
    """
    from . import rns  # deferred: rns imports nothing from here at module load

    if not a.is_square():
        raise ValueError("det_crt needs a square matrix")
    n = a.rows
    if n == 1:
        return a.entries[0]
    bits = hadamard_bits(a)
    basis = rns.build_basis(n, bits + 2)  # product > 2 * 2^bits
    residues = rns.residue_determinants(a, basis)
    d = rns.crt_combine_scalar(residues, basis)
    return d


# ---------------------------------------------------------------------------
# matrix text format: first line "<rows> <cols>", then one line per row


def format_matrix(a: IntMat) -> str:
    lines = [f"{a.rows} {a.cols}"]
    for i in range(a.rows):
        lines.append(" ".join(str(x) for x in a.row(i)))
    return "\n".join(lines) + "\n"


def parse_matrix(text: str) -> IntMat:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise MatrixFormatError("empty matrix file")
    head = lines[0].split()
    if len(head) != 2:
        raise MatrixFormatError(f"bad header line: {lines[0]!r}")
    try:
        rows, cols = int(head[0]), int(head[1])
    except ValueError as e:
        raise MatrixFormatError(f"bad header line: {lines[0]!r}") from e
    if rows < 1 or cols < 1 or len(lines) != rows + 1:
        raise MatrixFormatError("row count does not match header")
    data = []
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != cols:
            raise MatrixFormatError(f"expected {cols} entries per row, got {len(parts)}")
        try:
            data.append([int(p) for p in parts])
        except ValueError as e:
            raise MatrixFormatError(f"bad integer in row: {ln!r}") from e
    return IntMat.from_rows(data)


def save_matrix(a: IntMat, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(format_matrix(a))


def load_matrix(path) -> IntMat:
    with open(path, "r", encoding="utf-8") as f:
        return parse_matrix(f.read())
