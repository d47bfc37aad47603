import random

import pytest

from smithform import gen, oracle
from smithform.matcore import (
    IntMat,
    MatrixFormatError,
    SmithDiagonal,
    det_crt,
    format_matrix,
    hadamard_bits,
    mat_mul_exact,
    parse_matrix,
    rem_mod,
)


def rand_mat(rows, cols, bits, rng):
    lim = (1 << bits) - 1
    return IntMat(rows, cols, tuple(rng.randint(-lim, lim) for _ in range(rows * cols)))


class TestMatMulExact:
    def test_identity(self):
        rng = random.Random(1)
        x = rand_mat(2, 5, 32, rng)
        assert mat_mul_exact(IntMat.identity(2), x) == x

    def test_hand_arithmetic(self):
        a = IntMat.from_rows([[2, 4], [6, 8]])
        b = IntMat.from_rows([[1], [1]])
        assert mat_mul_exact(a, b) == IntMat.from_rows([[6], [14]])

    def test_matches_schoolbook_128bit(self):
        rng = random.Random(2)
        a = rand_mat(8, 8, 128, rng)
        b = rand_mat(8, 8, 128, rng)
        assert mat_mul_exact(a, b) == oracle.matmul_schoolbook(a, b)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mat_mul_exact(IntMat.identity(2), IntMat.identity(3))

    def test_associative_4x4(self):
        rng = random.Random(3)
        for _ in range(5):
            a, b, c = (rand_mat(4, 4, 16, rng) for _ in range(3))
            assert mat_mul_exact(mat_mul_exact(a, b), c) == mat_mul_exact(a, mat_mul_exact(b, c))


class TestRemMod:
    def test_negative(self):
        assert rem_mod(IntMat.from_rows([[-3]]), 5)[0, 0] == 2

    def test_exact_multiple(self):
        assert rem_mod(IntMat.from_rows([[7]]), 7)[0, 0] == 0

    def test_row(self):
        assert rem_mod(IntMat.from_rows([[10, -10]]), 6) == IntMat.from_rows([[4, 2]])

    def test_idempotent(self):
        rng = random.Random(4)
        a = rand_mat(3, 3, 40, rng)
        r = rem_mod(a, 97)
        assert rem_mod(r, 97) == r
        assert all(0 <= e < 97 for e in r.entries)

    def test_rejects_nonpositive_modulus(self):
        with pytest.raises(ValueError):
            rem_mod(IntMat.identity(1), 0)


class TestHadamardBits:
    def test_identity_1(self):
        assert hadamard_bits(IntMat.identity(1)) >= 1

    def test_2x2(self):
        a = IntMat.from_rows([[2, 4], [6, 8]])
        b = hadamard_bits(a)
        assert abs(det_crt(a)) < (1 << b)

    def test_vandermonde_13_bounds_bareiss_det(self):
        a = gen.vandermonde_mod(13)
        d = oracle.det_bareiss(a)
        assert abs(d) < (1 << hadamard_bits(a))

    def test_bounds_det_random(self):
        rng = random.Random(5)
        for _ in range(10):
            a = rand_mat(5, 5, 20, rng)
            assert abs(det_crt(a)) < (1 << hadamard_bits(a))


class TestDetCrt:
    def test_identity(self):
        assert det_crt(IntMat.identity(5)) == 1

    def test_2x2(self):
        assert det_crt(IntMat.from_rows([[2, 4], [6, 8]])) == -8

    def test_vandermonde_11_matches_bareiss(self):
        a = gen.vandermonde_mod(11)
        assert det_crt(a) == oracle.det_bareiss(a)

    def test_multiplicative(self):
        rng = random.Random(6)
        for _ in range(5):
            a = rand_mat(6, 6, 16, rng)
            b = rand_mat(6, 6, 16, rng)
            assert det_crt(mat_mul_exact(a, b)) == det_crt(a) * det_crt(b)

    def test_singular_returns_zero(self):
        a = IntMat.from_rows([[1, 2], [2, 4]])
        assert det_crt(a) == 0


class TestSmithDiagonal:
    def test_chain_enforced(self):
        with pytest.raises(ValueError):
            SmithDiagonal.of([2, 3])

    def test_product(self):
        assert SmithDiagonal.of([1, 2, 4]).product() == 8


class TestTextFormat:
    def test_roundtrip(self):
        rng = random.Random(7)
        a = rand_mat(4, 3, 64, rng)
        assert parse_matrix(format_matrix(a)) == a

    def test_rejects_garbage(self):
        with pytest.raises(MatrixFormatError):
            parse_matrix("not a matrix")

    def test_rejects_wrong_count(self):
        with pytest.raises(MatrixFormatError):
            parse_matrix("2 2\n1 2\n3\n")
