import math
import random

import numpy as np
import pytest

from smithform import oracle, rns
from smithform.matcore import IntMat

BOUND = 2**53 - 1


def rand_mat(rows, cols, bits, rng):
    lim = (1 << bits) - 1
    return IntMat(rows, cols, tuple(rng.randint(-lim, lim) for _ in range(rows * cols)))


class TestAdmissibleRoot:
    @pytest.mark.parametrize("dim", [1, 2, 64, 1009, 10007])
    def test_exact_boundary(self, dim):
        r = rns.max_admissible_root(dim)
        assert dim * r * r + r < BOUND
        assert dim * (r + 1) * (r + 1) + (r + 1) >= BOUND

    def test_known_values(self):
        # independent oracle: integer square root of the quadratic bound
        for dim in (1, 10007):
            r = (math.isqrt(4 * dim * BOUND + (dim + 1) ** 2) - dim - 1) // (2 * dim)
            while dim * r * r + r >= BOUND:
                r -= 1
            assert rns.max_admissible_root(dim) == r


class TestBuildBasis:
    def test_contract(self):
        basis = rns.build_basis(64, 1000)
        assert basis.product >= 1 << 1000
        assert len(set(basis.primes)) == len(basis.primes)
        top = rns.max_admissible_root(64) + 1
        prod = 1
        for p in basis.primes:
            assert p <= top
            assert 64 * (p - 1) ** 2 + (p - 1) < BOUND
            prod *= p
        assert prod == basis.product

    def test_primes_descend_consecutively(self):
        basis = rns.build_basis(8, 200)
        assert list(basis.primes) == sorted(basis.primes, reverse=True)


class TestResidueConversion:
    def test_negative_one(self):
        basis = rns.RnsBasis(1, [97, 101])
        st = rns.to_residues(IntMat.from_rows([[-1]]), basis)
        assert st.planes[0, 0, 0] == 96.0
        assert st.planes[1, 0, 0] == 100.0

    def test_zero_matrix(self):
        basis = rns.build_basis(4, 100)
        st = rns.to_residues(IntMat.zeros(3, 3), basis)
        assert not st.planes.any()
        assert rns.from_residues(st) == IntMat.zeros(3, 3)

    def test_symmetric_range_single_prime(self):
        basis = rns.RnsBasis(1, [7])
        st = rns.ResidueStack(basis, 1, 2, np.array([[[5.0, 6.0]]]))
        out = rns.from_residues(st)
        assert out[0, 0] == 5 and out[0, 1] == -1

    def test_roundtrip(self):
        rng = random.Random(10)
        basis = rns.build_basis(6, 600)
        for bits in (8, 60, 500):
            a = rand_mat(6, 6, bits, rng)
            assert rns.from_residues(rns.to_residues(a, basis)) == a


class TestRnsMatmul:
    def test_identity(self):
        rng = random.Random(11)
        basis = rns.build_basis(5, 300)
        x = rand_mat(5, 5, 64, rng)
        out = rns.rns_matmul(rns.identity_stack(5, basis), rns.to_residues(x, basis))
        assert rns.from_residues(out) == x

    def test_exact_vs_reference(self):
        rng = random.Random(12)
        basis = rns.build_basis(64, 64 * 2 * 256 + 32)
        for _ in range(5):
            a = rand_mat(64, 64, 256, rng)
            b = rand_mat(64, 64, 256, rng)
            got = rns.from_residues(rns.rns_matmul(rns.to_residues(a, basis), rns.to_residues(b, basis)))
            assert got == oracle.matmul_schoolbook(a, b)

    def test_inner_dim_overflow_rejected(self):
        rng = random.Random(13)
        basis = rns.build_basis(4, 100)
        a = rand_mat(4, 8, 8, rng)
        b = rand_mat(8, 4, 8, rng)
        with pytest.raises(ValueError):
            rns.rns_matmul(rns.to_residues(a, basis), rns.to_residues(b, basis))


class TestBaseConvert:
    def test_identity_basis(self):
        rng = random.Random(14)
        basis = rns.build_basis(4, 200)
        a = rand_mat(4, 4, 150, rng)
        st = rns.to_residues(a, basis)
        out = rns.base_convert(st, basis, basis)
        assert np.array_equal(out.planes, st.planes)

    def test_zero(self):
        src = rns.build_basis(4, 200)
        dst = rns.build_basis(4, 120)
        out = rns.base_convert(rns.to_residues(IntMat.zeros(2, 2), src), src, dst)
        assert not out.planes.any()

    def test_matches_reconstruct_then_reduce(self):
        rng = random.Random(15)
        src = rns.build_basis(6, 400)
        dst = rns.build_basis(6, 250)
        for _ in range(10):
            a = rand_mat(6, 6, 300, rng)
            st = rns.to_residues(a, src)
            got = rns.base_convert(st, src, dst)
            ref = rns.to_residues(rns.from_residues(st), dst)
            assert np.array_equal(got.planes, ref.planes)


class TestMatmulExactBig:
    def test_matches_schoolbook(self):
        rng = random.Random(16)
        for _ in range(5):
            r, k, c = rng.randrange(9, 25), rng.randrange(9, 25), rng.randrange(1, 25)
            a = rand_mat(r, k, 200, rng)
            b = rand_mat(k, c, 200, rng)
            assert rns.matmul_exact_big(a, b) == oracle.matmul_schoolbook(a, b)

    def test_forced_small_blocks(self):
        rng = random.Random(17)
        a = rand_mat(10, 10, 300, rng)
        b = rand_mat(10, 7, 300, rng)
        ref = oracle.matmul_schoolbook(a, b)
        assert rns.matmul_exact_big(a, b, block_mem_mb=0, group=3) == ref


class TestModularKernels:
    def test_inverse_mod_prime(self):
        rng = random.Random(18)
        p = 99991
        a = rand_mat(12, 12, 30, rng)
        inv = rns.inverse_mod_prime(a, p)
        arr = np.array(a.to_lists(), dtype=object) % p
        prod = (np.array(inv, dtype=object).astype(object) @ arr) % p
        assert np.array_equal(prod, np.eye(12, dtype=object) % p + np.zeros((12, 12), dtype=object))

    def test_inverse_singular_mod_p(self):
        p = 7
        a = IntMat.from_rows([[7, 0], [0, 1]])
        assert rns.inverse_mod_prime(a, p) is None

    def test_residue_determinants(self):
        rng = random.Random(19)
        a = rand_mat(9, 9, 24, rng)
        basis = rns.build_basis(9, 400)
        dets = rns.residue_determinants(a, basis)
        d = oracle.det_bareiss(a)
        for p, r in zip(basis.primes, dets):
            assert int(r) % p == d % p
