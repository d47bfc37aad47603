"""Test-matrix generators."""

from __future__ import annotations

import random

import gmpy2

from .matcore import IntMat


def vandermonde_mod(n: int) -> IntMat:
    """The matrix A with A[i][j] = i**j mod n for 0 <= i, j < n, with 0**0 = 1.

    Nonsingular whenever n is prime.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    entries = []
    for i in range(n):
        row = [1]  # i**0 == 1, including 0**0
        v = 1
        for _ in range(1, n):
            v = (v * i) % n
            row.append(v)
        entries.extend(row)
    return IntMat(n, n, tuple(entries))


def random_matrix(n: int, bits: int, rng: random.Random) -> IntMat:
    """Uniform entries in [-(2^bits - 1), 2^bits - 1]."""
    lim = (1 << bits) - 1
    return IntMat(n, n, tuple(rng.randint(-lim, lim) for _ in range(n * n)))


def random_nonsingular(n: int, bits: int, rng: random.Random) -> IntMat:
    """Resample random matrices until one is nonsingular (almost always first try)."""
    from .matcore import det_crt

    while True:
        a = random_matrix(n, bits, rng)
        if det_crt(a) != 0:
            return a


def is_prime(n: int) -> bool:
    """Deterministic primality for word-sized n (gmpy2 is exact below 3.3e24)."""
    return bool(gmpy2.is_prime(int(n)))


def primes_in_range(lo: int, hi: int):
    """All primes p with lo <= p <= hi."""
    return [p for p in range(max(lo, 2), hi + 1) if is_prime(p)]
