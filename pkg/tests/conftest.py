"""Shared fixtures and oracles for the drroots test suite."""

import math
import os

import mpmath
import numpy as np
import pytest

from src.poly_core import RootForm

mpmath.mp.dps = 50

# newer mlflow rejects the file: tracking store the suite uses unless opted in
os.environ.setdefault("MLFLOW_ALLOW_FILE_STORE", "true")


def match_roots(found, expected):
    """Largest distance of a greedy closest-pair bijection between two root sets."""
    found = list(np.asarray(found, dtype=complex))
    expected = list(np.asarray(expected, dtype=complex))
    assert len(found) == len(expected)
    worst = 0.0
    while expected:
        dists = np.abs(np.subtract.outer(np.array(found), np.array(expected)))
        i, j = np.unravel_index(np.argmin(dists), dists.shape)
        worst = max(worst, float(dists[i, j]))
        found.pop(i)
        expected.pop(j)
    return worst


def mp_expand(roots, leading=1):
    """Ascending coefficients of leading * prod(z - r) at 50 digits."""
    coeffs = [mpmath.mpc(leading)]
    for r in roots:
        r = mpmath.mpc(complex(r))
        nxt = [mpmath.mpc(0)] * (len(coeffs) + 1)
        for k, c in enumerate(coeffs):
            nxt[k] -= r * c
            nxt[k + 1] += c
        coeffs = nxt
    return coeffs


def mp_derivative_at(roots, z, k):
    """p^(k)(z) for the monic polynomial with these roots, at 50 digits."""
    coeffs = mp_expand(roots)
    z = mpmath.mpc(complex(z))
    total = mpmath.mpc(0)
    for j in range(k, len(coeffs)):
        total += coeffs[j] * mpmath.ff(j, k) * z ** (j - k)
    return total


def brute_rho(roots, zeta):
    """min_k |p(zeta) k! / p^(k)(zeta)|^(1/k) evaluated at 50 digits."""
    n = len(roots)
    value = abs(mp_derivative_at(roots, zeta, 0))
    terms = []
    for k in range(2, n + 1):
        dk = abs(mp_derivative_at(roots, zeta, k))
        if dk != 0:
            terms.append(float((value * math.factorial(k) / dk) ** (mpmath.mpf(1) / k)))
    return min(terms)


def nth_roots(n, c):
    """Roots of z^n - c."""
    base = complex(c) ** (1.0 / n)
    return base * np.exp(2j * math.pi * np.arange(n) / n)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def random_rootform(rng):
    def make(degree):
        return RootForm(rng.normal(size=degree) + 1j * rng.normal(size=degree))

    return make
