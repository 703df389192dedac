"""Random test instances with controlled conditioning.

Shared by the ``verify`` subcommand and the test suite so both draw from the
same distributions. "Full rank" means every singular value of ``B`` and
``A`` is at least ``sigma_min``.
"""
import numpy as np

from .generator import FactorDirection, FactorPair
from .precond import DiagWeights

SIGMA_MIN = 0.1
SIGMA_MAX = 3.0
WEIGHT_RANGE = (0.1, 10.0)


def rng_for(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def _orthonormal(rng, rows, cols):
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q


def random_conditioned(rng, rows, cols, sigma_min=SIGMA_MIN, sigma_max=SIGMA_MAX):
    k = min(rows, cols)
    s = rng.uniform(sigma_min, sigma_max, size=k)
    return (_orthonormal(rng, rows, k) * s) @ _orthonormal(rng, cols, k).T


def random_factor_pair(rng, m, n, r, sigma_min=SIGMA_MIN):
    return FactorPair(random_conditioned(rng, m, r, sigma_min), random_conditioned(rng, r, n, sigma_min))


def random_weights(rng, m, n, low=WEIGHT_RANGE[0], high=WEIGHT_RANGE[1]):
    """Diagonal weights log-uniform in ``[low, high]``."""
    lo, hi = np.log(low), np.log(high)
    return DiagWeights.from_half(np.exp(rng.uniform(lo, hi, m)), np.exp(rng.uniform(lo, hi, n)))


def random_direction(rng, fp):
    return FactorDirection(rng.standard_normal(fp.B.shape), rng.standard_normal(fp.A.shape))


def random_dims(rng, low=2, high=8, r_max=3):
    m = int(rng.integers(low, high + 1))
    n = int(rng.integers(low, high + 1))
    r = int(rng.integers(1, min(r_max, m, n) + 1))
    return m, n, r


def random_instance(seed, stream=0):
    """``(fp, w, G)`` on the desk-scale distribution used by the oracle checks."""
    rng = rng_for(seed, stream)
    m, n, r = random_dims(rng)
    fp = random_factor_pair(rng, m, n, r)
    w = random_weights(rng, m, n)
    G = rng.standard_normal((m, n))
    return fp, w, G
