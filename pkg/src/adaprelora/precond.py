"""Adafactor row/column statistics and the diagonal Kronecker metric they induce.

The preconditioner acts on m x n matrices as ``H Y = L^{1/2} Y R^{1/2}`` with
diagonal ``L`` and ``R`` built from running row and column sums of the
squared gradient. Only the two statistic vectors are stored, so state memory
per layer is ``m + n`` scalars.
"""
from dataclasses import dataclass, replace

import numpy as np

from . import _backend
from .errors import ContractError, NonFiniteGradientError

DEFAULT_DECAY = 0.98
DEFAULT_EPS = 1e-6


def _frozen_vector(x, name):
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ContractError(f"{name} must be a vector, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class AdafactorState:
    l: np.ndarray
    r: np.ndarray
    decay_row: float = DEFAULT_DECAY
    decay_col: float = DEFAULT_DECAY
    eps: float = DEFAULT_EPS
    step_count: int = 0

    def __post_init__(self):
        l = _frozen_vector(self.l, "l")
        r = _frozen_vector(self.r, "r")
        if np.any(l < 0) or np.any(r < 0):
            raise ContractError("second-moment statistics must be nonnegative")
        for name in ("decay_row", "decay_col"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {value}")
        if not self.eps > 0:
            raise ContractError(f"eps must be positive, got {self.eps}")
        object.__setattr__(self, "l", l)
        object.__setattr__(self, "r", r)

    @classmethod
    def zeros(cls, m, n, decay_row=DEFAULT_DECAY, decay_col=DEFAULT_DECAY, eps=DEFAULT_EPS):
        return cls(np.zeros(m), np.zeros(n), decay_row, decay_col, eps, 0)

    @property
    def shape(self):
        return (self.l.size, self.r.size)

    @property
    def n_scalars(self):
        """Number of stored statistic scalars (``m + n``)."""
        return self.l.size + self.r.size


@dataclass(frozen=True)
class DiagWeights:
    """Diagonals of ``L^{1/2}``, ``R^{1/2}`` and their reciprocals."""

    l_half: np.ndarray
    r_half: np.ndarray
    l_neg_half: np.ndarray
    r_neg_half: np.ndarray

    def __post_init__(self):
        for name in ("l_half", "r_half", "l_neg_half", "r_neg_half"):
            arr = _frozen_vector(getattr(self, name), name)
            if not np.all(arr > 0):
                raise ContractError(f"{name} must be strictly positive")
            object.__setattr__(self, name, arr)
        if self.l_half.shape != self.l_neg_half.shape or self.r_half.shape != self.r_neg_half.shape:
            raise ContractError("reciprocal weight vectors have mismatched lengths")

    @classmethod
    def from_half(cls, l_half, r_half):
        l_half = np.asarray(l_half, dtype=np.float64)
        r_half = np.asarray(r_half, dtype=np.float64)
        if not (np.all(l_half > 0) and np.all(r_half > 0)):
            raise ContractError("weights must be strictly positive")
        return cls(l_half, r_half, 1.0 / l_half, 1.0 / r_half)

    @classmethod
    def identity(cls, m, n):
        return cls.from_half(np.ones(m), np.ones(n))

    @property
    def shape(self):
        return (self.l_half.size, self.r_half.size)

    def is_identity(self):
        return bool(np.all(self.l_half == 1.0) and np.all(self.r_half == 1.0))

    def dense(self):
        """The weight ``l_half[i] * r_half[j]`` as an m x n matrix."""
        return np.outer(self.l_half, self.r_half)


def check_finite(G, name="gradient"):
    if not np.all(np.isfinite(G)):
        raise NonFiniteGradientError(f"{name} contains NaN or infinite entries")


def update_stats(state, G):
    """Fold ``G * G`` into the running row/column statistics.

    Returns a new state; ``state`` is not modified.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.shape != state.shape:
        raise ContractError(f"gradient has shape {G.shape}, statistics expect {state.shape}")
    check_finite(G)
    l, r = _backend.kernels.accumulate_stats(G, state.l, state.r, state.decay_row, state.decay_col)
    return replace(state, l=l, r=r, step_count=state.step_count + 1)


def _half_weights(stat, eps):
    total = stat.sum()
    if total > 0.0:
        diag = np.maximum(stat / np.sqrt(total), eps)
    else:
        diag = np.full(stat.shape, eps)
    return np.sqrt(diag)


def build_weights(state):
    """Normalize the statistics into :class:`DiagWeights`.

    ``L = max(l / sqrt(||l||_1), eps)`` entrywise (likewise ``R``); the floor
    is applied after normalization so it does not depend on gradient scale.
    """
    l_half = _half_weights(state.l, state.eps)
    r_half = _half_weights(state.r, state.eps)
    return DiagWeights(l_half, r_half, 1.0 / l_half, 1.0 / r_half)


def _check_pair(w, Y, name):
    Y = np.asarray(Y, dtype=np.float64)
    if Y.shape != w.shape:
        raise ContractError(f"{name} has shape {Y.shape}, weights expect {w.shape}")
    return Y


def apply_h(w, Y):
    """``L^{1/2} Y R^{1/2}``."""
    Y = _check_pair(w, Y, "Y")
    return _backend.kernels.scale_outer(Y, w.l_half, w.r_half)


def apply_h_inv(w, K):
    """``L^{-1/2} K R^{-1/2}``, computed as ``K_ij / (l_half_i r_half_j)``."""
    K = _check_pair(w, K, "K")
    return _backend.kernels.unscale_outer(K, w.l_half, w.r_half)


def weighted_inner(w, Y, Z):
    """``<H Y, Z>`` under the Frobenius pairing."""
    Y = _check_pair(w, Y, "Y")
    Z = _check_pair(w, Z, "Z")
    return _backend.kernels.weighted_inner(Y, Z, w.l_half, w.r_half)


def weighted_norm(w, Y):
    return float(np.sqrt(max(weighted_inner(w, Y, Y), 0.0)))
