"""Brute-force reference computations for verification.

Nothing here imports :mod:`adaprelora.solver`'s closed forms: the weighted
least-squares problem is solved on the dense vectorized Jacobian with a
pseudoinverse, and the gauge is fixed by minimizing the imbalance over an
explicit kernel basis. Intended for desk-scale sizes only.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .generator import (
    FactorDirection,
    apply_jacobian,
    direction_from_vec,
    kernel_basis,
    vec,
    vectorized_jacobian,
)

PINV_RCOND = 1e-10
FD_STEP = 1e-5
MAX_ORACLE_ENTRIES = 1_000_000


@dataclass(frozen=True)
class OracleDelta:
    """Factor update produced by the oracle (mirrors ``solver.UpdateDelta``)."""

    dB: np.ndarray
    dA: np.ndarray
    induced_w: np.ndarray

    def direction(self):
        return FactorDirection(self.dB, self.dA)


def _weighted_system(fp, w, G):
    G = np.asarray(G, dtype=np.float64)
    if G.shape != fp.shape:
        raise ContractError(f"G has shape {G.shape}, expected {fp.shape}")
    if w.shape != fp.shape:
        raise ContractError(f"weights have shape {w.shape}, factors span {fp.shape}")
    m, n, r = fp.m, fp.n, fp.r
    if m * n * (m + n) * r > MAX_ORACLE_ENTRIES:
        raise ContractError(
            f"oracle is desk-scale only: dense Jacobian would hold {m * n * (m + n) * r} entries"
        )
    J = vectorized_jacobian(fp)
    h = vec(np.outer(w.l_half, w.r_half))
    sqrt_h = np.sqrt(h)
    # || D^{1/2} (J d - vec(H^{-1} G)) ||  with D = diag(vec H)
    Jw = sqrt_h[:, None] * J
    rhs = sqrt_h * (vec(G) / h)
    return Jw, rhs, sqrt_h


def _imbalance_operator(fp):
    # d -> vec(P A - B Q)
    m, n = fp.m, fp.n
    return np.hstack([np.kron(fp.A.T, np.eye(m)), -np.kron(np.eye(n), fp.B)])


def _as_delta(fp, v):
    d = direction_from_vec(fp, v)
    return OracleDelta(d.P, d.Q, apply_jacobian(fp, d))


def min_norm_update(fp, w, G, rcond=PINV_RCOND):
    """Minimum-Frobenius-norm minimizer of the weighted fit (pseudoinverse solution)."""
    Jw, rhs, _ = _weighted_system(fp, w, G)
    return _as_delta(fp, np.linalg.pinv(Jw, rcond=rcond) @ rhs)


def brute_force_update(fp, w, G, rcond=PINV_RCOND):
    """Weighted least squares plus numerical imbalance minimization over the kernel."""
    Jw, rhs, sqrt_h = _weighted_system(fp, w, G)
    d0 = np.linalg.pinv(Jw, rcond=rcond) @ rhs

    K = np.column_stack([k.vec() for k in kernel_basis(fp)])
    S = _imbalance_operator(fp)
    M = sqrt_h[:, None] * (S @ K)
    b = sqrt_h * (S @ d0)
    # minimize 1/2 || M c + b ||^2  over the r^2 kernel coefficients
    c = np.linalg.solve(M.T @ M, -M.T @ b)
    return _as_delta(fp, d0 + K @ c)


def weighted_residual(fp, w, G, d):
    """``|| J d - H^{-1} G ||_H`` for a factor direction ``d``."""
    Jw, rhs, _ = _weighted_system(fp, w, G)
    return float(np.linalg.norm(Jw @ d.vec() - rhs))


def finite_diff_gradient(f, at, h=FD_STEP):
    """Central-difference gradient of a scalar function of a matrix."""
    if not 1e-7 <= h <= 1e-4:
        raise ContractError(f"finite-difference step must lie in [1e-7, 1e-4], got {h}")
    at = np.array(at, dtype=np.float64)
    grad = np.empty_like(at)
    for idx in np.ndindex(at.shape):
        orig = at[idx]
        at[idx] = orig + h
        f_plus = f(at.copy())
        at[idx] = orig - h
        f_minus = f(at.copy())
        at[idx] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(f"non-finite function value near index {idx}")
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad
