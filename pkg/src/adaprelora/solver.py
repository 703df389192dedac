"""Factor updates solving the H-weighted least-squares fit of the preconditioned gradient.

For factors ``(B, A)``, weights ``H = L^{1/2} (x) R^{1/2}`` and W-space
gradient ``G``, the factor updates ``(dB, dA)`` minimizing
``|| dB A + B dA - H^{-1} G ||_H`` form an r^2-parameter affine family

    dB(X) = (I - P_B) L^{-1/2} G_B S_A^{-1} - B X
    dA(X) = S_B^{-1} G_A R^{-1/2} + X A

with ``S_B = B^T L^{1/2} B``, ``S_A = A R^{1/2} A^T`` and
``P_B = B S_B^{-1} B^T L^{1/2}``. Every member induces the same W-space
direction, the H-orthogonal projection of ``H^{-1} G`` onto the tangent
subspace. The member minimizing the imbalance ``1/2 ||dB A - B dA||_H^2``
has the closed form implemented by :func:`closed_form_update`.

Both Gram matrices always get ``eps * I`` added before factorization, so
every function here is defined at ``B = 0``.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _backend
from .errors import ContractError
from .generator import FactorDirection, apply_jacobian, check_wspace
from .precond import DEFAULT_EPS, check_finite, weighted_inner

log = logging.getLogger(__name__)

COND_WARNING = 1e10

# Only the first ill-conditioning event per process is logged at WARNING;
# optimizers hit it every step once the factors degenerate.
_cond_warned = False


@dataclass(frozen=True)
class GradientBundle:
    """W-space gradient with its chain-rule factor gradients.

    Build it with :meth:`from_gradient` so that ``G_B = G A^T`` and
    ``G_A = B^T G`` hold by construction.
    """

    G: np.ndarray
    G_B: np.ndarray
    G_A: np.ndarray

    @classmethod
    def from_gradient(cls, fp, G):
        G = check_wspace(fp, G, "G")
        check_finite(G)
        G_B, G_A = _backend.kernels.factor_grads(G, fp.B, fp.A)
        return cls(G, G_B, G_A)


@dataclass(frozen=True)
class UpdateDelta:
    dB: np.ndarray
    dA: np.ndarray
    induced_w: np.ndarray

    @classmethod
    def build(cls, fp, dB, dA):
        return cls(dB, dA, apply_jacobian(fp, FactorDirection(dB, dA)))

    def direction(self):
        return FactorDirection(self.dB, self.dA)


@dataclass(frozen=True)
class GaugeParameter:
    X: np.ndarray

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != X.shape[1]:
            raise ContractError(f"gauge parameter must be square, got shape {X.shape}")
        object.__setattr__(self, "X", X)


def _check_weights(fp, w):
    if w.shape != fp.shape:
        raise ContractError(f"weights have shape {w.shape}, factors span {fp.shape}")


def _regularized_grams(fp, w, eps):
    eye = np.eye(fp.r)
    gram_b = fp.B.T @ (w.l_half[:, None] * fp.B) + eps * eye
    gram_a = (fp.A * w.r_half[None, :]) @ fp.A.T + eps * eye
    return cho_factor(gram_b, lower=True), cho_factor(gram_a, lower=True)


def family_solution(fp, w, gb, x, eps=DEFAULT_EPS):
    """Member of the minimizer family at gauge ``x`` (sign convention ``-B X``, ``+X A``)."""
    _check_weights(fp, w)
    X = x.X if isinstance(x, GaugeParameter) else GaugeParameter(x).X
    if X.shape != (fp.r, fp.r):
        raise ContractError(f"gauge has shape {X.shape}, expected {(fp.r, fp.r)}")
    B, A = fp.B, fp.A
    lh, rh = w.l_half, w.r_half
    cb, ca = _regularized_grams(fp, w, eps)

    T = cho_solve(ca, (gb.G_B / lh[:, None]).T).T
    dB = T - B @ cho_solve(cb, B.T @ (lh[:, None] * T)) - B @ X
    dA = cho_solve(cb, gb.G_A) / rh[None, :] + X @ A
    return UpdateDelta.build(fp, dB, dA)


def imbalance(fp, w, d):
    """``1/2 ||dB A - B dA||_H^2``."""
    _check_weights(fp, w)
    if d.dB.shape != fp.B.shape or d.dA.shape != fp.A.shape:
        raise ContractError("update shapes do not match the factors")
    diff = d.dB @ fp.A - fp.B @ d.dA
    return 0.5 * weighted_inner(w, diff, diff)


def optimal_gauge(fp, w, gb, eps=DEFAULT_EPS):
    """Imbalance-minimizing gauge ``X = -1/2 S_B^{-1} B^T G A^T S_A^{-1}``."""
    _check_weights(fp, w)
    cb, ca = _regularized_grams(fp, w, eps)
    core = fp.B.T @ gb.G_B  # = B^T G A^T
    X = -0.5 * cho_solve(ca, cho_solve(cb, core).T).T
    return GaugeParameter(X)


def closed_form_factors(fp, w, G_B, G_A, eps=DEFAULT_EPS):
    """Balance-optimal ``(dB, dA)`` from factor gradients alone.

    This is the hot path used by the optimizers; it dispatches to the
    compiled kernel when available.
    """
    dB, dA, cond_b, cond_a = _backend.kernels.closed_form(
        fp.B, fp.A, G_B, G_A, w.l_half, w.r_half, float(eps)
    )
    if max(cond_b, cond_a) > COND_WARNING:
        global _cond_warned
        level = logging.DEBUG if _cond_warned else logging.WARNING
        _cond_warned = True
        log.log(
            level,
            "ill-conditioned Gram matrices (estimates %.3g, %.3g); the eps*I term dominates"
            "%s",
            cond_b,
            cond_a,
            "" if level == logging.DEBUG else " (further occurrences logged at debug level)",
        )
    return dB, dA


def closed_form_update(fp, w, gb, eps=DEFAULT_EPS):
    """Balance-optimal member of the minimizer family.

    ``dB = (I - P_B/2) L^{-1/2} G_B S_A^{-1}`` and
    ``dA = S_B^{-1} G_A R^{-1/2} (I - Q_A/2)`` with
    ``Q_A = R^{1/2} A^T S_A^{-1} A``.
    """
    _check_weights(fp, w)
    dB, dA = closed_form_factors(fp, w, gb.G_B, gb.G_A, eps)
    return UpdateDelta.build(fp, dB, dA)


def surrogate_gradient(fp, G):
    """Tangent-space surrogate ``G_B A + B G_A`` for the W-space gradient."""
    G_B, G_A = _backend.kernels.factor_grads(np.asarray(G, dtype=np.float64), fp.B, fp.A)
    return G_B @ fp.A + fp.B @ G_A

