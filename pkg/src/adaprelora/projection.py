"""Orthogonal projection onto the tangent subspace ``range(J) = {P A + B Q}``.

Two metrics are supported: the Frobenius inner product and the diagonal
Kronecker metric ``<Y, Z>_H = <L^{1/2} Y R^{1/2}, Z>``. In the weighted case
the column and row projectors are ``B (B^T L^{1/2} B)^{-1} B^T L^{1/2}`` and
``R^{1/2} A^T (A R^{1/2} A^T)^{-1} A``; the cross term uses the same weighted
Gram matrices, which is what makes the map idempotent and H-self-adjoint.

No regularization is applied here. Ill-conditioned Grams raise
:class:`SingularGramError`; callers that need a fallback add ``eps * I``
themselves (see :mod:`adaprelora.solver`).
"""
import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import ContractError, SingularGramError
from .generator import check_wspace

MAX_GRAM_CONDITION = 1e12


def _spd_factor(gram, label):
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > MAX_GRAM_CONDITION:
        raise SingularGramError(
            f"{label} Gram matrix has condition number {cond:.3g} (> {MAX_GRAM_CONDITION:g}); "
            "regularize the factors (add eps * I) before projecting"
        )
    return cho_factor(gram, lower=True)


def _column_projector(B, lh=None):
    # Returns a function Y -> B (B^T W B)^{-1} B^T W Y with W = diag(lh) (or I).
    WB = B if lh is None else lh[:, None] * B
    c = _spd_factor(B.T @ WB, "column")
    return lambda Y: B @ cho_solve(c, WB.T @ Y)


def _row_projector(A, rh=None):
    # Returns a function Y -> Y W A^T (A W A^T)^{-1} A with W = diag(rh) (or I).
    AW = A if rh is None else A * rh[None, :]
    c = _spd_factor(AW @ A.T, "row")
    return lambda Y: cho_solve(c, AW @ Y.T).T @ A


def project_standard(fp, Z):
    """Frobenius-orthogonal projection of ``Z`` onto the tangent subspace."""
    Z = check_wspace(fp, Z, "Z")
    col = _column_projector(fp.B)
    row = _row_projector(fp.A)
    PZ = col(Z)
    return PZ + row(Z) - row(PZ)


def project_weighted(fp, w, Z):
    """H-orthogonal projection of ``Z`` onto the tangent subspace."""
    Z = check_wspace(fp, Z, "Z")
    if w.shape != fp.shape:
        raise ContractError(f"weights have shape {w.shape}, factors span {fp.shape}")
    col = _column_projector(fp.B, w.l_half)
    row = _row_projector(fp.A, w.r_half)
    PZ = col(Z)
    return PZ + row(Z) - row(PZ)
