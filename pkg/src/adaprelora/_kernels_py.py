"""NumPy implementations of the hot kernels.

Every function here has a twin with the same signature in ``_kernels.pyx``.
Inputs are assumed validated and float64; callers in the public modules do
the shape checking.
"""
import numpy as np
from scipy.linalg import cho_factor, cho_solve

BACKEND = "python"


def accumulate_stats(G, l, r, decay_row, decay_col):
    """Exponential moving average of the row and column sums of ``G * G``."""
    G2 = G * G
    l_new = decay_row * l + (1.0 - decay_row) * G2.sum(axis=1)
    r_new = decay_col * r + (1.0 - decay_col) * G2.sum(axis=0)
    return l_new, r_new


def scale_outer(Y, a, b):
    """Return ``diag(a) @ Y @ diag(b)``."""
    return (a[:, None] * Y) * b[None, :]


def unscale_outer(K, a, b):
    """Return ``K[i, j] / (a[i] * b[j])``."""
    return K / (a[:, None] * b[None, :])


def weighted_inner(Y, Z, a, b):
    """``sum_ij a_i b_j Y_ij Z_ij``."""
    return float(np.einsum("i,ij,ij,j->", a, Y, Z, b))


def factor_grads(G, B, A):
    """Chain-rule factor gradients ``(G A^T, B^T G)``."""
    return G @ A.T, B.T @ G


def _cond_from_cholesky(c):
    d = np.abs(np.diag(c))
    return float((d.max() / d.min()) ** 2)


def closed_form(B, A, GB, GA, lh, rh, eps):
    """Balance-optimal factor update from the chain-rule factor gradients.

    Returns ``(dB, dA, cond_b, cond_a)`` where the condition numbers are the
    Cholesky-diagonal estimates of the two regularized r x r Gram matrices.
    """
    r = B.shape[1]
    eye = np.eye(r)
    gram_b = B.T @ (lh[:, None] * B) + eps * eye
    gram_a = (A * rh[None, :]) @ A.T + eps * eye
    cb = cho_factor(gram_b, lower=True)
    ca = cho_factor(gram_a, lower=True)

    # dB = (I - P/2) L^{-1/2} G_B S_A^{-1},  P = B S_B^{-1} B^T L^{1/2}
    T = cho_solve(ca, (GB / lh[:, None]).T).T
    dB = T - 0.5 * B @ cho_solve(cb, B.T @ (lh[:, None] * T))

    # dA = S_B^{-1} G_A R^{-1/2} (I - Q/2),  Q = R^{1/2} A^T S_A^{-1} A
    U = cho_solve(cb, GA) / rh[None, :]
    dA = U - 0.5 * cho_solve(ca, ((U * rh[None, :]) @ A.T).T).T @ A
    return dB, dA, _cond_from_cholesky(cb[0]), _cond_from_cholesky(ca[0])
