"""The product map ``(B, A) -> B @ A`` and its first-order calculus.

All operators act on dense float64 arrays. Factor-space directions are
pairs ``(P, Q)`` with the shapes of ``(B, A)``; the Frobenius pairing on
factor space is ``<P1, P2> + <Q1, Q2>``.

The rank and kernel statements (``rank J = (m + n) r - r^2``, kernel spanned
by ``(B X, -X A)``) only hold when ``B`` has full column rank and ``A`` full
row rank. At ``B = 0`` (the usual initialization) the kernel is larger.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ContractError


def _as_matrix(x, name):
    arr = np.array(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be a 2-D matrix, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class FactorPair:
    """Low-rank factors ``B`` (m x r) and ``A`` (r x n)."""

    B: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        B = _as_matrix(self.B, "B")
        A = _as_matrix(self.A, "A")
        if B.shape[1] != A.shape[0]:
            raise ContractError(f"inner dimensions disagree: B is {B.shape}, A is {A.shape}")
        m, r = B.shape
        n = A.shape[1]
        if min(m, n, r) < 1 or r > min(m, n):
            raise ContractError(f"need 1 <= r <= min(m, n), got m={m}, n={n}, r={r}")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "A", A)

    @property
    def m(self):
        return self.B.shape[0]

    @property
    def n(self):
        return self.A.shape[1]

    @property
    def r(self):
        return self.B.shape[1]

    @property
    def shape(self):
        return (self.m, self.n)

    def product(self):
        return self.B @ self.A


@dataclass(frozen=True)
class FactorDirection:
    """A tangent direction ``(P, Q)`` in factor space."""

    P: np.ndarray
    Q: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "P", _as_matrix(self.P, "P"))
        object.__setattr__(self, "Q", _as_matrix(self.Q, "Q"))

    @classmethod
    def zeros_like(cls, fp):
        return cls(np.zeros_like(fp.B), np.zeros_like(fp.A))

    def __add__(self, other):
        return FactorDirection(self.P + other.P, self.Q + other.Q)

    def __sub__(self, other):
        return FactorDirection(self.P - other.P, self.Q - other.Q)

    def __mul__(self, scalar):
        return FactorDirection(scalar * self.P, scalar * self.Q)

    __rmul__ = __mul__

    def inner(self, other):
        return float(np.vdot(self.P, other.P) + np.vdot(self.Q, other.Q))

    def norm(self):
        return float(np.sqrt(self.inner(self)))

    def vec(self):
        """Column-major stacking ``[vec(P); vec(Q)]``."""
        return np.concatenate([self.P.ravel(order="F"), self.Q.ravel(order="F")])


def check_direction(fp, d):
    if d.P.shape != fp.B.shape or d.Q.shape != fp.A.shape:
        raise ContractError(
            f"direction shapes {d.P.shape}, {d.Q.shape} do not match factors "
            f"{fp.B.shape}, {fp.A.shape}"
        )


def check_wspace(fp, C, name="C"):
    C = np.asarray(C, dtype=np.float64)
    if C.shape != fp.shape:
        raise ContractError(f"{name} has shape {C.shape}, expected {fp.shape}")
    return C


def apply_jacobian(fp, d):
    """``P A + B Q``."""
    check_direction(fp, d)
    return d.P @ fp.A + fp.B @ d.Q


def apply_adjoint(fp, C):
    """``(C A^T, B^T C)``; the Frobenius adjoint of :func:`apply_jacobian`."""
    C = check_wspace(fp, C)
    return FactorDirection(C @ fp.A.T, fp.B.T @ C)


def jacobian_gram_w(fp, C):
    """``J J^*(C) = C A^T A + B B^T C``."""
    C = check_wspace(fp, C)
    return C @ fp.A.T @ fp.A + fp.B @ (fp.B.T @ C)


def jacobian_gram_factor(fp, d):
    """``J^* J (P, Q) = (P A A^T + B Q A^T, B^T P A + B^T B Q)``."""
    check_direction(fp, d)
    B, A = fp.B, fp.A
    return FactorDirection(
        d.P @ (A @ A.T) + B @ d.Q @ A.T,
        B.T @ d.P @ A + (B.T @ B) @ d.Q,
    )


def kernel_direction(fp, X):
    """The gauge direction ``(B X, -X A)``, annihilated by the Jacobian."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape != (fp.r, fp.r):
        raise ContractError(f"X has shape {X.shape}, expected {(fp.r, fp.r)}")
    return FactorDirection(fp.B @ X, -X @ fp.A)


def kernel_basis(fp):
    """Directions ``kernel_direction(fp, E_ij)`` for the r^2 unit matrices, column-major in (i, j)."""
    r = fp.r
    out = []
    for j in range(r):
        for i in range(r):
            E = np.zeros((r, r))
            E[i, j] = 1.0
            out.append(kernel_direction(fp, E))
    return out


def vectorized_jacobian(fp):
    """Dense ``(m n) x ((m + n) r)`` matrix of the Jacobian.

    Rows index ``vec(C)`` and columns index ``[vec(P); vec(Q)]``, all
    column-major, so ``J @ d.vec() == vec(apply_jacobian(fp, d))``.
    """
    m, n, r = fp.m, fp.n, fp.r
    # vec(P A) = (A^T kron I_m) vec(P);  vec(B Q) = (I_n kron B) vec(Q)
    return np.hstack([np.kron(fp.A.T, np.eye(m)), np.kron(np.eye(n), fp.B)])


def vec(M):
    return np.asarray(M).ravel(order="F")


def unvec(v, shape):
    return np.asarray(v).reshape(shape, order="F")


def direction_from_vec(fp, v):
    k = fp.m * fp.r
    return FactorDirection(unvec(v[:k], fp.B.shape), unvec(v[k:], fp.A.shape))


def numerical_rank(M, rtol=1e-8):
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))
