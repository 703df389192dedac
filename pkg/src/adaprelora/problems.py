"""Synthetic quadratic objectives over ``W = W0 + B A`` with exact gradients.

``recovery``: ``1/2 ||W0 + B A - T||_F^2`` where ``T - W0`` has a planted
low-rank spectrum spaced geometrically from ``kappa * s_min`` down to
``s_min``.

``sensing``: ``1/2 sum_i (<M_i, W0 + B A> - y_i)^2`` with standard-normal
measurement matrices and noiseless observations of the same planted model.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ContractError

KINDS = ("recovery", "sensing")
S_MIN = 1.0
SENSING_OVERSAMPLING = 5

# Domain-separation constant mixed into the seed for problem generation.
PROBLEM_STREAM = 0x50524F42


@dataclass(frozen=True)
class ProblemInstance:
    kind: str
    W0: np.ndarray
    planted: np.ndarray
    condition_number: float
    planted_rank: int
    seed: int
    target: Optional[np.ndarray] = None
    measurements: Optional[np.ndarray] = None
    observations: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.W0.shape

    def params(self):
        """Parameters sufficient to regenerate the instance (no raw matrices)."""
        m, n = self.shape
        return {
            "kind": self.kind,
            "m": m,
            "n": n,
            "planted_rank": self.planted_rank,
            "condition_number": self.condition_number,
            "seed": self.seed,
        }


def _orthonormal(rng, rows, cols):
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q


def planted_spectrum(planted_rank, condition_number):
    return S_MIN * np.geomspace(condition_number, 1.0, planted_rank)


def make_problem(kind, m, n, planted_rank, condition_number, seed):
    if kind not in KINDS:
        raise ContractError(f"unknown problem kind {kind!r}; expected one of {KINDS}")
    if min(m, n) < 1 or not 1 <= planted_rank <= min(m, n):
        raise ContractError(
            f"need 1 <= planted_rank <= min(m, n), got m={m}, n={n}, planted_rank={planted_rank}"
        )
    if not condition_number >= 1.0:
        raise ContractError(f"condition number must be >= 1, got {condition_number}")

    rng = np.random.default_rng(np.random.SeedSequence([int(seed), PROBLEM_STREAM]))
    W0 = rng.standard_normal((m, n)) / np.sqrt(n)
    U = _orthonormal(rng, m, planted_rank)
    V = _orthonormal(rng, n, planted_rank)
    s = planted_spectrum(planted_rank, float(condition_number))
    planted = (U * s[None, :]) @ V.T
    common = dict(
        W0=W0,
        planted=planted,
        condition_number=float(condition_number),
        planted_rank=int(planted_rank),
        seed=int(seed),
    )
    if kind == "recovery":
        return ProblemInstance(kind, target=W0 + planted, **common)

    count = SENSING_OVERSAMPLING * planted_rank * (m + n)
    M = rng.standard_normal((count, m, n))
    y = np.tensordot(M, W0 + planted, axes=([1, 2], [0, 1]))
    return ProblemInstance(kind, measurements=M, observations=y, **common)


def loss_and_gradient(p, fp):
    """Loss value and exact W-space gradient at the factors ``fp``."""
    if fp.shape != p.shape:
        raise ContractError(f"factors span {fp.shape}, problem is {p.shape}")
    W = p.W0 + fp.B @ fp.A
    if p.kind == "recovery":
        R = W - p.target
        return 0.5 * float(np.vdot(R, R)), R
    res = np.tensordot(p.measurements, W, axes=([1, 2], [0, 1])) - p.observations
    G = np.tensordot(res, p.measurements, axes=(0, 0))
    return 0.5 * float(res @ res), G
