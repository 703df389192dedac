"""Optimizer steps on low-rank factors.

Each ``step_*`` function is pure: it takes the current factors, optimizer
state and W-space gradient and returns new values. The :class:`Optimizer`
wrappers at the bottom hold state between steps for the benchmark harness.
"""
import enum
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from . import _backend
from .errors import ContractError
from .generator import FactorPair
from .precond import (
    DEFAULT_DECAY,
    DEFAULT_EPS,
    AdafactorState,
    DiagWeights,
    build_weights,
    check_finite,
    update_stats,
)
from .solver import closed_form_factors, surrogate_gradient

log = logging.getLogger(__name__)

# Domain-separation constant mixed into the seed for factor initialization.
INIT_STREAM = 0x494E4954

_warned_decays = set()


class MomentumMode(str, enum.Enum):
    NONE = "none"
    W_SPACE = "w_space"
    FACTOR_SPACE = "factor_space"


class GradientSource(str, enum.Enum):
    EXACT = "exact"
    SURROGATE = "surrogate"


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float
    weight_decay: float = 0.0
    decay_row: float = DEFAULT_DECAY
    decay_col: float = DEFAULT_DECAY
    momentum_decay: float = 0.9
    eps: float = DEFAULT_EPS
    momentum_mode: MomentumMode = MomentumMode.NONE
    gradient_source: GradientSource = GradientSource.EXACT

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ContractError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.weight_decay < 0:
            raise ContractError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        for name in ("decay_row", "decay_col", "momentum_decay"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ContractError(f"{name} must lie in [0, 1], got {value}")
        if not self.eps > 0:
            raise ContractError(f"eps must be positive, got {self.eps}")
        try:
            object.__setattr__(self, "momentum_mode", MomentumMode(self.momentum_mode))
            object.__setattr__(self, "gradient_source", GradientSource(self.gradient_source))
        except ValueError as exc:
            raise ContractError(str(exc)) from None

    def new_adafactor_state(self, m, n):
        return AdafactorState.zeros(m, n, self.decay_row, self.decay_col, self.eps)


@dataclass(frozen=True)
class MomentumState:
    mode: MomentumMode
    M: Optional[np.ndarray] = None
    M_B: Optional[np.ndarray] = None
    M_A: Optional[np.ndarray] = None
    step_count: int = 0

    @classmethod
    def zeros(cls, fp, mode):
        mode = MomentumMode(mode)
        if mode is MomentumMode.W_SPACE:
            return cls(mode, M=np.zeros(fp.shape))
        if mode is MomentumMode.FACTOR_SPACE:
            return cls(mode, M_B=np.zeros_like(fp.B), M_A=np.zeros_like(fp.A))
        raise ContractError("momentum state needs mode 'w_space' or 'factor_space'")

    @property
    def n_scalars(self):
        if self.mode is MomentumMode.W_SPACE:
            return self.M.size
        return self.M_B.size + self.M_A.size


def init_factors(m, n, r, seed):
    """``B = 0`` and ``A`` uniform on ``[-1/sqrt(n), 1/sqrt(n)]``.

    The generator is NumPy's PCG64 seeded from ``SeedSequence([seed, INIT_STREAM])``.
    """
    if min(m, n, r) < 1 or r > min(m, n):
        raise ContractError(f"need 1 <= r <= min(m, n), got m={m}, n={n}, r={r}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), INIT_STREAM]))
    bound = 1.0 / np.sqrt(n)
    return FactorPair(np.zeros((m, r)), rng.uniform(-bound, bound, size=(r, n)))


def _prepare_gradient(fp, G, cfg):
    G = np.asarray(G, dtype=np.float64)
    if G.shape != fp.shape:
        raise ContractError(f"gradient has shape {G.shape}, factors span {fp.shape}")
    check_finite(G)
    if cfg.gradient_source is GradientSource.SURROGATE:
        G = surrogate_gradient(fp, G)
    return G


def step_adaprelora_sgd(fp, state, G, cfg):
    """One AdaPreLoRA step with a constant learning rate (no decay, no bias correction)."""
    G = _prepare_gradient(fp, G, cfg)
    state = update_stats(state, G)
    w = build_weights(state)
    G_B, G_A = _backend.kernels.factor_grads(G, fp.B, fp.A)
    dB, dA = closed_form_factors(fp, w, G_B, G_A, cfg.eps)
    eta = cfg.learning_rate
    return FactorPair(fp.B - eta * dB, fp.A - eta * dA), state


def bias_correction(t, decay_row, momentum_decay):
    """``sqrt(1 - decay_row^t) / (1 - momentum_decay^t)``."""
    if momentum_decay >= 1.0:
        raise ContractError("momentum_decay must be < 1 for bias correction")
    return np.sqrt(1.0 - decay_row**t) / (1.0 - momentum_decay**t)


def step_adaprelora_momentum(fp, state, mstate, G, cfg):
    """AdaPreLoRA with first-moment averaging, bias correction and decoupled weight decay."""
    G = _prepare_gradient(fp, G, cfg)
    if mstate.mode is not cfg.momentum_mode:
        raise ContractError(
            f"momentum state is {mstate.mode.value}, config asks for {cfg.momentum_mode.value}"
        )
    if cfg.decay_row != cfg.decay_col and (cfg.decay_row, cfg.decay_col) not in _warned_decays:
        _warned_decays.add((cfg.decay_row, cfg.decay_col))
        log.warning("bias correction uses decay_row=%g; decay_col=%g is ignored there",
                    cfg.decay_row, cfg.decay_col)
    beta = cfg.momentum_decay
    t = mstate.step_count + 1
    state = update_stats(state, G)
    w = build_weights(state)

    if mstate.mode is MomentumMode.W_SPACE:
        M = beta * mstate.M + (1.0 - beta) * G
        mstate = replace(mstate, M=M, step_count=t)
        G_B, G_A = _backend.kernels.factor_grads(M, fp.B, fp.A)
    else:
        G_B, G_A = _backend.kernels.factor_grads(G, fp.B, fp.A)
        M_B = beta * mstate.M_B + (1.0 - beta) * G_B
        M_A = beta * mstate.M_A + (1.0 - beta) * G_A
        mstate = replace(mstate, M_B=M_B, M_A=M_A, step_count=t)
        G_B, G_A = M_B, M_A

    dB, dA = closed_form_factors(fp, w, G_B, G_A, cfg.eps)
    eta = cfg.learning_rate
    scale = eta * bias_correction(t, cfg.decay_row, beta)
    shrink = 1.0 - cfg.weight_decay * eta
    return FactorPair(shrink * fp.B - scale * dB, shrink * fp.A - scale * dA), state, mstate


def step_factor_sgd(fp, G, cfg):
    """Plain gradient descent on the factor gradients."""
    G = np.asarray(G, dtype=np.float64)
    if G.shape != fp.shape:
        raise ContractError(f"gradient has shape {G.shape}, factors span {fp.shape}")
    check_finite(G)
    G_B, G_A = _backend.kernels.factor_grads(G, fp.B, fp.A)
    eta = cfg.learning_rate
    return FactorPair(fp.B - eta * G_B, fp.A - eta * G_A)


def step_scaled_gd(fp, G, cfg):
    """``B -= eta G_B (A A^T + eps I)^{-1}``, ``A -= eta (B^T B + eps I)^{-1} G_A``."""
    G = np.asarray(G, dtype=np.float64)
    if G.shape != fp.shape:
        raise ContractError(f"gradient has shape {G.shape}, factors span {fp.shape}")
    check_finite(G)
    B, A = fp.B, fp.A
    G_B, G_A = _backend.kernels.factor_grads(G, B, A)
    eye = cfg.eps * np.eye(fp.r)
    ca = cho_factor(A @ A.T + eye, lower=True)
    cb = cho_factor(B.T @ B + eye, lower=True)
    eta = cfg.learning_rate
    return FactorPair(B - eta * cho_solve(ca, G_B.T).T, A - eta * cho_solve(cb, G_A))


def step_identity_projected(fp, G, cfg):
    """Balance-optimal update under the Frobenius metric (identity weights)."""
    G = _prepare_gradient(fp, G, cfg)
    w = DiagWeights.identity(fp.m, fp.n)
    G_B, G_A = _backend.kernels.factor_grads(G, fp.B, fp.A)
    dB, dA = closed_form_factors(fp, w, G_B, G_A, cfg.eps)
    eta = cfg.learning_rate
    return FactorPair(fp.B - eta * dB, fp.A - eta * dA)


class Optimizer:
    """Stateful wrapper used by the harness: ``fp = opt.step(fp, G)``."""

    name = ""

    def __init__(self, cfg, m, n, r):
        self.cfg = cfg
        self.shape = (m, n, r)

    def step(self, fp, G):
        raise NotImplementedError

    def state_size(self):
        """Number of float scalars of optimizer state (excluding the factors)."""
        return 0


class AdaPreLoRASGD(Optimizer):
    name = "adaprelora_sgd"

    def __init__(self, cfg, m, n, r):
        super().__init__(cfg, m, n, r)
        self.state = cfg.new_adafactor_state(m, n)

    def step(self, fp, G):
        fp, self.state = step_adaprelora_sgd(fp, self.state, G, self.cfg)
        return fp

    def state_size(self):
        return self.state.n_scalars


class AdaPreLoRAMomentum(Optimizer):
    name = "adaprelora_momentum"

    def __init__(self, cfg, m, n, r):
        if cfg.momentum_mode is MomentumMode.NONE:
            cfg = replace(cfg, momentum_mode=MomentumMode.W_SPACE)
        super().__init__(cfg, m, n, r)
        self.state = cfg.new_adafactor_state(m, n)
        probe = FactorPair(np.zeros((m, r)), np.zeros((r, n)))
        self.mstate = MomentumState.zeros(probe, cfg.momentum_mode)

    def step(self, fp, G):
        fp, self.state, self.mstate = step_adaprelora_momentum(
            fp, self.state, self.mstate, G, self.cfg
        )
        return fp

    def state_size(self):
        return self.state.n_scalars + self.mstate.n_scalars


class FactorSGD(Optimizer):
    name = "factor_sgd"

    def step(self, fp, G):
        return step_factor_sgd(fp, G, self.cfg)


class ScaledGD(Optimizer):
    name = "scaled_gd"

    def step(self, fp, G):
        return step_scaled_gd(fp, G, self.cfg)


class IdentityProjected(Optimizer):
    name = "identity_projected"

    def step(self, fp, G):
        return step_identity_projected(fp, G, self.cfg)


OPTIMIZERS = {
    cls.name: cls
    for cls in (AdaPreLoRASGD, AdaPreLoRAMomentum, FactorSGD, ScaledGD, IdentityProjected)
}


def make_optimizer(name, cfg, m, n, r):
    try:
        cls = OPTIMIZERS[name]
    except KeyError:
        raise ContractError(f"unknown optimizer {name!r}; expected one of {sorted(OPTIMIZERS)}") from None
    return cls(cfg, m, n, r)
