"""Two-group training: INR parameters step with Adam, filter parameters step
along the negative gradient with a learning rate chosen each iteration by a
linearised line search plus an Armijo-style override.

Sign convention: every direction ``p`` is a descent direction, ``p_A = -grad_A``,
and updates are ``theta <- theta + alpha * p``. With this choice the slope
``k = -<grad_A, p_A> + eps = |grad_A|^2 + eps`` is positive, so the negative-slope
branches of the case table only trigger when :func:`line_search_alpha` is
called directly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInputError, NumericAbort

NON_POS_INTERCEPT = "NonPosIntercept"
INTERIOR = "Interior"
NEG_SLOPE = "NegSlope"

LINE_SEARCH = "line_search"
SCHEDULE = "schedule"

Arrays = List[np.ndarray]


@dataclass(frozen=True)
class LineSearchConfig:
    alpha_max: float = 1e-3
    alpha_min: float = 0.0
    epsilon: float = 1e-6
    c1: float = 1e-3
    alpha_I: float = 1e-3
    # INR learning-rate schedule: "constant" or "lambda" (alpha_I * lambda_final ** (t/T))
    inr_schedule: str = "constant"
    lambda_final: float = 0.1
    total_iters: int = 1000
    # "line_search" or "schedule" (filter lr = alpha_max * lambda decay; the w/o-line-search ablation)
    filter_lr_mode: str = LINE_SEARCH
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8

    def validate(self):
        if not 0 <= self.alpha_min <= self.alpha_max:
            raise InvalidInputError("need 0 <= alpha_min <= alpha_max")
        if not self.epsilon > 0:
            raise InvalidInputError("epsilon must be positive")
        if not 0 < self.c1 < 1:
            raise InvalidInputError("c1 must lie in (0, 1)")
        if self.alpha_I < 0:
            raise InvalidInputError("alpha_I must be >= 0")
        if self.inr_schedule not in ("constant", "lambda"):
            raise InvalidInputError(f"unknown INR schedule {self.inr_schedule!r}")
        if self.filter_lr_mode not in (LINE_SEARCH, SCHEDULE):
            raise InvalidInputError(f"unknown filter lr mode {self.filter_lr_mode!r}")
        return self


def lambda_decay(t: int, total: int, final: float) -> float:
    return final ** min(t / max(total, 1), 1.0)


def inr_rate(cfg: LineSearchConfig, t: int) -> float:
    if cfg.inr_schedule == "lambda":
        return cfg.alpha_I * lambda_decay(t, cfg.total_iters, cfg.lambda_final)
    return cfg.alpha_I


def _dot(a: Sequence[np.ndarray], b: Sequence[np.ndarray]) -> float:
    return float(sum(np.vdot(x, y) for x, y in zip(a, b)))


def _all_finite(arrs) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrs)


# --------------------------------------------------------------------------
# Primitive steps
# --------------------------------------------------------------------------

def gd_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], alpha: float) -> Arrays:
    """``theta + alpha * p`` with ``p = -grad``."""
    if alpha < 0:
        raise InvalidInputError("alpha must be >= 0")
    if not _all_finite(grads):
        raise NumericAbort("non-finite gradient; step aborted")
    return [p - alpha * g for p, g in zip(params, grads)]


@dataclass
class AdamMoments:
    m: Arrays
    v: Arrays
    t: int = 0

    @classmethod
    def zeros_like(cls, arrays: Sequence[np.ndarray]) -> "AdamMoments":
        return cls([np.zeros_like(a) for a in arrays], [np.zeros_like(a) for a in arrays], 0)


def adam_direction(grads, moments: AdamMoments, beta1=0.9, beta2=0.999, eps=1e-8):
    """Bias-corrected Adam direction ``p = -m_hat / (sqrt(v_hat) + eps)``."""
    t = moments.t + 1
    m = [beta1 * mi + (1 - beta1) * g for mi, g in zip(moments.m, grads)]
    v = [beta2 * vi + (1 - beta2) * g * g for vi, g in zip(moments.v, grads)]
    c1 = 1 - beta1 ** t
    c2 = 1 - beta2 ** t
    p = [-(mi / c1) / (np.sqrt(vi / c2) + eps) for mi, vi in zip(m, v)]
    return p, AdamMoments(m, v, t)


def adam_step(params, grads, moments: AdamMoments, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    if not _all_finite(grads):
        raise NumericAbort("non-finite gradient; step aborted")
    p, new = adam_direction(grads, moments, beta1, beta2, eps)
    return [a + lr * d for a, d in zip(params, p)], new


# --------------------------------------------------------------------------
# Line search
# --------------------------------------------------------------------------

def compute_k_b(grad_A, p_A, grad_I, p_I, loss: float, cfg: LineSearchConfig, alpha_I: Optional[float] = None):
    """Slope and intercept of the linearised loss ``phi(alpha_A) ~ k alpha_A + b``."""
    a_i = cfg.alpha_I if alpha_I is None else alpha_I
    k = -_dot(grad_A, p_A) + cfg.epsilon
    b = float(loss) - a_i * _dot(grad_I, p_I)
    return k, b


def branch_of(k: float, b: float) -> str:
    if k >= 0 and b <= 0:
        return NON_POS_INTERCEPT
    if (k >= 0 and b >= 0) or (k <= 0 and b <= 0):
        return INTERIOR
    return NEG_SLOPE


def line_search_alpha(k: float, b: float, cfg: LineSearchConfig) -> Tuple[float, str]:
    branch = branch_of(k, b)
    if branch != INTERIOR:
        return cfg.alpha_min, branch
    root = abs(b / k) if k != 0 else math.inf
    return float(min(max(root, cfg.alpha_min), cfg.alpha_max)), branch


def armijo_guard(gApA: float, gIpI: float, c1: float) -> bool:
    return (c1 - 1.0) * gApA > (1.0 - c1) * gIpI


def armijo_adjust(gApA: float, gIpI: float, alpha_candidate: float, cfg: LineSearchConfig) -> float:
    """Sufficient-decrease override of the line-search candidate.

    When the guard holds the result is ``gIpI / gApA`` if both inner products
    share a sign, else ``alpha_min`` (also when ``gApA == 0``). The ratio is
    not clipped here.
    """
    if not armijo_guard(gApA, gIpI, cfg.c1):
        return alpha_candidate
    if gIpI * gApA > 0:
        return gIpI / gApA
    return cfg.alpha_min


# --------------------------------------------------------------------------
# Training loop
# --------------------------------------------------------------------------

Objective = Callable[[Arrays, Arrays, object], Tuple[float, Arrays, Arrays]]


@dataclass
class StepDiagnostics:
    k_slope: float
    b_intercept: float
    branch: str
    armijo_applied: bool
    alpha_A_used: float
    alpha_candidate: float
    alpha_pre_clip: float
    alpha_I: float
    loss: float
    gApA: float
    gIpI: float


@dataclass
class TrainState:
    filter_params: Arrays
    inr_params: Arrays
    moments: AdamMoments
    iteration: int = 0
    alpha_A_history: List[float] = field(default_factory=list)
    loss_history: List[float] = field(default_factory=list)
    inr_frozen: Optional[List[bool]] = None
    filter_frozen: Optional[List[bool]] = None

    @classmethod
    def start(cls, filter_params, inr_params, inr_frozen=None, filter_frozen=None) -> "TrainState":
        inr = [np.array(a, dtype=np.float64, copy=True) for a in inr_params]
        filt = [np.array(a, dtype=np.float64, copy=True) for a in filter_params]
        return cls(filt, inr, AdamMoments.zeros_like(inr), inr_frozen=inr_frozen, filter_frozen=filter_frozen)


def _zero_frozen(grads, frozen):
    if not frozen:
        return grads
    return [np.zeros_like(g) if f else g for g, f in zip(grads, frozen)]


def train_step(state: TrainState, batch, cfg: LineSearchConfig, objective: Objective):
    """One iteration. Returns ``(new_state, StepDiagnostics)``; ``state`` is untouched."""
    loss, g_A, g_I = objective(state.filter_params, state.inr_params, batch)
    loss = float(loss)
    if not math.isfinite(loss) or not _all_finite(g_A) or not _all_finite(g_I):
        raise NumericAbort(
            f"non-finite loss or gradient at iteration {state.iteration}",
            dump={"iteration": state.iteration, "loss": loss, "last_losses": state.loss_history[-5:]},
        )
    g_A = _zero_frozen(g_A, state.filter_frozen)
    g_I = _zero_frozen(g_I, state.inr_frozen)

    p_A = [-g for g in g_A]
    p_I, moments = adam_direction(g_I, state.moments, cfg.beta1, cfg.beta2, cfg.adam_eps)
    p_I = _zero_frozen(p_I, state.inr_frozen)
    a_I = inr_rate(cfg, state.iteration)

    gApA = _dot(g_A, p_A)
    gIpI = _dot(g_I, p_I)
    k, b = compute_k_b(g_A, p_A, g_I, p_I, loss, cfg, a_I)
    candidate, branch = line_search_alpha(k, b, cfg)
    if cfg.filter_lr_mode == LINE_SEARCH:
        applied = armijo_guard(gApA, gIpI, cfg.c1)
        raw = armijo_adjust(gApA, gIpI, candidate, cfg)
        alpha_A = float(min(max(raw, cfg.alpha_min), cfg.alpha_max))
    else:
        applied = False
        raw = cfg.alpha_max * lambda_decay(state.iteration, cfg.total_iters, cfg.lambda_final)
        alpha_A = raw

    new = TrainState(
        filter_params=[a + alpha_A * d for a, d in zip(state.filter_params, p_A)],
        inr_params=[a + a_I * d for a, d in zip(state.inr_params, p_I)],
        moments=moments,
        iteration=state.iteration + 1,
        alpha_A_history=state.alpha_A_history + [alpha_A],
        loss_history=state.loss_history + [loss],
        inr_frozen=state.inr_frozen,
        filter_frozen=state.filter_frozen,
    )
    diag = StepDiagnostics(k, b, branch, applied, alpha_A, candidate, float(raw), a_I, loss, gApA, gIpI)
    return new, diag
