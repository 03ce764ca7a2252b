"""Optimization machinery: Adam, EMA shadowing, plateau LR scheduling.

All three mutate their state objects in place and return them; parameter
arrays are updated in place as well (single-writer training loop).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(
        cls, params: list[np.ndarray], beta1: float = 0.9, beta2: float = 0.999,
        eps: float = 1e-8,
    ) -> "AdamState":
        return cls(
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            beta1=float(beta1),
            beta2=float(beta2),
            eps=float(eps),
        )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, in place."""
    lr = float(lr)
    if not math.isfinite(lr) or lr < 0.0:
        raise ValueError(f"learning rate must be finite and non-negative, got {lr}")
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("parameter/gradient/state length mismatch")
    for p, g in zip(params, grads):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient")
    state.step += 1
    bc1 = 1.0 - state.beta1**state.step
    bc2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


@dataclass
class EmaState:
    """Shadow copy of the parameters, updated geometrically on a step grid."""

    shadow: list[np.ndarray]
    decay: float = 0.995
    start_step: int = 0
    update_interval: int = 16

    @classmethod
    def from_params(
        cls, params: list[np.ndarray], decay: float = 0.995,
        start_step: int = 0, update_interval: int = 16,
    ) -> "EmaState":
        if not 0.0 <= decay < 1.0:
            raise ValueError(f"EMA decay must lie in [0, 1), got {decay}")
        if update_interval < 1:
            raise ValueError(f"EMA update interval must be >= 1, got {update_interval}")
        return cls(
            shadow=[np.array(p, dtype=np.float64) for p in params],
            decay=float(decay),
            start_step=int(start_step),
            update_interval=int(update_interval),
        )


def ema_update(ema: EmaState, params: list[np.ndarray], step: int) -> EmaState:
    """Fold the current parameters into the shadow; no-op before start_step
    or off the update interval."""
    if step < ema.start_step:
        return ema
    if step % ema.update_interval != 0:
        return ema
    if len(params) != len(ema.shadow):
        raise ValueError("parameter/shadow length mismatch")
    for s, p in zip(ema.shadow, params):
        if s.shape != p.shape:
            raise ValueError(f"shadow shape {s.shape} does not match parameter {p.shape}")
        s *= ema.decay
        s += (1.0 - ema.decay) * p
    return ema


@dataclass
class PlateauLrState:
    """Reduce-on-plateau state; metric improvements are judged against the
    best seen so far minus an absolute threshold."""

    current_lr: float
    max_lr: float
    min_lr: float = 5.0e-7
    factor: float = 0.5
    patience: int = 3000
    cooldown: int = 2000
    threshold: float = 1.0e-4
    best_metric: float = math.inf
    bad_count: int = 0
    cooldown_count: int = 0

    @classmethod
    def create(
        cls, max_lr: float, min_lr: float = 5.0e-7, factor: float = 0.5,
        patience: int = 3000, cooldown: int = 2000, threshold: float = 1.0e-4,
    ) -> "PlateauLrState":
        if not 0.0 < factor < 1.0:
            raise ValueError(f"factor must lie in (0, 1), got {factor}")
        if min_lr > max_lr:
            raise ValueError(f"min_lr {min_lr} exceeds max_lr {max_lr}")
        return cls(
            current_lr=float(max_lr),
            max_lr=float(max_lr),
            min_lr=float(min_lr),
            factor=float(factor),
            patience=int(patience),
            cooldown=int(cooldown),
            threshold=float(threshold),
        )


def plateau_lr_step(state: PlateauLrState, metric: float) -> PlateauLrState:
    """Record one metric observation, cutting the rate after `patience`
    non-improving observations outside a cooldown window."""
    metric = float(metric)
    if not math.isfinite(metric):
        raise ValueError(f"plateau metric must be finite, got {metric}")
    if metric < state.best_metric - state.threshold:
        state.best_metric = metric
        state.bad_count = 0
        if state.cooldown_count > 0:
            state.cooldown_count -= 1
        return state
    if state.cooldown_count > 0:
        state.cooldown_count -= 1
        state.bad_count = 0
        return state
    state.bad_count += 1
    if state.bad_count >= state.patience:
        state.current_lr = max(state.current_lr * state.factor, state.min_lr)
        state.cooldown_count = state.cooldown
        state.bad_count = 0
    return state
