"""Quasi-nonlinear recurrent reasoning and attractor detection.

The update rule mixes the transferred recurrent signal with the initial
activation::

    A(t) = phi * f(A(t-1) W + B) + (1 - phi) * A(0)

``phi = 1`` gives the classic long-term recurrence, ``phi = 0`` freezes the
state at the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .transfer import TransferFunction

FIXED_POINT = "fixed_point"
LIMIT_CYCLE = "limit_cycle"
NON_CONVERGENT = "non_convergent"


class DivergenceError(ArithmeticError):
    """A non-finite state appeared during reasoning."""


@dataclass(frozen=True)
class ReasoningConfig:
    phi: float = 0.8
    max_iterations: int = 20
    tol: float = 1e-5
    cycle_window: int = 10
    tf: TransferFunction = field(default_factory=TransferFunction)

    def __post_init__(self):
        if not 0.0 <= self.phi <= 1.0:
            raise ValueError(f"phi must lie in [0, 1], got {self.phi}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ValueError(f"max_iterations must be a positive integer, got {self.max_iterations}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.cycle_window < 1:
            raise ValueError(f"cycle_window must be positive, got {self.cycle_window}")


@dataclass(frozen=True)
class Attractor:
    kind: str
    t_alpha: int | None = None
    period: int | None = None

    def __str__(self):
        if self.kind == FIXED_POINT:
            return f"{FIXED_POINT}@{self.t_alpha}"
        if self.kind == LIMIT_CYCLE:
            return f"{LIMIT_CYCLE}@{self.t_alpha}/P={self.period}"
        return NON_CONVERGENT


@dataclass(frozen=True)
class StateHistory:
    states: tuple[np.ndarray, ...]
    attractor: Attractor

    @property
    def iterations(self) -> int:
        return len(self.states) - 1

    def deltas(self) -> list[float]:
        """Max-abs change between consecutive states, one per iteration."""
        return [_max_abs(b - a) for a, b in zip(self.states[:-1], self.states[1:])]


def _max_abs(a) -> float:
    return float(np.max(np.abs(a))) if a.size else 0.0


def step(A_prev, A0, W, B, phi: float, tf: TransferFunction) -> np.ndarray:
    A_prev = np.asarray(A_prev, dtype=float)
    A0 = np.asarray(A0, dtype=float)
    W = np.asarray(W, dtype=float)
    B = np.asarray(B, dtype=float).reshape(1, -1)
    m = A0.shape[1]
    if A_prev.shape != A0.shape or W.shape != (m, m) or B.shape[1] != m:
        raise ValueError(
            f"shape mismatch: A_prev {A_prev.shape}, A0 {A0.shape}, W {W.shape}, B {B.shape}")
    if phi == 0.0:
        return A0.copy()
    return phi * tf.forward(A_prev @ W + B) + (1.0 - phi) * A0


def classify_attractor(states, tol: float, cycle_window: int) -> Attractor:
    """Label the tail of a finite trace.

    Fixed point when the last two states agree within ``tol``; otherwise the
    smallest period ``P <= cycle_window`` whose lagged state matches the
    last one; otherwise non-convergent (chaos is not decidable from a
    finite trace).
    """
    if len(states) < 2:
        raise ValueError("need at least two states")
    t = len(states) - 1
    last = states[-1]
    if _max_abs(last - states[-2]) <= tol:
        return Attractor(FIXED_POINT, t_alpha=t)
    for period in range(2, min(cycle_window, t) + 1):
        if _max_abs(last - states[t - period]) <= tol:
            return Attractor(LIMIT_CYCLE, t_alpha=t - period, period=period)
    return Attractor(NON_CONVERGENT)


def run(X, W, B, config: ReasoningConfig, iterations: int | None = None) -> StateHistory:
    """Iterate the reasoning rule from ``A(0) = X``.

    With ``iterations=None`` the loop stops at the first detected fixed point
    or limit cycle, else after ``config.max_iterations`` steps. With an
    explicit count the loop runs exactly that many steps (prediction must
    reproduce the fit-time width of the state history).
    """
    X = np.asarray(X, dtype=float)
    states = [X]
    fixed = iterations is not None
    n_steps = iterations if fixed else config.max_iterations
    attractor = None
    for _ in range(n_steps):
        A = step(states[-1], X, W, B, config.phi, config.tf)
        if not np.all(np.isfinite(A)):
            raise DivergenceError(f"non-finite state at iteration {len(states)}")
        states.append(A)
        if not fixed:
            attractor = classify_attractor(states, config.tol, config.cycle_window)
            if attractor.kind != NON_CONVERGENT:
                break
    if fixed:
        attractor = (classify_attractor(states, config.tol, config.cycle_window)
                     if len(states) > 1 else Attractor(NON_CONVERGENT))
    return StateHistory(tuple(states), attractor)


def concat_history(history) -> np.ndarray:
    """Column-wise blocks ``[A(0) | A(1) | ... | A(s)]``."""
    states = history.states if isinstance(history, StateHistory) else tuple(history)
    if not states:
        raise ValueError("empty history")
    return np.hstack(states)
