"""Transfer functions, their inverses and inverse-friendly clipping."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit, logit

KINDS = ("sigmoid", "tanh")

DEFAULT_EPSILON = 1e-3


class TransferDomainError(ValueError):
    """Raised when an inverse is requested outside the open activation range."""


@dataclass(frozen=True)
class TransferFunction:
    """Network-wide nonlinearity.

    ``epsilon`` sets the margin kept from the ends of the activation range so
    that the inverse stays finite; it is shared by target encoding and by
    clipping of the inner regression targets.
    """

    kind: str = "sigmoid"
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown transfer function {self.kind!r}; expected one of {KINDS}")
        if not 0.0 < self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")

    @property
    def bounds(self) -> tuple[float, float]:
        """Open activation range (lo, hi)."""
        return (0.0, 1.0) if self.kind == "sigmoid" else (-1.0, 1.0)

    @property
    def clip_low(self) -> float:
        return self.epsilon if self.kind == "sigmoid" else -(1.0 - self.epsilon)

    @property
    def clip_high(self) -> float:
        return 1.0 - self.epsilon

    def forward(self, z):
        z = np.asarray(z, dtype=float)
        if self.kind == "sigmoid":
            return expit(z)
        return np.tanh(z)

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        lo, hi = self.bounds
        if not np.all((y > lo) & (y < hi)):
            raise TransferDomainError(
                f"{self.kind} inverse needs values strictly inside ({lo}, {hi})")
        if self.kind == "sigmoid":
            return logit(y)
        return np.arctanh(y)

    def clip(self, y):
        """Clamp ``y`` into [clip_low, clip_high]; interior values pass through."""
        return np.clip(np.asarray(y, dtype=float), self.clip_low, self.clip_high)


def get(kind: str, epsilon: float = DEFAULT_EPSILON) -> TransferFunction:
    return TransferFunction(kind, epsilon)
