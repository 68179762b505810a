"""Closed-form parameter estimation.

Inner weights come from M independent least-squares problems, each one
reconstructing a feature (in pre-activation space) from the others. Outer
weights map the concatenated temporal states to the decision neurons through
a Moore-Penrose pseudoinverse.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .transfer import TransferFunction

log = logging.getLogger(__name__)

# Gram matrices above this condition estimate go through pinv instead of solve.
GRAM_COND_LIMIT = 1e12


@dataclass(frozen=True)
class InnerWeights:
    W: np.ndarray
    B: np.ndarray

    @property
    def n_features(self) -> int:
        return self.W.shape[0]


@dataclass(frozen=True)
class OuterWeights:
    R: np.ndarray
    Q: np.ndarray
    s: int

    def blocks(self, n_features: int) -> np.ndarray:
        """R split into per-state blocks, shape (n_blocks, M, N)."""
        return self.R.reshape(-1, n_features, self.R.shape[1])


def pinv(H) -> np.ndarray:
    """Moore-Penrose pseudoinverse by SVD.

    Singular values below ``max(P, D) * eps * sigma_max`` are treated as zero.
    """
    H = np.asarray(H, dtype=float)
    p, d = H.shape
    if H.size == 0:
        return np.zeros((d, p))
    U, sv, Vt = np.linalg.svd(H, full_matrices=False)
    cutoff = max(p, d) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    keep = sv > cutoff
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep]
    return (Vt.T * inv) @ U.T


def _solve_normal(G, rhs, A, y) -> np.ndarray:
    if np.linalg.cond(G) <= GRAM_COND_LIMIT:
        return np.linalg.solve(G, rhs)
    log.debug("ill-conditioned Gram matrix, falling back to pinv")
    return pinv(A) @ y


def fit_inner(X, tf: TransferFunction) -> InnerWeights:
    """Unsupervised inner weights.

    Column ``i`` of ``W`` and ``B[i]`` are the coefficients of the regression
    ``f^-1(clip(X[:, i])) ~ b_i + X[:, others] @ w``. The diagonal stays 0.
    """
    X = np.asarray(X, dtype=float)
    k, m = X.shape
    targets = tf.inverse(tf.clip(X))
    if not np.all(np.isfinite(targets)):
        raise ArithmeticError("non-finite inner regression target")
    W = np.zeros((m, m))
    B = np.zeros(m)
    if m == 1:
        B[0] = targets[:, 0].mean()
        return InnerWeights(W, B)

    A = np.hstack([np.ones((k, 1)), X])
    gram = A.T @ A
    cross = A.T @ targets
    for i in range(m):
        cols = np.r_[0, [j + 1 for j in range(m) if j != i]]
        others = cols[1:] - 1
        beta = _solve_normal(gram[np.ix_(cols, cols)], cross[cols, i], A[:, cols], targets[:, i])
        B[i] = beta[0]
        W[others, i] = beta[1:]
    return InnerWeights(W, B)


def fit_outer(H, Y, tf: TransferFunction, s: int = 0) -> OuterWeights:
    """Supervised outer weights: ``[R; Q] = pinv([H | 1]) @ f^-1(Y)``."""
    H = np.asarray(H, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if H.shape[0] != Y.shape[0]:
        raise ValueError(f"row mismatch: H has {H.shape[0]} rows, Y has {Y.shape[0]}")
    H1 = np.hstack([H, np.ones((H.shape[0], 1))])
    omega = pinv(H1) @ tf.inverse(Y)
    return OuterWeights(omega[:-1], omega[-1], s)
