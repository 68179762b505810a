"""Seeded synthetic tables used by the test-suite, the README demos and ``ltcn make-data``."""

from __future__ import annotations

import numpy as np

from .dataset import RawTable


def _names(m):
    return [f"f{j + 1}" for j in range(m)]


def blobs(n: int = 200, seed: int = 0, spread: float = 0.6, sd: float = 0.1) -> RawTable:
    """Two well-separated Gaussian blobs in 2-D, classes ``a``/``b`` alternating."""
    rng = np.random.default_rng(seed)
    labels = np.where(np.arange(n) % 2 == 0, "a", "b")
    centers = np.where(labels[:, None] == "a", 0.5 - spread / 2, 0.5 + spread / 2)
    X = centers + rng.normal(0.0, sd, (n, 2))
    return RawTable(X, labels.tolist(), _names(2))


def collapsing(n: int = 200, seed: int = 0, majority: float = 0.6) -> RawTable:
    """Separable classes whose learned inner map contracts to a unique fixed point.

    ``f1`` separates the classes; ``f2`` is independent uniform noise. With no
    correlation between the features the unsupervised regressions return
    near-zero weights, so the recurrence at ``phi = 1`` forgets the input and
    every instance is driven to the same state.
    """
    rng = np.random.default_rng(seed)
    n_a = int(round(n * majority))
    labels = np.array(["a"] * n_a + ["b"] * (n - n_a))
    rng.shuffle(labels)
    f1 = np.where(labels == "a", rng.uniform(0.0, 0.4, n), rng.uniform(0.6, 1.0, n))
    f2 = rng.uniform(0.0, 1.0, n)
    return RawTable(np.column_stack([f1, f2]), labels.tolist(), _names(2))


def xor(n: int = 200, seed: int = 0, sd: float = 0.08) -> RawTable:
    """Four blobs at the corners of a square; opposite corners share a class."""
    rng = np.random.default_rng(seed)
    corner = rng.integers(0, 4, n)
    centers = np.array([[0.25, 0.25], [0.75, 0.75], [0.25, 0.75], [0.75, 0.25]])
    X = centers[corner] + rng.normal(0.0, sd, (n, 2))
    labels = np.where(corner < 2, "a", "b")
    return RawTable(X, labels.tolist(), _names(2))


def linear(n: int = 200, seed: int = 0, m: int = 3, margin: float = 0.1) -> RawTable:
    """Classes split by a hyperplane, with a gap of ``margin`` around it."""
    rng = np.random.default_rng(seed)
    w = np.linspace(1.0, -1.0, m) + 0.5
    rows = []
    while len(rows) < n:
        x = rng.uniform(0.0, 1.0, m)
        score = x @ w - w.sum() / 2
        if abs(score) >= margin:
            rows.append((x, "a" if score > 0 else "b"))
    X = np.array([r[0] for r in rows])
    return RawTable(X, [r[1] for r in rows], _names(m))


def phishing_like(n: int = 5000, m: int = 48, seed: int = 0) -> RawTable:
    """Binary problem at the scale of the phishing case study.

    Features are driven by a few latent factors; some are rounded to counts
    and some thresholded to flags, which mimics URL/page statistics.
    """
    rng = np.random.default_rng(seed)
    latent = rng.normal(size=(n, 6))
    F = latent @ rng.normal(size=(6, m)) + rng.normal(size=(n, m))
    F[:, ::3] = np.round(np.abs(F[:, ::3]))
    F[:, 1::5] = (F[:, 1::5] > 0).astype(float)
    p = 1.0 / (1.0 + np.exp(-2.0 * (latent @ rng.normal(size=6))))
    labels = np.where(rng.uniform(size=n) < p, "phishing", "legitimate")
    return RawTable(F, labels.tolist(), _names(m))


GENERATORS = {
    "blobs": blobs,
    "collapsing": collapsing,
    "xor": xor,
    "linear": linear,
    "phishing": phishing_like,
}
