"""The LTCN classifier: fitting, prediction, feature relevance and persistence."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dynamics
from .dataset import Dataset, MinMaxScaler, encode_targets
from .dynamics import Attractor, ReasoningConfig
from .learning import InnerWeights, OuterWeights, fit_inner, fit_outer
from .transfer import TransferFunction

RECURRENCE = "recurrence"
LAST_STATE = "laststate"
HEADS = (RECURRENCE, LAST_STATE)

FORMAT = "ltcn-model"
FORMAT_VERSION = 1


class ModelFormatError(ValueError):
    """The model file is malformed or from an unsupported format version."""


class UnsupportedOperation(RuntimeError):
    pass


@dataclass(frozen=True)
class RelevanceReport:
    features: tuple[str, ...]
    inner: np.ndarray
    outer: np.ndarray
    total: np.ndarray

    @property
    def scores(self) -> list[tuple[str, float]]:
        """(feature, score) pairs, most relevant first; ties keep feature order."""
        order = np.argsort(-self.total, kind="stable")
        return [(self.features[i], float(self.total[i])) for i in order]


@dataclass(frozen=True)
class LtcnModel:
    inner: InnerWeights
    outer: OuterWeights
    config: ReasoningConfig
    classes: tuple[str, ...]
    scaler: MinMaxScaler
    feature_names: tuple[str, ...]
    head: str = RECURRENCE
    attractor: Attractor = Attractor(dynamics.NON_CONVERGENT)

    @property
    def iterations(self) -> int:
        return self.outer.s

    def design_matrix(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.inner.n_features:
            found = X.shape[1] if X.ndim == 2 else X.shape
            raise ValueError(
                f"feature-count mismatch: expected {self.inner.n_features}, found {found}")
        history = dynamics.run(X, self.inner.W, self.inner.B, self.config, iterations=self.outer.s)
        return _head_matrix(history, self.head)

    def predict_scores(self, X) -> np.ndarray:
        """Raw decision scores ``[H | 1] @ [R; Q]`` for already-scaled rows.

        ``f`` is not applied: it is strictly increasing, so the argmax is the
        same with or without it.
        """
        H = self.design_matrix(X)
        return H @ self.outer.R + self.outer.Q

    def predict_proba_like(self, X) -> np.ndarray:
        return self.config.tf.forward(self.predict_scores(X))

    def predict_class(self, X) -> list[str]:
        scores = self.predict_scores(X)
        # np.argmax returns the first maximum: ties go to the lowest class index.
        return [self.classes[j] for j in np.argmax(scores, axis=1)] if len(scores) else []

    def predict_raw(self, features) -> list[str]:
        return self.predict_class(self.scaler.transform(features))

    def relevance(self) -> RelevanceReport:
        return relevance(self)

    def save(self, path) -> None:
        save(self, path)


def _head_matrix(history: dynamics.StateHistory, head: str) -> np.ndarray:
    if head == RECURRENCE:
        return dynamics.concat_history(history)
    if head == LAST_STATE:
        return history.states[-1]
    raise ValueError(f"unknown decision head {head!r}; expected one of {HEADS}")


def fit(train: Dataset, config: ReasoningConfig, head: str = RECURRENCE) -> LtcnModel:
    """Two-step deterministic training.

    The inner weights are learned from ``X`` alone, the recurrence is run on
    the training batch, and the outer weights regress the encoded targets on
    the concatenated states (or on the final state for the last-state head).
    """
    if head not in HEADS:
        raise ValueError(f"unknown decision head {head!r}; expected one of {HEADS}")
    tf = config.tf
    inner = fit_inner(train.X, tf)
    history = dynamics.run(train.X, inner.W, inner.B, config)
    H = _head_matrix(history, head)
    # Targets are re-encoded with the model's transfer function so a dataset
    # built for one nonlinearity can be reused for another.
    Y = train.Y if train.tf == tf else encode_targets(train.labels, train.classes, tf)
    outer = fit_outer(H, Y, tf, s=history.iterations)
    return LtcnModel(inner, outer, config, tuple(train.classes), train.scaler,
                     tuple(train.feature_names), head, history.attractor)


def relevance(model: LtcnModel) -> RelevanceReport:
    """Per-feature sum of absolute outgoing inner weights (row ``i`` of ``W``)
    plus absolute outer weights over every class and temporal copy.

    Sums use ``math.fsum`` so each score is the correctly rounded exact sum,
    independent of summation order.
    """
    if model.head != RECURRENCE:
        raise UnsupportedOperation("relevance is defined for the recurrence-aware head only")
    m = model.inner.n_features
    W = np.abs(model.inner.W)
    R = np.abs(model.outer.blocks(m)).transpose(1, 0, 2).reshape(m, -1)
    inner = np.array([math.fsum(row) for row in W])
    outer = np.array([math.fsum(row) for row in R])
    total = np.array([math.fsum(np.concatenate([W[i], R[i]])) for i in range(m)])
    return RelevanceReport(tuple(model.feature_names), inner, outer, total)


def to_dict(model: LtcnModel) -> dict:
    cfg = model.config
    att = model.attractor
    return {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "head": model.head,
        "transfer": cfg.tf.kind,
        "epsilon": cfg.tf.epsilon,
        "phi": cfg.phi,
        "tol": cfg.tol,
        "cycle_window": cfg.cycle_window,
        "max_iterations": cfg.max_iterations,
        "iterations": model.outer.s,
        "attractor": {"kind": att.kind, "t_alpha": att.t_alpha, "period": att.period},
        "classes": list(model.classes),
        "feature_names": list(model.feature_names),
        "scaler": model.scaler.to_pairs(),
        "W": model.inner.W.tolist(),
        "B": model.inner.B.tolist(),
        "R": model.outer.R.tolist(),
        "Q": model.outer.Q.tolist(),
    }


def from_dict(doc: dict) -> LtcnModel:
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise ModelFormatError("not an LTCN model document")
    version = doc.get("format_version")
    if not isinstance(version, int):
        raise ModelFormatError("missing or invalid field 'format_version'")
    if version > FORMAT_VERSION:
        raise ModelFormatError(
            f"model format version {version} is newer than supported version {FORMAT_VERSION}")
    required = ("head", "transfer", "epsilon", "phi", "tol", "cycle_window", "max_iterations",
                "iterations", "classes", "feature_names", "scaler", "W", "B", "R", "Q")
    missing = [key for key in required if key not in doc]
    if missing:
        raise ModelFormatError(f"missing field(s): {', '.join(missing)}")
    try:
        tf = TransferFunction(doc["transfer"], float(doc["epsilon"]))
        config = ReasoningConfig(float(doc["phi"]), int(doc["max_iterations"]), float(doc["tol"]),
                                 int(doc["cycle_window"]), tf)
        m = len(doc["feature_names"])
        n = len(doc["classes"])
        W = np.array(doc["W"], dtype=float).reshape(m, m)
        B = np.array(doc["B"], dtype=float).reshape(m)
        R = np.array(doc["R"], dtype=float).reshape(-1, n)
        Q = np.array(doc["Q"], dtype=float).reshape(n)
        s = int(doc["iterations"])
        att = doc.get("attractor") or {"kind": dynamics.NON_CONVERGENT}
        attractor = Attractor(att["kind"], att.get("t_alpha"), att.get("period"))
        scaler = MinMaxScaler.from_pairs(doc["scaler"])
    except (TypeError, ValueError, KeyError) as exc:
        raise ModelFormatError(f"invalid model field: {exc}") from exc
    head = doc["head"]
    blocks = s + 1 if head == RECURRENCE else 1
    if head not in HEADS or R.shape[0] != m * blocks or scaler.mins.shape[0] != m:
        raise ModelFormatError("weight shapes are inconsistent with the declared sizes")
    return LtcnModel(InnerWeights(W, B), OuterWeights(R, Q, s), config,
                     tuple(doc["classes"]), scaler, tuple(doc["feature_names"]), head, attractor)


def save(model: LtcnModel, path) -> None:
    # json writes floats with repr(), the shortest string that round-trips.
    Path(path).write_text(json.dumps(to_dict(model), indent=1) + "\n", encoding="utf-8")


def load(path) -> LtcnModel:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ModelFormatError(f"cannot read model file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from exc
    return from_dict(doc)
