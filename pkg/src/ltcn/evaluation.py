"""Metrics, cross-validation, nested grid search and decision-head comparison."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import model as ltcn_model
from .dataset import FoldPlan, RawTable, build_dataset, make_folds
from .dynamics import FIXED_POINT, ReasoningConfig
from .transfer import KINDS, TransferFunction


def _check_pair(y_true, y_pred):
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted labels")
    if len(y_true) == 0:
        raise ValueError("empty label vectors")


def confusion_matrix(y_true, y_pred, labels: Sequence | None = None) -> np.ndarray:
    """Counts with rows = true class and columns = predicted class."""
    _check_pair(y_true, y_pred)
    if labels is None:
        labels = list(dict.fromkeys(list(y_true) + list(y_pred)))
    index = {lab: i for i, lab in enumerate(labels)}
    counts = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        counts[index[t], index[p]] += 1
    return counts


def accuracy(y_true, y_pred) -> float:
    _check_pair(y_true, y_pred)
    return sum(t == p for t, p in zip(y_true, y_pred)) / len(y_true)


def cohen_kappa(y_true, y_pred) -> float:
    """Chance-corrected agreement ``(p_o - p_e) / (1 - p_e)``.

    When chance agreement is total (both raters constant on the same label)
    the ratio is 0/0; it is defined as 1 for identical vectors, else 0.
    """
    counts = confusion_matrix(y_true, y_pred)
    # Integer form (n*trace - S) / (n^2 - S): one rounding, so the result is
    # the exact rational value correctly rounded.
    n = int(counts.sum())
    agree = int(np.trace(counts))
    chance = sum(int(r) * int(c) for r, c in zip(counts.sum(axis=1), counts.sum(axis=0)))
    if chance == n * n:
        return 1.0 if all(t == p for t, p in zip(y_true, y_pred)) else 0.0
    return (n * agree - chance) / (n * n - chance)


@dataclass(frozen=True)
class FoldResult:
    fold: int
    kappa: float
    accuracy: float
    confusion: np.ndarray
    fit_seconds: float
    iterations: int
    attractor: str
    t_alpha: int | None
    phi: float
    transfer: str


@dataclass(frozen=True)
class EvalReport:
    head: str
    config: ReasoningConfig
    folds: tuple[FoldResult, ...]
    classes: tuple[str, ...] = ()
    label: str = ""

    @property
    def kappas(self) -> np.ndarray:
        return np.array([f.kappa for f in self.folds])

    @property
    def mean_kappa(self) -> float:
        return float(self.kappas.mean())

    @property
    def std_kappa(self) -> float:
        return float(self.kappas.std())

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.folds]))

    @property
    def fixed_point_fraction(self) -> float:
        return float(np.mean([f.attractor == FIXED_POINT for f in self.folds]))

    def records(self, dataset_id: str = "") -> list[dict]:
        return [{
            "dataset": dataset_id,
            "head": self.head,
            "fold": f.fold,
            "phi": f.phi,
            "transfer": f.transfer,
            "T": self.config.max_iterations,
            "T_effective": f.iterations,
            "kappa": f.kappa,
            "accuracy": f.accuracy,
            "fit_seconds": f.fit_seconds,
            "attractor": f.attractor,
            "t_alpha": "" if f.t_alpha is None else f.t_alpha,
        } for f in self.folds]


def parallel_map(fn: Callable, items: Iterable, jobs: int | None):
    items = list(items)
    if jobs is not None and jobs > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def evaluate_split(raw: RawTable, train_idx, test_idx, config: ReasoningConfig,
                   head: str, classes: Sequence[str], fold: int = 0) -> FoldResult:
    """Fit on one split and score the other; scaling is fitted on the training rows only."""
    train = build_dataset(raw.subset(train_idx), config.tf, classes=classes)
    start = time.perf_counter()
    fitted = ltcn_model.fit(train, config, head)
    elapsed = time.perf_counter() - start
    X_test = train.scaler.transform(raw.features[np.asarray(test_idx, dtype=int)])
    y_true = [raw.labels[i] for i in test_idx]
    y_pred = fitted.predict_class(X_test)
    att = fitted.attractor
    return FoldResult(fold, cohen_kappa(y_true, y_pred), accuracy(y_true, y_pred),
                      confusion_matrix(y_true, y_pred, classes), elapsed, fitted.iterations,
                      att.kind, att.t_alpha, config.phi, config.tf.kind)


def cross_validate(raw: RawTable, config: ReasoningConfig, head: str = ltcn_model.RECURRENCE,
                   folds: int = 5, seed: int = 0, plan: FoldPlan | None = None,
                   jobs: int | None = None) -> EvalReport:
    plan = plan or make_folds(raw.labels, folds, seed)
    classes = raw.classes

    def one(fold):
        return evaluate_split(raw, plan.train_index(fold), plan.test_index(fold),
                              config, head, classes, fold)

    return EvalReport(head, config, tuple(parallel_map(one, range(plan.k), jobs)), classes)


def phi_grid(start: float = 0.0, stop: float = 1.0, step: float = 0.1) -> list[float]:
    """Inclusive grid; values are rounded to kill floating accumulation noise."""
    if step <= 0:
        raise ValueError("grid step must be positive")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


def _cell_key(config: ReasoningConfig):
    return (config.phi, KINDS.index(config.tf.kind))


def select_best(reports: Sequence[EvalReport]) -> EvalReport:
    """Highest mean kappa; ties go to smaller phi, then sigmoid before tanh."""
    return min(reports, key=lambda r: (-r.mean_kappa, *_cell_key(r.config)))


def grid_configs(phis: Sequence[float], kinds: Sequence[str], base: ReasoningConfig,
                 epsilon: float | None = None) -> list[ReasoningConfig]:
    eps = base.tf.epsilon if epsilon is None else epsilon
    return [replace(base, phi=float(phi), tf=TransferFunction(kind, eps))
            for kind in kinds for phi in phis]


@dataclass(frozen=True)
class GridResult:
    best: ReasoningConfig
    cells: tuple[EvalReport, ...]
    nested: EvalReport
    selected: tuple[ReasoningConfig, ...] = field(default=())


def grid_search(raw: RawTable, phis: Sequence[float], kinds: Sequence[str] = KINDS,
                base: ReasoningConfig | None = None, folds: int = 5, seed: int = 0,
                head: str = ltcn_model.RECURRENCE, jobs: int | None = None) -> GridResult:
    """Nested cross-validated search over (phi, transfer function).

    ``cells`` holds a plain k-fold report per grid cell on the full table
    (same folds as the outer loop). ``nested`` holds the generalization
    estimate: on each outer training split an inner k-fold CV picks the cell,
    which is then refit on that split and scored on the held-out fold.
    """
    if not phis or not kinds:
        raise ValueError("grids must be nonempty")
    base = base or ReasoningConfig()
    configs = grid_configs(phis, kinds, base)
    plan = make_folds(raw.labels, folds, seed)
    classes = raw.classes

    cells = tuple(parallel_map(lambda cfg: cross_validate(raw, cfg, head, plan=plan), configs, jobs))

    def outer(fold):
        train_idx, test_idx = plan.train_index(fold), plan.test_index(fold)
        inner_raw = raw.subset(train_idx)
        k_inner = min(folds, inner_raw.n_rows)
        inner_plan = make_folds(inner_raw.labels, k_inner, seed)
        inner_reports = [cross_validate(inner_raw, cfg, head, plan=inner_plan) for cfg in configs]
        chosen = select_best(inner_reports).config
        return chosen, evaluate_split(raw, train_idx, test_idx, chosen, head, classes, fold)

    results = parallel_map(outer, range(plan.k), jobs)
    selected = tuple(cfg for cfg, _ in results)
    nested = EvalReport(head, base, tuple(res for _, res in results), classes, label="nested")
    return GridResult(select_best(cells).config, cells, nested, selected)


@dataclass(frozen=True)
class HeadComparison:
    phi: float
    recurrence: EvalReport
    last_state: EvalReport


def compare_decision_heads(raw: RawTable, config: ReasoningConfig, folds: int = 5, seed: int = 0,
                           phis: Sequence[float] | None = None,
                           jobs: int | None = None) -> list[HeadComparison]:
    """Both heads on identical folds, once per phi (default: the config's phi)."""
    plan = make_folds(raw.labels, folds, seed)
    phis = [config.phi] if phis is None else list(phis)

    def one(phi):
        cfg = replace(config, phi=float(phi))
        return HeadComparison(float(phi),
                              cross_validate(raw, cfg, ltcn_model.RECURRENCE, plan=plan),
                              cross_validate(raw, cfg, ltcn_model.LAST_STATE, plan=plan))

    return parallel_map(one, phis, jobs)
