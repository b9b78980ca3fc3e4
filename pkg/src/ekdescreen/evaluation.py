"""Confusion-matrix metrics, ROC/AUC, data splitting and cross-validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .classifier import FitConfig, fit
from .errors import DegenerateSample, EmptyInput, LengthMismatch, SingleClassData, TooFewCases
from .imaging import DatasetManifest
from .kde import DEFAULT_GRID_POINTS, fit_kde, pdf_fast


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    def __post_init__(self):
        if min(self.tp, self.tn, self.fp, self.fn) < 0:
            raise ValueError("counts must be nonnegative")

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    def as_dict(self) -> dict:
        return {"tp": self.tp, "tn": self.tn, "fp": self.fp, "fn": self.fn}


@dataclass(frozen=True)
class MetricsReport:
    """Scalar metrics; None marks a metric whose denominator is zero."""

    accuracy: Optional[float]
    sensitivity: Optional[float]
    specificity: Optional[float]
    ppv: Optional[float]
    npv: Optional[float]
    f1: Optional[float]
    f1_macro: Optional[float]
    lr_plus: Optional[float]
    lr_minus: Optional[float]

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class RocCurve:
    points: list  # (fpr, tpr, threshold), threshold descending
    auc: float

    @property
    def fpr(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def tpr(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])

    @property
    def thresholds(self) -> np.ndarray:
        return np.array([p[2] for p in self.points])


@dataclass(frozen=True)
class SplitPlan:
    seed: int = 0
    train_fraction: float = 0.70
    folds: int = 10
    stratified: bool = True

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.folds < 1:
            raise ValueError("folds must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")


def _as_binary(v, name) -> np.ndarray:
    a = np.asarray(v).reshape(-1)
    if a.size and not np.all(np.isin(a, (0, 1))):
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(np.int64)


def confusion(y_true, y_pred) -> ConfusionMatrix:
    t, p = _as_binary(y_true, "y_true"), _as_binary(y_pred, "y_pred")
    if t.size != p.size:
        raise LengthMismatch(f"{t.size} labels vs {p.size} predictions")
    if t.size == 0:
        raise EmptyInput("no samples")
    return ConfusionMatrix(
        tp=int(np.sum((t == 1) & (p == 1))),
        tn=int(np.sum((t == 0) & (p == 0))),
        fp=int(np.sum((t == 0) & (p == 1))),
        fn=int(np.sum((t == 1) & (p == 0))),
    )


def _ratio(num, den) -> Optional[float]:
    return None if den == 0 else num / den


def metrics(cm: ConfusionMatrix) -> MetricsReport:
    if cm.total == 0:
        raise EmptyInput("confusion matrix is empty")
    tp, tn, fp, fn = cm.tp, cm.tn, cm.fp, cm.fn
    sens = _ratio(tp, tp + fn)
    spec = _ratio(tn, tn + fp)
    ppv = _ratio(tp, tp + fp)
    npv = _ratio(tn, tn + fn)
    f1_pos = _ratio(2 * tp, 2 * tp + fp + fn)
    f1_neg = _ratio(2 * tn, 2 * tn + fp + fn)
    f1_macro = None if f1_pos is None or f1_neg is None else (f1_pos + f1_neg) / 2
    lr_plus = None if sens is None or spec is None else _ratio(sens, 1 - spec)
    lr_minus = None if sens is None or spec is None else _ratio(1 - sens, spec)
    return MetricsReport((tp + tn) / cm.total, sens, spec, ppv, npv, f1_pos, f1_macro, lr_plus, lr_minus)


def roc(y_true, scores) -> RocCurve:
    """ROC over the distinct scores (tied scores move together), AUC by trapezoids.

    The area is accumulated in integer counts and divided once, so it is
    exactly the Mann-Whitney pair fraction with ties counted as one half.
    """
    t = _as_binary(y_true, "y_true")
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if t.size != s.size:
        raise LengthMismatch(f"{t.size} labels vs {s.size} scores")
    P, N = int(t.sum()), int(t.size - t.sum())
    if P == 0 or N == 0:
        raise SingleClassData("ROC needs both classes")
    order = np.argsort(-s, kind="mergesort")
    s_sorted, t_sorted = s[order], t[order]
    distinct = np.flatnonzero(np.diff(s_sorted) != 0)
    ends = np.r_[distinct, s.size - 1]
    tps = np.cumsum(t_sorted)[ends]
    fps = (ends + 1) - tps
    points = [(0.0, 0.0, math.inf)]
    area2 = 0  # twice the area, in units of 1/(P N)
    prev_tp = prev_fp = 0
    for tp, fp, e in zip(tps.tolist(), fps.tolist(), ends.tolist()):
        area2 += (fp - prev_fp) * (tp + prev_tp)
        points.append((fp / N, tp / P, float(s_sorted[e])))
        prev_tp, prev_fp = tp, fp
    points.append((1.0, 1.0, -math.inf))
    return RocCurve(points, area2 / (2 * P * N))


def _labels_of(data) -> np.ndarray:
    if isinstance(data, DatasetManifest):
        return data.labels
    if hasattr(data, "y"):
        return data.y
    return _as_binary(data, "labels")


def _train_counts(n_by_class: list, fraction: float) -> list:
    """Largest-remainder allocation of floor(fraction * n) training cases across classes."""
    n = sum(n_by_class)
    total = min(max(math.floor(fraction * n + 1e-9), 1), n - 1)
    quotas = [total * c / n for c in n_by_class]
    base = [math.floor(q) for q in quotas]
    rem = total - sum(base)
    for i in sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - base[i]), i))[:rem]:
        base[i] += 1
    return base


def split(data, plan: SplitPlan = SplitPlan()) -> tuple:
    """Seeded train/test partition; returns sorted (train, test) index arrays.

    `data` is a DatasetManifest, a FeatureTable, or a label sequence.
    """
    y = _labels_of(data)
    n = y.size
    if n < 2:
        raise TooFewCases("need at least two cases to split")
    rng = np.random.default_rng(plan.seed)
    if plan.stratified:
        classes = [np.flatnonzero(y == c) for c in (0, 1) if np.any(y == c)]
        counts = _train_counts([len(c) for c in classes], plan.train_fraction)
        train = np.concatenate([rng.permutation(idx)[:k] for idx, k in zip(classes, counts)])
    else:
        k = _train_counts([n], plan.train_fraction)[0]
        train = rng.permutation(n)[:k]
    train = np.sort(train)
    test = np.setdiff1d(np.arange(n), train)
    return train, test


def fold_assignment(case_ids, labels, plan: SplitPlan) -> np.ndarray:
    """Fold number per row. Membership depends on case ids, not row positions."""
    ids = np.asarray(case_ids).reshape(-1)
    y = _as_binary(labels, "labels")
    if len(np.unique(ids)) != ids.size:
        raise ValueError("case ids must be unique")
    k = plan.folds
    folds = np.empty(ids.size, dtype=np.int64)
    rng = np.random.default_rng(plan.seed)
    groups = [np.flatnonzero(y == c) for c in (0, 1)] if plan.stratified else [np.arange(ids.size)]
    for rows in groups:
        if plan.stratified and rows.size < k:
            raise TooFewCases(f"a class has {rows.size} cases, fewer than {k} folds")
        rows = rows[np.argsort(ids[rows], kind="stable")]
        perm = rng.permutation(rows.size)
        folds[rows[perm]] = np.arange(rows.size) % k
    if ids.size < k:
        raise TooFewCases(f"{ids.size} cases for {k} folds")
    return folds


@dataclass
class FoldResult:
    fold: int
    n_train: int
    n_test: int
    confusion: ConfusionMatrix
    report: MetricsReport
    model: object


@dataclass
class CrossValidation:
    folds: list
    aggregate: dict  # metric -> {"mean", "std", "n"}; std is the population std over folds


def _aggregate(reports: list) -> dict:
    out = {}
    for f in fields(MetricsReport):
        vals = [getattr(r, f.name) for r in reports if getattr(r, f.name) is not None]
        if vals:
            out[f.name] = {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "n": len(vals)}
        else:
            out[f.name] = {"mean": None, "std": None, "n": 0}
    return out


def cross_validate(table, plan: SplitPlan = SplitPlan(), config: FitConfig = FitConfig()) -> CrossValidation:
    """k-fold CV: fit on k-1 folds, score the held-out fold, aggregate unweighted over folds."""
    if plan.folds < 2:
        raise ValueError("cross-validation needs at least 2 folds")
    X, y = table.X, table.y
    folds = fold_assignment(table.case_ids, y, plan)
    results = []
    for k in range(plan.folds):
        test = np.flatnonzero(folds == k)
        train = np.flatnonzero(folds != k)
        if len(np.unique(y[train])) < 2:
            raise TooFewCases(f"training part of fold {k} lacks a class")
        model = fit(X[train], config, y=y[train])
        pred = model.decide(model.predict_proba(X[test]))
        cm = confusion(y[test], pred)
        results.append(FoldResult(k, train.size, test.size, cm, metrics(cm), model))
    return CrossValidation(results, _aggregate([r.report for r in results]))


def probability_bounds(y_true, probs, level: float = 0.95) -> dict:
    """Empirical central `level` interval of predicted probabilities, per true class."""
    if not 0 < level < 1:
        raise ValueError("level must be in (0, 1)")
    t = _as_binary(y_true, "y_true")
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if t.size != p.size:
        raise LengthMismatch(f"{t.size} labels vs {p.size} probabilities")
    if not (np.any(t == 1) and np.any(t == 0)):
        raise SingleClassData("both classes are required")
    q = [(1 - level) / 2, (1 + level) / 2]
    return {c: tuple(float(v) for v in np.quantile(p[t == c], q)) for c in (1, 0)}


def density_threshold(probs_positive, grid_points: int = DEFAULT_GRID_POINTS) -> float:
    """Mode of the kernel density of the positive class's predicted probabilities on a [0, 1] grid."""
    p = np.asarray(probs_positive, dtype=np.float64).reshape(-1)
    if np.unique(p).size < 2:
        raise DegenerateSample("need at least two distinct probabilities")
    grid = np.linspace(0.0, 1.0, grid_points)
    dens = pdf_fast(fit_kde(p), grid)
    return float(grid[int(np.argmax(dens))])
