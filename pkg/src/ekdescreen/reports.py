"""File artifacts shared by the CLI stages: metrics JSON and plot-data CSVs."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .evaluation import ConfusionMatrix, RocCurve, confusion, metrics, probability_bounds, roc
from .features import fmt17
from .kde import DEFAULT_GRID_POINTS, fit_kde, pdf_fast
from .errors import DegenerateSample, SingleClassData

UNDEFINED = "undefined"


def _defined(v):
    if v is None:
        return UNDEFINED
    if isinstance(v, float) and not math.isfinite(v):
        return UNDEFINED
    return v


def stage_report(stage: str, y_true, probs, threshold: float, level: float = 0.95) -> dict:
    """One metrics-JSON object: confusion counts, scalar metrics, AUC and probability bounds."""
    y_true = np.asarray(y_true)
    pred = (np.asarray(probs) >= threshold).astype(int)
    cm = confusion(y_true, pred)
    rep = {
        "stage": stage,
        "n": int(y_true.size),
        "threshold": threshold,
        "confusion": cm.as_dict(),
        "metrics": {k: _defined(v) for k, v in metrics(cm).as_dict().items()},
    }
    try:
        rep["auc"] = roc(y_true, probs).auc
        b = probability_bounds(y_true, probs, level)
        rep["probability_bounds"] = {
            "method": "empirical quantiles",
            "level": level,
            "positive": list(b[1]),
            "negative": list(b[0]),
        }
    except SingleClassData:
        rep["auc"] = UNDEFINED
        rep["probability_bounds"] = UNDEFINED
    return rep


def metrics_from_counts(cm: ConfusionMatrix) -> dict:
    return {k: _defined(v) for k, v in metrics(cm).as_dict().items()}


def write_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def write_roc_csv(curve: RocCurve, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("threshold", "fpr", "tpr"))
        for fpr, tpr, thr in curve.points:
            w.writerow((fmt17(thr) if math.isfinite(thr) else ("inf" if thr > 0 else "-inf"), fmt17(fpr), fmt17(tpr)))


def write_density_csv(y_true, probs, path, grid_points: int = DEFAULT_GRID_POINTS) -> None:
    """Kernel density of predicted probabilities per true class, on a [0, 1] grid."""
    y_true, probs = np.asarray(y_true), np.asarray(probs, dtype=np.float64)
    grid = np.linspace(0.0, 1.0, grid_points)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("p", "density", "label"))
        for label in (1, 0):
            p = probs[y_true == label]
            try:
                dens = pdf_fast(fit_kde(p), grid)
            except (DegenerateSample, ValueError):
                continue
            for g, d in zip(grid, dens):
                w.writerow((fmt17(g), fmt17(d), label))


def write_scatter_csv(X, y, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("mu", "sigma", "label"))
        for (mu, sig), label in zip(np.asarray(X), np.asarray(y)):
            w.writerow((fmt17(mu), fmt17(sig), int(label)))


def write_density_dump(model, path, grid_points: int = DEFAULT_GRID_POINTS) -> None:
    grid = np.linspace(0.0, 1.0, grid_points)
    dens = pdf_fast(model, grid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("x", "density"))
        for g, d in zip(grid, dens):
            w.writerow((fmt17(g), fmt17(d)))
