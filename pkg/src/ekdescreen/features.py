"""Per-image (mu, sigma) features from the fitted Epanechnikov density."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import AllCasesFailed, EkdeError, EmptyManifest, MalformedRow, UnreadableFile
from .imaging import DatasetManifest, GrayImage, flatten, load_gray_image
from .kde import fit_kde, kde_mean, kde_std

log = logging.getLogger(__name__)

FEATURE_COLUMNS = ("case_id", "path", "label", "mu", "sigma", "h")


def fmt17(x: float) -> str:
    return format(float(x), ".17g")


@dataclass(frozen=True)
class FeatureVector:
    mu: float
    sigma: float
    h: float
    case_id: int = 0
    label: Optional[int] = None
    path: str = ""
    split: Optional[str] = None

    @property
    def phi(self) -> np.ndarray:
        return np.array([self.mu, self.sigma])


@dataclass(frozen=True)
class SkippedCase:
    case_id: int
    path: str
    reason: str


@dataclass
class FeatureTable:
    rows: list
    skipped: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    @property
    def X(self) -> np.ndarray:
        return np.array([[r.mu, r.sigma] for r in self.rows], dtype=np.float64).reshape(-1, 2)

    @property
    def y(self) -> np.ndarray:
        return np.array([r.label for r in self.rows], dtype=np.int64)

    @property
    def case_ids(self) -> np.ndarray:
        return np.array([r.case_id for r in self.rows], dtype=np.int64)

    def subset(self, indices) -> "FeatureTable":
        return FeatureTable([self.rows[i] for i in indices])

    @property
    def per_class_summary(self) -> dict:
        """Mean, std (n-1) and bounds of mu, sigma and h for each label."""
        out = {}
        for label in sorted({r.label for r in self.rows if r.label is not None}):
            sel = [r for r in self.rows if r.label == label]
            stats = {"count": len(sel)}
            for name in ("mu", "sigma", "h"):
                v = np.array([getattr(r, name) for r in sel])
                stats[name] = {
                    "mean": float(v.mean()),
                    "std": float(v.std(ddof=1)) if v.size > 1 else 0.0,
                    "min": float(v.min()),
                    "max": float(v.max()),
                }
            out[label] = stats
        return out


def extract(image: GrayImage, stride: int = 1, case_id: int = 0, label=None, path: str = "", split=None) -> FeatureVector:
    """Fit the density to the flattened intensities and return its mean and std."""
    model = fit_kde(flatten(image, stride))
    return FeatureVector(kde_mean(model), kde_std(model), model.h, case_id, label, path, split)


def _extract_case(args):
    case_id, case, stride = args
    try:
        img = load_gray_image(case.image_path)
        return extract(img, stride, case_id, case.label, case.image_path, case.split_hint)
    except EkdeError as exc:
        return SkippedCase(case_id, case.image_path, f"{type(exc).__name__}: {exc}")


def extract_batch(manifest: DatasetManifest, stride: int = 1, workers: int = 1) -> FeatureTable:
    """Features for every case in manifest order; failing cases are skipped and recorded."""
    if len(manifest) == 0:
        raise EmptyManifest("manifest has no cases")
    jobs = [(i, c, stride) for i, c in enumerate(manifest.cases)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_case, jobs, chunksize=16))
    else:
        results = [_extract_case(j) for j in jobs]
    rows, skipped = [], []
    for res in results:
        if isinstance(res, SkippedCase):
            log.warning("skipping case %d (%s): %s", res.case_id, res.path, res.reason)
            skipped.append(res)
        else:
            rows.append(res)
    if not rows:
        raise AllCasesFailed(f"all {len(manifest)} cases failed")
    return FeatureTable(rows, skipped)


def write_feature_csv(table: FeatureTable, path) -> None:
    has_split = any(r.split for r in table.rows)
    cols = FEATURE_COLUMNS + (("split",) if has_split else ())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for r in table.rows:
            row = [r.case_id, r.path, "" if r.label is None else r.label, fmt17(r.mu), fmt17(r.sigma), fmt17(r.h)]
            if has_split:
                row.append(r.split or "")
            w.writerow(row)


def write_skip_log(table: FeatureTable, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("case_id", "path", "reason"))
        for s in table.skipped:
            w.writerow((s.case_id, s.path, s.reason))


def read_feature_csv(path) -> FeatureTable:
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8-sig") as fh:
            reader = csv.DictReader(fh)
            missing = set(FEATURE_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise MalformedRow(f"{path}: missing columns {sorted(missing)}")
            rows = []
            for lineno, rec in enumerate(reader, start=2):
                try:
                    label = rec["label"].strip()
                    if label not in ("", "0", "1"):
                        raise ValueError(f"bad label {label!r}")
                    rows.append(FeatureVector(
                        mu=float(rec["mu"]),
                        sigma=float(rec["sigma"]),
                        h=float(rec["h"]),
                        case_id=int(rec["case_id"]),
                        label=int(label) if label else None,
                        path=rec["path"],
                        split=(rec.get("split") or "").strip() or None,
                    ))
                except (TypeError, ValueError) as exc:
                    raise MalformedRow(f"{path}:{lineno}: {exc}") from exc
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    if not rows:
        raise EmptyManifest(f"{path}: no feature rows")
    return FeatureTable(rows)
