"""Synthetic two-class radiograph stand-ins with beta-distributed intensities.

Used when the public dataset is not available. Class moments default to the
corpus-level kernel means/stds (disease 0.48/0.30, normal 0.49/0.32); each
image draws its own mean and std around the class values.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .imaging import GrayImage, save_gray_image

CLASS_MOMENTS = {1: (0.48, 0.30), 0: (0.49, 0.32)}


def beta_params(mean: float, std: float) -> tuple:
    var = std * std
    if not 0 < mean < 1 or not 0 < var < mean * (1 - mean):
        raise ValueError(f"no beta distribution with mean {mean} and std {std}")
    k = mean * (1 - mean) / var - 1
    return mean * k, (1 - mean) * k


def synthetic_image(rng, mean: float, std: float, shape=(64, 64)) -> GrayImage:
    a, b = beta_params(mean, std)
    return GrayImage.from_array(rng.beta(a, b, size=shape))


def synthetic_cases(seed: int, n_per_class: int = 60, shape=(64, 64), mean_jitter: float = 0.02,
                    std_jitter: float = 0.015, moments=CLASS_MOMENTS):
    """Yield (label, GrayImage), alternating classes."""
    rng = np.random.default_rng(seed)
    for _ in range(n_per_class):
        for label in (1, 0):
            m, s = moments[label]
            mi = float(np.clip(m + mean_jitter * rng.standard_normal(), 0.2, 0.8))
            si = float(np.clip(s + std_jitter * rng.standard_normal(), 0.05, 0.38))
            yield label, synthetic_image(rng, mi, si, shape)


def write_synthetic_dataset(out_dir, seed: int = 0, **kwargs) -> Path:
    """Write PNGs plus a `path,label` manifest; returns the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.csv"
    with open(manifest, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("path", "label"))
        for i, (label, img) in enumerate(synthetic_cases(seed, **kwargs)):
            name = f"images/case_{i:05d}.png"
            save_gray_image(img, out_dir / name)
            w.writerow((name, label))
    return manifest
