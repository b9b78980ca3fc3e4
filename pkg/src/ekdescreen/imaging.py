"""Raster decoding, intensity normalization and dataset manifests."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import EmptyImage, EmptyManifest, MalformedRow, UnreadableFile, UnsupportedFormat

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])
SPLIT_TAGS = ("train", "test")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Row-major intensities in [0, 1]."""

    rows: int
    cols: int
    pixels: np.ndarray = field(repr=False)

    def __post_init__(self):
        px = np.ascontiguousarray(self.pixels, dtype=np.float64).reshape(-1)
        if self.rows < 1 or self.cols < 1 or px.size == 0:
            raise EmptyImage("image has no pixels")
        if px.size != self.rows * self.cols:
            raise ValueError(f"expected {self.rows * self.cols} pixels, got {px.size}")
        if not np.all((px >= 0.0) & (px <= 1.0)):
            raise ValueError("pixel intensities must lie in [0, 1]")
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[0], arr.shape[1], arr.reshape(-1))

    def as_array(self) -> np.ndarray:
        return self.pixels.reshape(self.rows, self.cols)

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (self.rows, self.cols) == (other.rows, other.cols) and np.array_equal(
            self.pixels, other.pixels
        )

    __hash__ = None


@dataclass(frozen=True)
class LabeledCase:
    image_path: str
    label: int
    split_hint: Optional[str] = None

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


@dataclass(frozen=True)
class DatasetManifest:
    cases: tuple
    seed: int = 0

    def __len__(self):
        return len(self.cases)

    @property
    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.cases], dtype=np.int64)


def _normalize(img: Image.Image) -> np.ndarray:
    mode = img.mode
    if mode in ("1", "L"):
        return np.asarray(img.convert("L"), dtype=np.float64) / 255.0
    if mode in ("I;16", "I;16B", "I;16L", "I"):
        raw = np.asarray(img).astype(np.float64)
        if raw.size and (raw.min() < 0 or raw.max() > 65535):
            raise UnsupportedFormat(f"integer raster outside 16-bit range (mode {mode})")
        return raw / 65535.0
    if mode in ("LA", "La"):
        return np.asarray(img.getchannel(0), dtype=np.float64) / 255.0
    if mode in ("RGB", "RGBA", "RGBX", "P", "PA", "CMYK", "YCbCr"):
        rgb = np.asarray(img.convert("RGB"), dtype=np.float64)
        return (rgb @ LUMA_WEIGHTS) / 255.0
    raise UnsupportedFormat(f"unsupported image mode {mode}")


def load_gray_image(path) -> GrayImage:
    """Decode an 8/16-bit gray or RGB raster and scale it to [0, 1].

    RGB is reduced with luma weights 0.299/0.587/0.114 before scaling.
    """
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            try:
                with Image.open(fh) as img:
                    img.load()
                    arr = _normalize(img)
            except (UnidentifiedImageError, SyntaxError, ValueError) as exc:
                raise UnsupportedFormat(f"{path}: {exc}") from exc
            except OSError as exc:
                raise UnsupportedFormat(f"{path}: {exc}") from exc
    except (FileNotFoundError, IsADirectoryError, PermissionError) as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    if arr.size == 0:
        raise EmptyImage(f"{path}: zero pixels")
    # luma sums can overshoot 1.0 by an ulp
    np.clip(arr, 0.0, 1.0, out=arr)
    return GrayImage.from_array(arr)


def save_gray_image(image: GrayImage, path, bits: int = 8) -> None:
    """Quantize to an 8- or 16-bit PNG (nearest level)."""
    arr = image.as_array()
    if bits == 8:
        Image.fromarray(np.rint(arr * 255).astype(np.uint8), mode="L").save(path)
    elif bits == 16:
        Image.fromarray(np.rint(arr * 65535).astype(np.uint16)).save(path)
    else:
        raise ValueError("bits must be 8 or 16")


def read_manifest(path, seed: int = 0) -> DatasetManifest:
    """Parse a `path,label[,split]` CSV. Relative image paths resolve against the manifest's folder."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8-sig")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    reader = csv.reader(text.splitlines())
    header = next(reader, None)
    if header is None:
        raise EmptyManifest(f"{path}: no header")
    header = [h.strip().lower() for h in header]
    if header[:2] != ["path", "label"] or len(header) > 3 or (len(header) == 3 and header[2] != "split"):
        raise MalformedRow(f"{path}: header must be path,label[,split], got {','.join(header)}")
    base = path.parent
    cases = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) not in (2, 3) or len(row) > len(header):
            raise MalformedRow(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        img_path, label_txt = row[0].strip(), row[1].strip()
        if label_txt not in ("0", "1"):
            raise MalformedRow(f"{path}:{lineno}: label must be 0 or 1, got {label_txt!r}")
        hint = row[2].strip().lower() if len(row) == 3 and row[2].strip() else None
        if hint is not None and hint not in SPLIT_TAGS:
            raise MalformedRow(f"{path}:{lineno}: split must be train or test, got {hint!r}")
        p = Path(img_path)
        if not p.is_absolute():
            p = base / p
        cases.append(LabeledCase(str(p), int(label_txt), hint))
    if not cases:
        raise EmptyManifest(f"{path}: no data rows")
    return DatasetManifest(tuple(cases), seed)


def flatten(image: GrayImage, stride: int = 1) -> np.ndarray:
    """Every `stride`-th pixel in row-major order."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    out = image.pixels[::stride]
    assert out.size == math.ceil(image.pixels.size / stride)
    return out
