"""Dataset model, CSV ingestion, train/test splits and synthetic generators."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

# Named generator recorded in bench reports.
RNG_NAME = "numpy.PCG64"


class DatasetError(ValueError):
    """Raised when a dataset cannot be ingested or violates its invariants."""


@dataclass(frozen=True, eq=False)
class Dataset:
    """Named N x D feature matrix with optional 0/1 anomaly labels.

    Arrays are copied and marked read-only on construction so a dataset can
    be shared between concurrent detector runs.
    """

    name: str
    points: np.ndarray
    labels: np.ndarray | None = None
    temporal: bool = False

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 1:
            raise DatasetError(f"{self.name}: points must be a non-empty 2-D matrix, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise DatasetError(f"{self.name}: non-finite value at row {bad[0]}, column {bad[1]}")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

        if self.labels is not None:
            lab = np.asarray(self.labels)
            if lab.shape != (pts.shape[0],):
                raise DatasetError(f"{self.name}: expected {pts.shape[0]} labels, got shape {lab.shape}")
            if not np.all((lab == 0) | (lab == 1)):
                raise DatasetError(f"{self.name}: labels must be 0 or 1")
            lab = lab.astype(np.int8)
            lab.setflags(write=False)
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dims(self) -> int:
        return self.points.shape[1]

    @property
    def anomaly_count(self) -> int | None:
        if self.labels is None:
            return None
        return int(self.labels.sum())

    def subset(self, idx, name: str | None = None) -> Dataset:
        idx = np.asarray(idx, dtype=np.intp)
        labels = None if self.labels is None else self.labels[idx]
        return Dataset(name or self.name, self.points[idx], labels, self.temporal)


def load_csv(path, label_column: str | None = None, name: str | None = None, temporal: bool = False) -> Dataset:
    """Read a headered, comma-separated file of reals into a Dataset.

    Every non-label column is a feature. Errors name the offending row and
    column (data rows are 1-based, header excluded).
    """
    path = Path(path)
    if not path.is_file():
        raise DatasetError(f"no such file: {path}")

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: empty file") from None
        if label_column is not None and label_column not in header:
            raise DatasetError(f"{path}: label column {label_column!r} not in header {header}")
        label_pos = header.index(label_column) if label_column is not None else None
        feature_pos = [i for i in range(len(header)) if i != label_pos]
        if not feature_pos:
            raise DatasetError(f"{path}: no feature columns")

        rows, labels = [], []
        for lineno, record in enumerate(reader, start=1):
            if not record or all(not c.strip() for c in record):
                continue
            if len(record) != len(header):
                raise DatasetError(f"{path}: row {lineno} has {len(record)} cells, header has {len(header)}")
            values = []
            for i in feature_pos:
                cell = record[i].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DatasetError(f"{path}: row {lineno}, column {header[i]!r}: non-numeric cell {cell!r}") from None
                if not math.isfinite(v):
                    raise DatasetError(f"{path}: row {lineno}, column {header[i]!r}: non-finite cell {cell!r}")
                values.append(v)
            rows.append(values)
            if label_pos is not None:
                cell = record[label_pos].strip()
                try:
                    lv = float(cell)
                except ValueError:
                    lv = None
                if lv not in (0.0, 1.0):
                    raise DatasetError(f"{path}: row {lineno}, column {label_column!r}: label {cell!r} not in {{0, 1}}")
                labels.append(int(lv))

    if not rows:
        raise DatasetError(f"{path}: no data rows")
    return Dataset(
        name or path.stem,
        np.array(rows, dtype=np.float64),
        np.array(labels, dtype=np.int8) if label_pos is not None else None,
        temporal,
    )


def save_csv(dataset: Dataset, path, label_column: str = "label") -> None:
    """Write a dataset in the format `load_csv` reads."""
    cols = [f"x{j}" for j in range(dataset.dims)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols + ([label_column] if dataset.labels is not None else []))
        for i in range(dataset.n):
            row = [repr(float(v)) for v in dataset.points[i]]
            if dataset.labels is not None:
                row.append(str(int(dataset.labels[i])))
            w.writerow(row)


class SplitMode(str, Enum):
    TRAIN_FRACTION_ALL_TEST = "train-fraction-all-test"
    NORMAL_ONLY_TRAIN = "normal-only-train"


@dataclass(frozen=True)
class SplitSpec:
    mode: SplitMode = SplitMode.TRAIN_FRACTION_ALL_TEST
    fraction: float = 0.7
    seed: int = 0
    contiguous: bool = False  # take the leading rows instead of sampling

    def __post_init__(self):
        object.__setattr__(self, "mode", SplitMode(self.mode))
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def _take(candidates: np.ndarray, fraction: float, seed: int, contiguous: bool) -> np.ndarray:
    m = math.ceil(fraction * len(candidates))
    if contiguous:
        return candidates[:m]
    rng = np.random.Generator(np.random.PCG64(seed))
    return np.sort(rng.choice(candidates, size=m, replace=False))


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Return (train, test); test is always the full dataset."""
    if dataset.n < 1:
        raise DatasetError("cannot split an empty dataset")
    if spec.mode is SplitMode.TRAIN_FRACTION_ALL_TEST:
        idx = _take(np.arange(dataset.n), spec.fraction, spec.seed, spec.contiguous)
    else:
        if dataset.labels is None:
            raise DatasetError(f"{dataset.name}: normal-only-train split needs labels")
        normal = np.flatnonzero(dataset.labels == 0)
        if normal.size == 0:
            raise DatasetError(f"{dataset.name}: no normal rows to train on")
        # "or whatever normal data was available"
        idx = normal if normal.size < 2 else _take(normal, spec.fraction, spec.seed, spec.contiguous)
    return dataset.subset(idx, name=f"{dataset.name}[train]"), dataset


class SyntheticKind(str, Enum):
    UNIVARIATE_SERIES = "univariate-series"
    MULTIVARIATE_BLOBS = "multivariate-blobs"


@dataclass(frozen=True)
class SyntheticSpec:
    kind: SyntheticKind
    size: int
    dims: int = 1
    anomaly_count: int = 1
    anomaly_magnitude: float = 8.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", SyntheticKind(self.kind))
        if self.kind is SyntheticKind.UNIVARIATE_SERIES and self.dims != 1:
            object.__setattr__(self, "dims", 1)
        if self.size < 1 or self.dims < 1:
            raise ValueError("size and dims must be positive")
        if not 0 <= self.anomaly_count <= self.size:
            raise ValueError(f"anomaly_count must be in [0, size], got {self.anomaly_count}")
        if not self.anomaly_magnitude > 0:
            raise ValueError("anomaly_magnitude must be positive")


def generate_synthetic(spec: SyntheticSpec, name: str | None = None) -> Dataset:
    """Build a labelled synthetic dataset.

    univariate-series: ``sin`` over a few periods plus unit-variance noise;
    planted points are displaced by ``anomaly_magnitude`` times the standard
    deviation of the clean signal, with a random sign.

    multivariate-blobs: two isotropic unit-variance clusters; planted points
    are drawn on random directions at ``anomaly_magnitude`` sigma beyond the
    nearer centroid and rejected until they clear both centroids.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    labels = np.zeros(spec.size, dtype=np.int8)
    anomalies = np.sort(rng.choice(spec.size, size=spec.anomaly_count, replace=False))
    labels[anomalies] = 1

    if spec.kind is SyntheticKind.UNIVARIATE_SERIES:
        t = np.arange(spec.size)
        period = max(spec.size / 5.0, 4.0)
        base = np.sin(2 * np.pi * t / period + rng.uniform(0, 2 * np.pi)) + rng.standard_normal(spec.size)
        sigma = base.std()
        signs = rng.choice([-1.0, 1.0], size=spec.anomaly_count)
        base[anomalies] += signs * spec.anomaly_magnitude * sigma
        return Dataset(name or f"synth-uni-{spec.seed}", base.reshape(-1, 1), labels, temporal=True)

    d = spec.dims
    sep = 3.0 + spec.anomaly_magnitude / 2.0
    direction = rng.standard_normal(d)
    direction /= np.linalg.norm(direction)
    centers = np.stack([-sep / 2 * direction, sep / 2 * direction])
    member = rng.integers(0, 2, size=spec.size)
    pts = centers[member] + rng.standard_normal((spec.size, d))
    for i in anomalies:
        while True:
            u = rng.standard_normal(d)
            u /= np.linalg.norm(u)
            cand = centers[rng.integers(0, 2)] + (spec.anomaly_magnitude + rng.uniform(0, 1)) * u
            if np.all(np.linalg.norm(centers - cand, axis=1) >= spec.anomaly_magnitude):
                pts[i] = cand
                break
    return Dataset(name or f"synth-multi-{spec.seed}", pts, labels)
