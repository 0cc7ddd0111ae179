"""Benchmark runner: datasets x algorithms x seeds, metrics, timing, tallies.

A config is a JSON document::

    {
      "datasets": [
        {"name": "ecg", "path": "data/ecg.csv", "label_column": "label",
         "temporal": true, "split": {"fraction": 0.7, "contiguous": false}},
        {"name": "blobs", "synthetic": {"kind": "multivariate-blobs",
         "size": 500, "dims": 5, "anomaly_count": 5,
         "anomaly_magnitude": 6, "seed": 1}}
      ],
      "algorithms": ["mgbtai", "dbtai", {"name": "lof", "params": {"k": 10}}],
      "seeds": [0, 1, 2],
      "timeout": 120,
      "workers": 1,
      "output_dir": "bench-out"
    }

Unknown keys are rejected. Relative paths resolve against the config file.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import logging
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from . import baselines
from .datasets import (
    RNG_NAME,
    Dataset,
    SplitMode,
    SplitSpec,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    split,
)
from .metrics import evaluate
from .trees import TreeParams, tree_detect

logger = logging.getLogger(__name__)

METRICS = ("precision", "recall", "f1", "auc_roc")
CSV_COLUMNS = ("dataset", "algorithm", "seed", *METRICS, "wall_time_ms", "status", "auc_source", "undefined")
DEFAULT_TIMEOUT = 120.0


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# Algorithm descriptors
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Detection:
    scores: np.ndarray | None
    predictions: np.ndarray


@dataclass(frozen=True)
class Algorithm:
    name: str
    split_mode: SplitMode | None  # None: run on the full dataset, no training split
    run: Callable  # (train, test, seed, **params) -> Detection


def _tree(preset):
    def run(train, test, seed, **params):
        tp = TreeParams.preset(preset)
        if params:
            tp = dataclasses.replace(tp, **params)
        res = tree_detect(test, preset, seed, params=tp)
        return Detection(res.scores, res.predictions)

    return run


def _iforest(train, test, seed, n_trees=100, subsample=256, score_threshold=0.5):
    scores = baselines.iforest_run(train, test, seed, n_trees, subsample)
    return Detection(scores, (scores > score_threshold).astype(np.int8))


def _lof(train, test, seed, k=20, contamination=0.1):
    scores = baselines.lof_run(train, test, k)
    return Detection(scores, baselines.top_fraction(scores, contamination))


def _envelope(train, test, seed, support_fraction=0.75, contamination=0.1):
    scores, pred = baselines.envelope_run(train, test, seed, support_fraction, contamination)
    return Detection(scores, pred)


ALGORITHMS = {
    "mgbtai": Algorithm("mgbtai", None, _tree("mgbtai")),
    "dbtai": Algorithm("dbtai", None, _tree("dbtai")),
    "iforest": Algorithm("iforest", SplitMode.TRAIN_FRACTION_ALL_TEST, _iforest),
    "lof": Algorithm("lof", SplitMode.TRAIN_FRACTION_ALL_TEST, _lof),
    "envelope": Algorithm("envelope", SplitMode.TRAIN_FRACTION_ALL_TEST, _envelope),
}


def detect(dataset: Dataset, algo: str, seed: int = 0, fraction: float = 0.7, contiguous: bool = False, **params) -> Detection:
    """Run one algorithm on one dataset under its split protocol."""
    desc = ALGORITHMS[algo]
    if desc.split_mode is None:
        train = test = dataset
    else:
        train, test = split(dataset, SplitSpec(desc.split_mode, fraction, seed, contiguous))
    return desc.run(train, test, seed, **params)


# --------------------------------------------------------------------------
# Config
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DatasetEntry:
    name: str
    path: str | None = None
    synthetic: SyntheticSpec | None = None
    label_column: str | None = "label"
    temporal: bool = False
    fraction: float = 0.7
    contiguous: bool = False

    def load(self) -> Dataset:
        if self.synthetic is not None:
            return generate_synthetic(self.synthetic, name=self.name)
        return load_csv(self.path, self.label_column, name=self.name, temporal=self.temporal)


@dataclass(frozen=True)
class AlgorithmEntry:
    name: str
    params: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BenchConfig:
    datasets: tuple
    algorithms: tuple
    seeds: tuple = (0, 1, 2)
    timeout: float = DEFAULT_TIMEOUT
    workers: int = 1
    output_dir: str = "bench-out"

    def __post_init__(self):
        if not self.datasets:
            raise ConfigError("config needs at least one dataset")
        if not self.algorithms:
            raise ConfigError("config needs at least one algorithm")
        if not self.seeds:
            raise ConfigError("config needs at least one seed")
        if not self.timeout > 0:
            raise ConfigError("timeout must be positive")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        names = [d.name for d in self.datasets]
        if len(set(names)) != len(names):
            raise ConfigError("dataset names must be unique")


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = set(obj) - set(allowed)
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def parse_config(data: dict, base_dir: Path | str = ".") -> BenchConfig:
    base_dir = Path(base_dir)
    _check_keys(data, {"datasets", "algorithms", "seeds", "timeout", "workers", "output_dir"}, "config")
    try:
        datasets = []
        for i, d in enumerate(data.get("datasets", [])):
            _check_keys(d, {"name", "path", "synthetic", "label_column", "temporal", "split"}, f"datasets[{i}]")
            if ("path" in d) == ("synthetic" in d):
                raise ConfigError(f"datasets[{i}]: give exactly one of 'path' or 'synthetic'")
            sp = d.get("split", {})
            _check_keys(sp, {"fraction", "contiguous"}, f"datasets[{i}].split")
            synth = None
            if "synthetic" in d:
                _check_keys(d["synthetic"], {"kind", "size", "dims", "anomaly_count", "anomaly_magnitude", "seed"}, f"datasets[{i}].synthetic")
                synth = SyntheticSpec(**d["synthetic"])
            path = d.get("path")
            if path is not None and not Path(path).is_absolute():
                path = str(base_dir / path)
            name = d.get("name") or (Path(path).stem if path else f"synthetic-{i}")
            fraction = float(sp.get("fraction", 0.7))
            if not 0 < fraction <= 1:
                raise ConfigError(f"datasets[{i}].split.fraction must be in (0, 1]")
            datasets.append(
                DatasetEntry(
                    name=name,
                    path=path,
                    synthetic=synth,
                    label_column=d.get("label_column", "label"),
                    temporal=bool(d.get("temporal", False)),
                    fraction=fraction,
                    contiguous=bool(sp.get("contiguous", False)),
                )
            )
        algorithms = []
        for i, a in enumerate(data.get("algorithms", [])):
            if isinstance(a, str):
                a = {"name": a}
            _check_keys(a, {"name", "params"}, f"algorithms[{i}]")
            if a.get("name") not in ALGORITHMS:
                raise ConfigError(f"algorithms[{i}]: unknown algorithm {a.get('name')!r}; choose from {sorted(ALGORITHMS)}")
            algorithms.append(AlgorithmEntry(a["name"], dict(a.get("params", {}))))
        seeds = tuple(int(s) for s in data.get("seeds", (0, 1, 2)))
        if any(s < 0 for s in seeds):
            raise ConfigError("seeds must be non-negative")
        return BenchConfig(
            datasets=tuple(datasets),
            algorithms=tuple(algorithms),
            seeds=seeds,
            timeout=float(data.get("timeout", DEFAULT_TIMEOUT)),
            workers=int(data.get("workers", 1)),
            output_dir=str(base_dir / data.get("output_dir", "bench-out")),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> BenchConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(data, path.parent)


# --------------------------------------------------------------------------
# Running
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BenchRow:
    dataset: str
    algorithm: str
    seed: int
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    auc_roc: float | None = None
    wall_time_ms: float = 0.0
    status: str = "ok"  # ok | na-timeout | error
    auc_source: str = ""  # "score" or "prediction"
    undefined: tuple = ()
    message: str = ""

    def metric(self, name: str) -> float | None:
        return getattr(self, name)


@dataclass
class BenchReport:
    rows: list
    rng: str = RNG_NAME

    def to_dicts(self, include_timing: bool = True) -> list:
        out = []
        for r in self.rows:
            d = asdict(r)
            d["undefined"] = list(r.undefined)
            if not include_timing:
                d.pop("wall_time_ms")
            out.append(d)
        return out

    def to_json(self, include_timing: bool = True) -> str:
        return json.dumps({"rng": self.rng, "rows": self.to_dicts(include_timing)}, indent=2, sort_keys=True)


def cell_seed(seed: int, dataset: str, algorithm: str) -> int:
    """Seed for one (dataset, algorithm, seed) cell, stable across platforms."""
    ss = np.random.SeedSequence([seed, zlib.crc32(dataset.encode()), zlib.crc32(algorithm.encode())])
    return int(ss.generate_state(1)[0])


def run_cell(dataset: Dataset, entry: DatasetEntry, algo: AlgorithmEntry, seed: int, timeout: float) -> BenchRow:
    base = dict(dataset=entry.name, algorithm=algo.name, seed=seed)
    try:
        start = time.perf_counter()
        det = detect(dataset, algo.name, cell_seed(seed, entry.name, algo.name), entry.fraction, entry.contiguous, **algo.params)
        elapsed_ms = (time.perf_counter() - start) * 1e3
    except Exception as exc:  # recorded per row; the run continues
        logger.warning("%s/%s/%d failed: %s", entry.name, algo.name, seed, exc)
        return BenchRow(**base, status="error", message=f"{type(exc).__name__}: {exc}")
    if elapsed_ms > timeout * 1e3:
        return BenchRow(**base, wall_time_ms=elapsed_ms, status="na-timeout")
    if dataset.labels is None:
        return BenchRow(**base, wall_time_ms=elapsed_ms, status="error", message="dataset has no labels")
    m = evaluate(det.predictions, dataset.labels, det.scores)
    return BenchRow(
        **base,
        precision=m.precision,
        recall=m.recall,
        f1=m.f1,
        auc_roc=m.auc_roc,
        wall_time_ms=elapsed_ms,
        auc_source="prediction" if det.scores is None else "score",
        undefined=tuple(sorted(m.undefined)),
    )


def run_benchmark(config: BenchConfig, workers: int | None = None, timeout: float | None = None) -> BenchReport:
    """Run every (dataset, algorithm, seed) cell and collect one row each.

    Wall time covers fit and score only. Cells slower than ``timeout``
    seconds are reported as ``na-timeout`` without metrics; failures are
    reported as ``error`` rows. Row order follows the config regardless of
    ``workers``.
    """
    workers = workers or config.workers
    timeout = timeout if timeout is not None else config.timeout
    if not timeout > 0:
        raise ConfigError("timeout must be positive")

    loaded = {}
    for entry in config.datasets:
        try:
            loaded[entry.name] = entry.load()
        except Exception as exc:
            loaded[entry.name] = exc

    jobs = []
    for entry in config.datasets:
        for algo in config.algorithms:
            for seed in config.seeds:
                jobs.append((entry, algo, seed))

    def work(job):
        entry, algo, seed = job
        ds = loaded[entry.name]
        if isinstance(ds, Exception):
            return BenchRow(entry.name, algo.name, seed, status="error", message=f"load failed: {ds}")
        return run_cell(ds, entry, algo, seed, timeout)

    if workers == 1:
        rows = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(work, jobs))
    return BenchReport(rows)


# --------------------------------------------------------------------------
# Tallies
# --------------------------------------------------------------------------


def winner_tally(report: BenchReport, metric: str) -> dict:
    """Count datasets on which each algorithm attains the best ``metric``.

    Seeds are averaged per (dataset, algorithm) and values compared after
    rounding to 4 decimals; every algorithm sharing the best value gets a
    credit. Only ``ok`` rows take part.
    """
    if metric not in METRICS:
        raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")
    if not report.rows:
        raise ValueError("empty report")
    if all(r.metric(metric) is None for r in report.rows):
        raise ValueError(f"no row carries {metric!r}")

    counts = {r.algorithm: 0 for r in report.rows}
    per_dataset: dict = {}
    for r in report.rows:
        value = r.metric(metric)
        if r.status != "ok" or value is None:
            continue
        per_dataset.setdefault(r.dataset, {}).setdefault(r.algorithm, []).append(value)
    for algos in per_dataset.values():
        rounded = {a: round(float(np.mean(v)), 4) for a, v in algos.items()}
        best = max(rounded.values())
        for a, v in rounded.items():
            if v == best:
                counts[a] += 1
    return counts


# --------------------------------------------------------------------------
# Output
# --------------------------------------------------------------------------


def _fmt(v, digits=4):
    return "" if v is None else f"{v:.{digits}f}"


def report_csv(report: BenchReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.rows:
        w.writerow(
            [
                r.dataset,
                r.algorithm,
                r.seed,
                *(_fmt(r.metric(m)) for m in METRICS),
                _fmt(r.wall_time_ms, 3),
                r.status,
                r.auc_source,
                ";".join(r.undefined),
            ]
        )
    return buf.getvalue()


def report_markdown(report: BenchReport) -> str:
    lines = []
    datasets = list(dict.fromkeys(r.dataset for r in report.rows))
    for ds in datasets:
        lines += [f"### {ds}", "", "| Algorithm | Seed | Precision | Recall | F1 | AUC-ROC | Time (ms) | Status |", "|---|---|---|---|---|---|---|---|"]
        for r in report.rows:
            if r.dataset != ds:
                continue
            cells = [_fmt(r.metric(m)) if r.status == "ok" else "NA" for m in METRICS]
            lines.append(f"| {r.algorithm} | {r.seed} | {' | '.join(cells)} | {r.wall_time_ms:.1f} | {r.status} |")
        lines.append("")
    return "\n".join(lines)


def emit_report(report: BenchReport, fmt: str, path) -> Path:
    path = Path(path)
    if fmt == "csv":
        text = report_csv(report)
    elif fmt == "json":
        text = report.to_json()
    elif fmt == "markdown":
        text = report_markdown(report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path.write_text(text, encoding="utf-8")
    return path


def read_report_csv(path) -> BenchReport:
    """Parse a CSV written by :func:`emit_report`."""
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            metrics = {m: (float(rec[m]) if rec.get(m) else None) for m in METRICS}
            rows.append(
                BenchRow(
                    dataset=rec["dataset"],
                    algorithm=rec["algorithm"],
                    seed=int(rec["seed"]),
                    wall_time_ms=float(rec["wall_time_ms"] or 0.0),
                    status=rec["status"],
                    auc_source=rec.get("auc_source", ""),
                    undefined=tuple(u for u in rec.get("undefined", "").split(";") if u),
                    **metrics,
                )
            )
    return BenchReport(rows)
