"""``bench`` command line: run, detect, synth, tally."""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import bench
from .datasets import DatasetError, SyntheticSpec, generate_synthetic, load_csv, save_csv
from .metrics import evaluate

EXIT_OK, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2


def _cmd_run(args) -> int:
    try:
        config = bench.load_config(args.config)
    except bench.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report = bench.run_benchmark(config, workers=args.workers, timeout=args.timeout)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fmt, name in (("csv", "report.csv"), ("json", "report.json"), ("markdown", "report.md")):
        bench.emit_report(report, fmt, out / name)
    n_err = sum(r.status == "error" for r in report.rows)
    n_na = sum(r.status == "na-timeout" for r in report.rows)
    print(f"{len(report.rows)} cells, {n_err} errors, {n_na} timed out; reports in {out}")
    for metric in bench.METRICS:
        if any(r.status == "ok" for r in report.rows):
            tally = bench.winner_tally(report, metric)
            print(f"{metric:>9}: " + ", ".join(f"{a}={c}" for a, c in tally.items()))
    return EXIT_PARTIAL if n_err else EXIT_OK


def _cmd_detect(args) -> int:
    try:
        ds = load_csv(args.input, args.label_column)
    except DatasetError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    det = bench.detect(ds, args.algo, args.seed, args.fraction)
    with open(args.output, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "score", "prediction"])
        for i in range(ds.n):
            w.writerow([i, repr(float(det.scores[i])), int(det.predictions[i])])
    if ds.labels is not None:
        m = evaluate(det.predictions, ds.labels, det.scores)
        print(f"precision={m.precision:.4f} recall={m.recall:.4f} f1={m.f1:.4f} auc_roc={m.auc_roc:.4f}")
    print(f"{int(det.predictions.sum())} of {ds.n} points flagged; wrote {args.output}")
    return EXIT_OK


def _cmd_synth(args) -> int:
    kind = {"uni": "univariate-series", "multi": "multivariate-blobs"}[args.kind]
    try:
        spec = SyntheticSpec(kind, args.size, args.dims if args.kind == "multi" else 1, args.anomalies, args.magnitude, args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    save_csv(generate_synthetic(spec), args.output)
    print(f"wrote {args.size} rows ({args.anomalies} anomalies) to {args.output}")
    return EXIT_OK


def _cmd_tally(args) -> int:
    report = bench.read_report_csv(args.report)
    try:
        counts = bench.winner_tally(report, args.metric)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for algo, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0])):
        print(f"{algo}\t{c}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bench", description="Tree-based and classical anomaly detection benchmark.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a benchmark config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--timeout", type=float, default=None, help="seconds per cell")
    p.set_defaults(func=_cmd_run)

    p = sub.add_parser("detect", help="score one CSV with one detector")
    p.add_argument("--algo", required=True, choices=sorted(bench.ALGORITHMS))
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fraction", type=float, default=0.7, help="training fraction for baselines")
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_detect)

    p = sub.add_parser("synth", help="write a synthetic labelled dataset")
    p.add_argument("--kind", required=True, choices=["uni", "multi"])
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--dims", type=int, default=5, help="features for --kind multi")
    p.add_argument("--anomalies", type=int, required=True)
    p.add_argument("--magnitude", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("tally", help="winner counts from a CSV report")
    p.add_argument("--report", required=True)
    p.add_argument("--metric", required=True, choices=list(bench.METRICS))
    p.set_defaults(func=_cmd_tally)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
