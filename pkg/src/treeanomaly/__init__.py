"""Unsupervised tree-based anomaly detectors (MGBTAI, DBTAI) with classical
baselines, evaluation metrics and a benchmark harness."""

from .baselines import envelope_run, iforest_run, lof_run, path_norm_c
from .bench import BenchConfig, BenchReport, emit_report, run_benchmark, winner_tally
from .clustering import Clustering, gaussian_kde, kmeans
from .datasets import Dataset, SplitSpec, SyntheticSpec, generate_synthetic, load_csv, split
from .metrics import auc_roc, confusion, evaluate, prf1, run_stddev
from .threshold import apply_threshold, cumulative_curve, knee_threshold
from .trees import TreeParams, build_tree, density_weight_scores, ecblof_scores, tree_detect

__version__ = "0.1.0"
