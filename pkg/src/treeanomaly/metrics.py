"""Confusion counts, precision/recall/F1, rank AUC-ROC and run variability.

Degenerate ratios (zero denominators, single-class AUC) are reported as 0
with an ``undefined`` flag set, so tables stay numeric.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricBundle:
    precision: float = 0.0
    recall: float = 0.0
    f1: float = 0.0
    auc_roc: float = 0.0
    undefined: frozenset = field(default_factory=frozenset)

    def as_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc_roc": self.auc_roc,
            "undefined": sorted(self.undefined),
        }


def _binary(v, name):
    a = np.asarray(v).ravel()
    if not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must contain only 0 and 1")
    return a.astype(bool)


def confusion(pred, truth) -> Confusion:
    p, t = _binary(pred, "pred"), _binary(truth, "truth")
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} labels")
    return Confusion(
        tp=int(np.sum(p & t)),
        fp=int(np.sum(p & ~t)),
        tn=int(np.sum(~p & ~t)),
        fn=int(np.sum(~p & t)),
    )


def prf1(c: Confusion) -> MetricBundle:
    undefined = set()
    if c.tp + c.fp:
        p = c.tp / (c.tp + c.fp)
    else:
        p = 0.0
        undefined.add("precision")
    if c.tp + c.fn:
        r = c.tp / (c.tp + c.fn)
    else:
        r = 0.0
        undefined.add("recall")
    if p + r > 0:
        f1 = 2 * p * r / (p + r)
    else:
        f1 = 0.0
        if undefined:
            undefined.add("f1")
    return MetricBundle(p, r, f1, undefined=frozenset(undefined))


def auc_roc(scores, truth) -> float | None:
    """Mann-Whitney AUC with half credit for tied pairs.

    Returns ``None`` when ``truth`` holds a single class.
    """
    s = np.asarray(scores, dtype=np.float64).ravel()
    t = _binary(truth, "truth")
    if s.shape != t.shape:
        raise ValueError("scores and truth differ in length")
    pos, neg = int(t.sum()), int((~t).sum())
    if pos == 0 or neg == 0:
        return None
    ranks = rankdata(s)  # average ranks give ties half credit
    u = ranks[t].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def evaluate(pred, truth, scores=None) -> MetricBundle:
    """All four metrics; AUC uses ``scores`` when given, else the predictions."""
    base = prf1(confusion(pred, truth))
    auc = auc_roc(pred if scores is None else scores, truth)
    undefined = set(base.undefined)
    if auc is None:
        auc = 0.0
        undefined.add("auc_roc")
    return MetricBundle(base.precision, base.recall, base.f1, auc, frozenset(undefined))


def run_stddev(values) -> float:
    """Sample standard deviation (divisor n - 1) of repeated-run metrics."""
    v = [float(x) for x in np.asarray(values, dtype=np.float64).ravel()]
    if len(v) < 2:
        raise ValueError("need at least two runs")
    return statistics.stdev(v)
