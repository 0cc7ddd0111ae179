"""Knee/elbow thresholding on the cumulative curve of sorted anomaly scores."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


# deviations within this many percentage points of the maximum count as ties
_TIE_TOL = 1e-9


class DegenerateScoresError(ValueError):
    """All scores are zero, so the cumulative curve cannot be normalised."""


@dataclass(frozen=True)
class CumulativeCurve:
    xs: np.ndarray  # scores, ascending
    ys: np.ndarray  # cumulative share of the total, in percent


def cumulative_curve(scores) -> CumulativeCurve:
    s = np.asarray(scores, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("need at least one score")
    if np.any(s < 0) or not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite and non-negative")
    xs = np.sort(s)
    total = np.cumsum(xs)
    if total[-1] <= 0.0:
        raise DegenerateScoresError("all scores are zero")
    ys = total / total[-1] * 100.0
    ys[-1] = 100.0
    return CumulativeCurve(xs, ys)


def knee_threshold(curve: CumulativeCurve) -> tuple[float, float]:
    """Return ``(threshold, knee_percent)`` for a cumulative curve.

    The knee is the point lying farthest above the straight line joining the
    first and last curve points, measured vertically; the earliest point wins
    ties. Without an interior knee (fewer than three points, a zero-width x
    range, or no point above the chord) the threshold is the largest score,
    which nothing can exceed.
    """
    xs, ys = curve.xs, curve.ys
    n = xs.size
    if n < 3 or xs[-1] == xs[0]:
        return float(xs[-1]), float(ys[-1])
    slope = (ys[-1] - ys[0]) / (xs[-1] - xs[0])
    deviation = ys - (ys[0] + slope * (xs - xs[0]))
    best = deviation.max()
    if best <= _TIE_TOL:
        return float(xs[-1]), float(ys[-1])
    j = int(np.flatnonzero(deviation >= best - _TIE_TOL)[0])
    return float(xs[j]), float(ys[j])


def apply_threshold(scores, threshold: float) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) > threshold).astype(np.int8)


def knee_predict(scores) -> tuple[np.ndarray, float, float]:
    """Threshold ``scores`` at their knee; all-zero scores flag nothing."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    try:
        threshold, pct = knee_threshold(cumulative_curve(s))
    except DegenerateScoresError:
        threshold, pct = 0.0, float("nan")
    return apply_threshold(s, threshold), threshold, pct
