"""Classical baselines: Isolation Forest, Local Outlier Factor, robust envelope.

Default parameters are pinned: iForest with 100 trees on 256-point
subsamples, LOF with k=20, and a minimum-covariance-determinant envelope with
support fraction 0.75, contamination 0.1 and 30 random starts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

EULER_GAMMA = 0.5772156649

LRD_CAP = 1e12


def _points(data) -> np.ndarray:
    x = data.points if hasattr(data, "points") else np.asarray(data, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return x


def path_norm_c(n) -> float | np.ndarray:
    """Average unsuccessful-search path length in a binary search tree of ``n`` items.

    ``c(1) = 0`` and ``c(n) = 2 (ln(n - 1) + gamma) - 2 (n - 1) / n`` otherwise.
    """
    arr = np.asarray(n, dtype=np.float64)
    if np.any(arr < 1):
        raise ValueError("path_norm_c needs n >= 1")
    with np.errstate(divide="ignore"):
        out = np.where(arr > 1, 2.0 * (np.log(np.maximum(arr - 1, 1)) + EULER_GAMMA) - 2.0 * (arr - 1) / arr, 0.0)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# Isolation Forest
# --------------------------------------------------------------------------


@dataclass
class IsolationTree:
    feature: np.ndarray  # -1 at leaves
    split: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    depth: np.ndarray
    lower: np.ndarray = field(repr=False)  # feature range at each internal node
    upper: np.ndarray = field(repr=False)

    @property
    def max_depth(self) -> int:
        return int(self.depth.max())

    def path_length(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.intp)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.flatnonzero(active)
            cur = node[idx]
            go_left = x[idx, self.feature[cur]] < self.split[cur]
            node[idx] = np.where(go_left, self.left[cur], self.right[cur])
            active[idx] = self.feature[node[idx]] >= 0
        return self.depth[node] + path_norm_c(np.maximum(self.size[node], 1))


def grow_isolation_tree(x: np.ndarray, max_depth: int, rng: np.random.Generator) -> IsolationTree:
    feature, split, left, right, size, depth, lower, upper = ([] for _ in range(8))

    def new_node(n, d):
        for lst, v in ((feature, -1), (split, 0.0), (left, -1), (right, -1), (size, n), (depth, d), (lower, 0.0), (upper, 0.0)):
            lst.append(v)
        return len(feature) - 1

    stack = [(new_node(len(x), 0), np.arange(len(x)))]
    while stack:
        nid, idx = stack.pop()
        if len(idx) <= 1 or depth[nid] >= max_depth:
            continue
        sub = x[idx]
        lo, hi = sub.min(axis=0), sub.max(axis=0)
        usable = np.flatnonzero(hi > lo)
        if usable.size == 0:
            continue
        f = int(rng.choice(usable))
        s = rng.uniform(lo[f], hi[f])
        if s <= lo[f]:  # uniform() may return the lower endpoint
            s = np.nextafter(lo[f], hi[f])
        mask = sub[:, f] < s
        feature[nid], split[nid], lower[nid], upper[nid] = f, s, lo[f], hi[f]
        l_id = new_node(int(mask.sum()), depth[nid] + 1)
        r_id = new_node(int((~mask).sum()), depth[nid] + 1)
        left[nid], right[nid] = l_id, r_id
        stack.append((l_id, idx[mask]))
        stack.append((r_id, idx[~mask]))

    return IsolationTree(
        np.array(feature, dtype=np.intp),
        np.array(split),
        np.array(left, dtype=np.intp),
        np.array(right, dtype=np.intp),
        np.array(size, dtype=np.intp),
        np.array(depth, dtype=np.float64),
        np.array(lower),
        np.array(upper),
    )


@dataclass
class IForestModel:
    trees: list
    n_trees: int
    subsample: int
    max_depth: int

    def expected_path_length(self, x) -> np.ndarray:
        x = _points(x)
        return np.mean([t.path_length(x) for t in self.trees], axis=0)

    def score(self, x) -> np.ndarray:
        """Anomaly score ``2 ** (-E[h(x)] / c(subsample))`` in (0, 1)."""
        c = path_norm_c(self.subsample)
        if c == 0.0:
            # a one-point subsample isolates nothing
            return np.full(_points(x).shape[0], 0.5)
        return 2.0 ** (-self.expected_path_length(x) / c)


def iforest_fit(train, seed: int = 0, n_trees: int = 100, subsample: int = 256) -> IForestModel:
    x = _points(train)
    n = x.shape[0]
    if n == 0:
        raise ValueError("empty training set")
    psi = min(subsample, n)
    max_depth = max(1, math.ceil(math.log2(psi))) if psi > 1 else 0
    trees = []
    for child in np.random.SeedSequence(seed).spawn(n_trees):
        rng = np.random.Generator(np.random.PCG64(child))
        rows = rng.choice(n, size=psi, replace=False)
        trees.append(grow_isolation_tree(x[rows], max_depth, rng))
    return IForestModel(trees, n_trees, psi, max_depth)


def iforest_run(train, test, seed: int = 0, n_trees: int = 100, subsample: int = 256) -> np.ndarray:
    xt, xs = _points(train), _points(test)
    if xt.shape[1] != xs.shape[1]:
        raise ValueError("train and test dimensionality differ")
    return iforest_fit(xt, seed, n_trees, subsample).score(xs)


# --------------------------------------------------------------------------
# Local Outlier Factor
# --------------------------------------------------------------------------


@dataclass
class LOFModel:
    train: np.ndarray
    k: int
    k_distance: np.ndarray
    lrd: np.ndarray


def _neighbourhood_stats(d: np.ndarray, k: int, train_kdist: np.ndarray):
    """k-distance, lrd and neighbour masks for rows of a distance matrix.

    Neighbourhoods include every point tied at the k-distance.
    """
    kdist = np.partition(d, k - 1, axis=1)[:, k - 1]
    mask = d <= kdist[:, None]
    reach = np.where(mask, np.maximum(d, train_kdist[None, :]), 0.0)
    total = reach.sum(axis=1)
    count = mask.sum(axis=1)
    with np.errstate(divide="ignore"):
        lrd = np.where(total > 0, count / np.where(total > 0, total, 1.0), LRD_CAP)
    return kdist, lrd, mask, count


def _row_blocks(n_rows: int, n_cols: int, budget: int = 4_000_000):
    step = max(1, budget // max(n_cols, 1))
    for start in range(0, n_rows, step):
        yield slice(start, min(start + step, n_rows))


def lof_fit(train, k: int = 20) -> LOFModel:
    x = _points(train)
    n = x.shape[0]
    if k < 1 or k >= n:
        raise ValueError(f"LOF needs 1 <= k < N_train, got k={k}, N_train={n}")
    kdist = np.empty(n)
    for rows in _row_blocks(n, n):
        d = cdist(x[rows], x)
        d[np.arange(d.shape[0]), np.arange(rows.start, rows.stop)] = np.inf  # exclude self
        kdist[rows] = np.partition(d, k - 1, axis=1)[:, k - 1]
    lrd = np.empty(n)
    for rows in _row_blocks(n, n):
        d = cdist(x[rows], x)
        d[np.arange(d.shape[0]), np.arange(rows.start, rows.stop)] = np.inf
        _, lrd[rows], _, _ = _neighbourhood_stats(d, k, kdist)
    return LOFModel(x, k, kdist, lrd)


def lof_score(model: LOFModel, test) -> np.ndarray:
    """LOF of each query point against the training neighbourhoods.

    Queries are treated as new points: a query equal to a training row sees
    that row as a neighbour at distance zero.
    """
    q = _points(test)
    out = np.empty(q.shape[0])
    for rows in _row_blocks(q.shape[0], model.train.shape[0]):
        d = cdist(q[rows], model.train)
        _, lrd_q, mask, count = _neighbourhood_stats(d, model.k, model.k_distance)
        ratio_sum = (mask * model.lrd[None, :]).sum(axis=1)
        out[rows] = ratio_sum / count / lrd_q
    return out


def lof_run(train, test, k: int = 20) -> np.ndarray:
    return lof_score(lof_fit(train, k), test)


def top_fraction(scores, contamination: float = 0.1) -> np.ndarray:
    """Flag the ``ceil(contamination * N)`` highest scores (stable order on ties)."""
    s = np.asarray(scores, dtype=np.float64)
    m = math.ceil(contamination * s.size)
    pred = np.zeros(s.size, dtype=np.int8)
    if m:
        pred[np.argsort(-s, kind="stable")[:m]] = 1
    return pred


# --------------------------------------------------------------------------
# Robust (MCD) elliptic envelope
# --------------------------------------------------------------------------


class SingularCovarianceError(ValueError):
    pass


@dataclass
class EnvelopeModel:
    location: np.ndarray
    covariance: np.ndarray
    precision: np.ndarray
    threshold: float
    support: np.ndarray  # indices of the h training rows behind the estimate
    support_fraction: float = 0.75
    contamination: float = 0.1
    log_det: float = 0.0
    # log-determinant after each concentration step of the winning trial
    trace: tuple = field(default=(), repr=False)

    def mahalanobis(self, x) -> np.ndarray:
        diff = _points(x) - self.location
        return np.einsum("ij,jk,ik->i", diff, self.precision, diff)

    def predict(self, x) -> np.ndarray:
        return (self.mahalanobis(x) > self.threshold).astype(np.int8)


def _regularised_cov(sub: np.ndarray):
    mu = sub.mean(axis=0)
    cov = np.atleast_2d(np.cov(sub, rowvar=False, bias=True))
    cov = (cov + cov.T) / 2
    d = cov.shape[0]
    tr = np.trace(cov)
    if np.linalg.eigvalsh(cov)[0] <= 1e-12 * max(tr, 1e-300):
        cov = cov + (1e-6 * tr / d) * np.eye(d)
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet) or tr <= 0:
        raise SingularCovarianceError("covariance is singular even after ridge regularisation")
    return mu, cov, logdet


def concentration_steps(x: np.ndarray, start: np.ndarray, h: int, max_steps: int = 100):
    """Run concentration steps from the rows ``start``.

    Each step refits mean and covariance on the ``h`` rows closest in
    Mahalanobis distance to the previous fit. Returns the final
    ``(location, covariance, support, log-determinant history)``; the
    history holds one entry per h-row fit and never increases.
    """
    mu, cov, _ = _regularised_cov(x[start])
    history = []
    support = None
    for _ in range(max_steps):
        diff = x - mu
        d2 = np.einsum("ij,ij->i", diff @ np.linalg.inv(cov), diff)
        new_support = np.sort(np.argsort(d2, kind="stable")[:h])
        if support is not None and np.array_equal(new_support, support):
            break
        support = new_support
        mu, cov, logdet = _regularised_cov(x[support])
        history.append(logdet)
    return mu, cov, support, history


def envelope_fit(train, seed: int = 0, support_fraction: float = 0.75, contamination: float = 0.1, n_trials: int = 30) -> EnvelopeModel:
    x = _points(train)
    n, d = x.shape
    if n <= d + 1:
        raise ValueError(f"envelope needs more than D+1={d + 1} training rows, got {n}")
    h = math.ceil(support_fraction * n)
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_trials):
        rng = np.random.Generator(np.random.PCG64(child))
        start = rng.choice(n, size=d + 2, replace=False)
        try:
            mu, cov, support, hist = concentration_steps(x, start, h)
        except SingularCovarianceError:
            continue
        if best is None or hist[-1] < best[3][-1]:
            best = (mu, cov, support, hist)
    if best is None:
        raise SingularCovarianceError("no trial produced a non-singular covariance")
    mu, cov, support, hist = best
    precision = np.linalg.inv(cov)
    model = EnvelopeModel(mu, cov, precision, 0.0, support, support_fraction, contamination, hist[-1], tuple(hist))
    model.threshold = float(np.quantile(model.mahalanobis(x), 1.0 - contamination))
    return model


def envelope_run(train, test, seed: int = 0, support_fraction: float = 0.75, contamination: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    """Return squared Mahalanobis scores and 0/1 predictions for ``test``."""
    model = envelope_fit(train, seed, support_fraction, contamination)
    return model.mahalanobis(test), model.predict(test)
