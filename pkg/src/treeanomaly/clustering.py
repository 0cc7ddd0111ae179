"""k-means (Lloyd with k-means++ seeding) and a Gaussian KDE."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    sizes: np.ndarray
    n_iter: int = 0
    # inertia after each assignment step, for convergence diagnostics
    inertia_history: tuple = field(default=(), repr=False)


def _sq_dists(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    d = (points**2).sum(1)[:, None] - 2.0 * points @ centroids.T + (centroids**2).sum(1)[None, :]
    return np.maximum(d, 0.0)


def _plusplus(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = points.shape[0]
    centers = [points[rng.integers(n)]]
    closest = ((points - centers[0]) ** 2).sum(1)
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # all remaining mass sits on existing centers
            idx = rng.integers(n)
        else:
            idx = int(np.searchsorted(np.cumsum(closest), rng.uniform(0, total), side="right"))
            idx = min(idx, n - 1)
        centers.append(points[idx])
        closest = np.minimum(closest, ((points - points[idx]) ** 2).sum(1))
    return np.array(centers, dtype=np.float64)


def _repair_empty(points, assignments, centroids, sq):
    k = centroids.shape[0]
    for _ in range(k):
        sizes = np.bincount(assignments, minlength=k)
        empty = np.flatnonzero(sizes == 0)
        if empty.size == 0:
            break
        own = sq[np.arange(len(points)), assignments]
        # only steal from clusters that keep at least one point
        own = np.where(sizes[assignments] > 1, own, -1.0)
        far = int(np.argmax(own))
        if own[far] < 0:
            break
        c = empty[0]
        assignments[far] = c
        centroids[c] = points[far]
        sq[:, c] = ((points - points[far]) ** 2).sum(1)
    return assignments


def kmeans(points, k: int, seed: int = 0, max_iter: int = 100, tol: float = 1e-6) -> Clustering:
    """Partition ``points`` into ``k`` clusters.

    Lloyd iterations from k-means++ seeds run until the largest centroid
    shift drops below ``tol`` or ``max_iter`` is reached. Assignment ties go
    to the lowest centroid index (``argmin`` order). An empty cluster takes
    the point farthest from its current centroid.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of points ({n})")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")

    rng = np.random.Generator(np.random.PCG64(seed))
    centroids = _plusplus(x, k, rng)
    history = []
    n_iter = 0
    while True:
        sq = _sq_dists(x, centroids)
        assignments = _repair_empty(x, np.argmin(sq, axis=1), centroids, sq)
        history.append(float(sq[np.arange(n), assignments].sum()))
        if n_iter >= max_iter:
            break
        new = np.empty_like(centroids)
        for c in range(k):
            new[c] = x[assignments == c].mean(axis=0)
        shift = np.sqrt(((new - centroids) ** 2).sum(1)).max()
        centroids = new
        n_iter += 1
        if shift < tol:
            sq = _sq_dists(x, centroids)
            assignments = _repair_empty(x, np.argmin(sq, axis=1), centroids, sq)
            history.append(float(sq[np.arange(n), assignments].sum()))
            break

    # exact inertia against final centroids, not the expanded-square form
    inertia = float(((x - centroids[assignments]) ** 2).sum())
    return Clustering(
        assignments=assignments,
        centroids=centroids,
        inertia=inertia,
        sizes=np.bincount(assignments, minlength=k),
        n_iter=n_iter,
        inertia_history=tuple(history),
    )


def scott_bandwidth(reference) -> float:
    """Scott's rule with the mean per-dimension sample standard deviation."""
    x = np.asarray(reference, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    n, d = x.shape
    sigma = float(x.std(axis=0, ddof=1).mean()) if n > 1 else 0.0
    return sigma * n ** (-1.0 / (d + 4))


def gaussian_kde(reference, queries, bandwidth: float | None = None, chunk: int = 2048) -> np.ndarray:
    """Evaluate an isotropic Gaussian kernel density estimate at ``queries``.

    Args:
        reference: (N, D) sample the density is built from.
        queries: (M, D) evaluation points.
        bandwidth: kernel width ``h``; Scott's rule when omitted.
        chunk: query rows evaluated per block to bound memory.

    Returns:
        (M,) array of non-negative densities.
    """
    ref = np.asarray(reference, dtype=np.float64)
    q = np.asarray(queries, dtype=np.float64)
    if ref.ndim == 1:
        ref = ref.reshape(-1, 1)
    if q.ndim == 1:
        q = q.reshape(-1, ref.shape[1])
    if ref.shape[0] == 0:
        raise ValueError("reference sample is empty")
    if q.shape[1] != ref.shape[1]:
        raise ValueError(f"dimension mismatch: reference D={ref.shape[1]}, queries D={q.shape[1]}")
    if bandwidth is None:
        h = scott_bandwidth(ref)
        if not h > 0:
            raise ValueError("reference has zero variance; pass an explicit bandwidth")
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ValueError(f"bandwidth must be positive, got {bandwidth}")

    n, d = ref.shape
    norm = 1.0 / (n * (h * np.sqrt(2 * np.pi)) ** d)
    ref_sq = (ref**2).sum(1)
    out = np.empty(q.shape[0])
    for start in range(0, q.shape[0], chunk):
        block = q[start : start + chunk]
        sq = (block**2).sum(1)[:, None] - 2.0 * block @ ref.T + ref_sq[None, :]
        np.maximum(sq, 0.0, out=sq)
        out[start : start + chunk] = np.exp(-sq / (2 * h * h)).sum(1) * norm
    return out
