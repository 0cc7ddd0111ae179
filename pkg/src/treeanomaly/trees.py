"""Binary cluster trees and ECBLOF scoring for the MGBTAI and DBTAI detectors.

Both detectors recursively split the data with 2-means and score each point
by its distance to a leaf centroid; members of leaves below
``small_cluster_frac * N`` points are scored against the nearest large-leaf
centroid instead, so an isolated point split off into its own leaf does not
score zero. DBTAI additionally

* rejects splits that leave ``split_threshold`` or more of a node in one
  child, and
* rescales scores by leaf density relative to the median leaf, with the
  adjustment scaled down for leaves smaller than the largest one.

Anomalies are the points scoring above the knee of the cumulative score
curve (see :mod:`treeanomaly.threshold`).
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .clustering import gaussian_kde, kmeans
from .threshold import knee_predict


class Preset(str, Enum):
    MGBTAI = "mgbtai"
    DBTAI = "dbtai"


@dataclass(frozen=True)
class TreeParams:
    min_cluster_frac: float
    leaf_level: int
    small_cluster_frac: float | None = None
    split_threshold: float | None = None
    branching: int = 2
    density_weighting: bool = False
    bandwidth: float | None = None  # KDE width; Scott's rule when None
    combine: str = "product"  # see density_weight_scores

    def __post_init__(self):
        if not 0.0 < self.min_cluster_frac < 1.0:
            raise ValueError("min_cluster_frac must be in (0, 1)")
        if self.leaf_level < 1:
            raise ValueError("leaf_level must be positive")
        if self.branching != 2:
            raise ValueError("only binary trees are supported")
        if self.small_cluster_frac is not None:
            if not 0.0 < self.small_cluster_frac < 1.0:
                raise ValueError("small_cluster_frac must be in (0, 1)")
            if self.small_cluster_frac >= self.min_cluster_frac:
                raise ValueError("small_cluster_frac must be below min_cluster_frac")
        if self.split_threshold is not None and not 0.0 < self.split_threshold <= 1.0:
            raise ValueError("split_threshold must be in (0, 1]")
        if self.combine not in ("product", "blend"):
            raise ValueError(f"unknown combine rule {self.combine!r}")

    @classmethod
    def preset(cls, name: Preset | str) -> TreeParams:
        name = Preset(name)
        if name is Preset.MGBTAI:
            return cls(min_cluster_frac=0.20, leaf_level=4, small_cluster_frac=0.02)
        return cls(
            min_cluster_frac=0.10,
            leaf_level=3,
            small_cluster_frac=0.02,
            split_threshold=0.9,
            density_weighting=True,
        )


@dataclass
class TreeNode:
    indices: np.ndarray
    centroid: np.ndarray
    depth: int
    path: str  # "" for the root, then "0"/"1" per generation
    children: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class ClusterTree:
    root: TreeNode
    n_points: int
    params: TreeParams
    # filled on construction: leaf list and per-point leaf number
    leaves: list = field(init=False)
    leaf_of: np.ndarray = field(init=False)

    def __post_init__(self):
        self.leaves = [node for node in self.nodes() if node.is_leaf]
        self.leaf_of = np.full(self.n_points, -1, dtype=np.intp)
        for j, leaf in enumerate(self.leaves):
            self.leaf_of[leaf.indices] = j

    def nodes(self):
        """Pre-order traversal."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    @property
    def depth(self) -> int:
        return max(leaf.depth for leaf in self.leaves)

    @classmethod
    def from_leaves(cls, points, groups, params: TreeParams) -> ClusterTree:
        """Build a one-generation tree with the given leaf index groups.

        Useful for scoring a known partition without running k-means.
        """
        x = _as_matrix(points)
        all_idx = np.arange(x.shape[0])
        root = TreeNode(all_idx, x.mean(axis=0), 0, "")
        if len(groups) > 1:
            for j, g in enumerate(groups):
                g = np.asarray(g, dtype=np.intp)
                root.children.append(TreeNode(g, x[g].mean(axis=0), 1, str(j)))
        return cls(root, x.shape[0], params)


def _as_matrix(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return x


def _child_seed(seed: int, path: str) -> int:
    return (seed ^ zlib.crc32(path.encode())) & 0xFFFFFFFF


def build_tree(points, params: TreeParams, seed: int = 0) -> ClusterTree:
    """Recursively 2-means-split ``points`` into a :class:`ClusterTree`.

    A node stays a leaf when it sits at ``leaf_level``, holds fewer than
    ``min_cluster_frac * N`` points, has no spread, or (with
    ``split_threshold`` set) its larger child would keep at least that
    fraction of the node.
    """
    x = _as_matrix(points)
    n = x.shape[0]
    if n == 0:
        raise ValueError("cannot build a tree over zero points")
    min_size = params.min_cluster_frac * n

    root = TreeNode(np.arange(n), x.mean(axis=0), 0, "")
    stack = [root]
    while stack:
        node = stack.pop()
        if node.depth >= params.leaf_level or node.size < max(min_size, 2):
            continue
        sub = x[node.indices]
        if np.all(sub == sub[0]):
            continue
        cl = kmeans(sub, 2, seed=_child_seed(seed, node.path))
        if cl.sizes.min() == 0:
            continue
        if params.split_threshold is not None and cl.sizes.max() >= params.split_threshold * node.size:
            continue
        for c in range(2):
            idx = node.indices[cl.assignments == c]
            node.children.append(TreeNode(idx, x[idx].mean(axis=0), node.depth + 1, node.path + str(c)))
        stack.extend(node.children)
    return ClusterTree(root, n, params)


def large_leaf_mask(tree: ClusterTree) -> np.ndarray:
    sizes = np.array([leaf.size for leaf in tree.leaves])
    frac = tree.params.small_cluster_frac
    if frac is None:
        return np.ones(len(sizes), dtype=bool)
    large = sizes >= frac * tree.n_points
    if not large.any():
        # nothing to redirect to; every leaf scores against itself
        return np.ones(len(sizes), dtype=bool)
    return large


def ecblof_scores(tree: ClusterTree, points) -> np.ndarray:
    """Centroid-distance outlier scores.

    Members of a large leaf score their distance to that leaf's centroid.
    Members of a small leaf score their distance to the nearest
    large-leaf centroid.
    """
    x = _as_matrix(points)
    if x.shape[0] != tree.n_points:
        raise ValueError("points do not match the tree")
    centroids = np.array([leaf.centroid for leaf in tree.leaves])
    large = large_leaf_mask(tree)
    scores = np.linalg.norm(x - centroids[tree.leaf_of], axis=1)
    small_pts = ~large[tree.leaf_of]
    if small_pts.any():
        big = centroids[large]
        d = np.linalg.norm(x[small_pts, None, :] - big[None, :, :], axis=2)
        scores[small_pts] = d.min(axis=1)
    return scores


@dataclass(frozen=True)
class LeafWeights:
    density: np.ndarray  # mean KDE value over each leaf's members
    density_ratio: np.ndarray
    imbalance: np.ndarray


def leaf_weights(tree: ClusterTree, points, bandwidth: float | None = None) -> LeafWeights:
    x = _as_matrix(points)
    try:
        dens = gaussian_kde(x, x, bandwidth)
    except ValueError as exc:
        raise ValueError(f"density weighting failed ({exc}); set an explicit bandwidth") from exc
    per_leaf = np.array([dens[leaf.indices].mean() for leaf in tree.leaves])
    med = np.median(per_leaf)
    ratio = per_leaf / med if med > 0 else np.ones_like(per_leaf)
    sizes = np.array([leaf.size for leaf in tree.leaves], dtype=np.float64)
    return LeafWeights(per_leaf, ratio, sizes / sizes.max())


def density_weight_scores(raw, tree: ClusterTree, points, bandwidth: float | None = None, combine: str = "product") -> np.ndarray:
    """Rescale raw scores by leaf density.

    With ``r`` the leaf's density ratio to the median leaf and ``m`` its size
    over the largest leaf size, the per-leaf factor is

    * ``"product"``: ``r * m``;
    * ``"blend"``: ``1 + m * (r - 1)``, the density ratio pulled towards 1 in
      proportion to how small the leaf is. Small sparse leaves keep their
      full raw score, which recovers planted outliers more reliably.

    Both are 1 for a single-leaf tree and grow with leaf density.
    """
    raw = np.asarray(raw, dtype=np.float64)
    w = leaf_weights(tree, points, bandwidth)
    if combine == "blend":
        factor = 1.0 + w.imbalance * (w.density_ratio - 1.0)
    elif combine == "product":
        factor = w.density_ratio * w.imbalance
    else:
        raise ValueError(f"unknown combine rule {combine!r}")
    return raw * factor[tree.leaf_of]


@dataclass(frozen=True)
class DetectionResult:
    scores: np.ndarray
    predictions: np.ndarray
    threshold: float
    knee_percent: float
    tree: ClusterTree | None = field(default=None, repr=False)


def tree_detect(dataset, preset: Preset | str = Preset.DBTAI, seed: int = 0, params: TreeParams | None = None) -> DetectionResult:
    """Run MGBTAI or DBTAI on the full dataset (no training split)."""
    points = dataset.points if hasattr(dataset, "points") else _as_matrix(dataset)
    params = params or TreeParams.preset(preset)
    tree = build_tree(points, params, seed)
    scores = ecblof_scores(tree, points)
    if params.density_weighting and len(tree.leaves) > 1:
        scores = density_weight_scores(scores, tree, points, params.bandwidth, params.combine)
    predictions, threshold, pct = knee_predict(scores)
    return DetectionResult(scores, predictions, threshold, pct, tree)


__all__ = [
    "ClusterTree",
    "DetectionResult",
    "LeafWeights",
    "Preset",
    "TreeNode",
    "TreeParams",
    "build_tree",
    "density_weight_scores",
    "ecblof_scores",
    "leaf_weights",
    "tree_detect",
]
