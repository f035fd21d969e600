"""Point clouds, seeded samplers and exact neighbour queries.

All random sampling goes through :func:`numpy.random.default_rng` (PCG64)
seeded with the caller's integer, so clouds are bit-reproducible.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

# relative slack when asking the kd-tree for candidates; exact filtering follows
_CANDIDATE_SLACK = 1e-9


class EmptyInputError(ValueError):
    """Raised when a cloud or label file contains no data."""


class ParseError(ValueError):
    """Raised for malformed CSV input; carries the 1-based row number."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


@dataclass(frozen=True)
class PointCloud:
    """``n`` points in ``R^d`` stored as a read-only ``(n, d)`` float array."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[:, None]
        if pts.ndim != 2:
            raise ValueError("points must be a 2-d array of shape (n, d)")
        if pts.shape[0] < 1:
            raise EmptyInputError("a point cloud needs at least one point")
        if pts.shape[1] < 1:
            raise ValueError("points must have at least one coordinate")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def size(self):
        return self.points.shape[0]

    def __len__(self):
        return self.size


@dataclass(frozen=True)
class LabelConstraints:
    """Hard constraints ``u[i] = y_i`` on a subset of vertices."""

    indices: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        val = np.asarray(self.values, dtype=np.float64).ravel()
        if idx.shape != val.shape:
            raise ValueError("indices and values must have the same length")
        if len(np.unique(idx)) != len(idx):
            raise ValueError("constraint indices must be distinct")
        if np.any(idx < 0):
            raise IndexError("constraint indices must be non-negative")
        if not np.all(np.isfinite(val)):
            raise ValueError("constraint values must be finite")
        idx.setflags(write=False)
        val.setflags(write=False)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "values", val)

    @classmethod
    def from_mapping(cls, mapping):
        items = sorted(mapping.items())
        return cls([i for i, _ in items], [v for _, v in items])

    @property
    def count(self):
        return len(self.indices)

    def check_range(self, n):
        if self.count and self.indices.max() >= n:
            raise IndexError(
                f"constraint index {int(self.indices.max())} out of range for {n} vertices"
            )

    def as_dict(self):
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}


def _distances(points, center, candidates):
    diff = points[candidates] - points[center]
    return np.sqrt(np.sum(diff * diff, axis=1))


@dataclass(frozen=True)
class NeighborIndex:
    """Exact range / k-nearest search over a :class:`PointCloud`.

    A kd-tree proposes candidates; membership and ordering are then decided
    from distances recomputed here, so answers equal brute force exactly.
    """

    cloud: PointCloud
    _tree: cKDTree = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "_tree", cKDTree(self.cloud.points))

    @property
    def size(self):
        return self.cloud.size

    @property
    def dim(self):
        return self.cloud.dim

    def _check_center(self, center_idx):
        if not 0 <= center_idx < self.size:
            raise IndexError(f"vertex index {center_idx} out of range [0, {self.size})")

    def ball(self, center_idx, radius):
        center_idx = int(center_idx)
        self._check_center(center_idx)
        if radius < 0:
            raise ValueError("radius must be non-negative")
        pts = self.cloud.points
        cand = self._tree.query_ball_point(
            pts[center_idx], radius * (1 + _CANDIDATE_SLACK) + 1e-300
        )
        cand = np.asarray(cand, dtype=np.int64)
        d = _distances(pts, center_idx, cand)
        out = cand[d <= radius]
        if center_idx not in out:
            out = np.append(out, center_idx)
        return np.sort(out)

    def knn(self, center_idx, k):
        center_idx = int(center_idx)
        self._check_center(center_idx)
        if not 1 <= k <= self.size:
            raise ValueError(f"k must lie in [1, {self.size}], got {k}")
        pts = self.cloud.points
        kth, _ = self._tree.query(pts[center_idx], k=k)
        kth = float(np.max(np.atleast_1d(kth)))
        cand = np.asarray(
            self._tree.query_ball_point(pts[center_idx], kth * (1 + _CANDIDATE_SLACK) + 1e-12),
            dtype=np.int64,
        )
        cand = cand[cand != center_idx]
        d = _distances(pts, center_idx, cand)
        order = np.lexsort((cand, d))
        return np.concatenate(([center_idx], cand[order][: k - 1])).astype(np.int64)

    def knn_distances(self, k):
        """Distance from every vertex to its ``k``-th nearest other vertex."""
        if not 1 <= k < self.size:
            raise ValueError(f"k must lie in [1, {self.size - 1}], got {k}")
        d, _ = self._tree.query(self.cloud.points, k=k + 1)
        return np.asarray(d, dtype=np.float64)[:, -1]


def query_ball(index, center_idx, radius):
    """Indices ``j`` with ``|x_center - x_j| <= radius``, ascending."""
    return index.ball(center_idx, radius)


def query_knn(index, center_idx, k):
    """The ``k`` nearest vertices (centre first, ties toward lower index)."""
    return index.knn(center_idx, k)


def load_point_cloud(path):
    """Read a header-less CSV of coordinates, one point per row."""
    rows = []
    width = None
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError as exc:
                raise ParseError(f"non-numeric entry ({exc})", lineno) from None
            if width is None:
                width = len(vals)
            elif len(vals) != width:
                raise ParseError(f"expected {width} columns, found {len(vals)}", lineno)
            rows.append(vals)
    if not rows:
        raise EmptyInputError(f"{path}: no points")
    return PointCloud(np.asarray(rows, dtype=np.float64))


def load_labels(path):
    """Read ``index,value`` rows into :class:`LabelConstraints`."""
    mapping = {}
    with open(Path(path), newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError("expected 'index,value'", lineno)
            try:
                idx, val = int(row[0]), float(row[1])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if idx in mapping:
                raise ParseError(f"duplicate index {idx}", lineno)
            mapping[idx] = val
    if not mapping:
        raise EmptyInputError(f"{path}: no labels")
    return LabelConstraints.from_mapping(mapping)


def sample_uniform_1d(n, seed):
    """``n`` i.i.d. Uniform(0, 1) points; zero draws are rejected."""
    if n < 1:
        raise EmptyInputError("n must be at least 1")
    rng = np.random.default_rng(seed)
    x = rng.random(n)
    # default_rng draws from [0, 1); keep the open interval
    while np.any(x == 0.0):
        x[x == 0.0] = rng.random(int(np.sum(x == 0.0)))
    return PointCloud(x[:, None])


def sample_gaussian_clusters(centers, sigma, per_cluster, seed):
    """Isotropic Gaussian blobs; returns the cloud and the true class per point."""
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.shape[0] == 0:
        raise ValueError("at least one center is required")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if per_cluster < 1:
        raise EmptyInputError("per_cluster must be at least 1")
    rng = np.random.default_rng(seed)
    n_c, d = centers.shape
    noise = rng.standard_normal((n_c, per_cluster, d))
    pts = centers[:, None, :] + sigma * noise
    classes = np.repeat(np.arange(n_c), per_cluster)
    return PointCloud(pts.reshape(-1, d)), classes
