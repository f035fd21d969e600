"""Distance-based hypergraphs (epsilon-ball, k-NN) and the pairwise graph baseline.

Edges are stored in flat CSR-style arrays: members of edge ``k`` are
``members[member_ptr[k]:member_ptr[k+1]]`` (ascending), and its pair weights
``weights[pair_ptr[k]:pair_ptr[k+1]]`` follow the lexicographic order of
member positions ``(a, b), a < b``. Homogeneous hypergraphs keep
``weights=None``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .geometry import NeighborIndex, PointCloud


class DisconnectedGraphWarning(UserWarning):
    """The constructed (hyper)graph has more than one connected component."""


class SparseRadiusWarning(UserWarning):
    """Connection radius at or below the connectivity rate ``delta_n``."""


@dataclass(frozen=True)
class WeightScheme:
    variant: str = "homogeneous"
    k0: int | None = None

    def __post_init__(self):
        if self.variant not in ("homogeneous", "self_tuning"):
            raise ValueError(f"unknown weight scheme {self.variant!r}")
        if self.variant == "self_tuning" and (self.k0 is None or self.k0 < 1):
            raise ValueError("self_tuning weights need k0 >= 1")

    @classmethod
    def parse(cls, text):
        """``'homogeneous'`` or ``'selftuning:K0'``."""
        text = text.strip().lower()
        if text in ("homogeneous", "uniform", "1"):
            return cls()
        name, _, k0 = text.partition(":")
        if name in ("selftuning", "self_tuning") and k0:
            return cls("self_tuning", int(k0))
        raise ValueError(f"cannot parse weight scheme {text!r}")

    def __str__(self):
        return "homogeneous" if self.variant == "homogeneous" else f"selftuning:{self.k0}"


HOMOGENEOUS = WeightScheme()


@dataclass(frozen=True)
class Hyperedge:
    centroid: int
    members: np.ndarray
    pair_weights: np.ndarray

    @property
    def size(self):
        return len(self.members)

    @property
    def n_pairs(self):
        m = len(self.members)
        return m * (m - 1) // 2

    def pairs(self):
        """Vertex index pairs ``(i, j)``, ``i < j``, in storage order."""
        a, b = np.triu_indices(len(self.members), 1)
        return self.members[a], self.members[b]

    @property
    def op_norm_sq(self):
        return edge_operator_norm_sq(self)


class Hypergraph:
    """Immutable collection of hyperedges over ``n_vertices`` vertices."""

    def __init__(self, n_vertices, centroids, member_ptr, members, weights=None,
                 kind="custom", scale=None, params=None, scheme=HOMOGENEOUS):
        self.n_vertices = int(n_vertices)
        self.centroids = np.asarray(centroids, dtype=np.int64)
        self.member_ptr = np.asarray(member_ptr, dtype=np.int64)
        self.members = np.asarray(members, dtype=np.int64)
        sizes = np.diff(self.member_ptr)
        self.pair_ptr = np.concatenate(([0], np.cumsum(sizes * (sizes - 1) // 2))).astype(np.int64)
        if weights is not None:
            weights = np.asarray(weights, dtype=np.float64)
            if weights.shape != (self.pair_ptr[-1],):
                raise ValueError("weights must have one entry per member pair")
            if np.any(weights < 0) or not np.all(np.isfinite(weights)):
                raise ValueError("pair weights must be finite and non-negative")
        self.weights = weights
        self.kind = kind
        self.scale = scale
        self.params = dict(params or {})
        self.scheme = scheme
        if len(self.centroids) != len(sizes):
            raise ValueError("one centroid per edge is required")
        if len(self.members) and (self.members.min() < 0 or self.members.max() >= self.n_vertices):
            raise IndexError("edge member out of vertex range")
        for arr in (self.centroids, self.member_ptr, self.members, self.pair_ptr):
            arr.setflags(write=False)
        if self.weights is not None:
            self.weights.setflags(write=False)

    @classmethod
    def from_edges(cls, n_vertices, member_lists, weight_lists=None, centroids=None, **kw):
        """Build from explicit member lists (each sorted on the way in)."""
        members, ptr, cents, wts = [], [0], [], []
        for k, mem in enumerate(member_lists):
            mem = np.asarray(mem, dtype=np.int64)
            order = np.argsort(mem, kind="stable")
            mem = mem[order]
            if len(np.unique(mem)) != len(mem):
                raise ValueError(f"edge {k} has repeated members")
            members.append(mem)
            ptr.append(ptr[-1] + len(mem))
            cents.append(int(mem[0]) if centroids is None else int(centroids[k]))
            if weight_lists is not None:
                w = np.asarray(weight_lists[k], dtype=np.float64)
                m = len(mem)
                if w.shape != (m * (m - 1) // 2,):
                    raise ValueError(f"edge {k}: expected {m * (m - 1) // 2} pair weights")
                wts.append(w)
        flat = np.concatenate(members) if members else np.zeros(0, np.int64)
        weights = None
        if weight_lists is not None:
            weights = np.concatenate(wts) if wts else np.zeros(0)
        return cls(n_vertices, cents, ptr, flat, weights, **kw)

    @property
    def n_edges(self):
        return len(self.centroids)

    @property
    def edge_sizes(self):
        return np.diff(self.member_ptr)

    @property
    def homogeneous(self):
        return self.weights is None

    def __len__(self):
        return self.n_edges

    def edge_members(self, k):
        return self.members[self.member_ptr[k]:self.member_ptr[k + 1]]

    def edge_weights(self, k):
        lo, hi = self.pair_ptr[k], self.pair_ptr[k + 1]
        if self.weights is None:
            return np.ones(hi - lo)
        return self.weights[lo:hi]

    def edge(self, k):
        return Hyperedge(int(self.centroids[k]), self.edge_members(k), self.edge_weights(k))

    def edges(self):
        return [self.edge(k) for k in range(self.n_edges)]

    def max_pair_weights(self):
        sizes = self.edge_sizes
        out = np.ones(self.n_edges)
        if self.weights is not None:
            has = sizes >= 2
            starts = self.pair_ptr[:-1][has]
            out[has] = np.maximum.reduceat(self.weights, starts) if len(starts) else []
        out[sizes < 2] = 0.0
        return out

    def op_norm_sq(self, p=2.0):
        """Per-edge upper bound on ``||A_k||^2`` (see :func:`edge_operator_norm_sq`)."""
        sizes = self.edge_sizes.astype(np.float64)
        return sizes * self.max_pair_weights() ** (2.0 / p)

    def to_dict(self):
        edges = []
        for k in range(self.n_edges):
            edges.append({
                "centroid": int(self.centroids[k]),
                "members": self.edge_members(k).tolist(),
                "pair_weights": self.edge_weights(k).tolist(),
            })
        return {"n": self.n_vertices, "kind": self.kind, "scale": self.scale,
                "params": self.params, "weights": str(self.scheme), "edges": edges}

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        scheme = WeightScheme.parse(d.get("weights", "homogeneous"))
        wl = [e["pair_weights"] for e in d["edges"]]
        homog = scheme.variant == "homogeneous" and all(w == 1.0 for ws in wl for w in ws)
        return cls.from_edges(
            d["n"], [e["members"] for e in d["edges"]], None if homog else wl,
            centroids=[e["centroid"] for e in d["edges"]], kind=d["kind"],
            scale=d.get("scale"), params=d.get("params"), scheme=scheme,
        )

    def __repr__(self):
        return (f"Hypergraph(kind={self.kind!r}, n_vertices={self.n_vertices}, "
                f"n_edges={self.n_edges}, scale={self.scale}, weights={self.scheme})")


def unit_ball_volume(d):
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


def bar_epsilon(k, n, d):
    """Effective k-NN radius ``(k / (alpha_d n))^(1/d)``."""
    if not 1 <= k <= n or d < 1:
        raise ValueError("need 1 <= k <= n and d >= 1")
    return (k / (unit_ball_volume(d) * n)) ** (1.0 / d)


def delta_n(n, d):
    """Connectivity rate of random geometric graphs in dimension ``d``."""
    if n < 3:
        raise ValueError("delta_n needs n >= 3")
    ln = math.log(n)
    if d == 1:
        return math.sqrt(math.log(ln) / n)
    if d == 2:
        return ln ** 0.75 / math.sqrt(n)
    return (ln / n) ** (1.0 / d)


def self_tuning_weights(cloud, index, k0):
    """Per-vertex scale ``sigma_i`` (distance to the ``k0``-th neighbour) and a weight function.

    ``weight(i, js)`` returns ``exp(-|x_i - x_j|^2 / sigma_i^2)``; it is
    row-indexed by ``i`` and therefore not symmetric.
    """
    n = cloud.size
    if not 1 <= k0 < n:
        raise ValueError(f"k0 must lie in [1, {n - 1}], got {k0}")
    pts = cloud.points
    sigma = index.knn_distances(k0).copy()
    for i in np.flatnonzero(sigma == 0):
        d = np.sqrt(np.sum((pts - pts[i]) ** 2, axis=1))
        pos = d[d > 0]
        sigma[i] = pos.min() if len(pos) else np.inf

    def weight(i, js):
        js = np.atleast_1d(js)
        d2 = np.sum((pts[js] - pts[i]) ** 2, axis=1)
        with np.errstate(invalid="ignore"):
            w = np.exp(-d2 / sigma[i] ** 2)
        w[d2 == 0] = 1.0
        return w

    return sigma, weight


def _pair_weight_block(points, members, sigma):
    a, b = np.triu_indices(len(members), 1)
    xi, xj = points[members[a]], points[members[b]]
    d2 = np.sum((xi - xj) ** 2, axis=1)
    si, sj = sigma[members[a]], sigma[members[b]]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = 0.5 * (np.exp(-d2 / si ** 2) + np.exp(-d2 / sj ** 2))
    w[d2 == 0] = 1.0
    return w


def _edge_weights(cloud, index, member_lists, scheme):
    if scheme.variant == "homogeneous":
        return None
    sigma, _ = self_tuning_weights(cloud, index, scheme.k0)
    blocks = [_pair_weight_block(cloud.points, m, sigma) for m in member_lists]
    return np.concatenate(blocks) if blocks else np.zeros(0)


def _warn_connectivity(hg, radius, d):
    if not is_connected(hg):
        warnings.warn(f"{hg.kind} hypergraph is disconnected", DisconnectedGraphWarning,
                      stacklevel=3)
    n = hg.n_vertices
    if n >= 3 and radius is not None and radius <= delta_n(n, d):
        warnings.warn(f"radius {radius:.4g} <= delta_n = {delta_n(n, d):.4g}",
                      SparseRadiusWarning, stacklevel=3)


def _as_index(cloud, index):
    if isinstance(cloud, NeighborIndex):
        return cloud.cloud, cloud
    if not isinstance(cloud, PointCloud):
        cloud = PointCloud(cloud)
    return cloud, index if index is not None else NeighborIndex(cloud)


def build_eps_ball(cloud, eps, scheme=HOMOGENEOUS, index=None):
    """One hyperedge per vertex: all points in the closed ``eps``-ball."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    cloud, index = _as_index(cloud, index)
    lists = [index.ball(k, eps) for k in range(cloud.size)]
    hg = Hypergraph.from_edges(
        cloud.size, lists, None, centroids=range(cloud.size), kind="eps_ball",
        scale=float(eps), params={"eps": float(eps)}, scheme=scheme,
    )
    if scheme.variant != "homogeneous":
        hg = _with_weights(hg, _edge_weights(cloud, index, lists, scheme))
    _warn_connectivity(hg, eps, cloud.dim)
    return hg


def build_knn(cloud, k, scheme=HOMOGENEOUS, index=None):
    """One ``k``-uniform hyperedge per vertex: the vertex and its ``k - 1`` nearest."""
    cloud, index = _as_index(cloud, index)
    n = cloud.size
    if not 2 <= k <= n:
        raise ValueError(f"k must lie in [2, {n}], got {k}")
    lists = [np.sort(index.knn(j, k)) for j in range(n)]
    eb = bar_epsilon(k, n, cloud.dim)
    hg = Hypergraph.from_edges(
        n, lists, None, centroids=range(n), kind="knn", scale=eb,
        params={"k": int(k)}, scheme=scheme,
    )
    if scheme.variant != "homogeneous":
        hg = _with_weights(hg, _edge_weights(cloud, index, lists, scheme))
    _warn_connectivity(hg, eb, cloud.dim)
    return hg


def build_pair_graph(cloud, eps=None, k=None, scheme=HOMOGENEOUS, index=None):
    """Pairwise graph as size-2 hyperedges, each unordered pair once.

    Exactly one of ``eps`` (closed-ball adjacency) or ``k`` (k-NN adjacency,
    symmetrised by "either endpoint lists the other") must be given.
    """
    if (eps is None) == (k is None):
        raise ValueError("give exactly one of eps or k")
    cloud, index = _as_index(cloud, index)
    n = cloud.size
    pairs = set()
    if eps is not None:
        if not eps > 0:
            raise ValueError("eps must be positive")
        for i in range(n):
            for j in index.ball(i, eps):
                if j > i:
                    pairs.add((i, int(j)))
        scale, params = float(eps), {"eps": float(eps)}
    else:
        if not 2 <= k <= n:
            raise ValueError(f"k must lie in [2, {n}], got {k}")
        for i in range(n):
            for j in index.knn(i, k)[1:]:
                j = int(j)
                pairs.add((min(i, j), max(i, j)))
        scale, params = bar_epsilon(k, n, cloud.dim), {"k": int(k)}
    pairs = sorted(pairs)
    lists = [np.array(pq, dtype=np.int64) for pq in pairs]
    hg = Hypergraph.from_edges(
        n, lists, None, centroids=[pq[0] for pq in pairs], kind="pair_graph",
        scale=scale, params=params, scheme=scheme,
    )
    if scheme.variant != "homogeneous":
        hg = _with_weights(hg, _edge_weights(cloud, index, lists, scheme))
    _warn_connectivity(hg, scale, cloud.dim)
    return hg


def _with_weights(hg, weights):
    return Hypergraph(hg.n_vertices, hg.centroids, hg.member_ptr, hg.members, weights,
                      kind=hg.kind, scale=hg.scale, params=hg.params, scheme=hg.scheme)


def is_connected(hg):
    """True iff the cliques spanned by all edges connect every vertex."""
    n = hg.n_vertices
    if n <= 1:
        return True
    sizes = hg.edge_sizes
    first = np.repeat(hg.members[hg.member_ptr[:-1]], sizes)
    g = coo_matrix((np.ones(len(first)), (first, hg.members)), shape=(n, n))
    n_comp, _ = connected_components(g, directed=False)
    return n_comp == 1


def edge_operator_norm_sq(edge, p=2.0):
    """Bound ``m * max_pair w^(2/p)`` on ``||A_k||^2``; 0 for edges without pairs.

    ``A_k^T A_k`` is the Laplacian of the complete graph on the edge with
    weights ``w^(2/p)``, whose top eigenvalue is at most ``m * max w^(2/p)``.
    """
    m = len(edge.members)
    if m < 2:
        return 0.0
    w = np.asarray(edge.pair_weights, dtype=np.float64)
    return float(m * np.max(w) ** (2.0 / p))


def parse_graph_spec(text):
    """``'eps:0.05'`` -> ``('eps', 0.05)``; ``'knn:10'`` -> ``('knn', 10)``."""
    kind, _, val = str(text).strip().partition(":")
    kind = kind.lower()
    if kind == "eps" and val:
        return "eps", float(val)
    if kind == "knn" and val:
        return "knn", int(val)
    raise ValueError(f"graph must look like 'eps:VAL' or 'knn:VAL', got {text!r}")


def build_structure(cloud, method, graph, scheme=HOMOGENEOUS, index=None):
    """Hypergraph for ``method='hpl'`` or pair graph for ``method='gpl'``.

    ``graph`` is a ``(kind, value)`` tuple or a string accepted by
    :func:`parse_graph_spec`.
    """
    kind, value = parse_graph_spec(graph) if isinstance(graph, str) else graph
    if method == "hpl":
        if kind == "eps":
            return build_eps_ball(cloud, value, scheme, index)
        return build_knn(cloud, value, scheme, index)
    if method == "gpl":
        if kind == "eps":
            return build_pair_graph(cloud, eps=value, scheme=scheme, index=index)
        return build_pair_graph(cloud, k=value, scheme=scheme, index=index)
    raise ValueError(f"method must be 'hpl' or 'gpl', got {method!r}")
