"""Discrete hypergraph / graph energies, the solver objective and continuum checks."""

from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy.integrate import simpson

from .geometry import sample_uniform_1d
from .hypergraph import build_eps_ball, build_knn, delta_n


@numba.njit(cache=True)
def _edge_max_terms(u, member_ptr, members, pair_ptr, weights, homogeneous, p):
    n_edges = member_ptr.shape[0] - 1
    out = np.zeros(n_edges)
    for k in range(n_edges):
        lo, hi = member_ptr[k], member_ptr[k + 1]
        if hi - lo < 2:
            continue
        if homogeneous:
            umax = -np.inf
            umin = np.inf
            for a in range(lo, hi):
                v = u[members[a]]
                if v > umax:
                    umax = v
                if v < umin:
                    umin = v
            out[k] = (umax - umin) ** p
        else:
            best = 0.0
            q = pair_ptr[k]
            for a in range(lo, hi):
                ua = u[members[a]]
                for b in range(a + 1, hi):
                    t = weights[q] * abs(ua - u[members[b]]) ** p
                    if t > best:
                        best = t
                    q += 1
            out[k] = best
    return out


def _check_u(u, hg):
    u = np.ascontiguousarray(u, dtype=np.float64)
    if u.shape != (hg.n_vertices,):
        raise ValueError(f"u has shape {u.shape}, expected ({hg.n_vertices},)")
    return u


def edge_max_terms(u, hg, p):
    """Per-edge ``max_{i,j in e_k} w_ij |u_i - u_j|^p`` (0 for edges with < 2 members)."""
    if p < 1:
        raise ValueError("p must be >= 1")
    u = _check_u(u, hg)
    w = hg.weights if hg.weights is not None else np.zeros(0)
    return _edge_max_terms(u, hg.member_ptr, hg.members, hg.pair_ptr, w,
                           hg.weights is None, float(p))


def objective(u, hg, p):
    """``(1/p) * sum_k max_pairs w |du|^p``, the unscaled quantity the solver minimises."""
    return float(np.sum(edge_max_terms(u, hg, p))) / p


def hyper_energy(u, hg, p):
    """Scaled hypergraph energy ``1/(n r^p) sum_k max_pairs w |du|^p``.

    ``r`` is the hypergraph's radius: ``eps`` for epsilon-ball hypergraphs,
    the effective radius for k-NN ones.
    """
    if hg.scale is None:
        raise ValueError("hypergraph has no radius; use objective() instead")
    total = float(np.sum(edge_max_terms(u, hg, p)))
    return total / (hg.n_vertices * hg.scale ** p)


def graph_energy(u, pair_hg, p):
    """Graph p-Dirichlet energy over ordered pairs, ``1/(n^2 r^p) sum_ij w_ij |du|^p``."""
    if pair_hg.kind != "pair_graph":
        raise TypeError(f"graph_energy needs a pair graph, got kind {pair_hg.kind!r}")
    if pair_hg.scale is None:
        raise ValueError("pair graph has no radius")
    total = float(np.sum(edge_max_terms(u, pair_hg, p)))
    return 2.0 * total / (pair_hg.n_vertices ** 2 * pair_hg.scale ** p)


def continuum_energy_1d(grad_fn, p, rho_fn=None, quadrature_n=1001):
    """``2^p * int_0^1 |u'(x)|^p rho(x) dx`` by composite Simpson."""
    if quadrature_n < 100:
        raise ValueError("quadrature_n must be at least 100")
    n = quadrature_n if quadrature_n % 2 == 1 else quadrature_n + 1
    x = np.linspace(0.0, 1.0, n)
    g = np.abs(np.asarray(np.broadcast_to(grad_fn(x), x.shape), dtype=np.float64)) ** p
    if rho_fn is not None:
        g = g * np.broadcast_to(rho_fn(x), x.shape)
    return float(2.0 ** p * simpson(g, x=x))


@dataclass
class GammaRow:
    n: int
    param: float
    discrete: float
    continuum: float

    @property
    def rel_error(self):
        if self.continuum == 0:
            return abs(self.discrete)
        return abs(self.discrete - self.continuum) / abs(self.continuum)


@dataclass
class GammaCheckReport:
    kind: str
    p: float
    rows: list = field(default_factory=list)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "param", "discrete", "continuum", "rel_error"])
        for r in self.rows:
            w.writerow([r.n, repr(float(r.param)), repr(r.discrete), repr(r.continuum),
                        repr(r.rel_error)])
        return buf.getvalue()

    @property
    def rel_errors(self):
        return [r.rel_error for r in self.rows]


def gamma_check(u_fn, grad_fn, p, kind, schedule, seed=0, repeats=1):
    """Compare discrete energies on uniform samples of ``(0, 1)`` with the continuum limit.

    ``schedule`` is a list of ``(n, eps)`` (``kind='eps'``) or ``(n, k)``
    (``kind='knn'``).  The discrete energy of each row is averaged over
    ``repeats`` clouds drawn with seeds ``seed, seed + 1, ...``.  Density is
    uniform, so the k-NN limit weight ``rho^(1 - p/d)`` is 1 as well.
    """
    if kind not in ("eps", "knn"):
        raise ValueError("kind must be 'eps' or 'knn'")
    cont = continuum_energy_1d(grad_fn, p)
    report = GammaCheckReport(kind, p)
    for n, param in schedule:
        n = int(n)
        if kind == "eps":
            radius = float(param)
        else:
            param = int(param)
            radius = param / (2.0 * n)
        if n >= 3 and not delta_n(n, 1) < radius < 1:
            warnings.warn(f"row n={n}: radius {radius:.4g} outside (delta_n, 1)", stacklevel=2)
        vals = []
        for r in range(repeats):
            cloud = sample_uniform_1d(n, seed + r)
            u = np.asarray(u_fn(cloud.points[:, 0]), dtype=np.float64)
            u = np.broadcast_to(u, (n,)).copy()
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                hg = build_eps_ball(cloud, radius) if kind == "eps" else build_knn(cloud, param)
            vals.append(hyper_energy(u, hg, p))
        report.rows.append(GammaRow(n, param, float(np.mean(vals)), cont))
    return report


def spike_index(x, u, labeled, radius=None, k=None):
    """Largest deviation of ``u`` at a labelled point from the median of its neighbours.

    Neighbours are the other points within ``radius`` (1-d) or the ``k``
    nearest other points.
    """
    x = np.asarray(x, dtype=np.float64).reshape(len(u), -1)
    u = np.asarray(u, dtype=np.float64)
    worst = 0.0
    for i in labeled:
        d = np.sqrt(np.sum((x - x[i]) ** 2, axis=1))
        d[i] = math.inf
        if radius is not None:
            nb = np.flatnonzero(d <= radius)
        else:
            nb = np.lexsort((np.arange(len(u)), d))[:k]
        if len(nb) == 0:
            continue
        worst = max(worst, abs(u[i] - float(np.median(u[nb]))))
    return worst
