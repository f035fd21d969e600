"""Stochastic primal-dual hybrid gradient for constrained hypergraph p-Laplacian problems.

Solves ``min_u (1/p) sum_k max_{i,j in e_k} w_ij |u_i - u_j|^p`` subject to
``u[O] = y`` through the saddle problem

    min_u max_alpha  sum_k <A_k u, alpha_k> - g*(alpha_k) + I_O(u),

where row ``(i, j)`` of ``A_k`` is ``w_ij^(1/p) (e_i - e_j)^T`` over the
edge's pairs in lexicographic order.  Each iteration takes a primal step
with the running adjoint ``z = sum_k A_k^T abar_k``, updates the dual block
of one sampled edge through :func:`hyperplap.prox.prox_g_star` and
extrapolates it with factor ``1 / p_i``.

Two code paths exist.  The step functions (:func:`primal_step`,
:func:`dual_step`, :func:`extrapolate`) act on a :class:`SaddleState` in
plain numpy and exist for inspection and testing; :func:`run` drives a
jitted kernel that applies primal updates lazily, so an iteration only
touches the vertices of the sampled edge.
"""

from __future__ import annotations

import json
import logging
import math
import warnings
from dataclasses import dataclass, field

import numba
import numpy as np

from .energy import objective
from .geometry import LabelConstraints
from .prox import ProxParams, _prox_g_star, conjugate_value, prox_g_star

logger = logging.getLogger(__name__)


class StepSizeError(ValueError):
    """Step sizes violate ``sigma * tau <= safety * min_i p_i / ||A_i||^2``."""


@dataclass
class SaddleProblem:
    hypergraph: object
    constraints: LabelConstraints
    p: float = 2.0

    def __post_init__(self):
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        if self.hypergraph.n_edges == 0 and self.hypergraph.n_vertices == 0:
            raise ValueError("empty hypergraph")
        if not isinstance(self.constraints, LabelConstraints):
            self.constraints = LabelConstraints.from_mapping(dict(self.constraints))
        self.constraints.check_range(self.hypergraph.n_vertices)

    @property
    def n(self):
        return self.hypergraph.n_vertices

    def constrained_mask(self):
        mask = np.zeros(self.n, dtype=np.bool_)
        mask[self.constraints.indices] = True
        return mask

    def project(self, u):
        u = np.array(u, dtype=np.float64)
        u[self.constraints.indices] = self.constraints.values
        return u

    def root_weights(self):
        """``w^(1/p)`` per pair, or ``None`` for homogeneous weights."""
        w = self.hypergraph.weights
        return None if w is None else w ** (1.0 / self.p)


@dataclass
class SolverConfig:
    tau: float | None = None
    sigma: float | None = None
    step_ratio: float | None = None
    safety: float = 0.99
    probabilities: np.ndarray | None = None
    epochs: int = 500
    tol: float = 1e-6
    seed: int = 0
    audit: bool = False

    def __post_init__(self):
        if not 0 < self.safety < 1:
            raise ValueError("safety must lie in (0, 1)")
        if self.step_ratio is not None and not self.step_ratio > 0:
            raise ValueError("step_ratio must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if (self.tau is None) != (self.sigma is None):
            raise ValueError("give both tau and sigma, or neither")

    def resolve(self, hg, p):
        """Return ``(tau, sigma, probabilities)`` after validating the step condition."""
        n_edges = hg.n_edges
        probs = self.probabilities
        if probs is None:
            probs = np.full(n_edges, 1.0 / max(n_edges, 1))
        probs = np.asarray(probs, dtype=np.float64)
        if probs.shape != (n_edges,) or np.any(probs <= 0):
            raise ValueError("probabilities must be strictly positive, one per edge")
        if abs(probs.sum() - 1) > 1e-9:
            raise ValueError("probabilities must sum to 1")
        bound = step_bound(hg, p, probs)
        if self.tau is None:
            # tau/sigma = 1/n_edges is the usual serial-sampling balance
            ratio = self.step_ratio if self.step_ratio is not None else 1.0 / max(n_edges, 1)
            tau, sigma = default_steps(hg, self.safety, ratio, p, probs)
        else:
            tau, sigma = float(self.tau), float(self.sigma)
            if not (tau > 0 and sigma > 0):
                raise StepSizeError("tau and sigma must be positive")
            if sigma * tau > self.safety * bound * (1 + 1e-12):
                raise StepSizeError(
                    f"sigma*tau = {sigma * tau:.4g} exceeds safety*min_i p_i/||A_i||^2 "
                    f"= {self.safety * bound:.4g}"
                )
        return tau, sigma, probs


def step_bound(hg, p, probs=None):
    """``min_i p_i / ||A_i||^2`` over edges with a non-trivial operator."""
    norms = hg.op_norm_sq(p)
    if probs is None:
        probs = np.full(hg.n_edges, 1.0 / max(hg.n_edges, 1))
    ok = norms > 0
    if not np.any(ok):
        return math.inf
    return float(np.min(probs[ok] / norms[ok]))


def default_steps(hg, safety=0.99, ratio=1.0, p=2.0, probabilities=None):
    """Steps with ``sigma * tau = safety * min_i p_i / ||A_i||^2`` and ``tau = ratio * sigma``."""
    if not 0 < safety < 1:
        raise ValueError("safety must lie in (0, 1)")
    bound = step_bound(hg, p, probabilities)
    if math.isinf(bound):
        return 1.0, 1.0
    prod = safety * bound
    sigma = math.sqrt(prod / ratio)
    return ratio * sigma, sigma


# ----------------------------------------------------------------------------
# edge operators


def apply_edge_op(u, edge, p):
    """``A_k u``: ``w_ij^(1/p) (u_i - u_j)`` over the edge's pairs."""
    u = np.asarray(u, dtype=np.float64)
    i, j = edge.pairs()
    w = np.asarray(edge.pair_weights, dtype=np.float64) ** (1.0 / p)
    return w * (u[i] - u[j])


def apply_edge_op_adjoint(alpha, edge, p, accumulator, scale=1.0):
    """``accumulator += scale * A_k^T alpha`` in place."""
    alpha = np.asarray(alpha, dtype=np.float64)
    if alpha.shape != (edge.n_pairs,):
        raise ValueError(f"alpha has length {alpha.shape}, edge has {edge.n_pairs} pairs")
    i, j = edge.pairs()
    v = scale * np.asarray(edge.pair_weights, dtype=np.float64) ** (1.0 / p) * alpha
    np.add.at(accumulator, i, v)
    np.add.at(accumulator, j, -v)
    return accumulator


def adjoint_sum(hg, p, alphas):
    """``sum_k A_k^T alpha_k`` computed from scratch."""
    z = np.zeros(hg.n_vertices)
    for k in range(hg.n_edges):
        if hg.pair_ptr[k + 1] > hg.pair_ptr[k]:
            apply_edge_op_adjoint(alphas[k], hg.edge(k), p, z)
    return z


# ----------------------------------------------------------------------------
# reference stepping


@dataclass
class SaddleState:
    u: np.ndarray
    alphas: list
    alpha_bars: list
    z: np.ndarray
    iteration: int = 0
    extrapolated: int = -1
    history: list = field(default_factory=list)
    _pending: tuple | None = field(default=None, repr=False)


def init_state(problem, u0=None):
    hg = problem.hypergraph
    u = np.zeros(problem.n) if u0 is None else np.array(u0, dtype=np.float64)
    alphas = [np.zeros(hg.pair_ptr[k + 1] - hg.pair_ptr[k]) for k in range(hg.n_edges)]
    return SaddleState(u, alphas, [a.copy() for a in alphas], np.zeros(problem.n))


def primal_step(state, problem, tau):
    """``u <- proj_O(u - tau z)``."""
    state.u = problem.project(state.u - tau * state.z)
    return state.u


def dual_step(state, problem, sigma, rng=None, probabilities=None, pick=None):
    """Prox-update the dual block of one edge (sampled unless ``pick`` is given)."""
    hg = problem.hypergraph
    if pick is None:
        pick = int(draw_picks(rng, hg.n_edges, probabilities, 1)[0])
    edge = hg.edge(pick)
    old = state.alphas[pick]
    if edge.n_pairs:
        beta = old + sigma * apply_edge_op(state.u, edge, problem.p)
        new = prox_g_star(beta, ProxParams(sigma, problem.p))
    else:
        new = old.copy()
    state._pending = (pick, old)
    state.alphas[pick] = new
    return pick


def extrapolate(state, problem, picked, probabilities=None):
    """``abar_i = alpha_i + (alpha_i - alpha_i_old) / p_i``; every other ``abar_j = alpha_j``."""
    hg, p = problem.hypergraph, problem.p
    pick, old = state._pending
    if pick != picked:
        raise ValueError("extrapolate must follow dual_step on the same edge")
    pi = 1.0 / hg.n_edges if probabilities is None else float(probabilities[picked])
    prev = state.extrapolated
    if prev >= 0 and prev != picked:
        delta = state.alphas[prev] - state.alpha_bars[prev]
        if delta.size:
            apply_edge_op_adjoint(delta, hg.edge(prev), p, state.z)
        state.alpha_bars[prev] = state.alphas[prev].copy()
    new = state.alphas[picked]
    bar = new + (new - old) / pi
    if bar.size:
        apply_edge_op_adjoint(bar - state.alpha_bars[picked], hg.edge(picked), p, state.z)
    state.alpha_bars[picked] = bar
    state.extrapolated = picked
    state.iteration += 1
    state._pending = None


def audit_z(state, problem):
    """Sup-norm gap between the running ``z`` and ``sum_k A_k^T abar_k`` recomputed."""
    fresh = adjoint_sum(problem.hypergraph, problem.p, state.alpha_bars)
    return float(np.max(np.abs(fresh - state.z))) if fresh.size else 0.0


def draw_picks(rng, n_edges, probabilities, size):
    """Edge indices for ``size`` iterations of serial sampling."""
    if probabilities is None:
        return rng.integers(0, n_edges, size=size)
    return rng.choice(n_edges, size=size, p=probabilities)


# ----------------------------------------------------------------------------
# jitted driver


@numba.njit(cache=True)
def _catch_up(members, lo, hi, u, last, constrained, z, extra, tau, now):
    for a in range(lo, hi):
        v = members[a]
        if now > last[v]:
            if not constrained[v]:
                u[v] -= tau * ((now - last[v]) * z[v] + extra[v])
            extra[v] = 0.0
            last[v] = now


@numba.njit(cache=True)
def _spdhg_iterations(picks, u, last, constrained, z, extra, ul, wl, alpha, st, theta, tau,
                      sigma, p, member_ptr, members, pair_ptr, wroot, homogeneous, beta, new):
    # z holds sum_k A_k^T alpha_k.  The extrapolated block only differs from
    # alpha for one primal step, so its extra term is parked per vertex in
    # ``extra`` and consumed by the next catch-up of that vertex.
    now = st[1]
    for t in range(picks.shape[0]):
        i = picks[t]
        now += 1
        lo, hi = member_ptr[i], member_ptr[i + 1]
        _catch_up(members, lo, hi, u, last, constrained, z, extra, tau, now)
        q0 = pair_ptr[i]
        m = pair_ptr[i + 1] - q0
        if m == 0:
            st[0] = i
            continue
        size = hi - lo
        for a in range(size):
            ul[a] = u[members[lo + a]]
            wl[a] = 0.0
        q = q0
        r = 0
        for a in range(size - 1):
            ua = ul[a]
            for b in range(a + 1, size):
                d = ua - ul[b]
                if not homogeneous:
                    d *= wroot[q]
                beta[r] = alpha[q] + sigma * d
                q += 1
                r += 1
        _prox_g_star(beta[:m], sigma, p, new[:m])
        q = q0
        r = 0
        for a in range(size - 1):
            acc = 0.0
            for b in range(a + 1, size):
                d = new[r] - alpha[q]
                alpha[q] = new[r]
                if not homogeneous:
                    d *= wroot[q]
                acc += d
                wl[b] -= d
                q += 1
                r += 1
            wl[a] += acc
        th = theta[i]
        for a in range(size):
            v = members[lo + a]
            z[v] += wl[a]
            extra[v] = th * wl[a]
        st[0] = i
    st[1] = now


@numba.njit(cache=True)
def _catch_up_all(u, last, constrained, z, extra, tau, now):
    for v in range(u.shape[0]):
        if now > last[v]:
            if not constrained[v]:
                u[v] -= tau * ((now - last[v]) * z[v] + extra[v])
            extra[v] = 0.0
            last[v] = now


@dataclass
class SolverDiagnostics:
    epochs_run: int
    stop_reason: str
    objective_history: list
    final_objective: float
    step_sizes: dict
    dual: np.ndarray | None = field(default=None, repr=False)
    z: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self):
        return {
            "epochs_run": self.epochs_run,
            "stop_reason": self.stop_reason,
            "objective_history": [float(v) for v in self.objective_history],
            "final_objective": float(self.final_objective),
            "step_sizes": self.step_sizes,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def run(problem, config=None, u0=None, callback=None):
    """Run SPDHG; returns ``(u, SolverDiagnostics)``.

    ``u0`` defaults to the labels on constrained vertices and 0 elsewhere.
    ``callback(epoch, u)`` is invoked after each epoch with the current
    iterate (a copy).
    """
    config = config or SolverConfig()
    hg, p = problem.hypergraph, float(problem.p)
    n = problem.n
    if problem.constraints.count == 0 and p > 1:
        warnings.warn("no constraints: every constant minimises the energy; returning u = 0",
                      stacklevel=2)
        u = np.zeros(n)
        return u, SolverDiagnostics(0, "unconstrained", [], objective(u, hg, p), {})

    tau, sigma, probs = config.resolve(hg, p)
    bound = step_bound(hg, p, probs)
    logger.debug("steps tau=%.4g sigma=%.4g; sigma*tau=%.4g; min-form bound %.4g, "
                 "max-form bound %.4g", tau, sigma, tau * sigma, bound,
                 float(np.max(probs / np.maximum(hg.op_norm_sq(p), 1e-300))) if hg.n_edges else 0)
    steps = {"tau": tau, "sigma": sigma, "sigma_tau": tau * sigma, "bound": bound}

    u = problem.project(np.zeros(n) if u0 is None else u0)
    last = np.zeros(n, dtype=np.int64)
    constrained = problem.constrained_mask()
    z = np.zeros(n)
    alpha = np.zeros(int(hg.pair_ptr[-1]))
    max_pairs = int(np.max(np.diff(hg.pair_ptr))) if hg.n_edges else 0
    extra = np.zeros(n)
    max_size = int(np.max(hg.edge_sizes)) if hg.n_edges else 0
    ul = np.zeros(max_size)
    wl = np.zeros(max_size)
    beta = np.zeros(max_pairs)
    new = np.zeros(max_pairs)
    st = np.array([-1, 0], dtype=np.int64)
    theta = 1.0 / probs
    wroot = problem.root_weights()
    homogeneous = wroot is None
    if homogeneous:
        wroot = np.zeros(0)
    uniform = config.probabilities is None
    rng = np.random.default_rng(config.seed)

    history = []
    reason = "max_epochs"
    epochs_run = 0
    if hg.n_edges == 0:
        reason = "no_edges"
    for epoch in range(config.epochs if hg.n_edges else 0):
        before = u.copy()
        picks = draw_picks(rng, hg.n_edges, None if uniform else probs, hg.n_edges)
        _spdhg_iterations(picks.astype(np.int64), u, last, constrained, z, extra, ul, wl,
                          alpha, st, theta, tau, sigma, p, hg.member_ptr, hg.members,
                          hg.pair_ptr, wroot, homogeneous, beta, new)
        _catch_up_all(u, last, constrained, z, extra, tau, st[1])
        epochs_run = epoch + 1
        history.append(objective(u, hg, p))
        if config.audit:
            gap = _audit_flat(problem, alpha, z)
            if gap > 1e-8 * (1 + np.max(np.abs(z))):
                raise RuntimeError(f"adjoint accumulator drifted by {gap:.3g}")
        if callback is not None:
            callback(epoch, u.copy())
        change = float(np.max(np.abs(u - before))) if n else 0.0
        # the dual starts at zero, so the first epoch can leave u untouched
        if epoch > 0 and change <= config.tol * (1 + float(np.max(np.abs(u)))):
            reason = "converged"
            break
    diag = SolverDiagnostics(epochs_run, reason, history, objective(u, hg, p), steps,
                             dual=alpha, z=z.copy())
    return u, diag


def _audit_flat(problem, alpha, z):
    # the kernel keeps z = sum_k A_k^T alpha_k; the extrapolation term lives in ``extra``
    fresh = adjoint_sum(problem.hypergraph, problem.p, split_dual(problem.hypergraph, alpha))
    return float(np.max(np.abs(fresh - z))) if fresh.size else 0.0


def split_dual(hg, alpha):
    """Flat dual vector to per-edge blocks."""
    return [alpha[hg.pair_ptr[k]:hg.pair_ptr[k + 1]] for k in range(hg.n_edges)]


def optimality_gaps(problem, u, alphas):
    """Fenchel-Young gap ``sum_k g(A_k u) + g*(alpha_k) - <A_k u, alpha_k>`` and the
    stationarity residual ``max |sum_k A_k^T alpha_k|`` on unconstrained vertices.

    Both vanish exactly at a saddle point.
    """
    hg, p = problem.hypergraph, problem.p
    fy = 0.0
    for k in range(hg.n_edges):
        a = np.asarray(alphas[k])
        if a.size == 0:
            continue
        au = apply_edge_op(u, hg.edge(k), p)
        fy += np.max(np.abs(au)) ** p / p + conjugate_value(a, p) - float(au @ a)
    z = adjoint_sum(hg, p, alphas)
    free = ~problem.constrained_mask()
    stat = float(np.max(np.abs(z[free]))) if np.any(free) else 0.0
    return fy, stat
