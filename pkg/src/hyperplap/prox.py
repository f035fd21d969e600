"""Proximal operator of ``sigma * g*`` with ``g*(a) = h*(||a||_1)``, ``h(t) = |t|^p / p``.

For ``p = 1`` this is the Euclidean projection onto the unit L1 ball.  For
``p > 1`` the prox is the fixed point

    alpha = sign(beta) * max(|beta| - sigma * ||alpha||_1^(q - 1), 0),

with ``q = p / (p - 1)``, found by an active-set iteration that solves a
scalar root problem per pass.  The jitted kernels here are also called from
the solver's inner loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

ROOT_RTOL = 1e-12


@dataclass(frozen=True)
class ProxParams:
    sigma: float
    p: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")

    @property
    def p_conj(self):
        return math.inf if self.p == 1 else self.p / (self.p - 1)


@numba.njit(cache=True)
def _project_l1_ball(beta, radius, out):
    m = beta.shape[0]
    total = 0.0
    for j in range(m):
        total += abs(beta[j])
    if total <= radius:
        for j in range(m):
            out[j] = beta[j]
        return
    mag = np.sort(np.abs(beta))[::-1]
    csum = 0.0
    theta = 0.0
    for j in range(m):
        csum += mag[j]
        t = (csum - radius) / (j + 1)
        if mag[j] - t > 0:
            theta = t
    for j in range(m):
        a = abs(beta[j]) - theta
        if a > 0:
            out[j] = a if beta[j] > 0 else -a
        else:
            out[j] = 0.0


@numba.njit(cache=True)
def _threshold_root(b, sigma, p, t):
    """Root of ``s + b*sigma*s^(q-1) = t`` on ``[0, t]``, ``q = p/(p-1)``."""
    if t <= 0.0:
        return 0.0
    c = b * sigma
    if p == 2.0:
        return t / (1.0 + c)
    e = 1.0 / (p - 1.0)
    tol = ROOT_RTOL * max(1.0, t)
    # Newton on the increasing function f, falling back to bisection
    # whenever the step leaves the bracket [lo, hi]
    lo, hi = 0.0, t
    s = t / (1.0 + c)
    for _ in range(200):
        f = s + c * s ** e - t
        if f > 0:
            hi = s
        else:
            lo = s
        if abs(f) <= 1e-3 * tol or hi - lo <= 4e-16 * s:
            break
        df = 1.0 + c * e * s ** (e - 1.0) if s > 0 else np.inf
        nxt = s - f / df
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        s = nxt
    return s


@numba.njit(cache=True)
def _prox_g_star(beta, sigma, p, out):
    """Writes the prox into ``out``; returns the number of active-set passes.

    Each pass only revisits the magnitudes still active, which visits the
    same sequence of active sets and thresholds as the full sweep; the output
    depends on the final threshold alone.
    """
    m = beta.shape[0]
    if p == 1.0:
        _project_l1_ball(beta, 1.0, out)
        return 1
    e = 1.0 / (p - 1.0)
    vals = np.empty(m)
    b = 0
    for j in range(m):
        g = abs(beta[j])
        vals[b] = g
        b += g > 0.0
    lam = 0.0
    passes = 0
    while b > 0:
        passes += 1
        t = 0.0
        gmin = np.inf
        for r in range(b):
            t += vals[r]
            gmin = min(gmin, vals[r])
        s = _threshold_root(b, sigma, p, t)
        lam = sigma * s ** e
        if gmin - lam >= 0.0 or passes > m:
            break
        nb = 0
        for r in range(b):
            g = vals[r]
            vals[nb] = g
            nb += g > lam
        b = nb
    if b == 0:
        lam = np.inf
    for j in range(m):
        a = max(abs(beta[j]) - lam, 0.0)
        out[j] = a if beta[j] >= 0.0 else -a
    return passes


def project_l1_ball(beta, radius=1.0):
    """Euclidean projection of ``beta`` onto ``{a : ||a||_1 <= radius}``."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    out = np.empty_like(beta)
    _project_l1_ball(beta, float(radius), out)
    return out


def solve_threshold_root(b, sigma, p, t):
    """Non-negative root ``s`` of ``s + b*sigma*s^(p'-1) = t`` for ``p > 1``."""
    if b < 1 or t < 0 or not p > 1 or not sigma > 0:
        raise ValueError("need b >= 1, t >= 0, sigma > 0, p > 1")
    return _threshold_root(int(b), float(sigma), float(p), float(t))


def prox_g_star(beta, params, return_passes=False):
    """``prox_{sigma g*}(beta)``; see the module docstring."""
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    if beta.ndim != 1 or beta.size == 0:
        raise ValueError("beta must be a non-empty vector")
    out = np.empty_like(beta)
    passes = _prox_g_star(beta, float(params.sigma), float(params.p), out)
    return (out, passes) if return_passes else out


def conjugate_value(alpha, p):
    """``g*(alpha) = h*(||alpha||_1)``; ``inf`` outside the unit L1 ball when ``p = 1``."""
    s = float(np.sum(np.abs(alpha)))
    if p == 1:
        return 0.0 if s <= 1 + 1e-12 else math.inf
    q = p / (p - 1)
    return s ** q / q


def prox_objective(alpha, beta, params):
    """``0.5 ||alpha - beta||^2 + sigma g*(alpha)``, the quantity the prox minimises."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    return 0.5 * float(np.sum((alpha - beta) ** 2)) + params.sigma * conjugate_value(alpha, params.p)


def verify_fixed_point(alpha, beta, params):
    """Sup-norm residual of the prox fixed-point equation (``p > 1``)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    if alpha.shape != beta.shape:
        raise ValueError("alpha and beta must have equal length")
    if alpha.size == 0:
        return 0.0
    lam = params.sigma * np.sum(np.abs(alpha)) ** (params.p_conj - 1)
    rhs = np.sign(beta) * np.maximum(np.abs(beta) - lam, 0.0)
    return float(np.max(np.abs(alpha - rhs)))


def prox_g_star_dual_route(beta, params):
    """Same prox through the Moreau identity; an independent reference.

    ``prox_{sigma g*}(beta) = beta - sigma prox_{g/sigma}(beta/sigma)`` with
    ``g(v) = h(||v||_inf)``.  The inner prox clips ``beta/sigma`` to
    ``[-t, t]`` where ``t`` minimises a convex scalar function, found with a
    bounded scalar search.
    """
    from scipy.optimize import minimize_scalar

    beta = np.asarray(beta, dtype=np.float64)
    sigma, p = params.sigma, params.p
    b = beta / sigma
    top = float(np.max(np.abs(b))) if b.size else 0.0
    if top == 0.0:
        return np.zeros_like(beta)

    def phi(t):
        return t ** p / (p * sigma) + 0.5 * float(np.sum((np.clip(b, -t, t) - b) ** 2))

    res = minimize_scalar(phi, bounds=(0.0, top), method="bounded",
                          options={"xatol": 1e-14 * max(1.0, top), "maxiter": 2000})
    t = res.x if phi(res.x) <= phi(top) else top
    return beta - sigma * np.clip(b, -t, t)


def oracle_suite(instances=1000, seed=0, max_len=6, ps=(1.5, 2.0, 3.0, 4.0),
                 sigma_range=(0.01, 10.0), obj_tol=1e-6, residual_tol=1e-9):
    """Random prox instances checked against :func:`prox_g_star_dual_route`.

    An instance fails when the active-set prox has a larger prox objective
    than the reference by more than ``obj_tol`` or its fixed-point residual
    exceeds ``residual_tol``.
    """
    rng = np.random.default_rng(seed)
    failures = 0
    worst_res = 0.0
    worst_gap = -math.inf
    for _ in range(instances):
        m = int(rng.integers(1, max_len + 1))
        p = float(rng.choice(ps))
        sigma = float(np.exp(rng.uniform(np.log(sigma_range[0]), np.log(sigma_range[1]))))
        beta = rng.normal(scale=float(np.exp(rng.uniform(-2, 2))), size=m)
        params = ProxParams(sigma, p)
        alpha = prox_g_star(beta, params)
        ref = prox_g_star_dual_route(beta, params)
        gap = prox_objective(alpha, beta, params) - prox_objective(ref, beta, params)
        res = verify_fixed_point(alpha, beta, params) if p > 1 else 0.0
        worst_res = max(worst_res, res)
        worst_gap = max(worst_gap, gap)
        if gap > obj_tol or res > residual_tol:
            failures += 1
    return {"instances": int(instances), "failures": failures, "max_residual": worst_res,
            "max_objective_gap": worst_gap}
