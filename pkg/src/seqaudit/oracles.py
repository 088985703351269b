"""Brute-force and generic-solver references for the learners.

Nothing here calls into the code it checks: the projection reference is a
grid search, the FTRL reference a generic constrained Newton solve, and the
martingale reference an exhaustive walk over all sign paths.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


def sign_paths(k, t):
    """All ``2**(k*t)`` paths in {-1, +1}^(t x k), shape ``(2**(k*t), t, k)``."""
    n = k * t
    bits = (np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1
    return (2.0 * bits - 1.0).reshape(-1, t, k)


def l1_sphere_grid(k, r, step):
    """Points of the l1 sphere of radius ``r`` in R^k (k <= 3) on a grid of spacing ``step``."""
    if k == 1:
        return np.array([[-r], [r]])
    ticks = np.arange(-r, r + step / 2, step)
    if k == 2:
        a = ticks
        rest = r - np.abs(a)
        pts = np.concatenate([np.stack([a, rest], 1), np.stack([a, -rest], 1)])
        return pts
    if k == 3:
        a, b = np.meshgrid(ticks, ticks, indexing="ij")
        a, b = a.ravel(), b.ravel()
        keep = np.abs(a) + np.abs(b) <= r + 1e-12
        a, b = a[keep], b[keep]
        c = np.maximum(r - np.abs(a) - np.abs(b), 0.0)
        return np.concatenate([np.stack([a, b, c], 1), np.stack([a, b, -c], 1)])
    raise ValueError("grid oracle supports k <= 3")


def grid_projection(y, H, r, step=1e-3):
    """Best grid point for ``min (v-y)'H(v-y)`` over ``||v||_1 <= r``.

    When ``y`` lies outside the ball the minimiser sits on its boundary, so
    only the sphere is searched; otherwise ``y`` itself is returned.
    Returns ``(point, objective)``.
    """
    y = np.asarray(y, dtype=float)
    if np.abs(y).sum() <= r:
        return y.copy(), 0.0
    pts = l1_sphere_grid(y.shape[0], r, step)
    d = pts - y
    vals = np.einsum("ni,ij,nj->n", d, H, d)
    i = int(np.argmin(vals))
    return pts[i], float(vals[i])


def kkt_residual(v, y, H, r):
    """Stationarity residual of the l1-ball projection at ``v``.

    With ``g = 2H(v - y)`` the multiplier is ``mu = ||g||_inf``; on the
    support ``g_i = -mu sign(v_i)`` must hold.  Interior points need ``g = 0``.
    """
    g = 2.0 * (H @ (v - y))
    if np.abs(v).sum() < r * (1 - 1e-9):
        return float(np.max(np.abs(g)))
    mu = np.max(np.abs(g))
    on = np.abs(v) > 1e-12
    if not on.any():
        return float(mu)
    return float(np.max(np.abs(g[on] + mu * np.sign(v[on]))))


def ftrl_objective(v, grad_sum, step_count):
    d = v.shape[0]
    c = math.sqrt(step_count) / math.sqrt(math.log(d))
    ent = np.sum(np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0))
    return c * (ent + math.log(d)) - v @ grad_sum


def ftrl_newton_argmin(grad_sum, step_count, iters=200, tol=1e-15):
    """Minimise the FTRL objective on the simplex by equality-constrained Newton.

    Starts from the uniform point and damps steps to stay strictly inside
    the simplex; the objective is strictly convex so this converges to the
    unique interior minimiser.
    """
    g = np.asarray(grad_sum, dtype=float)
    d = g.shape[0]
    c = math.sqrt(step_count) / math.sqrt(math.log(d))
    v = np.full(d, 1.0 / d)
    for _ in range(iters):
        grad = c * (np.log(v) + 1.0) - g
        hinv = v / c  # inverse of the diagonal Hessian c / v
        # KKT step with the constraint 1'dv = 0
        nu = -(hinv @ grad) / hinv.sum()
        dv = -hinv * (grad + nu)
        if np.max(np.abs(dv)) < tol:
            break
        step = 1.0
        neg = dv < 0
        if neg.any():
            step = min(1.0, 0.99 * np.min(-v[neg] / dv[neg]))
        f0 = ftrl_objective(v, g, step_count)
        slope = grad @ dv
        while step > 1e-16:
            cand = v + step * dv
            if np.all(cand > 0) and ftrl_objective(cand, g, step_count) <= f0 + 0.25 * step * slope:
                break
            step *= 0.5
        v = v + step * dv
        v = v / v.sum()
    return v


def best_l1_direction_gain(z_cumsum):
    """``max_{||u||_1 <= 1} <u, sum_j z_j>`` = the largest absolute coordinate."""
    return np.max(np.abs(z_cumsum), axis=-1)


def mv_ons_path_mean(learner, depth):
    """Exact mean terminal wealth of a vector learner over all sign paths.

    Walks the full tree of ``{-1, +1}^k`` outcomes for ``depth`` steps,
    copying the learner at each branch.  ``learner`` must expose ``k``,
    ``bet()``, ``update(z, payoff)`` and ``copy()``.
    """
    outcomes = [np.array(z) for z in itertools.product((-1.0, 1.0), repeat=learner.k)]

    def walk(state, remaining):
        lam = state.bet()
        if remaining == 1:
            return sum(1.0 + float(lam @ z) for z in outcomes) / len(outcomes)
        total = 0.0
        for z in outcomes:
            payoff = 1.0 + float(lam @ z)
            child = state.copy()
            child.update(z, payoff)
            total += payoff * walk(child, remaining - 1)
        return total / len(outcomes)

    return walk(learner, depth)


def random_spd(rng, k, min_eig=0.2, max_eig=5.0):
    """SPD matrix with eigenvalues drawn log-uniformly in ``[min_eig, max_eig]``."""
    q, _ = np.linalg.qr(rng.normal(size=(k, k)))
    eig = np.exp(rng.uniform(math.log(min_eig), math.log(max_eig), size=k))
    h = (q * eig) @ q.T
    return 0.5 * (h + h.T)
