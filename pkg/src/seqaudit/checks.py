"""Invariant and oracle suites runnable from the command line."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import oracles
from .betting import MvOns, SimplexFtrl, UniOns, project_l1_h
from .sim import SimulationConfig, type1_estimate
from .streams import SyntheticStreamSpec
from .testing import Method, TestSpec, tracked_log_wealth
from .wealth import MultiStreamWealth, WealthProcess, check_log_wealth_bound


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def enumerate_wealth_means(k, t):
    """Mean terminal wealth of every process over all ``2**(k t)`` sign paths."""
    paths = oracles.sign_paths(k, t)
    w = MultiStreamWealth(k, batch=paths.shape[0], ftrl=True)
    for j in range(t):
        w.step(paths[:, j, :])
    out = {f"stream{i + 1}": float(np.mean(np.exp(w.log_wealths[:, i]))) for i in range(k)}
    out["ftrl"] = float(np.mean(np.exp(w.ftrl_log)))
    for m in (Method.PROD, Method.AVE, Method.BALANCE, Method.BONF, Method.MAX_UNION):
        out[m.value] = float(np.mean(np.exp(tracked_log_wealth(m, w.log_wealths))))
    return out


def martingale_enum(t=10, mv_depth=(10, 10), tol=1e-9):
    results = []
    for k in (1, 2):
        means = enumerate_wealth_means(k, t)
        for name, mean in means.items():
            if name in ("bonf", "max_union"):
                # a max of martingales is only a supermartingale
                ok = mean <= 1.0 + tol
                results.append(CheckResult(f"k={k} t={t} {name} mean <= 1", ok, f"{mean:.12f}"))
            else:
                ok = abs(mean - 1.0) <= tol
                results.append(CheckResult(f"k={k} t={t} {name} mean = 1", ok, f"{mean:.12f}"))
    for k, depth in zip((1, 2), mv_depth):
        mean = oracles.mv_ons_path_mean(MvOns(k), depth)
        results.append(
            CheckResult(f"k={k} t={depth} mv_ons mean = 1", abs(mean - 1.0) <= tol, f"{mean:.12f}")
        )
    return results


def _biased_signs(rng, n, t, means):
    p = (1.0 + means) / 2.0
    return np.where(rng.random((n, t)) < p[:, None], 1.0, -1.0)


def lemma_bounds(n_streams=1000, t=500, n_ftrl=100, seed=0):
    rng = np.random.default_rng(seed)
    # half Rademacher with random bias, half uniform with random mean
    means = rng.choice([0.0, 0.05, -0.1, 0.2, -0.3, 0.5, 1.0], size=n_streams)
    z = _biased_signs(rng, n_streams, t, means)
    half = n_streams // 2
    width = 1.0 - np.abs(means[half:])
    z[half:] = means[half:, None] + width[:, None] * rng.uniform(-1, 1, size=(n_streams - half, t))
    ons = UniOns((n_streams,))
    proc = WealthProcess.zeros((n_streams,))
    failures = 0
    for j in range(t):
        bet = ons.bet()
        proc.record(np.log1p(bet * z[:, j]), z[:, j])
        ons.update(z[:, j])
        failures += int(np.count_nonzero(~check_log_wealth_bound(proc)))
    results = [
        CheckResult(
            f"log-wealth lower bound, {n_streams} streams x {t} steps",
            failures == 0,
            f"{failures} violations",
        )
    ]

    worst = -math.inf
    for _ in range(n_ftrl):
        k = int(rng.integers(1, 17))
        bias = rng.uniform(-0.5, 0.5, size=k)
        zz = np.clip(bias + rng.uniform(-1, 1, size=(t, k)), -1, 1)
        learner = SimplexFtrl(2 * k)
        earned = 0.0
        cum = np.zeros(k)
        for j in range(t):
            v = learner.weights()
            u = v[:k] - v[k:]
            earned += float(u @ zz[j])
            cum += zz[j]
            learner.update(np.concatenate([zz[j], -zz[j]]))
            regret = float(oracles.best_l1_direction_gain(cum)) - earned
            worst = max(worst, regret - 2.0 * math.sqrt((j + 1) * math.log(2 * k)))
    results.append(
        CheckResult(
            f"FTRL l1 regret <= 2 sqrt(t ln 2k), {n_ftrl} streams",
            worst <= 0.0,
            f"max(regret - bound) = {worst:.4f}",
        )
    )
    return results


def projection_oracle(n=50, seed=0, step=1e-3, tol=2e-3):
    rng = np.random.default_rng(seed)
    worst_err = worst_kkt = worst_obj = 0.0
    for _ in range(n):
        k = int(rng.integers(2, 4))
        H = oracles.random_spd(rng, k)
        y = rng.uniform(-1.5, 1.5, size=k)
        v = project_l1_h(y, H, 0.5)
        g, gval = oracles.grid_projection(y, H, 0.5, step)
        worst_err = max(worst_err, float(np.max(np.abs(v - g))))
        worst_kkt = max(worst_kkt, oracles.kkt_residual(v, y, H, 0.5))
        d = v - y
        worst_obj = max(worst_obj, float(d @ H @ d) - gval)
    return [
        CheckResult("projection vs grid search (l_inf)", worst_err <= tol, f"{worst_err:.2e}"),
        CheckResult("projection KKT residual", worst_kkt <= 1e-8, f"{worst_kkt:.2e}"),
        CheckResult("projection objective <= best grid point", worst_obj <= 1e-12, f"{worst_obj:.2e}"),
    ]


def ftrl_oracle(n=50, seed=0, tol=1e-6):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n):
        d = int(rng.integers(2, 9))
        j = int(rng.integers(1, 101))
        state = SimplexFtrl(d)
        for _ in range(j - 1):
            state.update(rng.uniform(-1, 1, size=d))
        v = state.weights()
        ref = oracles.ftrl_newton_argmin(state.grad_sum, state.step_count)
        worst = max(worst, float(np.max(np.abs(v - ref))))
    return [CheckResult("FTRL closed form vs Newton argmin", worst <= tol, f"{worst:.2e}")]


def level_alpha(k=10, runs=1000, horizon=300, alpha=0.05, seed=0):
    tests = [TestSpec(m, alpha) for m in Method if m is not Method.MV_ONS]
    config = SimulationConfig(SyntheticStreamSpec(k, 0.0, seed=seed), tests, horizon=horizon, runs=runs)
    results = []
    for label, (rate, se) in type1_estimate(config).items():
        bar = alpha + 3.0 * math.sqrt(alpha * (1 - alpha) / runs)
        results.append(CheckResult(f"{label} type-I rate <= alpha + 3 SE", rate <= bar, f"{rate:.4f} (bar {bar:.4f})"))
    return results


SUITES = {
    "martingale-enum": martingale_enum,
    "lemma-bounds": lemma_bounds,
    "projection-oracle": projection_oracle,
    "ftrl-oracle": ftrl_oracle,
    "level-alpha": level_alpha,
}


def run_suite(name):
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()


