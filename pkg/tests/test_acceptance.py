"""Acceptance criteria, each checked at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``; either way one PASS/FAIL line is printed
per criterion.
"""

import contextlib
import io
import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from seqaudit.betting import MvOns, UniOns
from seqaudit.checks import ftrl_oracle, lemma_bounds, martingale_enum, projection_oracle
from seqaudit.cli import main as cli_main
from seqaudit.sim import SimulationConfig, run_replications, type1_estimate
from seqaudit.streams import SyntheticStreamSpec
from seqaudit.testing import DEFAULT_METHODS, Method, TestSpec

FIVE = [m.value for m in DEFAULT_METHODS]  # bonf, ftrl, prod, ave, balance


def _regime(fraction, runs=300, horizon=1000, seed=0, threads=4):
    tests = [TestSpec(m, 0.01) for m in DEFAULT_METHODS]
    cfg = SimulationConfig(SyntheticStreamSpec(250, fraction, 0.1, 0.2, seed), tests, horizon=horizon, runs=runs, threads=threads)
    return run_replications(cfg)


def criterion_1():
    """Level alpha: null k=50, alpha=0.05, 2000 runs, horizon 500, rate <= 0.063."""
    methods = [m for m in Method if m is not Method.MV_ONS]
    cfg = SimulationConfig(
        SyntheticStreamSpec(50, 0.0, variance=0.2, seed=0),
        [TestSpec(m, 0.05) for m in methods],
        horizon=500,
        runs=2000,
        threads=4,
    )
    rates = type1_estimate(cfg)
    ok = all(rate <= 0.05 + 0.013 for rate, _ in rates.values())
    return ok, ", ".join(f"{k}={r:.4f}" for k, (r, _) in rates.items())


def criterion_2():
    """Sparse regime: prod censored > 90%, others < 5%, balance within 25% of bonf."""
    s = _regime(0.05)
    cens = {m: s[m].censoring_rate for m in FIVE}
    med_bal, med_bonf = s["balance"].median, s["bonf"].median
    ok = (
        cens["prod"] > 0.9
        and all(cens[m] < 0.05 for m in ("bonf", "ave", "ftrl", "balance"))
        and abs(med_bal - med_bonf) <= 0.25 * med_bonf
    )
    detail = ", ".join(f"{m}: cens {cens[m]:.3f} med {s[m].median:g}" for m in FIVE)
    return ok, detail


def criterion_3():
    """Dense regime: median prod <= 50, balance <= 1.1 prod, bonf > prod."""
    s = _regime(0.75)
    prod, bal, bonf = s["prod"].median, s["balance"].median, s["bonf"].median
    ok = prod <= 50 and bal <= 1.1 * prod and bonf > prod
    return ok, ", ".join(f"{m} med {s[m].median:g}" for m in FIVE)


def criterion_4():
    """Moderate regime: all five medians inside [100, 260]."""
    s = _regime(0.30)
    meds = {m: s[m].median for m in FIVE}
    ok = all(100 <= v <= 260 for v in meds.values())
    return ok, ", ".join(f"{m} med {v:g}" for m, v in meds.items())


def criterion_5():
    """Exact enumeration: mean terminal wealth 1 within 1e-9 (k in {1,2}, t=10)."""
    results = martingale_enum(t=10, mv_depth=(10, 10), tol=1e-9)
    worst = max(abs(float(r.detail) - 1.0) for r in results if "mean = 1" in r.name)
    return all(r.passed for r in results), f"{len(results)} processes, max |mean - 1| = {worst:.2e}"


def criterion_6():
    """Log-wealth lower bound on 1000 streams; FTRL l1 regret on 100 streams."""
    results = lemma_bounds(n_streams=1000, t=500, n_ftrl=100)
    return all(r.passed for r in results), "; ".join(f"{r.name}: {r.detail}" for r in results)


def criterion_7():
    """Projection vs grid (<= 2e-3), FTRL vs numeric argmin (<= 1e-6), MV-ONS(k=1) = ONS (1e-10)."""
    proj = projection_oracle(n=50, step=1e-3, tol=2e-3)
    ftrl = ftrl_oracle(n=50, tol=1e-6)
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(20):
        mv, uni = MvOns(1), UniOns()
        for z in rng.uniform(-1, 1, size=100):
            mv.update(np.array([z]))
            uni.update(z)
            worst = max(worst, abs(mv.lam[0] - uni.lam))
    ok = all(r.passed for r in proj + ftrl) and worst <= 1e-10
    detail = "; ".join(f"{r.name}: {r.detail}" for r in proj[:1] + ftrl) + f"; mv vs uni {worst:.1e}"
    return ok, detail


def criterion_8():
    """Criterion 3's config: stopping_times.csv byte-identical across runs and thread counts."""
    flags = ["--k", "250", "--fraction", "0.75", "--alpha", "0.01", "--runs", "300", "--horizon", "1000", "--seed", "0", "--no-trajectories"]
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for n, threads in enumerate(("1", "4", "1", "8")):
            d = Path(tmp) / str(n)
            d.mkdir()
            with contextlib.redirect_stdout(io.StringIO()):
                code = cli_main(["simulate", *flags, "--threads", threads, "--out-dir", str(d)])
            if code != 0:
                return False, "simulate failed"
            blobs.append((d / "stopping_times.csv").read_bytes())
    ok = all(b == blobs[0] for b in blobs)
    return ok, f"{len(blobs)} runs (threads 1, 4, 1, 8), {len(blobs[0])} bytes each"


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6, criterion_7, criterion_8]


def _report(n, fn):
    start = time.perf_counter()
    ok, detail = fn()
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - start:.1f}s) {fn.__doc__.splitlines()[0]} -- {detail}"
    return ok, line


@pytest.mark.slow
@pytest.mark.parametrize("n", range(1, len(CRITERIA) + 1))
def test_criterion(n, capsys):
    ok, line = _report(n, CRITERIA[n - 1])
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    failures = 0
    for n, fn in enumerate(CRITERIA, 1):
        ok, line = _report(n, fn)
        print(line, flush=True)
        failures += not ok
    sys.exit(1 if failures else 0)
