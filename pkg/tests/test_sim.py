import math

import numpy as np
import pytest

from seqaudit.errors import ConfigError, ReplicationError
from seqaudit.sim import (
    SimulationConfig,
    default_tests,
    run_replications,
    type1_estimate,
    unique_labels,
)
from seqaudit.streams import ReplaySpec, SyntheticStream, SyntheticStreamSpec
from seqaudit.testing import Method, TestSpec, run_until_stop

ALL_BUT_MV = [m for m in Method if m is not Method.MV_ONS]


def _specs(alpha=0.01, methods=ALL_BUT_MV):
    return [TestSpec(m, alpha) for m in methods]


def test_default_tests_include_mv_only_for_small_k():
    assert Method.MV_ONS in {t.method for t in default_tests(10, 0.01)}
    assert Method.MV_ONS not in {t.method for t in default_tests(250, 0.01)}
    assert Method.MV_ONS in {t.method for t in default_tests(250, 0.01, include_mv=True)}


def test_labels_disambiguate_repeated_methods():
    assert unique_labels([TestSpec("ave", 0.01), TestSpec("ave", 0.1), TestSpec("prod", 0.1)]) == [
        "ave@0.01",
        "ave@0.1",
        "prod",
    ]
    with pytest.raises(ConfigError):
        unique_labels([TestSpec("ave", 0.1), TestSpec("ave", 0.1)])


def test_config_validation():
    spec = SyntheticStreamSpec(30)
    with pytest.raises(ConfigError):
        SimulationConfig(spec, _specs(), runs=0)
    with pytest.raises(ConfigError):
        SimulationConfig(spec, _specs(), horizon=0)
    with pytest.raises(ConfigError):
        SimulationConfig(spec, [TestSpec("mv_ons", 0.01)])
    SimulationConfig(spec, [TestSpec("mv_ons", 0.01)], force_mv=True)
    with pytest.raises(ConfigError):
        SimulationConfig(ReplaySpec("x.csv"), _specs(), runs=2)
    with pytest.raises(ConfigError):
        SimulationConfig(spec, [])


def test_summary_invariants():
    cfg = SimulationConfig(SyntheticStreamSpec(20, 0.3, seed=1), _specs(), horizon=200, runs=70, record_trajectories=True, trajectory_stride=10)
    s = run_replications(cfg)
    for ts in s.tests.values():
        assert len(ts.taus) + ts.censored_count == cfg.runs
        q25, q50, q75 = ts.quantiles
        assert q25 <= q50 <= q75
    assert list(s.trajectory_t) == list(range(10, 201, 10))
    for q in s.trajectory_quantiles.values():
        assert q.shape == (20, 3)
        assert np.all(np.diff(q, axis=1) >= 0)


def test_thread_count_does_not_change_results():
    base = dict(stream=SyntheticStreamSpec(40, 0.5, seed=9), tests=_specs(), horizon=300, runs=150, record_trajectories=True)
    ref = run_replications(SimulationConfig(**base, threads=1))
    for threads in (2, 5):
        other = run_replications(SimulationConfig(**base, threads=threads))
        for label in ref.tests:
            np.testing.assert_array_equal(ref[label].all_taus, other[label].all_taus)
            np.testing.assert_array_equal(ref[label].censored, other[label].censored)
            np.testing.assert_array_equal(ref.trajectory_quantiles[label], other.trajectory_quantiles[label])


def test_batch_size_does_not_change_results():
    base = dict(stream=SyntheticStreamSpec(6, 0.5, seed=2), tests=_specs(methods=list(Method)), horizon=100, runs=10)
    a = run_replications(SimulationConfig(**base, batch_size=64))
    b = run_replications(SimulationConfig(**base, batch_size=3))
    for label in a.tests:
        np.testing.assert_array_equal(a[label].all_taus, b[label].all_taus)


def test_batched_engine_matches_single_path_runs():
    spec = SyntheticStreamSpec(8, 0.5, seed=5)
    specs = _specs(methods=list(Method))
    s = run_replications(SimulationConfig(spec, specs, horizon=250, runs=6))
    for rep in range(6):
        recs = run_until_stop(SyntheticStream(spec, rep, horizon=250), specs, horizon=250)
        for label, rec in zip(s.tests, recs):
            assert s[label].all_taus[rep] == rec.tau
            assert bool(s[label].censored[rep]) == rec.censored
            if rec.leader is not None and not rec.censored:
                assert s[label].leaders[rep] == rec.leader


def test_replay_config(tmp_path):
    p = tmp_path / "ones.csv"
    p.write_text("\n".join(["1.0"] * 40) + "\n")
    s = run_replications(SimulationConfig(ReplaySpec(str(p)), _specs(), horizon=100, runs=1))
    assert s["prod"].all_taus[0] == 13
    assert not s["prod"].censored[0]
    s = run_replications(SimulationConfig(ReplaySpec(str(p)), [TestSpec("prod", 1e-9)], horizon=100, runs=1))
    assert s["prod"].censored[0] and s["prod"].all_taus[0] == 40


def test_bad_replay_data_names_the_replication(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("0.1\n2.0\n")
    with pytest.raises(ReplicationError, match="row 2"):
        run_replications(SimulationConfig(ReplaySpec(str(p)), _specs(), horizon=10, runs=1))


def test_trivial_run():
    s = run_replications(SimulationConfig(SyntheticStreamSpec(5), _specs(), horizon=1, runs=1))
    assert all(ts.censored_count == 1 for ts in s.tests.values())


class TestTypeOne:
    def test_refuses_alternatives(self):
        with pytest.raises(ConfigError):
            type1_estimate(SimulationConfig(SyntheticStreamSpec(5, 0.2), _specs()))

    def test_single_run_is_degenerate(self):
        out = type1_estimate(SimulationConfig(SyntheticStreamSpec(5), _specs(), horizon=50, runs=1))
        for rate, se in out.values():
            assert rate in (0.0, 1.0) and se == 0.0

    def test_half_alpha_single_stream(self):
        runs = 400
        cfg = SimulationConfig(SyntheticStreamSpec(1), _specs(0.5), horizon=300, runs=runs)
        for rate, _ in type1_estimate(cfg).values():
            assert rate <= 0.5 + 3 * math.sqrt(0.25 / runs)

    def test_level_small_k(self):
        runs = 400
        cfg = SimulationConfig(SyntheticStreamSpec(3, seed=4), _specs(0.05, list(Method)), horizon=150, runs=runs)
        for rate, _ in type1_estimate(cfg).values():
            assert rate <= 0.05 + 3 * math.sqrt(0.05 * 0.95 / runs)


def test_balance_never_stops_after_max_union():
    s = run_replications(SimulationConfig(SyntheticStreamSpec(60, 0.2, seed=8), _specs(), horizon=600, runs=128))
    assert np.all(s["balance"].all_taus <= s["max_union"].all_taus)


def _se(ts):
    return ts.all_taus.std(ddof=1) / math.sqrt(len(ts.all_taus))


def test_dense_ordering():
    s = run_replications(SimulationConfig(SyntheticStreamSpec(50, 0.75, seed=3), _specs(), horizon=1000, runs=200))
    prod, ave, bonf = s["prod"], s["ave"], s["bonf"]
    assert max(p.censoring_rate for p in (prod, ave, bonf)) == 0.0
    gap = lambda a, b: b.mean_uncensored - a.mean_uncensored - 3 * math.hypot(_se(a), _se(b))  # noqa: E731
    assert gap(prod, ave) > 0
    assert gap(ave, bonf) > 0


def test_sparse_ordering():
    s = run_replications(SimulationConfig(SyntheticStreamSpec(100, 0.05, seed=3), _specs(), horizon=1000, runs=200))

    # the mean of uncensored runs only speaks for a test that rarely censors
    def centre(ts):
        return ts.median if ts.censoring_rate > 0.1 else ts.mean_uncensored

    bonf, ave = centre(s["bonf"]), centre(s["ave"])
    assert abs(bonf - ave) <= 0.15 * min(bonf, ave)
    best = min(centre(ts) for ts in s.tests.values())
    assert centre(s["balance"]) <= 1.25 * best
