import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqaudit.errors import ParameterError, StreamDataError
from seqaudit.streams import (
    ReplayReader,
    ReplaySpec,
    SyntheticStream,
    SyntheticStreamSpec,
    read_replay_text,
    replay_next,
    synthetic_block,
    synthetic_next,
    uniform_params,
)


class TestUniformParams:
    def test_null_support(self):
        a, b = uniform_params(0.0, 0.2)
        assert a == pytest.approx(-math.sqrt(3 / 5)) and b == pytest.approx(math.sqrt(3 / 5))
        assert (a, b) == pytest.approx((-0.774597, 0.774597), abs=1e-6)

    def test_shifted_support(self):
        assert uniform_params(0.1, 0.2) == pytest.approx((-0.674597, 0.874597), abs=1e-6)

    def test_full_support(self):
        assert uniform_params(0.0, 1 / 3) == (-1.0, 1.0)

    def test_infeasible_names_the_bound(self):
        with pytest.raises(ParameterError, match="upper bound"):
            uniform_params(0.3, 0.2)
        with pytest.raises(ParameterError, match="lower bound"):
            uniform_params(-0.3, 0.2)
        with pytest.raises(ParameterError):
            uniform_params(0.0, 0.0)

    @settings(max_examples=10, deadline=None)
    @given(st.floats(-0.4, 0.4), st.floats(0.005, 0.1))
    def test_moments(self, mean, var):
        try:
            a, b = uniform_params(mean, var)
        except ParameterError:
            return
        x = np.random.default_rng(0).uniform(a, b, size=10**6)
        se = math.sqrt(var / 10**6)
        assert abs(x.mean() - mean) <= 4 * se
        # Var of the sample variance of a uniform: (mu4 - var^2) / n with mu4 = 9/5 var^2
        assert abs(x.var() - var) <= 4 * math.sqrt(0.8 * var**2 / 10**6)


class TestSynthetic:
    def test_nonnull_count_and_summaries(self):
        spec = SyntheticStreamSpec(250, 0.05, 0.1, 0.2)
        assert spec.n_nonnull == 12
        assert spec.delta_max == 0.1
        assert spec.delta_sq_sum == pytest.approx(12 * 0.01)
        assert SyntheticStreamSpec(100, 0.3).n_nonnull == 30
        assert SyntheticStreamSpec(10).is_null

    def test_invalid_specs(self):
        with pytest.raises(ParameterError):
            SyntheticStreamSpec(0)
        with pytest.raises(ParameterError):
            SyntheticStreamSpec(5, 1.5)
        with pytest.raises(ParameterError):
            SyntheticStreamSpec(5, 0.5, nonnull_mean=0.5)

    def test_null_means(self):
        spec = SyntheticStreamSpec(4, 0.0, seed=1)
        z = synthetic_block(spec, 0, 1, 100_000)
        se = math.sqrt(0.2 / 100_000)
        assert np.all(np.abs(z.mean(axis=0)) <= 3 * se)

    def test_nonnull_means(self):
        spec = SyntheticStreamSpec(4, 1.0, 0.1, seed=2)
        z = synthetic_block(spec, 0, 1, 100_000)
        se = math.sqrt(0.2 / 100_000)
        assert np.all(np.abs(z.mean(axis=0) - 0.1) <= 3 * se)

    def test_prefix_is_nonnull(self):
        spec = SyntheticStreamSpec(10, 0.3, 0.1, seed=3)
        z = synthetic_block(spec, 0, 1, 50_000)
        assert np.all(z[:, :3].mean(axis=0) > 0.09)
        assert np.all(np.abs(z[:, 3:].mean(axis=0)) < 0.02)

    def test_range(self):
        spec = SyntheticStreamSpec(7, 0.5, 0.1, variance=0.27)
        z = synthetic_block(spec, 5, 1, 10_000)
        assert z.min() >= -1.0 and z.max() <= 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**63), st.integers(0, 10**6), st.integers(1, 5000), st.integers(1, 300))
    def test_draws_are_addressable(self, seed, rep, t, k):
        spec = SyntheticStreamSpec(k, 0.2, seed=seed)
        a = synthetic_next(spec, rep, t)
        b = synthetic_block(spec, rep, max(1, t - 3), 5)[t - max(1, t - 3)]
        np.testing.assert_array_equal(a, b)
        np.testing.assert_array_equal(a, synthetic_next(spec, rep, t))

    def test_replications_and_seeds_differ(self):
        spec = SyntheticStreamSpec(5, seed=0)
        assert not np.array_equal(synthetic_next(spec, 0, 1), synthetic_next(spec, 1, 1))
        other = SyntheticStreamSpec(5, seed=1)
        assert not np.array_equal(synthetic_next(spec, 0, 1), synthetic_next(other, 0, 1))
        assert not np.array_equal(synthetic_next(spec, 0, 1), synthetic_next(spec, 0, 2))

    def test_stream_iterator(self):
        spec = SyntheticStreamSpec(3, seed=4)
        rows = list(SyntheticStream(spec, 2, horizon=300, chunk=64))
        np.testing.assert_array_equal(np.array(rows), synthetic_block(spec, 2, 1, 300))


class TestReplay:
    def test_plain_rows(self):
        r = read_replay_text("0.5,-0.25\n0,1\n")
        np.testing.assert_array_equal(replay_next(r), [0.5, -0.25])
        np.testing.assert_array_equal(replay_next(r), [0.0, 1.0])
        assert replay_next(r) is None
        assert r.k == 2

    def test_header_names(self):
        r = read_replay_text("a;b;c\n0;0.1;-1\n", delimiter=";")
        assert r.names == ["a", "b", "c"]
        assert len(list(r)) == 1

    def test_empty_after_header(self):
        r = read_replay_text("a,b\n")
        assert replay_next(r) is None
        assert r.k == 2

    def test_empty_input(self):
        assert replay_next(read_replay_text("")) is None

    def test_range_error_names_column(self):
        r = read_replay_text("1.5,0\n")
        with pytest.raises(StreamDataError, match="column 1") as exc:
            replay_next(r)
        assert exc.value.row == 1 and exc.value.column == 1

    def test_arity_error(self):
        r = read_replay_text("0,0\n0,0\n0\n")
        with pytest.raises(StreamDataError, match="row 3"):
            list(r)

    def test_non_numeric_and_nonfinite(self):
        with pytest.raises(StreamDataError, match="row 2"):
            list(read_replay_text("0\nfoo\n"))
        with pytest.raises(StreamDataError):
            list(read_replay_text("0\nnan\n"))

    def test_forced_header_flag(self):
        r = read_replay_text("0,0\n1,1\n", has_header=True)
        assert r.names == ["0", "0"]
        assert len(list(r)) == 1
        r = read_replay_text("0,0\n1,1\n", has_header=False)
        assert len(list(r)) == 2

    def test_file_locator(self, tmp_path):
        p = tmp_path / "z.csv"
        p.write_text("x\n0.1\n-0.2\n")
        with ReplayReader(ReplaySpec(str(p))) as r:
            rows = list(r)
        assert [float(x[0]) for x in rows] == [0.1, -0.2]
