"""Monte-Carlo replication harness for stopping times and wealth trajectories.

Replications are processed in fixed-size batches that advance side by side
as numpy arrays.  Batch membership depends only on ``batch_size``, never on
the thread count, and every draw is addressed by ``(seed, replication, t)``,
so any number of worker threads produces bit-identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ReplicationError, SeqAuditError
from .streams import ReplayReader, ReplaySpec, SyntheticStreamSpec, synthetic_block
from .testing import (
    DEFAULT_METHODS,
    Method,
    TestSpec,
    merged_statistic,
    needs_ftrl,
    needs_mv,
    reaches,
)
from .wealth import MultiStreamWealth

#: Above this many streams vector ONS must be requested with ``force_mv``.
MV_ONS_MAX_K = 25


def default_tests(k, alpha, include_mv=None):
    methods = list(DEFAULT_METHODS)
    if include_mv or (include_mv is None and k <= MV_ONS_MAX_K):
        methods.append(Method.MV_ONS)
    return tuple(TestSpec(m, alpha) for m in methods)


def unique_labels(tests):
    """Column labels: the method name, suffixed with alpha when a method repeats."""
    counts = {}
    for spec in tests:
        counts[spec.method] = counts.get(spec.method, 0) + 1
    labels = [
        spec.method.value if counts[spec.method] == 1 else f"{spec.method.value}@{spec.alpha:g}"
        for spec in tests
    ]
    if len(set(labels)) != len(labels):
        raise ConfigError("duplicate test specification")
    return labels


@dataclass(frozen=True)
class SimulationConfig:
    stream: SyntheticStreamSpec | ReplaySpec
    tests: tuple
    horizon: int = 1000
    runs: int = 1000
    record_trajectories: bool = False
    trajectory_stride: int = 1
    force_mv: bool = False
    threads: int = 1
    batch_size: int = 64

    def __post_init__(self):
        tests = tuple(t if isinstance(t, TestSpec) else TestSpec(*t) for t in self.tests)
        object.__setattr__(self, "tests", tests)
        if not tests:
            raise ConfigError("at least one test is required")
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.trajectory_stride < 1:
            raise ConfigError("trajectory_stride must be >= 1")
        if self.threads < 1 or self.batch_size < 1:
            raise ConfigError("threads and batch_size must be >= 1")
        if isinstance(self.stream, ReplaySpec):
            if self.runs != 1:
                raise ConfigError("a replayed stream is a single path; set runs to 1")
        elif isinstance(self.stream, SyntheticStreamSpec):
            if needs_mv(tests) and self.stream.k > MV_ONS_MAX_K and not self.force_mv:
                raise ConfigError(
                    f"mv_ons with k={self.stream.k} > {MV_ONS_MAX_K} is very slow; pass force_mv to run it"
                )
        else:
            raise ConfigError(f"unsupported stream config {type(self.stream).__name__}")
        unique_labels(tests)

    @property
    def labels(self):
        return unique_labels(self.tests)

    @property
    def recorded_steps(self):
        return np.arange(self.trajectory_stride, self.horizon + 1, self.trajectory_stride)


@dataclass
class TestSummary:
    """Stopping-time distribution of one test over all replications.

    ``all_taus`` holds one entry per replication (the observed length when
    censored); ``taus`` keeps only the uncensored ones.
    """

    __test__ = False

    label: str
    spec: TestSpec
    all_taus: np.ndarray
    censored: np.ndarray
    leaders: np.ndarray | None = None

    @property
    def taus(self):
        return [int(x) for x in self.all_taus[~self.censored]]

    @property
    def censored_count(self):
        return int(self.censored.sum())

    @property
    def censoring_rate(self):
        return self.censored_count / len(self.censored)

    @property
    def rejection_rate(self):
        return 1.0 - self.censoring_rate

    @property
    def mean_uncensored(self):
        kept = self.all_taus[~self.censored]
        return float(kept.mean()) if kept.size else math.nan

    @property
    def quantiles(self):
        """(q25, q50, q75) over all runs, censored runs entering at their length."""
        return tuple(float(q) for q in np.quantile(self.all_taus, [0.25, 0.5, 0.75]))

    @property
    def median(self):
        return self.quantiles[1]


@dataclass
class StoppingSummary:
    runs: int
    horizon: int
    tests: dict
    trajectory_t: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))
    trajectory_quantiles: dict = field(default_factory=dict)

    def __getitem__(self, label):
        return self.tests[label]


class _Batch:
    """Stopping times (and optional trajectories) for one block of replications."""

    def __init__(self, config: SimulationConfig, reps):
        self.config = config
        self.reps = reps

    def outcomes(self):
        cfg = self.config
        if isinstance(cfg.stream, ReplaySpec):
            with ReplayReader(cfg.stream) as reader:
                rows = []
                for row in reader:
                    rows.append(row)
                    if len(rows) == cfg.horizon:
                        break
            if not rows:
                return 0, iter(())
            data = np.asarray(rows)[None, :, :]
            return data.shape[2], (data[:, j, :] for j in range(data.shape[1]))
        spec = cfg.stream

        def gen(chunk=128):
            t = 1
            while t <= cfg.horizon:
                n = min(chunk, cfg.horizon - t + 1)
                block = np.stack([synthetic_block(spec, r, t, n) for r in self.reps])
                for j in range(n):
                    yield block[:, j, :]
                t += n

        return spec.k, gen()

    def run(self):
        cfg = self.config
        tests = cfg.tests
        B = len(self.reps)
        n_tests = len(tests)
        taus = np.zeros((n_tests, B), dtype=np.int64)
        stopped = np.zeros((n_tests, B), dtype=bool)
        leaders = np.full((n_tests, B), -1, dtype=np.int64)
        steps = cfg.recorded_steps if cfg.record_trajectories else np.zeros(0, dtype=int)
        traj = np.full((n_tests, steps.size, B), np.nan) if cfg.record_trajectories else None
        thresholds = np.array([s.log_threshold for s in tests])

        k, source = self.outcomes()
        wealth = None
        t = 0
        rec = 0
        for z in source:
            if wealth is None:
                wealth = MultiStreamWealth(k, batch=B, mv=needs_mv(tests), ftrl=needs_ftrl(tests))
            wealth.step(z)
            t += 1
            cache = {}
            for n, spec in enumerate(tests):
                if spec.method not in cache:
                    cache[spec.method] = merged_statistic(
                        spec.method, wealth.log_wealths, wealth.mv_log, wealth.ftrl_log
                    )
                stat, offset = cache[spec.method]
                hit = reaches(stat, thresholds[n] + offset) & ~stopped[n]
                if hit.any():
                    taus[n, hit] = t
                    stopped[n, hit] = True
                    if spec.method is Method.BONF:
                        leaders[n, hit] = np.argmax(wealth.log_wealths[hit], axis=-1)
                if traj is not None and rec < steps.size and steps[rec] == t:
                    traj[n, rec] = stat - offset
            if traj is not None and rec < steps.size and steps[rec] == t:
                rec += 1
            if traj is None and stopped.all():
                break
        taus[~stopped] = t
        return taus, ~stopped, leaders, traj


def _batches(runs, size):
    return [np.arange(s, min(s + size, runs)) for s in range(0, runs, size)]


def run_replications(config: SimulationConfig) -> StoppingSummary:
    """Run ``config.runs`` replications and aggregate per-test stopping times."""

    def work(reps):
        try:
            return _Batch(config, reps).run()
        except SeqAuditError as exc:
            span = f"{reps[0]}..{reps[-1]}"
            raise ReplicationError(f"replications {span}: {exc}", replications=(int(reps[0]), int(reps[-1]))) from exc

    batches = _batches(config.runs, config.batch_size)
    if config.threads > 1 and len(batches) > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            results = list(pool.map(work, batches))
    else:
        results = [work(b) for b in batches]

    taus = np.concatenate([r[0] for r in results], axis=1)
    censored = np.concatenate([r[1] for r in results], axis=1)
    leaders = np.concatenate([r[2] for r in results], axis=1)
    summary = StoppingSummary(runs=config.runs, horizon=config.horizon, tests={})
    for n, (label, spec) in enumerate(zip(config.labels, config.tests)):
        summary.tests[label] = TestSummary(
            label,
            spec,
            taus[n],
            censored[n],
            leaders[n] if spec.method is Method.BONF else None,
        )
    if config.record_trajectories:
        traj = np.concatenate([r[3] for r in results], axis=2)
        steps = config.recorded_steps
        summary.trajectory_t = steps
        for n, label in enumerate(config.labels):
            # replay input shorter than the horizon leaves trailing NaNs
            valid = ~np.isnan(traj[n]).all(axis=1)
            q = np.full((steps.size, 3), np.nan)
            if valid.any():
                q[valid] = np.quantile(traj[n][valid], [0.25, 0.5, 0.75], axis=1).T
            summary.trajectory_quantiles[label] = q
    return summary


def type1_estimate(config: SimulationConfig):
    """Per-test rate of ever rejecting within the horizon, with binomial SE.

    Returns ``{label: (rate, standard_error)}``.  Only null synthetic
    configurations are accepted.
    """
    stream = config.stream
    if not isinstance(stream, SyntheticStreamSpec) or not stream.is_null:
        raise ConfigError("type-I error needs a synthetic stream with all means zero")
    summary = run_replications(config)
    out = {}
    for label, ts in summary.tests.items():
        rate = ts.rejection_rate
        out[label] = (rate, math.sqrt(rate * (1.0 - rate) / config.runs))
    return out
