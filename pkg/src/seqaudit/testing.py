"""Merging per-stream wealth into global tests and making level-alpha decisions.

Every statistic lives in the log domain.  A test rejects at step ``t`` when

    statistic_t >= ln(1 / alpha) + threshold_offset

and stays rejected afterwards, so the recorded stopping time is the first
hitting time.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import ConfigError
from .wealth import MultiStreamWealth

LN_HALF = math.log(0.5)
LN_2 = math.log(2.0)
# ln(1/alpha) + ln k and ln(k/alpha) can differ in the last bit; a statistic
# that ties the threshold in exact arithmetic must still reject
TIE_TOLERANCE = 1e-12


class Method(str, enum.Enum):
    BONF = "bonf"
    MV_ONS = "mv_ons"
    FTRL = "ftrl"
    PROD = "prod"
    AVE = "ave"
    BALANCE = "balance"
    MAX_UNION = "max_union"

    def __str__(self):
        return self.value


#: The five tests compared in the synthetic experiments.
DEFAULT_METHODS = (Method.BONF, Method.FTRL, Method.PROD, Method.AVE, Method.BALANCE)


@dataclass(frozen=True)
class TestSpec:
    """One global test: a merging method and its significance level."""

    __test__ = False  # not a pytest class

    method: Method
    alpha: float

    def __post_init__(self):
        try:
            object.__setattr__(self, "method", Method(self.method))
        except ValueError:
            choices = ", ".join(m.value for m in Method)
            raise ConfigError(f"unknown test {self.method!r}; choose from {choices}") from None
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError(f"alpha must lie in (0, 1), got {self.alpha!r}")

    @property
    def log_threshold(self):
        return math.log(1.0 / self.alpha)


@dataclass(frozen=True)
class TestDecision:
    """Decision after ``t`` observations."""

    __test__ = False

    rejected: bool
    statistic: float
    threshold: float
    t: int

    @classmethod
    def initial(cls, spec: TestSpec, offset: float = 0.0):
        return cls(False, 0.0, spec.log_threshold + offset, 0)


def _require(value, method):
    if value is None:
        raise ConfigError(f"test {method.value!r} needs its wealth process enabled")
    return value


def merged_statistic(method, log_wealths, mv_log=None, ftrl_log=None):
    """Log-domain merged statistic and threshold offset for ``method``.

    ``log_wealths`` has the streams on its last axis; leading axes broadcast.

    ============  ======================================  ===========
    method        statistic                               offset
    ============  ======================================  ===========
    bonf          max_i ln W_i                            ln k
    prod          sum_i ln W_i                            0
    ave           logsumexp(ln W) - ln k                  0
    balance       ln(W_ave / 2 + W_prod / 2)              0
    max_union     max(ln W_prod, max_i ln W_i - ln k)     ln 2
    mv_ons        ln W_mv                                 0
    ftrl          ln W_ftrl                               0
    ============  ======================================  ===========
    """
    method = Method(method)
    if method is Method.MV_ONS:
        return _require(mv_log, method), 0.0
    if method is Method.FTRL:
        return _require(ftrl_log, method), 0.0
    lw = np.asarray(log_wealths, dtype=float)
    k = lw.shape[-1]
    ln_k = math.log(k)
    if method is Method.BONF:
        return lw.max(axis=-1), ln_k
    if method is Method.PROD:
        return lw.sum(axis=-1), 0.0
    if method is Method.AVE:
        return logsumexp(lw, axis=-1) - ln_k, 0.0
    if method is Method.BALANCE:
        ave = logsumexp(lw, axis=-1) - ln_k
        prod = lw.sum(axis=-1)
        return np.logaddexp(ave, prod) + LN_HALF, 0.0
    if method is Method.MAX_UNION:
        return np.maximum(lw.sum(axis=-1), lw.max(axis=-1) - ln_k), LN_2
    raise AssertionError(method)


def tracked_log_wealth(method, log_wealths, mv_log=None, ftrl_log=None):
    """The merged process on the common scale compared against ln(1/alpha)."""
    stat, offset = merged_statistic(method, log_wealths, mv_log, ftrl_log)
    return stat - offset


def reaches(statistic, threshold):
    """``statistic >= threshold`` with ties resolved up to rounding error."""
    return statistic >= threshold - TIE_TOLERANCE * np.maximum(1.0, np.abs(threshold))


def decide(spec: TestSpec, statistic, threshold_offset, prior: TestDecision) -> TestDecision:
    threshold = spec.log_threshold + threshold_offset
    statistic = float(statistic)
    return TestDecision(
        rejected=prior.rejected or bool(reaches(statistic, threshold)),
        statistic=statistic,
        threshold=threshold,
        t=prior.t + 1,
    )


@dataclass(frozen=True)
class StoppingRecord:
    """Outcome of one test on one path.

    ``tau`` is the rejection time, or the number of observations consumed
    when ``censored``.  ``leader`` is the stream holding the largest wealth
    at rejection (diagnostic only, reported for ``bonf``).
    """

    spec: TestSpec
    tau: int
    censored: bool
    length: int
    leader: int | None = None


def needs_mv(specs):
    return any(s.method is Method.MV_ONS for s in specs)


def needs_ftrl(specs):
    return any(s.method is Method.FTRL for s in specs)


class Monitor:
    """Evaluate a set of tests online, one outcome vector at a time.

    ``observe`` returns the decisions after the new vector.  Wealth keeps
    updating after a test rejects so that the others can still stop.
    """

    def __init__(self, specs, k):
        self.specs = [s if isinstance(s, TestSpec) else TestSpec(*s) for s in specs]
        if not self.specs:
            raise ConfigError("at least one test is required")
        self.wealth = MultiStreamWealth(k, mv=needs_mv(self.specs), ftrl=needs_ftrl(self.specs))
        self.decisions = [TestDecision.initial(s) for s in self.specs]
        self.taus = [None] * len(self.specs)
        self.leaders = [None] * len(self.specs)

    @property
    def t(self):
        return self.wealth.t

    def tracked(self, spec):
        """Current merged log-wealth of ``spec`` on the ln(1/alpha) scale."""
        w = self.wealth
        return float(tracked_log_wealth(spec.method, w.log_wealths, w.mv_log, w.ftrl_log))

    def observe(self, z):
        w = self.wealth
        w.step(z)
        for n, spec in enumerate(self.specs):
            stat, offset = merged_statistic(spec.method, w.log_wealths, w.mv_log, w.ftrl_log)
            self.decisions[n] = decide(spec, stat, offset, self.decisions[n])
            if self.decisions[n].rejected and self.taus[n] is None:
                self.taus[n] = w.t
                self.leaders[n] = int(np.argmax(w.log_wealths))
        return self.decisions

    @property
    def all_stopped(self):
        return all(tau is not None for tau in self.taus)

    def records(self):
        t = self.t
        return [
            StoppingRecord(
                spec,
                tau=t if tau is None else tau,
                censored=tau is None,
                length=t,
                leader=self.leaders[n] if spec.method is Method.BONF else None,
            )
            for n, (spec, tau) in enumerate(zip(self.specs, self.taus))
        ]


def run_until_stop(source, specs, horizon, *, k=None):
    """Run the tests in ``specs`` on one path until all stop or ``horizon``.

    Parameters
    ----------
    source : iterable of array-like
        Yields outcome vectors in [-1, 1]^k.  Running out early censors the
        still-running tests at the observed length.
    specs : sequence of TestSpec
    horizon : int
    k : int, optional
        Number of streams; inferred from the first vector when omitted.

    Returns
    -------
    list of StoppingRecord, in ``specs`` order.
    """
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    specs = [s if isinstance(s, TestSpec) else TestSpec(*s) for s in specs]
    monitor = Monitor(specs, k) if k is not None else None
    for z in source:
        z = np.asarray(z, dtype=float)
        if monitor is None:
            monitor = Monitor(specs, z.shape[-1])
        monitor.observe(z)
        if monitor.all_stopped or monitor.t >= horizon:
            break
    if monitor is None:
        return [StoppingRecord(s, tau=0, censored=True, length=0) for s in specs]
    return monitor.records()
