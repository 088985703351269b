"""Log-domain wealth processes driven by the betting learners.

Wealth is never materialised in the linear domain here: a product over a
few hundred streams leaves double range within a few hundred steps.  Every
update follows the bet-then-observe order, so the bet applied at step ``t``
depends only on outcomes strictly before ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .betting import Direction, MvOns, UniOns, check_outcomes
from .errors import InvariantError, StreamDataError

PAYOFF_FLOOR = 0.5
# <lambda, z> with ||lambda||_1 = 1/2 can round a few ulps past -1/2
_MV_FLOOR_SLACK = 1e-12


@dataclass
class WealthProcess:
    """ln W_t plus the running sums A_t = sum z and V_t = sum z^2.

    Arrays may have any shape; each entry is an independent process.
    """

    log_wealth: np.ndarray
    diag_a: np.ndarray
    diag_v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape=()):
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))

    def record(self, log_increment, z):
        self.log_wealth = self.log_wealth + log_increment
        self.diag_a = self.diag_a + z
        self.diag_v = self.diag_v + z * z
        self.t += 1


def log_wealth_bound(p: WealthProcess):
    """Right-hand side A^2 / (4 (V + |A|)) - 2 ln(4t) of the ONS wealth guarantee."""
    if p.t < 1:
        raise ValueError("bound is defined for t >= 1")
    a = np.asarray(p.diag_a)
    denom = np.asarray(p.diag_v) + np.abs(a)
    with np.errstate(invalid="ignore", divide="ignore"):
        lead = np.where(denom > 0, a * a / (4.0 * denom), 0.0)
    return lead - 2.0 * math.log(4.0 * p.t)


def check_log_wealth_bound(p: WealthProcess):
    """Whether ln W_t clears :func:`log_wealth_bound` (elementwise).

    Only meaningful for scalar ONS wealth; used by tests and ``check``.
    """
    return np.asarray(p.log_wealth) >= log_wealth_bound(p)


@dataclass
class MultiStreamWealth:
    """All wealth processes for ``k`` parallel streams.

    Parameters
    ----------
    k : int
        Number of streams.
    batch : int or None
        Number of independent replications carried side by side.  ``None``
        drops the leading axis so outcomes are plain length-``k`` vectors.
    mv, ftrl : bool
        Enable the vector ONS process and the FTRL-direction process.
    """

    k: int
    batch: int | None = None
    mv: bool = False
    ftrl: bool = False
    t: int = field(default=0, init=False)

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be positive")
        lead = () if self.batch is None else (self.batch,)
        self._lead = lead
        self.stream_ons = UniOns(lead + (self.k,))
        self.per_stream = WealthProcess.zeros(lead + (self.k,))
        self.mv_ons = None
        self.mv_wealth = None
        if self.mv:
            self.mv_ons = [MvOns(self.k) for _ in range(1 if self.batch is None else self.batch)]
            self.mv_wealth = WealthProcess.zeros(lead)
        self.direction = None
        self.ftrl_ons = None
        self.ftrl_wealth = None
        if self.ftrl:
            self.direction = Direction(self.k, lead)
            self.ftrl_ons = UniOns(lead)
            self.ftrl_wealth = WealthProcess.zeros(lead)

    @property
    def log_wealths(self):
        """Per-stream ln W_{i,t}, shape ``(..., k)``."""
        return self.per_stream.log_wealth

    @property
    def mv_log(self):
        return None if self.mv_wealth is None else self.mv_wealth.log_wealth

    @property
    def ftrl_log(self):
        return None if self.ftrl_wealth is None else self.ftrl_wealth.log_wealth

    def _check_shape(self, z):
        z = check_outcomes(z)
        if z.shape != self._lead + (self.k,):
            raise StreamDataError(
                f"expected outcome array of shape {self._lead + (self.k,)}, got {z.shape}"
            )
        return z

    def step(self, z):
        """Advance every enabled process by one outcome vector."""
        z = self._check_shape(z)
        self.step_per_stream(z, checked=True)
        if self.mv:
            self.step_mv(z, checked=True)
        if self.ftrl:
            self.step_ftrl(z, checked=True)
        self.t += 1

    def step_per_stream(self, z, checked=False):
        if not checked:
            z = self._check_shape(z)
        bet = self.stream_ons.bet()
        gain = bet * z
        if np.any(gain < PAYOFF_FLOOR - 1.0):
            raise InvariantError("per-stream payoff fell below 1/2")
        self.per_stream.record(np.log1p(gain), z)
        self.stream_ons.update(z)

    def step_mv(self, z, checked=False):
        if not checked:
            z = self._check_shape(z)
        rows = z.reshape(-1, self.k)
        inc = np.empty(rows.shape[0])
        for n, (learner, zn) in enumerate(zip(self.mv_ons, rows)):
            s = float(learner.bet() @ zn)
            if 1.0 + s < PAYOFF_FLOOR - _MV_FLOOR_SLACK:
                raise InvariantError(f"vector payoff {1.0 + s!r} fell below 1/2")
            inc[n] = math.log1p(s)
            learner.update(zn, 1.0 + s)
        self.mv_wealth.record(inc.reshape(self._lead), np.zeros(self._lead))

    def step_ftrl(self, z, checked=False):
        if not checked:
            z = self._check_shape(z)
        u = self.direction.step(z)
        # |<u, z>| <= ||u||_1 ||z||_inf <= 1 up to rounding
        s = np.clip(np.sum(u * z, axis=-1), -1.0, 1.0)
        bet = self.ftrl_ons.bet()
        gain = bet * s
        if np.any(gain < PAYOFF_FLOOR - 1.0):
            raise InvariantError("direction payoff fell below 1/2")
        self.ftrl_wealth.record(np.log1p(gain), s)
        self.ftrl_ons.update(s)
