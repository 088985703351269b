"""Outcome-vector sources: synthetic uniform streams and recorded replays.

Synthetic draws are addressed, not consumed: the value for
``(seed, replication, t, i)`` comes from a Philox counter block keyed by
``(seed, replication)`` at a counter derived from ``t``.  Any batching or
thread layout therefore sees identical numbers.
"""

from __future__ import annotations

import contextlib
import csv
import io
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ParameterError, StreamDataError


def uniform_params(mean, variance):
    """Support ``(a, b)`` of the uniform law with the given mean and variance."""
    if not variance > 0:
        raise ParameterError(f"variance must be positive, got {variance!r}")
    half = math.sqrt(3.0 * variance)
    a, b = mean - half, mean + half
    # one ulp of slack so (0, 1/3) maps to exactly (-1, 1)
    if a < -1.0 - 1e-12:
        raise ParameterError(f"lower bound a = {a:.6g} < -1 (mean {mean}, variance {variance})")
    if b > 1.0 + 1e-12:
        raise ParameterError(f"upper bound b = {b:.6g} > 1 (mean {mean}, variance {variance})")
    return max(a, -1.0), min(b, 1.0)


@dataclass(frozen=True)
class SyntheticStreamSpec:
    """``k`` independent uniform streams; the first ``floor(fraction * k)`` are non-null."""

    k: int
    nonnull_fraction: float = 0.0
    nonnull_mean: float = 0.1
    variance: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if self.k < 1:
            raise ParameterError("k must be positive")
        if not 0.0 <= self.nonnull_fraction <= 1.0:
            raise ParameterError(f"nonnull_fraction must lie in [0, 1], got {self.nonnull_fraction}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        uniform_params(0.0, self.variance)
        if self.n_nonnull:
            uniform_params(self.nonnull_mean, self.variance)

    @property
    def n_nonnull(self):
        # fraction * k can land just under an integer in floating point
        return int(math.floor(self.nonnull_fraction * self.k + 1e-9))

    @property
    def means(self):
        m = np.zeros(self.k)
        m[: self.n_nonnull] = self.nonnull_mean
        return m

    @property
    def delta_max(self):
        """Largest stream mean (Delta_m)."""
        return float(self.means.max())

    @property
    def delta_sq_sum(self):
        """Sum of squared stream means (Delta_s)."""
        return float(np.sum(self.means**2))

    @property
    def is_null(self):
        return self.n_nonnull == 0 or self.nonnull_mean == 0.0

    def supports(self):
        """Per-stream ``(low, width)`` arrays of the uniform supports."""
        a0, b0 = uniform_params(0.0, self.variance)
        low = np.full(self.k, a0)
        width = np.full(self.k, b0 - a0)
        if self.n_nonnull:
            a1, b1 = uniform_params(self.nonnull_mean, self.variance)
            low[: self.n_nonnull] = a1
            width[: self.n_nonnull] = b1 - a1
        return low, width


def _philox_key(seed, replication):
    ss = np.random.SeedSequence([int(seed), int(replication)])
    return ss.generate_state(2, np.uint64)


def synthetic_block(spec: SyntheticStreamSpec, replication, start, count):
    """Outcome rows for steps ``start .. start + count - 1`` (1-based), shape ``(count, k)``."""
    if start < 1 or count < 0:
        raise ValueError("steps are 1-based and count must be non-negative")
    blocks = -(-spec.k // 4)  # Philox emits four 64-bit words per counter
    bitgen = np.random.Philox(key=_philox_key(spec.seed, replication), counter=(start - 1) * blocks)
    u = np.random.Generator(bitgen).random((count, 4 * blocks))[:, : spec.k]
    low, width = spec.supports()
    return np.minimum(low + width * u, 1.0)


def synthetic_next(spec: SyntheticStreamSpec, replication, t):
    """Outcome vector at step ``t`` (1-based) of replication ``replication``."""
    return synthetic_block(spec, replication, t, 1)[0]


class SyntheticStream:
    """Iterator over one replication, drawn in chunks for speed."""

    def __init__(self, spec: SyntheticStreamSpec, replication=0, horizon=None, chunk=256):
        self.spec = spec
        self.replication = replication
        self.horizon = horizon
        self.chunk = chunk

    def __iter__(self):
        t = 1
        while self.horizon is None or t <= self.horizon:
            n = self.chunk if self.horizon is None else min(self.chunk, self.horizon - t + 1)
            yield from synthetic_block(self.spec, self.replication, t, n)
            t += n


@dataclass(frozen=True)
class ReplaySpec:
    """Delimited text with one time step per row; ``"-"`` reads stdin.

    ``has_header=None`` treats the first row as a header when any of its
    cells is not a number.
    """

    locator: str = "-"
    delimiter: str = ","
    has_header: bool | None = None


def _is_number(cell):
    try:
        float(cell)
    except ValueError:
        return False
    return True


class ReplayReader:
    """Row-by-row parser with strict validation.

    Iterating yields float vectors; :meth:`next_row` returns ``None`` at end
    of input.  Row numbers in errors count physical rows, header included.
    """

    def __init__(self, spec: ReplaySpec, stream=None):
        self.spec = spec
        self._stack = contextlib.ExitStack()
        if stream is None:
            if spec.locator == "-":
                stream = sys.stdin
            else:
                stream = self._stack.enter_context(open(Path(spec.locator), newline=""))
        self._rows = csv.reader(stream, delimiter=spec.delimiter)
        self.row_number = 0
        self.names = None
        self.k = None
        self._pending = None
        self._start()

    def _start(self):
        first = self._read_raw()
        if first is None:
            return
        header = self.spec.has_header
        if header is None:
            header = not all(_is_number(c) for c in first)
        if header:
            self.names = [c.strip() for c in first]
            self.k = len(self.names)
        else:
            self._pending = (self.row_number, first)

    def _read_raw(self):
        for row in self._rows:
            self.row_number += 1
            if not row or all(not c.strip() for c in row):
                continue
            return row
        return None

    def _parse(self, number, row):
        if self.k is None:
            self.k = len(row)
        if len(row) != self.k:
            raise StreamDataError(f"expected {self.k} values, found {len(row)}", row=number)
        out = np.empty(self.k)
        for j, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise StreamDataError(f"non-numeric value {cell.strip()!r}", row=number, column=j + 1) from None
            if not math.isfinite(value) or abs(value) > 1.0:
                raise StreamDataError(f"value {value!r} outside [-1, 1]", row=number, column=j + 1)
            out[j] = value
        return out

    def next_row(self):
        if self._pending is not None:
            number, row = self._pending
            self._pending = None
            return self._parse(number, row)
        row = self._read_raw()
        if row is None:
            return None
        return self._parse(self.row_number, row)

    def __iter__(self):
        while (row := self.next_row()) is not None:
            yield row

    def close(self):
        self._stack.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def replay_next(reader: ReplayReader):
    return reader.next_row()


def read_replay_text(text, **kwargs):
    """Convenience: a reader over an in-memory string."""
    return ReplayReader(ReplaySpec(**kwargs), stream=io.StringIO(text))
