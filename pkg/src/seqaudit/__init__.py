"""Sequential level-alpha tests of the global null over many bounded streams.

Each stream is bet on by its own online learner; the per-stream wealth
processes are merged into a single test supermartingale that rejects once it
reaches ``1 / alpha``.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    InvariantError,
    ParameterError,
    ProjectionError,
    ReplicationError,
    SeqAuditError,
    StreamDataError,
)
from .betting import Direction, MvOns, SimplexFtrl, UniOns, project_l1_h  # noqa: E402
from .wealth import MultiStreamWealth, WealthProcess  # noqa: E402
from .testing import Method, Monitor, TestDecision, TestSpec, merged_statistic, run_until_stop  # noqa: E402
from .streams import ReplayReader, ReplaySpec, SyntheticStream, SyntheticStreamSpec  # noqa: E402
from .sim import SimulationConfig, StoppingSummary, run_replications, type1_estimate  # noqa: E402

__all__ = [
    "__version__",
    "ConfigError",
    "InvariantError",
    "ParameterError",
    "ProjectionError",
    "ReplicationError",
    "SeqAuditError",
    "StreamDataError",
    "Direction",
    "MvOns",
    "SimplexFtrl",
    "UniOns",
    "project_l1_h",
    "MultiStreamWealth",
    "WealthProcess",
    "Method",
    "Monitor",
    "TestDecision",
    "TestSpec",
    "merged_statistic",
    "run_until_stop",
    "ReplayReader",
    "ReplaySpec",
    "SyntheticStream",
    "SyntheticStreamSpec",
    "SimulationConfig",
    "StoppingSummary",
    "run_replications",
    "type1_estimate",
]
