"""Command-line front end: ``simulate``, ``replay`` and ``check``.

Exit codes: 0 success, 1 runtime failure, 2 bad configuration or input,
3 alarm raised (``replay --stop-on-reject``).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checks import SUITES
from .errors import ConfigError, SeqAuditError, StreamDataError
from .sim import SimulationConfig, StoppingSummary, default_tests, run_replications
from .streams import ReplayReader, ReplaySpec, SyntheticStreamSpec
from .testing import Method, Monitor, TestSpec

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_ALARM = 3

THREADS_ENV = "SEQAUDIT_THREADS"
LINEAR_FLOOR = 1e-3

STOPPING_COLUMNS = ("test", "run", "tau", "censored")
TRAJECTORY_COLUMNS = ("test", "t", "q25_log_wealth", "q50_log_wealth", "q75_log_wealth")
LINEAR_TRAJECTORY_COLUMNS = ("test", "t", "q25_wealth", "q50_wealth", "q75_wealth")

_TOP_KEYS = {
    "stream", "tests", "alpha", "horizon", "runs", "record_trajectories",
    "trajectory_stride", "force_mv", "threads", "outputs",
}
_SYNTH_KEYS = {"k", "fraction", "mean", "var", "seed"}
_REPLAY_KEYS = {"replay", "delimiter", "has_header"}
_OUTPUT_KEYS = {"stopping_csv", "trajectories_csv", "summary_json"}
_DEFAULT_OUTPUTS = {
    "stopping_csv": "stopping_times.csv",
    "trajectories_csv": "trajectories.csv",
    "summary_json": "summary.json",
}


def _reject_unknown(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _parse_tests(raw, alpha):
    if isinstance(raw, str):
        raw = [s for s in raw.split(",") if s.strip()]
    tests = []
    for item in raw:
        if isinstance(item, str):
            tests.append(TestSpec(item.strip(), alpha))
        elif isinstance(item, dict):
            _reject_unknown(item, {"method", "alpha"}, "tests entry")
            tests.append(TestSpec(item["method"], item.get("alpha", alpha)))
        else:
            raise ConfigError(f"cannot read test entry {item!r}")
    return tuple(tests)


def load_run_config(data, overrides=None):
    """Build ``(SimulationConfig, outputs, effective_dict)`` from a JSON object.

    ``overrides`` maps the command-line flag names (``k``, ``fraction``,
    ``alpha`` ...) onto the config before validation.
    """
    data = json.loads(json.dumps(data))  # deep copy
    _reject_unknown(data, _TOP_KEYS, "config")
    stream = data.setdefault("stream", {})
    if not isinstance(stream, dict):
        raise ConfigError("stream must be a JSON object")
    is_replay = "replay" in stream
    _reject_unknown(stream, _REPLAY_KEYS if is_replay else _SYNTH_KEYS, "stream")
    outputs = data.setdefault("outputs", {})
    _reject_unknown(outputs, _OUTPUT_KEYS, "outputs")

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if key in _SYNTH_KEYS:
            if is_replay:
                raise ConfigError(f"--{key} does not apply to a replay stream")
            stream[key] = value
        else:
            data[key] = value

    alpha = data.setdefault("alpha", 0.01)
    if not is_replay:
        stream.setdefault("k", 250)
        stream.setdefault("fraction", 0.05)
        stream.setdefault("mean", 0.1)
        stream.setdefault("var", 0.2)
        stream.setdefault("seed", 0)
        stream_spec = SyntheticStreamSpec(
            k=int(stream["k"]),
            nonnull_fraction=float(stream["fraction"]),
            nonnull_mean=float(stream["mean"]),
            variance=float(stream["var"]),
            seed=int(stream["seed"]),
        )
    else:
        stream.setdefault("delimiter", ",")
        stream.setdefault("has_header", None)
        stream_spec = ReplaySpec(stream["replay"], stream["delimiter"], stream["has_header"])
        data.setdefault("runs", 1)

    force_mv = bool(data.setdefault("force_mv", False))
    if "tests" in data:
        tests = _parse_tests(data["tests"], alpha)
    else:
        k = stream_spec.k if isinstance(stream_spec, SyntheticStreamSpec) else math.inf
        tests = default_tests(k, alpha, include_mv=True if force_mv else None)
    data["tests"] = [{"method": t.method.value, "alpha": t.alpha} for t in tests]

    data.setdefault("horizon", 1000)
    data.setdefault("runs", 1000)
    data.setdefault("record_trajectories", True)
    data.setdefault("trajectory_stride", 1)
    if "threads" not in data:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            data["threads"] = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    for key, default in _DEFAULT_OUTPUTS.items():
        outputs.setdefault(key, default)

    try:
        config = SimulationConfig(
            stream=stream_spec,
            tests=tests,
            horizon=int(data["horizon"]),
            runs=int(data["runs"]),
            record_trajectories=bool(data["record_trajectories"]),
            trajectory_stride=int(data["trajectory_stride"]),
            force_mv=force_mv,
            threads=int(data["threads"]),
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc
    return config, outputs, data


def _fmt(x):
    return repr(float(x)) if math.isfinite(x) else ("nan" if math.isnan(x) else str(x))


def write_stopping_csv(path, summary: StoppingSummary):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(STOPPING_COLUMNS)
        for label, ts in summary.tests.items():
            for run, (tau, cens) in enumerate(zip(ts.all_taus, ts.censored)):
                w.writerow((label, run, int(tau), int(bool(cens))))


def write_trajectories_csv(path, summary: StoppingSummary, linear=False):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LINEAR_TRAJECTORY_COLUMNS if linear else TRAJECTORY_COLUMNS)
        for label, q in summary.trajectory_quantiles.items():
            if linear:
                q = np.maximum(np.exp(q), LINEAR_FLOOR)
            for t, row in zip(summary.trajectory_t, q):
                w.writerow((label, int(t), *(_fmt(v) for v in row)))


def summary_dict(summary: StoppingSummary, effective):
    tests = {}
    for label, ts in summary.tests.items():
        q25, q50, q75 = ts.quantiles
        entry = {
            "method": ts.spec.method.value,
            "alpha": ts.spec.alpha,
            "mean_tau_uncensored": None if math.isnan(ts.mean_uncensored) else ts.mean_uncensored,
            "median_tau": q50,
            "q25_tau": q25,
            "q75_tau": q75,
            "censored": ts.censored_count,
            "censoring_rate": ts.censoring_rate,
        }
        if ts.leaders is not None:
            hit = ts.leaders[~ts.censored]
            values, counts = np.unique(hit, return_counts=True)
            entry["leader_stream_counts"] = {str(int(v)): int(c) for v, c in zip(values, counts)}
        tests[label] = entry
    seed = effective.get("stream", {}).get("seed")
    return {
        "version": __version__,
        "seed": seed,
        "runs": summary.runs,
        "horizon": summary.horizon,
        "config": effective,
        "tests": tests,
    }


def _overrides(args):
    tests = args.tests
    return {
        "k": args.k,
        "fraction": args.fraction,
        "mean": args.mean,
        "var": args.var,
        "seed": args.seed,
        "alpha": args.alpha,
        "horizon": args.horizon,
        "runs": args.runs,
        "threads": args.threads,
        "trajectory_stride": args.stride,
        "tests": tests,
        "force_mv": True if args.force_mv else None,
        "record_trajectories": False if args.no_trajectories else None,
    }


def cmd_simulate(args, out=None, err=None):
    out, err = out or sys.stdout, err or sys.stderr
    try:
        data = {}
        if args.config:
            try:
                data = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        config, outputs, effective = load_run_config(data, _overrides(args))
        out_dir = Path(args.out_dir)
        paths = {key: out_dir / value for key, value in outputs.items()}
        for p in paths.values():
            if not p.parent.is_dir():
                raise ConfigError(f"output directory {p.parent} does not exist")
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG

    try:
        summary = run_replications(config)
        write_stopping_csv(paths["stopping_csv"], summary)
        if config.record_trajectories:
            write_trajectories_csv(paths["trajectories_csv"], summary, linear=args.linear)
        payload = summary_dict(summary, effective)
        paths["summary_json"].write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    except (SeqAuditError, OSError) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME
    for label, ts in summary.tests.items():
        print(
            f"{label:>10}  median tau {ts.median:7.1f}  mean (uncensored) {ts.mean_uncensored:7.1f}"
            f"  censored {ts.censoring_rate:6.1%}",
            file=out,
        )
    return EXIT_OK


def cmd_replay(args, out=None, err=None, stdin=None):
    out, err = out or sys.stdout, err or sys.stderr
    try:
        tests = _parse_tests(args.tests or "bonf,ftrl,prod,ave,balance", args.alpha)
        header = {"auto": None, "yes": True, "no": False}[args.header]
        spec = ReplaySpec(args.input, args.delimiter, header)
    except ConfigError as exc:
        print(f"config error: {exc}", file=err)
        return EXIT_CONFIG

    labels = [t.method.value if sum(u.method is t.method for u in tests) == 1 else f"{t.method.value}@{t.alpha:g}" for t in tests]
    field = "wealth" if args.linear else "log_wealth"
    try:
        reader = ReplayReader(spec, stream=stdin if args.input == "-" and stdin is not None else None)
    except OSError as exc:
        print(f"error: cannot open {args.input}: {exc}", file=err)
        return EXIT_CONFIG
    alarmed = set()
    with reader:
        monitor = None
        try:
            for z in reader:
                if monitor is None:
                    monitor = Monitor(tests, reader.k)
                decisions = monitor.observe(z)
                first_alarm = None
                for label, spec_, dec in zip(labels, tests, decisions):
                    value = monitor.tracked(spec_)
                    if args.linear:
                        value = max(math.exp(value), LINEAR_FLOOR) if value < 700 else math.inf
                    line = {"t": monitor.t, "test": label, field: value, "rejected": dec.rejected}
                    print(json.dumps(line), file=out)
                    if dec.rejected and label not in alarmed:
                        alarmed.add(label)
                        first_alarm = first_alarm or label
                        print(json.dumps({"alert": True, "t": monitor.t, "test": label}), file=out)
                if first_alarm and args.stop_on_reject:
                    out.flush()
                    return EXIT_ALARM
        except StreamDataError as exc:
            print(f"input error: {exc}", file=err)
            return EXIT_CONFIG
        except ConfigError as exc:
            print(f"config error: {exc}", file=err)
            return EXIT_CONFIG
        except SeqAuditError as exc:
            print(f"error: {exc}", file=err)
            return EXIT_RUNTIME
    return EXIT_OK


def cmd_check(args, out=None, err=None):
    out, err = out or sys.stdout, err or sys.stderr
    suite = SUITES.get(args.suite)
    if suite is None:
        print(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}", file=err)
        return EXIT_CONFIG
    try:
        results = suite()
    except SeqAuditError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_RUNTIME
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}  [{r.detail}]", file=out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def build_parser():
    parser = argparse.ArgumentParser(prog="seqaudit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run synthetic stopping-time experiments")
    sim.add_argument("--config", help="JSON run configuration")
    sim.add_argument("--out-dir", default=".", help="directory for the output files (default: .)")
    sim.add_argument("--k", type=int)
    sim.add_argument("--fraction", type=float, help="fraction of non-null streams")
    sim.add_argument("--mean", type=float, help="mean of the non-null streams")
    sim.add_argument("--var", type=float, help="variance of every stream")
    sim.add_argument("--alpha", type=float)
    sim.add_argument("--horizon", type=int)
    sim.add_argument("--runs", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--tests", help="comma-separated methods: " + ",".join(m.value for m in Method))
    sim.add_argument("--threads", type=int, help=f"worker threads (default: ${THREADS_ENV} or 1)")
    sim.add_argument("--stride", type=int, help="record trajectories every STRIDE steps")
    sim.add_argument("--linear", action="store_true", help="write wealth, floored at 1e-3, not log-wealth")
    sim.add_argument("--force-mv", action="store_true", help="allow mv_ons for k > 25")
    sim.add_argument("--no-trajectories", action="store_true", help="skip trajectories.csv")
    sim.set_defaults(func=cmd_simulate)

    rep = sub.add_parser("replay", help="run the tests over a recorded stream")
    rep.add_argument("input", help="delimited file, or - for stdin")
    rep.add_argument("--alpha", type=float, default=0.01)
    rep.add_argument("--tests", help="comma-separated methods (default: bonf,ftrl,prod,ave,balance)")
    rep.add_argument("--delimiter", default=",")
    rep.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    rep.add_argument("--stop-on-reject", action="store_true", help="exit 3 at the first rejection")
    rep.add_argument("--linear", action="store_true", help="report wealth, floored at 1e-3")
    rep.set_defaults(func=cmd_replay)

    chk = sub.add_parser("check", help="run an invariant / oracle suite")
    chk.add_argument("suite", help=", ".join(SUITES))
    chk.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
