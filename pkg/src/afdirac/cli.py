"""Command line entry point: run/validate experiment configs."""

from __future__ import annotations

import argparse
import os
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import AfdiracError, ConfigError
from .harness import EXPERIMENTS, ExperimentConfig, emit_report, run_experiment


def _apply_override(d: dict, key: str, raw_value: str):
    """Set a dotted key in the nested config dict; value parsed as TOML."""
    try:
        value = tomllib.loads(f"v = {raw_value}")["v"]
    except tomllib.TOMLDecodeError:
        value = raw_value
    parts = key.split(".")
    node = d
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} crosses a non-table value")
    node[parts[-1]] = value


def _load_config(args) -> ExperimentConfig:
    try:
        with open(args.config, "rb") as fh:
            data = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(str(exc)) from exc
    for ov in getattr(args, "override", None) or []:
        if "=" not in ov:
            raise ConfigError(f"override {ov!r} must have the form key=value")
        key, _, value = ov.partition("=")
        _apply_override(data, key.strip(), value.strip())
    if getattr(args, "seed", None) is not None:
        data["seed"] = args.seed
    return ExperimentConfig.from_dict(data)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="afdirac",
        description="Dirac flows and dispersive functionals on asymptotically "
        "flat 3-manifolds",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory")
    p_run.add_argument("--override", action="append", metavar="KEY=VALUE")
    p_run.add_argument("--threads", type=int, default=1,
                       help="worker hint (recorded; execution is sequential)")
    p_run.add_argument("--seed", type=int, default=None)

    p_val = sub.add_parser("validate", help="validate a config without running")
    p_val.add_argument("config")
    p_val.add_argument("--override", action="append", metavar="KEY=VALUE")
    p_val.add_argument("--seed", type=int, default=None)

    sub.add_parser("list-experiments", help="list available experiment names")

    args = parser.parse_args(argv)

    if args.command == "list-experiments":
        for name in EXPERIMENTS:
            print(name)
        return 0

    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    if args.command == "validate":
        print(f"ok: {cfg.experiment}")
        return 0

    try:
        report = run_experiment(cfg)
        report["threads"] = args.threads
    except AfdiracError as exc:
        print(f"run failed [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1
    out_dir = args.out or os.environ.get("AFDIRAC_OUT", "afdirac-out")
    jpath, _ = emit_report(report, out_dir)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"[{status}] {c['name']}: value={c['value']} threshold={c['threshold']}")
    print(f"report: {jpath}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
