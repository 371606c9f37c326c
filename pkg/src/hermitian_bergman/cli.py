"""Command-line entry point.

Each subcommand runs one experiment kind from a config file (or the kind's
defaults) with optional overrides. Exit status: 0 when every gating check
passes, 1 on a check failure, 2 on a schema violation, 3 on a numerical
failure. Errors are also printed to stderr as one JSON record.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .config import default_config, load_config, with_overrides
from .errors import ConfigError
from .experiments import execute
from .report import ErrorRecord, RunReport, emit_report, to_csv, to_json

SUBCOMMANDS = {
    "hopf-verify": "geometry-verify",
    "check-df": "df-sweep",
    "bkmkh-check": "bkmkh",
    "bergman-run": "bergman",
    "solve-twisted": "twisted",
    "detraz": "detraz",
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hbverify", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="directory for report files (default: print to stdout)")
    common.add_argument("--format", choices=("json", "csv", "both"), default=None,
                        help="report format (default: from the config, else json)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--slack", type=float, default=None, help="override the bound slack fraction")
    sub = p.add_subparsers(dest="command", required=True)
    for name, kind in SUBCOMMANDS.items():
        sp = sub.add_parser(name, parents=[common], help=f"run a {kind} experiment")
        sp.add_argument("--config", help=f"YAML or JSON config of kind {kind} (default: built-in defaults)")
    sp = sub.add_parser("run", parents=[common], help="run one or more configs of any kind")
    sp.add_argument("--config", action="append", required=True, help="config path; repeat for several")
    sp.add_argument("--parallel", type=int, default=1, metavar="N", help="run independent configs in N processes")
    return p


def _error(code: int, kind: str, exc: Exception) -> ErrorRecord:
    return ErrorRecord(code=code, kind=kind, message=str(exc), details=getattr(exc, "details", []))


def _load(args, path: str | None, expected: str | None):
    cfg = default_config(expected) if path is None else load_config(path)
    if expected is not None and cfg.kind != expected:
        raise ConfigError(f"config kind '{cfg.kind}' does not match subcommand (expects '{expected}')",
                          details=[{"loc": ["kind"], "msg": f"expected {expected}"}])
    return with_overrides(cfg, args.seed, args.slack)


def _formats(args, cfg) -> list[str]:
    if args.format is None:
        return list(cfg.output.formats)
    return ["json", "csv"] if args.format == "both" else [args.format]


def _deliver(args, cfg, rep: RunReport) -> int:
    out_dir = args.out or cfg.output.dir
    fmts = _formats(args, cfg)
    if out_dir is None:
        for f in fmts:
            sys.stdout.write(to_json(rep) if f == "json" else to_csv(rep))
    else:
        try:
            paths = emit_report(rep, out_dir, fmts)
        except OSError as exc:
            _print_error(_error(2, "io", exc))
            return 2
        for c in rep.checks:
            flag = "PASS" if c.passed else "FAIL"
            print(f"{flag} {c.name} value={c.value} bound={c.bound} tol={c.tol}{'' if c.gating else ' (info)'}")
        print("wrote " + ", ".join(str(p) for p in paths))
    if rep.error is not None:
        _print_error(rep.error)
    return rep.exit_code


def _print_error(err: ErrorRecord):
    print(json.dumps({"error": err.model_dump(mode="json")}, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    expected = SUBCOMMANDS.get(args.command)
    paths = [args.config] if expected is not None else args.config
    try:
        cfgs = [_load(args, p, expected) for p in paths]
    except ConfigError as exc:
        _print_error(_error(2, "schema", exc))
        return 2
    workers = getattr(args, "parallel", 1)
    if workers > 1 and len(cfgs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(execute, cfgs))
    else:
        reports = [execute(c) for c in cfgs]
    # assemble and write sequentially, in config order
    codes = [_deliver(args, c, r) for c, r in zip(cfgs, reports)]
    return max(codes)


if __name__ == "__main__":
    sys.exit(main())
