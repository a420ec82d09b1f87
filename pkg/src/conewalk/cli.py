"""Command-line entry point: ``conewalk <subcommand> [options]``.

Every subcommand reads the same flat config (``--config``), applies flag
overrides, validates, then runs a single pipeline stage. ``--set key=value``
overrides any dotted key directly.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import runner, verify
from .config import ConfigError, ExperimentConfig, parse_value

# subcommand -> [(flag, dotted key, type, help)]
_FLAGS = {
    "common": [
        ("--cone", "cone.variant", str, "half-line, half-space, wedge, orthant or circular"),
        ("--dimension", "cone.dimension", int, "ambient dimension for half-space/orthant"),
        ("--angle", "cone.angle", str, "opening angle, e.g. 2*pi/3"),
        ("--law", "law.variant", str, "gaussian, rademacher, sphere or pareto"),
        ("--tail-index", "law.tail_index", float, "Pareto tail index"),
        ("--x", "points.x", "json", "starting point as JSON, e.g. [1,1]"),
        ("--samples", "run.samples", int, "Monte Carlo paths"),
    ],
    "eigen": [("--theta0", "eigen.theta0", str, "half-opening angle"),
              ("--mesh", "eigen.mesh", int, "finite-difference intervals")],
    "simulate": [("--n", "run.n", int, "horizon"),
                 ("--x-list", "points.x_list", "json", "several starting points"),
                 ("--audit", "run.audit", int, "number of full paths to dump"),
                 ("--beta", "probe.beta", float, "tau moment order, 0 < beta < p"),
                 ("--t-exp", "probe.t_exp", float, "max-tail probe exponent"),
                 ("--n-grid", "grid.n", "json", "horizons for the max-tail probe")],
    "estimate-v": [("--construction", "v.construction", int, "1 (shifted) or 2 (schedule)"),
                   ("--gamma", "shift.gamma", float, "shift exponent"),
                   ("--k-grid", "grid.k", "json", "horizons for construction 1"),
                   ("--n0", "schedule.n0", int, "first schedule horizon"),
                   ("--epsilon", "schedule.epsilon", float, "schedule growth parameter"),
                   ("--m-max", "schedule.m_max", int, "last schedule index"),
                   ("--x-list", "points.x_list", "json", "several starting points")],
    "decompose": [("--gamma", "shift.gamma", float, "shift exponent"),
                  ("--k-grid", "grid.k", "json", "checkpoints")],
    "tail-fit": [("--n-grid", "grid.n", "json", "horizons, >= 3 spanning two decades")],
    "kappa-trace": [("--x-list", "points.x_list", "json", "starting points"),
                    ("--n-grid", "grid.n", "json", "survival horizons"),
                    ("--k-grid", "grid.k", "json", "construction 1 horizons"),
                    ("--gamma", "shift.gamma", float, "shift exponent")],
    "conditional-dist": [("--n", "density.n", int, "horizon"),
                         ("--bins", "density.bins", int, "radial bins")],
    "local-clt": [("--n", "lclt.n", int, "horizon"),
                  ("--min-hits", "lclt.min_hits", int, "minimum hits per lattice point")],
}


def _global_parser(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--config", help="flat key = value config file", **kw)
    p.add_argument("--seed", type=int, help="root seed", **kw)
    p.add_argument("--threads", type=int, help="worker threads (results do not depend on it)", **kw)
    p.add_argument("--out", help="output directory", **kw)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any dotted key", **kw)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conewalk", parents=[_global_parser(False)],
                                     description="Random walks killed on leaving a cone.")
    sub = parser.add_subparsers(dest="command", required=True)
    glob = _global_parser(True)
    for name in runner.STAGE_FUNCS:
        sp = sub.add_parser(name, parents=[glob], help=f"run the {name} stage")
        seen = set()
        for flag, key, typ, hlp in _FLAGS["common"] + _FLAGS[name]:
            if flag in seen:
                continue
            seen.add(flag)
            sp.add_argument(flag, dest=f"key:{key}", type=(lambda s: parse_value(s)) if typ == "json" else typ,
                            default=None, help=hlp)
    vp = sub.add_parser("verify", parents=[glob], help="run the acceptance battery")
    vp.add_argument("suite", help="quick or full")
    vp.add_argument("--criteria", default=None, help="comma-separated subset, e.g. 1,4,7")
    vp.add_argument("--json", action="store_true", help="print the result table as JSON")
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    out = {k[4:]: v for k, v in vars(args).items() if k.startswith("key:") and v is not None}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = parse_value(v)
    for flag, key in (("seed", "run.seed"), ("threads", "run.threads"), ("out", "run.out")):
        if getattr(args, flag, None) is not None:
            out[key] = getattr(args, flag)
    return out


def _load(args) -> ExperimentConfig:
    base = ExperimentConfig.from_file(args.config) if getattr(args, "config", None) else ExperimentConfig()
    return base.with_overrides(**_overrides(args))


def _run_verify(args) -> int:
    if args.suite not in verify.SUITES:
        print(f"conewalk verify: unknown suite {args.suite!r} (choose quick or full)", file=sys.stderr)
        return 2
    cfg = _load(args)
    keys = args.criteria.split(",") if args.criteria else None
    if keys and any(k not in verify.CHECKS for k in keys):
        print(f"conewalk verify: unknown criteria in {args.criteria!r}", file=sys.stderr)
        return 2
    echo = None if args.json else print
    results = verify.run_suite(args.suite, cfg.seed, keys, echo=echo)
    table = verify.summary_table(results)
    if args.json:
        print(json.dumps(runner._jsonable(table), indent=2))
    else:
        print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    if getattr(args, "out", None):
        Path(args.out).mkdir(parents=True, exist_ok=True)
        runner.write_json(Path(args.out) / f"verify_{args.suite}.json", [r.to_dict() for r in results])
    return 0 if all(r.passed for r in results) else 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "verify":
            return _run_verify(args)
        cfg = _load(args)
        manifest = runner.run(cfg, [args.command])
    except ConfigError as exc:
        print(f"conewalk: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"conewalk: {exc}", file=sys.stderr)
        return 2
    summary_path = cfg.out / args.command / "summary.json"
    report = {"stage": args.command, "out": str(cfg.out), "completed": manifest.completed, "failed": manifest.failed}
    if summary_path.exists():
        report["summary"] = json.loads(summary_path.read_text())
    print(json.dumps(report, indent=2))
    return 0 if not manifest.failed else 1


if __name__ == "__main__":
    sys.exit(main())
