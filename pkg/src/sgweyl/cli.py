"""Command-line runner: ``sgweyl <experiment> [options]``.

Without an experiment the available experiments are listed.  Exit status is
0 on success, 1 when a fitted quantity misses its tolerance and 2 on usage
or parameter errors.  ``SGW_THREADS`` caps the BLAS thread count.
"""
from __future__ import annotations

import argparse
import json
import sys

from .experiments import EXPERIMENTS, ExperimentConfig, list_experiments, resolve_params, run
from .symbols import EllipticityError

__all__ = ["main", "build_parser"]


def _add_param(sub: argparse.ArgumentParser, key: str, default) -> None:
    flag = "--" + key.replace("_", "-")
    if isinstance(default, bool):
        sub.add_argument(flag, dest=key, action=argparse.BooleanOptionalAction,
                         default=argparse.SUPPRESS, help=f"(default: {default})")
    elif isinstance(default, tuple):
        sub.add_argument(flag, dest=key, default=argparse.SUPPRESS, metavar="LIST",
                         help=f"comma-separated (default: {','.join(map(str, default))})")
    else:
        sub.add_argument(flag, dest=key, default=argparse.SUPPRESS,
                         type=type(default) if not isinstance(default, str) else str,
                         help=f"(default: {default!r})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgweyl", description=__doc__.splitlines()[0])
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    subs = parser.add_subparsers(dest="experiment", metavar="experiment")
    lst = subs.add_parser("list", help="list the experiments")
    lst.add_argument("--json", action="store_true", help="machine-readable output")
    for exp in EXPERIMENTS.values():
        sub = subs.add_parser(exp.name, help=exp.verifies, description=exp.verifies)
        sub.add_argument("--config", help="INI file with [experiment] and [params] sections")
        sub.add_argument("--out", default=None, help="output directory (default runs/<name>)")
        sub.add_argument("--seed", type=int, default=None)
        sub.add_argument("--json", action="store_true", help="print fit.json to stdout")
        for key, default in exp.defaults.items():
            _add_param(sub, key, default)
    return parser


def _print_list(as_json: bool) -> None:
    items = list_experiments()
    if as_json:
        print(json.dumps(items, indent=2))
        return
    width = max(len(i["name"]) for i in items)
    for i in items:
        print(f"{i['name']:<{width}}  {i['verifies']}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.experiment in (None, "list"):
        _print_list(args.json)
        return 0
    name = args.experiment
    explicit = {k: v for k, v in vars(args).items()
                if k in EXPERIMENTS[name].defaults}
    try:
        if args.config:
            cfg = ExperimentConfig.from_file(args.config, name=name, params=explicit)
        else:
            cfg = ExperimentConfig(name, resolve_params(name, explicit))
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        res, fit = run(cfg)
    except (ValueError, EllipticityError, FileNotFoundError) as exc:
        print(f"sgweyl {name}: error: {exc}", file=sys.stderr)
        return 2
    if args.json:
        print(json.dumps(fit, indent=2))
    else:
        rel = fit["rel_error"]
        rel_s = f"{rel:.3%}" if isinstance(rel, float) else "n/a"
        print(f"{name}: c_est={fit['c_est']!r} c_predicted={fit['c_predicted']!r} "
              f"rel_error={rel_s} {'PASS' if res.passed else 'FAIL'} "
              f"({fit['runtime']:.1f} s, out={cfg.out or 'runs/' + name})")
    return 0 if res.passed else 1


if __name__ == "__main__":
    sys.exit(main())
