"""Command-line entry point (``morpho2r``)."""

from __future__ import annotations

import argparse
import json
import sys

from .config import HEURISTICS, RL_METHODS, ConfigError, build_config
from .harness import HarnessError, report, run, verify_run

BASELINES = {"equal-dex": "equal-dex", "band-match": "band-match", "analytic": "analytic"}


def _common(p: argparse.ArgumentParser, task_default: str | None = None) -> None:
    p.add_argument("--task", choices=["circle", "ellipse", "rect"], default=task_default,
                   help="task path (default: from --config, else circle)")
    p.add_argument("--config", help="YAML configuration file")
    p.add_argument("--seed", type=int, action="append",
                   help="seed for RL runs; repeat for several (default 1..5)")
    p.add_argument("--episodes", type=int, help="training episodes per RL run")
    p.add_argument("--out", help="output directory")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="morpho2r", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    _common(sub.add_parser("sweep", help="grid sweep over phi on the circle task"))
    p = sub.add_parser("heuristic", help="PSO, BO or CMA-ES on the circle task")
    p.add_argument("method", choices=HEURISTICS)
    _common(p)
    p = sub.add_parser("rl", help="train an RL agent as a single-step bandit")
    p.add_argument("algo", choices=RL_METHODS)
    _common(p)
    p = sub.add_parser("baseline", help="closed-form reference design")
    p.add_argument("name", choices=sorted(BASELINES))
    _common(p)
    _common(sub.add_parser("run-all", help="every method available for the task"))
    p = sub.add_parser("report", help="write plot-ready data for a finished run")
    p.add_argument("--out", required=True, help="run directory to read")
    p.add_argument("--svg", action="store_true", help="also render SVG charts")
    p = sub.add_parser("verify", help="re-derive a run's files from its records")
    p.add_argument("--out", required=True, help="run directory to check")
    return ap


def _methods(args) -> list[str] | None:
    if args.command == "sweep":
        return ["sweep"]
    if args.command == "heuristic":
        return [args.method]
    if args.command == "rl":
        return [args.algo]
    if args.command == "baseline":
        return [BASELINES[args.name]]
    return None


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            paths = report(args.out, svg=args.svg)
            print(json.dumps({"status": "ok", "files": [str(p) for p in paths]}))
            return 0
        if args.command == "verify":
            verify_run(args.out)
            print(json.dumps({"status": "ok", "run_dir": args.out}))
            return 0
        cfg = build_config(args.task, args.config, methods=_methods(args), seeds=args.seed,
                           episodes=args.episodes, out=args.out, workers=args.workers)
        out = run(cfg)
        print(json.dumps({"status": "ok", "run_dir": str(out), "task": cfg.task_name,
                          "methods": list(cfg.methods)}))
        return 0
    except ConfigError as e:
        return _fail("config_error", e, 2)
    except HarnessError as e:
        return _fail("run_error", e, 3)
    except (OSError, ValueError) as e:
        return _fail(type(e).__name__, e, 1)


def _fail(kind: str, err: Exception, code: int) -> int:
    print(json.dumps({"status": "error", "kind": kind, "message": str(err)}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
