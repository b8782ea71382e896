"""Command-line driver: `simulate run | validate | recipe`."""

import argparse
import sys
from dataclasses import replace

from . import recipes
from .config import ConfigError, load_config, resolved_parameters
from .trajectory import EnsembleError


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="simulate",
        description="Trajectory simulations of coupled lossy qubits with noisy "
                    "dissipation rates, plus a wave-plate network compiler.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a config file and write outputs")
    run.add_argument("config", help="INI config path")
    run.add_argument("--seed", type=int, default=None, help="override [run] master_seed")
    run.add_argument("--workers", type=int, default=None,
                     help="worker threads (default: NHQUBITS_WORKERS or CPU count)")
    run.add_argument("--out", default=None, help="override output path prefix")

    val = sub.add_parser("validate", help="check a config and echo resolved parameters")
    val.add_argument("config", help="INI config path")

    rec = sub.add_parser("recipe", help="run a bundled figure recipe")
    rec.add_argument("name", help="one of: " + ", ".join(recipes.RECIPE_NAMES))
    rec.add_argument("--out", default=None, help="override output path prefix")
    return ap


def _summary(report) -> str:
    return (f"recipe={report.recipe} n_traj={report.n_traj} "
            f"wall={report.wall_time:.2f}s outputs={' '.join(report.paths)}")


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = load_config(args.config)
            if args.seed is not None:
                cfg.run = replace(cfg.run, master_seed=args.seed)
            if args.out is not None:
                cfg.prefix = args.out
            report = recipes.execute(cfg, workers=args.workers)
            print(_summary(report))
            return 0

        if args.command == "validate":
            cfg = load_config(args.config)
            for key, value in resolved_parameters(cfg).items():
                print(f"{key} = {value}")
            print("ok")
            return 0

        if args.command == "recipe":
            try:
                cfg = recipes.figure_recipe(args.name)
            except KeyError as exc:
                print(f"error: {exc.args[0]}", file=sys.stderr)
                return 2
            if args.out is not None:
                cfg.prefix = args.out
            report = recipes.execute(cfg)
            print(_summary(report))
            return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except EnsembleError as exc:
        print(f"ensemble failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
