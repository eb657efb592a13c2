"""Command line entry point: ``pxkacanov {exp1,exp2,exp3} [options]``."""
from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

from .experiments import RUNNERS, ExperimentConfig, parse_key_values

# flag name -> config key
_FLAGS = {
    "problem": "problem", "mesh_n": "mesh_n", "refines": "refines",
    "eps_minus": "eps_minus", "eps_plus": "eps_plus", "delta": "delta",
    "damping": "damping", "safety": "safety", "tol": "tol", "max_iter": "max_iter",
    "ref_iterations": "ref_iterations", "init": "init", "k_min": "k_min",
    "k_max": "k_max", "base": "base", "seed": "seed", "out": "out",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pxkacanov",
        description="Damped Kacanov iteration for the relaxed p(x)-Poisson problem.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("exp1", "error along the Kacanov iteration"),
                        ("exp2", "error against the relaxation parameter k"),
                        ("exp3", "error under uniform mesh refinement")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--problem", choices=["meq1", "meq2", "poisson"])
        p.add_argument("--mesh-n", type=int)
        p.add_argument("--refines", type=int)
        p.add_argument("--eps-minus", type=float)
        p.add_argument("--eps-plus", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--damping", choices=["fixed", "theory_safe"])
        p.add_argument("--safety", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--max-iter", type=int)
        p.add_argument("--ref-iterations", type=int)
        p.add_argument("--init", choices=["auto", "zero", "exact", "sinxy", "prolongate"])
        p.add_argument("--k-min", type=int)
        p.add_argument("--k-max", type=int)
        p.add_argument("--base", type=float)
        p.add_argument("--warm-start", action="store_true", default=None)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="CSV output path (default: stdout)")
    return parser


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    values = parse_key_values(Path(args.config).read_text()) if args.config else {}
    for flag, key in _FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            values[key] = val
    if args.warm_start:
        values["warm_start"] = True
    return ExperimentConfig.from_mapping(values)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    result = RUNNERS[args.command](cfg)
    logging.getLogger(__name__).info("%s finished in %.1f s", args.command,
                                     time.perf_counter() - t0)
    if cfg.out:
        result.write(cfg.out)
    else:
        sys.stdout.write(result.to_csv())
    return 0


if __name__ == "__main__":
    sys.exit(main())
