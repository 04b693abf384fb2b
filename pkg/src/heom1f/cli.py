"""Command line interface.

Subcommands ``run``, ``validate``, ``decompose`` and ``schedule-dump``.
Exit status: 0 on success, 1 for configuration errors, 2 for numerical
failures (quadrature, fit, hierarchy size, divergence, convergence).
"""

from __future__ import annotations

import argparse
import contextlib
import json
import random
import sys

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, bath, config, experiments, heom, io

EXIT_OK, EXIT_VALIDATION, EXIT_SOLVER = 0, 1, 2


class SeedlessViolation(RuntimeError):
    pass


SOLVER_ERRORS = (heom.SolverError, heom.ConvergenceError, heom.HierarchyTooLarge,
                 bath.FitError, bath.QuadratureError, SeedlessViolation)


@contextlib.contextmanager
def seedless():
    """Make any use of global random number generators fail loudly."""
    def refuse(*a, **k):
        raise SeedlessViolation("random number generation used under --seedless")

    saved = []
    targets = [(np.random, n) for n in ("default_rng", "random", "rand", "randn", "normal", "uniform",
                                         "seed", "choice", "shuffle", "permutation")]
    targets += [(random, n) for n in ("random", "seed", "uniform", "gauss", "choice", "shuffle", "randint")]
    for mod, name in targets:
        saved.append((mod, name, getattr(mod, name)))
        setattr(mod, name, refuse)
    try:
        yield
    finally:
        for mod, name, fn in saved:
            setattr(mod, name, fn)


def _parser():
    p = argparse.ArgumentParser(prog="heom1f", description="HEOM simulations of 1/f dephasing noise.")
    p.add_argument("--version", action="version", version=f"heom1f {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [("run", "run the experiment described by a configuration"),
                        ("validate", "check a configuration and print errors and advisories"),
                        ("decompose", "fit the bath correlation function and report the series"),
                        ("schedule-dump", "write the pulse schedules of a configuration")]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, metavar="PATH")
        if name != "validate":
            s.add_argument("--out", required=True, metavar="DIR")
        s.add_argument("--threads", type=int, default=1, metavar="N")
        s.add_argument("--seedless", action="store_true",
                       help="fail if any random number generator is touched")
    return p


def _load_raw(path):
    import yaml
    try:
        with open(path) as fh:
            return yaml.safe_load(fh)
    except OSError as exc:
        raise config.ConfigError([f"<file>: {exc}"]) from None
    except yaml.YAMLError as exc:
        raise config.ConfigError([f"<yaml>: {exc}"]) from None


def _execute(args):
    if args.command == "validate":
        report = config.validate(_load_raw(args.config))
        print(json.dumps(report, indent=2, sort_keys=True))
        return EXIT_VALIDATION if report["errors"] else EXIT_OK
    cfg = config.load(args.config)
    for msg in cfg.advisories:
        print(f"advisory: {msg}", file=sys.stderr)
    if args.command == "decompose":
        result = experiments.run_decompose(cfg)
    elif args.command == "schedule-dump":
        if cfg.experiment not in ("cpmg", "udd"):
            raise config.ConfigError(["experiment: schedule-dump needs a cpmg or udd configuration"])
        result = experiments.run_schedule_dump(cfg)
    else:
        result = experiments.run(cfg)
    manifest = io.write_result(result, args.out, cfg, args.command)
    for name in sorted(manifest["files"]):
        print(f"{name} {manifest['files'][name]}")
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return EXIT_VALIDATION
    guard = seedless() if args.seedless else contextlib.nullcontext()
    try:
        with threadpool_limits(limits=args.threads), guard:
            return _execute(args)
    except config.ConfigError as exc:
        for e in exc.errors:
            print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
