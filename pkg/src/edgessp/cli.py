"""Command-line entry point: edgessp {solve,near,baseline,sweep,validate}."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .baselines import BASELINES
from .combinations import t_from_a
from .config import config_from_parser, read_parser
from .constants import derive_constants
from .exceptions import EdgeSspError
from .experiments import SweepSpec, emit_csv, run_experiment, solve_scheme, validate_command
from .sca import run_algorithm1, write_trace
from .simulator import SimConfig, Simulator
from .ssp import ssp

log = logging.getLogger("edgessp")


def _common(p):
    p.add_argument("--config", help="INI config file (default: shipped defaults)")
    p.add_argument("--case", choices=("rt", "dt"), default="rt")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=0, help="Monte Carlo trials (0 skips simulation)")
    p.add_argument("--out", help="output CSV path")


def build_parser():
    parser = argparse.ArgumentParser(prog="edgessp", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("solve", help="joint design by parallel SCA"))
    _common(sub.add_parser("near", help="near-optimal design from the asymptotic problem"))
    p = sub.add_parser("baseline", help="reference scheme")
    p.add_argument("name", choices=sorted(BASELINES))
    _common(p)
    p = sub.add_parser("sweep", help="parameter sweep from the [sweep] config section")
    _common(p)
    p.add_argument("--workers", type=int, default=1)
    p = sub.add_parser("validate", help="simulation against the closed forms")
    _common(p)
    p.set_defaults(trials=1_000_000)
    return parser


def _report(cfg, case, a, b, iters, status, trials, seed):
    rep = ssp(a, b, case, cfg)
    t = t_from_a(a, cfg.n_services)
    print(f"case {case}  SSP {rep.total_ssp:.8f}  iterations {iters}  status {status}")
    print("T = " + np.array2string(t, precision=4, max_line_width=200))
    sup = a.support(1e-12)
    print(f"{len(sup.probs)} combinations with positive probability")
    if trials > 0:
        est = Simulator(cfg, a, b, SimConfig(trials=trials)).service(case, seed)
        print(f"simulated SSP {est.mean:.6f}  95% CI [{est.ci_low:.6f}, {est.ci_high:.6f}]")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cp = read_parser(args.config)
        cfg = config_from_parser(cp)
        if args.command == "validate":
            summary = validate_command(cfg, trials=args.trials, seed=args.seed)
            print(summary)
            return 0 if summary.passed else 1
        if args.command == "sweep":
            spec = SweepSpec.from_parser(cp)
            if args.trials:
                spec = SweepSpec(spec.variable, spec.values, spec.schemes, spec.cases, spec.seeds, args.trials)
            if args.seed:
                spec = SweepSpec(spec.variable, spec.values, spec.schemes, spec.cases, (args.seed,), spec.trials)
            table = run_experiment(spec, cfg, workers=args.workers)
            emit_csv(table, args.out or sys.stdout)
            return 0
        scheme = {"solve": "alg1", "near": "alg3"}.get(args.command) or args.name
        const = derive_constants(cfg)
        if scheme == "alg1" and args.out:
            res = run_algorithm1(cfg, args.case, const=const)
            write_trace(res, args.out)
            a, b, iters, status = res.caching, res.allocation, res.iterations, res.status
        else:
            a, b, iters, _, status = solve_scheme(scheme, cfg, args.case, const)
        _report(cfg, args.case, a, b, iters, status, args.trials, args.seed)
        return 0
    except EdgeSspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
