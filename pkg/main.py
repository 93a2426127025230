"""Command-line front door: solve, scan, simulate and check Maker-Breaker games on GW trees."""
import sys
import logging
import argparse

import numpy as np

from services import analytic, comparison, dist, exports, sim, tree_oracle, walk
from services.config import REGIMES, STARTERS, GameConfig, SolverConfig
from services.errors import DistributionError, GWMBError, format_solver_error

logger = logging.getLogger("gwmb")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_NUMERIC = 3
EXIT_COUNTEREXAMPLE = 4
VERIFY_TOL = 1e-9


def parse_range(text, with_steps=True):
    parts = text.split(":")
    try:
        if with_steps:
            if len(parts) != 3:
                raise ValueError
            lo, hi, steps = float(parts[0]), float(parts[1]), int(parts[2])
            if steps < 1 or hi < lo:
                raise ValueError
            return lo, hi, steps
        if len(parts) != 2:
            raise ValueError
        lo, hi = float(parts[0]), float(parts[1])
        if hi <= lo:
            raise ValueError
        return lo, hi
    except ValueError:
        shape = "lo:hi:steps" if with_steps else "lo:hi"
        raise argparse.ArgumentTypeError(f"malformed range '{text}', expected {shape}")


def _grid(text):
    return parse_range(text, with_steps=True)


def _bracket(text):
    return parse_range(text, with_steps=False)


def _seed(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _solver_config(args):
    return SolverConfig(abs_tol=args.tol) if args.tol else SolverConfig()


def _emit(args, payload, csv_text=None):
    text = csv_text if args.format == "csv" and csv_text is not None else exports.to_json(payload)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
        logger.info("wrote %s", args.out)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_solve(args):
    d = dist.parse_spec(args.dist)
    sol = analytic.solve(d, args.regime, _solver_config(args))
    payload = {"dist": dist.describe(d), **sol.as_dict()}
    _emit(args, payload, exports.generate_solution_csv([sol], dist.describe(d)))
    return EXIT_OK


def _verify_row(sol, d):
    problems = []
    if sol.case == "Interior" and sol.residual > 1e-10:
        problems.append(f"residual {sol.residual:.3g}")
    g_p = dist.pgf(d, sol.p_unconditional)
    if not (g_p - VERIFY_TOL <= sol.p_bar <= sol.p_unconditional + VERIFY_TOL):
        problems.append("ordering g(p) <= p_bar <= p violated")
    return problems


def cmd_scan(args):
    family, fixed = dist.parse_family(args.dist)
    lo, hi, steps = args.param
    cfg = _solver_config(args)
    values = np.linspace(lo, hi, steps) if steps > 1 else np.array([lo])

    rows, failures = [], 0
    for value in values:
        try:
            d = dist.family_member(family, float(value), fixed)
        except DistributionError as e:
            logger.info("skipping %s=%.6g: %s", family, value, e)
            continue
        sol = analytic.solve(d, args.regime, cfg)
        rows.append({"param": float(value), "p": sol.p_unconditional, "p_bar": sol.p_bar,
                     "q": sol.q, "case": sol.case})
        if args.verify:
            for problem in _verify_row(sol, d):
                failures += 1
                logger.error("%s: %s", dist.describe(d), problem)

    _emit(args, rows, exports.generate_scan_csv(rows, args.dist, analytic.regime_name(args.regime)))
    return EXIT_NUMERIC if failures else EXIT_OK


def cmd_critical(args):
    family, fixed = dist.parse_family(args.dist)
    point = analytic.critical_parameter(family, args.param, args.regime,
                                        _solver_config(args), fixed)
    _emit(args, point.as_dict(), exports.generate_csv([point.as_dict()]))
    return EXIT_OK


def cmd_bounds(args):
    cfg = _solver_config(args)
    if args.condition:
        family, fixed = dist.parse_family(args.dist)
        value = analytic.bound_threshold(family, args.condition, args.param, cfg, fixed)
        payload = {"family": family, "condition": args.condition, "threshold": value}
        _emit(args, payload, exports.generate_csv([payload]))
        return EXIT_OK

    d = dist.parse_spec(args.dist)
    payload = {"dist": dist.describe(d), "dekking": analytic.dekking_bounds(d, cfg).as_dict()}
    if d.kind == "binomial" and d.n >= 3 and d.n % 2:
        payload["coupling"] = analytic.bounds_by_coupling(d, args.regime, cfg).as_dict()
    _emit(args, payload)
    return EXIT_OK


def cmd_simulate(args):
    d = dist.parse_spec(args.dist)
    regime = analytic.regime_name(args.regime)
    cfg = GameConfig(trials=args.trials, master_seed=args.seed, regime=args.regime,
                     starter=args.starter, threshold=args.threshold, depth=args.depth,
                     workers=args.workers)

    if regime == "FullInfo":
        est = sim.estimate_binary_subtree_prob(d, args.depth, cfg)
        label = f"binary subtree depth {args.depth}, {args.starter} starts"
        payload = {"dist": dist.describe(d), **est.as_dict(),
                   "oracle": sim.depth_iterate_p(d, args.depth, args.starter)}
    elif args.mode == "game":
        est = sim.simulate_game(d, regime, args.starter, cfg)
        label = f"{regime} game, {args.starter} starts"
        payload = {"dist": dist.describe(d), **est.as_dict()}
    else:
        q = analytic.extinction_q(d) if regime == "SizeInfo" else 0.0
        law = dist.skew(d, q) if regime == "SizeInfo" else d
        est = sim.simulate_walk_hit(dist.to_increment(law, -2), cfg.start_level, cfg)
        label = f"{regime} walk from {cfg.start_level}"
        payload = {"dist": dist.describe(d), **est.as_dict()}
        if regime == "SizeInfo":
            payload["p_unconditional"] = q + (1.0 - q) * est.p_hat

    _emit(args, payload, exports.generate_estimate_csv(est, label))
    return EXIT_OK


def cmd_walk_quantities(args):
    cfg = _solver_config(args)
    if args.alpha_verdict:
        _emit(args, walk.select_alpha_convention(cfg).as_dict())
        return EXIT_OK
    d = dist.parse_spec(args.dist)
    inc = dist.to_increment(dist.split_half(d), -1)
    wq = walk.conditioned_quantities(inc, cfg)
    payload = wq.as_dict()
    if args.enumerate:
        payload["enumerated"] = walk.enumerate_walk_bounds(inc, args.enumerate, cfg).as_dict()
    _emit(args, payload, exports.generate_walk_csv(wq, dist.describe(d)))
    return EXIT_OK


def cmd_oracle(args):
    if args.list_trees:
        encodings = [t.encoding() for t in
                     tree_oracle.enumerate_small_trees(args.max_depth, args.max_branching)]
        _emit(args, encodings, "\n".join(encodings))
        return EXIT_OK
    report = tree_oracle.run_oracle(args.max_depth, args.max_branching, args.reach)
    _emit(args, report.as_dict())
    if report.counterexamples:
        sys.stderr.write(f"{len(report.counterexamples)} counterexamples, first: "
                         f"{report.counterexamples[0]['tree']}\n")
        return EXIT_COUNTEREXAMPLE
    sys.stderr.write("0 counterexamples\n")
    return EXIT_OK


def cmd_compare(args):
    d = dist.parse_spec(args.dist)
    rows = comparison.compare_regimes(d, _solver_config(args))
    payload = {"dist": dist.describe(d), "rows": rows,
               "ordering_holds": comparison.regime_ordering_holds(rows)}
    _emit(args, payload, exports.generate_csv(rows, ["regime", "p", "p_bar", "q", "case"],
                                              title="Regime comparison",
                                              details={"Distribution": dist.describe(d)}))
    return EXIT_OK


def build_parser():
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--format", choices=("json", "csv"), default="json")
    shared.add_argument("--out", help="write to this file instead of stdout")
    shared.add_argument("--tol", type=float, help="absolute root tolerance (default 1e-12)")
    shared.add_argument("--regime", choices=tuple(REGIMES), default="none")
    shared.add_argument("--starter", choices=STARTERS, default="breaker")
    shared.add_argument("--trials", type=int, default=10_000)
    shared.add_argument("--seed", type=_seed, default=0)

    parser = argparse.ArgumentParser(prog="gwmb", description=__doc__)
    parser.add_argument("--log-level", default="WARNING",
                        choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", parents=[shared], help="winning probabilities for one law")
    p.add_argument("--dist", required=True)
    p.set_defaults(handler=cmd_solve)

    p = sub.add_parser("scan", parents=[shared], help="sweep a one-parameter family")
    p.add_argument("--dist", required=True, help="family, e.g. poisson or binomial:3")
    p.add_argument("--param", type=_grid, required=True, metavar="LO:HI:STEPS")
    p.add_argument("--verify", action="store_true", help="re-check residuals and ordering")
    p.set_defaults(handler=cmd_scan)

    p = sub.add_parser("critical", parents=[shared], help="critical family parameter")
    p.add_argument("--dist", required=True)
    p.add_argument("--param", type=_bracket, required=True, metavar="LO:HI")
    p.set_defaults(handler=cmd_critical)

    p = sub.add_parser("bounds", parents=[shared], help="sufficient conditions and coupling")
    p.add_argument("--dist", required=True)
    p.add_argument("--condition", choices=("maker", "breaker"),
                   help="locate where this condition flips along a family")
    p.add_argument("--param", type=_bracket, metavar="LO:HI")
    p.set_defaults(handler=cmd_bounds)

    p = sub.add_parser("simulate", parents=[shared], help="Monte-Carlo estimates")
    p.add_argument("--dist", required=True)
    p.add_argument("--mode", choices=("walk", "game"), default="walk")
    p.add_argument("--threshold", type=int, help="walk level counted as a Maker win")
    p.add_argument("--depth", type=int, help="binary subtree depth for --regime full")
    p.add_argument("--workers", type=int)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("walk-quantities", parents=[shared], help="half-step walk quantities")
    p.add_argument("--dist")
    p.add_argument("--enumerate", type=int, metavar="STEPS",
                   help="also bracket the quantities by exact path enumeration")
    p.add_argument("--alpha-verdict", action="store_true",
                   help="compare the two start conventions for alpha")
    p.set_defaults(handler=cmd_walk_quantities)

    p = sub.add_parser("oracle", parents=[shared], help="exhaustive minimax check")
    p.add_argument("--max-depth", type=int, default=3)
    p.add_argument("--max-branching", type=int, default=3)
    p.add_argument("--reach", type=int, default=3)
    p.add_argument("--list-trees", action="store_true",
                   help="print the canonical encodings instead of playing")
    p.set_defaults(handler=cmd_oracle)

    p = sub.add_parser("compare", parents=[shared], help="one law in every regime")
    p.add_argument("--dist", required=True)
    p.set_defaults(handler=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "walk-quantities" and not (args.dist or args.alpha_verdict):
        parser.error("walk-quantities needs --dist")
    if args.command == "bounds" and args.condition and not args.param:
        parser.error("--condition needs --param lo:hi")
    if args.command == "simulate" and args.regime == "full" and args.depth is None:
        parser.error("full-information simulation needs --depth D")
    try:
        return args.handler(args)
    except (DistributionError, ValueError) as e:
        sys.stderr.write(f"{format_solver_error(e)}\n")
        return EXIT_PARSE
    except GWMBError as e:
        sys.stderr.write(f"{format_solver_error(e)}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
