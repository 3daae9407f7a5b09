"""Command line driver: ``plapsym solve|deficits|sweep|report``.

Exit codes: 0 success, 2 configuration error, 3 mesh or solver failure,
4 post-processing failure.
"""

import argparse
import logging
import sys

from .errors import PlapsymError
from .pipeline import load_axis, load_config, run, solve_stage, summarize_bundle, sweep


def _cmd_solve(args):
    cfg = load_config(args.config)
    _, mesh, u = solve_stage(cfg)
    print(f"solved p={cfg.p:g} on {cfg.domain.label()}: {mesh.n_vertices} vertices, "
          f"max u = {u.max:.6g}, {u.info['iterations']} Picard steps -> {cfg.output_dir}")


def _cmd_deficits(args):
    cfg = load_config(args.config)
    rep = run(cfg)
    print(f"eps={rep.geometry['eps']:.6g} identity_resid={rep.identity_resid:.3g} "
          f"l1={rep.l1_distance:.4g} -> {cfg.output_dir}")


def _cmd_sweep(args):
    cfg = load_config(args.config)
    domains = load_axis(args.axis, cfg)
    result = sweep(cfg, domains, workers=args.workers)
    failed = sum(r["status"] != "ok" for r in result.rows)
    if result.fit["slope"] is None:
        print(f"fit skipped: {result.fit['reason']}")
    else:
        trend = "yes" if result.fit["slope"] > 0 else "no"
        print(f"theta_hat={result.fit['slope']:.4g} (stability trend theta_hat > 0: {trend})")
    print(f"{len(result.rows)} rows, {failed} failed -> {cfg.output_dir}")


def _cmd_report(args):
    sys.stdout.write(summarize_bundle(args.directory))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="plapsym",
        description="p-Laplace Dirichlet solutions on planar domains and their symmetry deficits.")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", help="mesh the domain and solve; writes mesh.txt and u.txt")
    p.add_argument("config")
    p.set_defaults(func=_cmd_solve)
    p = sub.add_parser("deficits", help="full run: tables.csv, deficits.json and plots")
    p.add_argument("config")
    p.set_defaults(func=_cmd_deficits)
    p = sub.add_parser("sweep", help="run a family of domains and fit the stability trend")
    p.add_argument("config")
    p.add_argument("--axis", required=True, help="file with one domain override line per row")
    p.add_argument("--workers", type=int, default=None, help="worker processes")
    p.set_defaults(func=_cmd_sweep)
    p = sub.add_parser("report", help="check and summarize an output directory")
    p.add_argument("directory")
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PlapsymError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
