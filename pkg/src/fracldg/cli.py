"""Command line front end: solve, convergence, selftest.

Exit codes: 0 success, 1 configuration error, 2 instability or failed
self-checks.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import parse_config
from .errors import ConfigError, InstabilityError
from .harness import run_convergence, run_solve
from .selftest import run_selftest

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    # argparse exits with its own code on bad arguments; route through the
    # config-error path instead so the documented exit codes hold
    def error(self, message: str):
        raise ConfigError("<args>", message)


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated float list: {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _build_parser() -> _Parser:
    parser = _Parser(prog="fracldg",
                     description="LDG solver for 1D fractional convection-diffusion")
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log per-run progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="run one configured solve")
    ps.add_argument("--config", required=True, help="JSON run configuration")
    ps.add_argument("--out", default=None, help="artifact directory "
                    "(overrides output_dir from the config)")

    pc = sub.add_parser("convergence", help="mesh-refinement error sweep")
    pc.add_argument("--problem", required=True)
    pc.add_argument("--alpha", type=_float_list, default=None,
                    help="comma-separated fractional orders")
    pc.add_argument("--orders", type=_int_list, default=None,
                    help="comma-separated polynomial degrees")
    pc.add_argument("--elements", type=_int_list, default=None,
                    help="comma-separated element counts")
    pc.add_argument("--flux", default=None, help="convective flux family")
    pc.add_argument("--out", default=None, help="CSV output path")

    pt = sub.add_parser("selftest", help="run the built-in property suites")
    pt.add_argument("--seed", type=int, default=0)
    return parser


def _cmd_solve(args) -> int:
    cfg = parse_config(args.config)
    arts = run_solve(cfg, out_dir=args.out)
    s = arts.summary
    print(f"{s['problem']}  alpha={s['alpha']:g}  K={s['elements']}  "
          f"order={s['order']}  T={s['final_time']:g}")
    print(f"steps {s['steps']}  dt {s['dt']:.6e}")
    print(f"final L2 norm {s['final_l2_norm']:.6e}")
    if s["final_l2_error"] is not None:
        print(f"final L2 error {s['final_l2_error']:.6e}")
    if s["upwind_fallback_events"]:
        print(f"upwind fallbacks: {s['upwind_fallback_events']} step stages, "
              f"{s['upwind_fallback_interfaces']} interfaces")
    print(f"artifacts in {arts.out_dir}")
    return 0


def _cmd_convergence(args) -> int:
    report = run_convergence(args.problem, alphas=args.alpha,
                             orders=args.orders, elements=args.elements,
                             flux=args.flux, out=args.out)
    print(report.table_text(), end="")
    if args.out is not None:
        print(f"\nCSV written to {args.out}")
    return 0


def _cmd_selftest(args) -> int:
    report = run_selftest(seed=args.seed)
    for line in report.lines():
        print(line)
    return 0 if report.passed else 2


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose:
            logging.basicConfig(level=logging.INFO,
                                format="%(name)s: %(message)s")
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        return _cmd_selftest(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except InstabilityError as err:
        where = getattr(err, "artifacts_dir", None)
        print(f"error: {err}" + (f"; partial artifacts in {where}" if where else ""),
              file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
