"""Command line entry point: ``mpfsim simulate|sweep|verify|plot``.

Exit codes: 0 success, 1 usage or I/O error, 2 invariant failure,
3 assumption violation.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from .errors import AssumptionViolated, MpfError, NonFiniteState

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVARIANT = 2
EXIT_ASSUMPTION = 3


def _lambdas(text: str) -> list[float]:
    out = []
    for item in text.split(","):
        item = item.strip().lower()
        val = math.inf if item in ("inf", "perfect") else float(item)
        if not val > 0:
            raise argparse.ArgumentTypeError(f"bandwidth must be positive: {item}")
        out.append(val)
    return out


def _report(report) -> int:
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_INVARIANT


def cmd_simulate(args) -> int:
    from .plots import emit_outputs
    from .scenario import load_scenario
    from .simulation import run_simulation, steady_state_residual
    from .verify import verify_invariants

    sc = load_scenario(args.config)
    if args.perfect_autopilot:
        sc = sc.with_bandwidth(math.inf)
    out = Path(args.out) if args.out else Path(sc.name + "_out")
    log_ = run_simulation(sc)
    formats = ("csv",) if args.no_plots else ("csv", "png")
    for p in emit_outputs(log_, out, formats, stem=sc.name):
        print(f"wrote {p}")
    print(f"steady-state residual: {steady_state_residual(log_):.6g} m")
    if args.no_verify:
        return EXIT_OK
    return _report(verify_invariants(log_))


def cmd_sweep(args) -> int:
    from .scenario import load_scenario
    from .simulation import sweep_bandwidth

    sc = load_scenario(args.config)
    lambdas = args.lambdas or list(sc.sweep_lambdas)
    if not lambdas:
        print("error: no bandwidths given (use --lambda or a [sweep] section)", file=sys.stderr)
        return EXIT_ERROR
    rows = sweep_bandwidth(sc, lambdas, workers=args.workers)
    lines = ["lambda,residual"] + [f"{lam:.17g},{res:.17g}" for lam, res in rows]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(args) -> int:
    from .logio import read_csv
    from .verify import Tolerances, verify_invariants

    tol = Tolerances.from_overrides(args.tol or [])
    return _report(verify_invariants(read_csv(args.log), tol, args.lyapunov))


def cmd_plot(args) -> int:
    from .logio import read_csv
    from .plots import emit_plots

    log_path = Path(args.log)
    out = Path(args.out) if args.out else log_path.parent
    out.mkdir(parents=True, exist_ok=True)
    for p in emit_plots(read_csv(log_path), out):
        print(f"wrote {p}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mpfsim", description="Moving path following simulator.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario, write the CSV log and figures")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (default: <scenario>_out)")
    p.add_argument("--perfect-autopilot", action="store_true", help="apply the reference rates exactly")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--no-verify", action="store_true", help="skip the invariant suite")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="steady-state residual per autopilot bandwidth")
    p.add_argument("config")
    p.add_argument("--lambda", dest="lambdas", type=_lambdas,
                   help="comma separated bandwidths in 1/s; 'inf' means a perfect autopilot")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="also write the table to this CSV file")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the invariant suite on a CSV log")
    p.add_argument("log")
    p.add_argument("--tol", action="append", metavar="NAME=VALUE",
                   help="override a tolerance, e.g. --tol pos_kin=1e4 (repeatable)")
    p.add_argument("--lyapunov", choices=("decay", "iss", "bounded"),
                   help="force the Lyapunov check mode")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("plot", help="render the figures of a CSV log")
    p.add_argument("log")
    p.add_argument("--out", help="output directory (default: next to the log)")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except AssumptionViolated as exc:
        where = "" if exc.step is None else f" (step {exc.step})"
        print(f"assumption violated{where}: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except NonFiniteState as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (MpfError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
