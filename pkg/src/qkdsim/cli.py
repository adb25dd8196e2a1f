"""Command-line entry point.

Exit status: 0 on success, 1 on a usage or validation error, 2 when a
simulated session raised an alarm (monitor trip, error rate above threshold,
or an empty key).
"""
from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import SEED_ENV, ConfigError, from_flat, read_flat
from .protocols import run_session
from .sweep import CURVE_COLUMNS, ROW_COLUMNS, analytic_curves, curves_csv, load_sweep, run_sweep

EXIT_OK, EXIT_INVALID, EXIT_ALARM = 0, 1, 2

EPILOG = f"""\
CSV columns
  sweep:  <parameter>,{','.join(ROW_COLUMNS[1:])}
  curves: {','.join(CURVE_COLUMNS)}
Floats are written with 9 significant digits.

Environment
  {SEED_ENV}  overrides session.seed in config and sweep files.
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qkdsim", description="BB84/SARG quantum key distribution simulator.",
                epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run one session from a config file")
    sim.add_argument("--config", required=True, type=Path)
    sim.add_argument("--records", type=Path, help="write the pulse log as JSON lines")
    sim.add_argument("--seed", type=int, help="override session.seed (after the environment)")

    sw = sub.add_parser("sweep", help="run a parameter sweep and emit CSV",
                        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    sw.add_argument("--spec", required=True, type=Path)
    sw.add_argument("--out", type=Path, help="CSV path (default: stdout)")
    sw.add_argument("--jobs", type=int, default=1, help="worker processes (<1: all cores)")

    cv = sub.add_parser("curves", help="analytic information curves as CSV",
                        epilog=EPILOG, formatter_class=argparse.RawDescriptionHelpFormatter)
    cv.add_argument("--dmax", type=float, default=0.25)
    cv.add_argument("--steps", type=int, default=100)
    cv.add_argument("--out", type=Path)

    st = sub.add_parser("selftest", help="run the acceptance checks")
    st.add_argument("--quick", action="store_true", help="skip the slowest checks")
    return p


def _emit(text: str, out: Path | None, stdout) -> None:
    if out is None:
        stdout.write(text)
    else:
        out.write_text(text)


def _simulate(args, stdout, env) -> int:
    values = read_flat(args.config)
    if env.get(SEED_ENV):
        values["session.seed"] = env[SEED_ENV]
    if args.seed is not None:
        values["session.seed"] = args.seed
    cfg = from_flat(values)
    result = run_session(cfg)
    if args.records is not None:
        result.log.write_jsonl(args.records)
    stdout.write(result.summary() + "\n")
    return EXIT_ALARM if result.alarms else EXIT_OK


def main(argv=None, stdout=None, stderr=None, env=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    env = os.environ if env is None else env
    try:
        args = build_parser().parse_args(argv)
        if args.command == "simulate":
            return _simulate(args, stdout, env)
        if args.command == "sweep":
            report = run_sweep(load_sweep(args.spec, env), n_jobs=args.jobs)
            _emit(report.to_csv(), args.out, stdout)
            return EXIT_OK
        if args.command == "curves":
            _emit(curves_csv(analytic_curves(args.dmax, args.steps)), args.out, stdout)
            return EXIT_OK
        if args.command == "selftest":
            from .selftest import run_all
            return EXIT_OK if run_all(quick=args.quick, stream=stdout) else EXIT_INVALID
    except UsageError as exc:
        stderr.write(f"{exc}\n")
        return EXIT_INVALID
    except ConfigError as exc:
        stderr.write(f"invalid configuration: {exc}\n")
        return EXIT_INVALID
    except (OSError, ValueError) as exc:
        stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
