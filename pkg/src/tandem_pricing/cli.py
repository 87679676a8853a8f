"""``tandem-pricer`` command line.

Exit codes: 0 success, 1 invariant violation, 2 config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import experiments as ex
from .errors import BoundInapplicable, ConfigError, NumericalError

EXIT_OK, EXIT_VIOLATION, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2, 3

log = logging.getLogger("tandem_pricing")


def _parser():
    p = argparse.ArgumentParser(prog="tandem-pricer", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=ex.COMMANDS)
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", help="output path (CSV for sweeps, JSON for verify/solve); stdout if omitted")
    p.add_argument("--seed", type=int, help="master seed (overrides the config)")
    p.add_argument("--skip-dynamic", action="store_true", help="do not run policy iteration")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _open_out(path):
    return open(path, "w", newline="") if path else sys.stdout


def _emit_json(obj, path):
    fh = _open_out(path)
    try:
        json.dump(obj, fh, indent=2, sort_keys=False, default=float, allow_nan=True)
        fh.write("\n")
    finally:
        if fh is not sys.stdout:
            fh.close()


def _sweep_exit(rows):
    if any(r.ordering_ok is False for r in rows):
        return EXIT_VIOLATION
    if any(r.error for r in rows):
        return EXIT_NUMERICAL
    return EXIT_OK


def run(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        exp = ex.ExperimentConfig.load(args.config)
        if args.seed is not None:
            exp.seed = args.seed
        if args.skip_dynamic:
            exp.skip_dynamic = True
        out = args.out or exp.output
        if args.command == "sweep-b1":
            rows = ex.sweep_b1(exp)
        elif args.command == "sensitivity":
            rows = ex.sensitivity(exp)
        elif args.command == "verify":
            report = ex.verify(exp)
            _emit_json(report, out)
            for c in report["checks"]:
                log.info("%-30s %s", c["name"], "PASS" if c["passed"] else "FAIL")
            return EXIT_OK if report["passed"] else EXIT_VIOLATION
        else:
            _emit_json(ex.solve(exp), out)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, BoundInapplicable) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL

    fh = _open_out(out)
    try:
        ex.write_sweep_csv(fh, rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    for r in rows:
        if r.error:
            log.warning("row %s: %s", r.axis_value, r.error)
    return _sweep_exit(rows)


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
