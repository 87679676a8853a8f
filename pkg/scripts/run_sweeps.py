"""Run every shipped experiment config and write one CSV per config.

    python3 scripts/run_sweeps.py [--out results]
"""
import argparse
import pathlib
import sys

from tandem_pricing.cli import run

ROOT = pathlib.Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(ROOT / "results"))
    args = ap.parse_args()
    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.json")):
        cmd = "sensitivity" if cfg.stem.startswith(("fig6", "fig7")) else "sweep-b1"
        rc = run([cmd, "--config", str(cfg), "--out", str(out / f"{cfg.stem}.csv")])
        print(f"{cfg.stem:<20} {cmd:<12} exit {rc}")
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
