"""Rate sweeps for the two rate-law problems; prints the fit and writes CSV + SVG."""
import argparse
from pathlib import Path

from degvisc import cli

CONFIGS = ["burgers_degenerate_sweep.cfg", "variable_velocity_sweep.cfg"]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--configs", nargs="*", default=CONFIGS)
    ap.add_argument("--out", default="out")
    args = ap.parse_args()
    root = Path(__file__).resolve().parent.parent / "configs"
    for name in args.configs:
        out = Path(args.out) / Path(name).stem
        code = cli.main(["sweep", "--config", str(root / name), "--out", str(out)])
        if code == 0:
            cli.emit_plot(out / "rates.csv", out / "rates.svg")
        print(f"{name}: exit {code}, outputs in {out}")


if __name__ == "__main__":
    main()
