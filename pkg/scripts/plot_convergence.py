"""Plot a ``klsde-bench converge`` table (needs the ``plot`` extra).

Usage::

    klsde-bench converge --config configs/turbulent_diffusion.ini
    python scripts/plot_convergence.py results/turbulent_diffusion.csv -o td.png

Left panel: weak error against m with one-sigma Monte Carlo bars. Right
panel: weak error against wall time (skipped when the run used
``--no-timing``).
"""
from __future__ import annotations

import argparse
import csv
import math
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _num(text: str) -> float:
    return math.nan if text == "NA" else float(text)


def load(path):
    series = defaultdict(lambda: defaultdict(list))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            s = series[row["method"]]
            s["m"].append(int(row["m"]))
            for key in ("weak_error", "std_error", "wall_time_s"):
                s[key].append(_num(row[key]))
    return series


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("csv", help="converge output")
    parser.add_argument("-o", "--output", default="convergence.png")
    args = parser.parse_args(argv)

    series = load(args.csv)
    timed = any(not math.isnan(t) for s in series.values() for t in s["wall_time_s"])
    fig, axes = plt.subplots(1, 2 if timed else 1, figsize=(10 if timed else 5, 4), squeeze=False)
    ax = axes[0, 0]
    for method, s in series.items():
        ax.errorbar(s["m"], s["weak_error"], yerr=s["std_error"], marker="o", capsize=3, label=method)
    ax.set(xscale="log", yscale="log", xlabel="m (terms or steps)", ylabel="weak error")
    ax.legend()
    if timed:
        ax = axes[0, 1]
        for method, s in series.items():
            ax.plot(s["wall_time_s"], s["weak_error"], marker="o", label=method)
        ax.set(xscale="log", yscale="log", xlabel="wall time [s]", ylabel="weak error")
    fig.tight_layout()
    fig.savefig(args.output, dpi=150)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
