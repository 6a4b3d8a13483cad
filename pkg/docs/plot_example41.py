"""Sample plotting script (documentation, not part of the package).

Renders the CSV data files produced by the CLI:

    coreg simulate --scenario example41 -T 30 --out out41
    coreg simulate --scenario microgrid -T 5 --out outmg
    python3 docs/plot_example41.py out41 outmg

Requires matplotlib.
"""

import csv
import sys
from collections import defaultdict

import matplotlib.pyplot as plt


def read_columns(path):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    cols = defaultdict(list)
    for row in rows:
        for key, val in row.items():
            cols[key].append(float(val))
    return cols


def main(out41="out41", outmg="outmg"):
    fig, axes = plt.subplots(2, 2, figsize=(11, 7))

    err = read_columns(f"{out41}/errors.csv")
    for name in err:
        if name != "t":
            axes[0, 0].plot(err["t"], err[name], label=name, lw=0.8)
    axes[0, 0].set_title("tracking errors")
    axes[0, 0].set_xlabel("t [s]")
    axes[0, 0].legend()

    ic = read_columns(f"{outmg}/incremental_cost.csv")
    for name in ic:
        if name != "t":
            axes[0, 1].plot(ic["t"], ic[name], label=name, lw=0.8)
    axes[0, 1].set_title("incremental costs")
    axes[0, 1].set_xlabel("t [s]")

    pw = read_columns(f"{outmg}/power_tracking.csv")
    axes[1, 0].plot(pw["t"], pw["p_main"], "k--", label="p_main")
    axes[1, 0].plot(pw["t"], pw["sum_p_r"], label="sum P_r")
    axes[1, 0].set_title("dispatched power vs demand")
    axes[1, 0].set_xlabel("t [s]")
    axes[1, 0].legend()

    fr = read_columns(f"{outmg}/frequency.csv")
    for name in fr:
        if name != "t":
            axes[1, 1].plot(fr["t"], fr[name], lw=0.8)
    axes[1, 1].set_title("MG frequencies [Hz]")
    axes[1, 1].set_xlabel("t [s]")

    fig.tight_layout()
    fig.savefig("traces.png", dpi=150)
    print("wrote traces.png")


if __name__ == "__main__":
    main(*sys.argv[1:3])
