#!/usr/bin/env python3
"""Plot mean profit per arm from an `aggregate.csv` written by `mdp-abr run`.

Usage: plot.py <aggregate.csv> <out.png> [metric]
"""
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    if len(sys.argv) < 3:
        sys.exit(__doc__)
    src, out = sys.argv[1], sys.argv[2]
    metric = sys.argv[3] if len(sys.argv) > 3 else "profit"
    df = pd.read_csv(src)
    df = df[df.metric == metric]
    fig, ax = plt.subplots(figsize=(6, 4))
    swept = df.sweep_axis.iloc[0] != "none"
    for arm, g in df.groupby("arm", sort=False):
        if swept:
            ax.errorbar(g.sweep_value, g["mean"], yerr=g.stddev, marker="o", capsize=3, label=arm)
        else:
            ax.bar(arm, g["mean"].iloc[0], yerr=g.stddev.iloc[0], capsize=3)
    ax.set_ylabel(metric)
    if swept:
        ax.set_xlabel(df.sweep_axis.iloc[0])
        ax.legend()
    fig.tight_layout()
    fig.savefig(out, dpi=150)


if __name__ == "__main__":
    main()
