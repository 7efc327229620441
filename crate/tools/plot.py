#!/usr/bin/env python3
"""Quick look at rumorsim CSV output. Development aid only.

    python3 tools/plot.py out/trajectory.csv [more.csv ...] [-o figure.png]

Trajectory and ensemble files are drawn against time; sweep files are drawn
against param_value, one panel per metric.
"""
import argparse

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv", nargs="+")
    ap.add_argument("-o", "--output", default="plot.png")
    args = ap.parse_args()

    frames = [(path, pd.read_csv(path)) for path in args.csv]
    if "param_value" in frames[0][1]:
        metrics = ["peak_ia", "peak_time", "duration", "spread_scale", "final_r"]
        fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.5))
        for path, df in frames:
            for ax, m in zip(axes, metrics):
                ax.plot(df["param_value"], df[m], marker="o", label=path)
                ax.set_title(m)
        axes[0].legend(fontsize="small")
    else:
        fig, ax = plt.subplots(figsize=(8, 5))
        for path, df in frames:
            for col in [c for c in df.columns if c != "time" and not c.startswith(("sd_", "se_", "z_"))]:
                ax.plot(df["time"], df[col], label=f"{path}:{col}")
        ax.set_xlabel("time (days)")
        ax.set_ylabel("nodes")
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(args.output, dpi=120)
    print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
