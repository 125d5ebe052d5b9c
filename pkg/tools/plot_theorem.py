"""Scatter eta against eps_D + eps_I from a theorem.csv (log-log)."""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="theorem.png")
    args = ap.parse_args()
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for label, sub in (("gamma", [r for r in rows if r["gamma"] != "haar"]), ("haar", [r for r in rows if r["gamma"] == "haar"])):
        # exact zeros cannot go on a log axis
        sub = [r for r in sub if float(r["eta"]) > 0 and float(r["eps_D"]) + float(r["eps_I"]) > 0]
        if sub:
            x = [float(r["eps_D"]) + float(r["eps_I"]) for r in sub]
            ax.loglog(x, [float(r["eta"]) for r in sub], "o", label=label, alpha=0.7)
    ax.set_xlabel("eps_D + eps_I")
    ax.set_ylabel("eta = 1 - fidelity")
    ax.legend()
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
