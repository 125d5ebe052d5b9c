"""Plot I(S:F)/H_S against fragment size from a plateau.csv."""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("-o", "--out", default="plateau.png")
    args = ap.parse_args()
    with open(args.csv, newline="") as fh:
        rows = [r for r in csv.DictReader(fh) if r["I_over_H_S"] != ""]
    n = int(rows[0]["N"])
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot([int(r["m"]) / n for r in rows], [float(r["I_over_H_S"]) for r in rows], "o-")
    ax.set_xlabel("fragment fraction m/N")
    ax.set_ylabel("I(S:F) / H_S")
    ax.set_ylim(0, 2.1)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
