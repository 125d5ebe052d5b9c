"""Plot seed-averaged cap-mass profiles from cluster_summary.csv.

With ``--points cluster_points.csv`` a second panel scatters the conditional
states of the windowed run in the Bloch x-y plane.
"""

import argparse
import csv
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("summary")
    ap.add_argument("--points")
    ap.add_argument("-o", "--out", default="cluster.png")
    args = ap.parse_args()
    curves = defaultdict(list)
    for r in read(args.summary):
        curves[int(r["N"])].append((float(r["radius"]), float(r["cap_mass_1"])))
    ncol = 2 if args.points else 1
    fig, axes = plt.subplots(1, ncol, figsize=(5 * ncol, 3.5), squeeze=False)
    ax = axes[0, 0]
    for n, pts in sorted(curves.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], label=f"N={n}")
    ax.set_xlabel("cap radius / pi")
    ax.set_ylabel("mass near |1>")
    ax.legend()
    if args.points:
        pts = read(args.points)
        ax = axes[0, 1]
        w = [float(p["weight"]) for p in pts]
        top = max(w)
        ax.scatter([float(p["b_x"]) for p in pts], [float(p["b_y"]) for p in pts], s=[400 * x / top for x in w], alpha=0.5)
        ax.set_aspect("equal")
        ax.set_xlabel("b_x")
        ax.set_ylabel("b_y")
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)


if __name__ == "__main__":
    main()
