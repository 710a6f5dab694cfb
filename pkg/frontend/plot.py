#!/usr/bin/env python3
"""Render figures from pwalyap CLI artifacts.

    python3 plot.py history --in OUTDIR --out history.png
    python3 plot.py roa --in OUTDIR --out roa.png [--spec problem.json]

This script is a pure consumer of the artifact files (history.csv,
certificate.json, roa_boundary.csv / roa_contour.csv, roa.json,
trajectories.csv, and optionally the problem JSON for the mode partition).
It deliberately performs no certification math and does not import the
solver package.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def read_csv(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SystemExit(f"empty CSV: {path}")
    header = rows[0]
    data = np.array([[float(v) for v in row] for row in rows[1:]])
    return header, data


def polygon_vertices(F, h):
    """Vertices of a bounded 2-D polytope {Fx <= h}, angularly sorted."""
    F = np.asarray(F, dtype=float)
    h = np.asarray(h, dtype=float)
    pts = []
    m = F.shape[0]
    for i in range(m):
        for j in range(i + 1, m):
            M = F[[i, j]]
            if abs(np.linalg.det(M)) < 1e-12:
                continue
            v = np.linalg.solve(M, h[[i, j]])
            if (F @ v <= h + 1e-7).all():
                if all(np.linalg.norm(v - u) > 1e-9 for u in pts):
                    pts.append(v)
    if not pts:
        return np.zeros((0, 2))
    pts = np.array(pts)
    center = pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    return pts[np.argsort(ang)]


def plot_history(indir, outfile):
    header, data = read_csv(indir / "history.csv")
    if data.size == 0:
        raise SystemExit("history.csv has no rows")
    it = data[:, 0]
    p_star = data[:, 1]
    xs = data[:, 2:-1]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4.2))
    ax1.plot(it, p_star, "o-", color="tab:blue")
    ax1.axhline(0.0, color="gray", lw=0.8, ls="--")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("verifier optimal value $p^*$")
    ax1.set_title("certificate progress")

    if xs.shape[1] >= 2:
        ax2.plot(xs[:, 0], xs[:, 1], "o", color="tab:orange", ms=5, alpha=0.8)
        ax2.plot(xs[-1, 0], xs[-1, 1], "*", color="red", ms=14,
                 label="final counterexample")
        for k, (a, b) in enumerate(zip(xs[:, 0], xs[:, 1])):
            ax2.annotate(str(int(it[k])), (a, b), fontsize=7,
                         textcoords="offset points", xytext=(4, 3))
        ax2.legend(loc="best", fontsize=8)
        ax2.set_xlabel("$x_1$")
        ax2.set_ylabel("$x_2$")
    else:
        ax2.plot(it, xs[:, 0], "o", color="tab:orange")
        ax2.set_xlabel("iteration")
        ax2.set_ylabel("counterexample $x$")
    ax2.set_title("counterexample sequence")
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    print(f"wrote {outfile} ({len(it)} iterations)")


def _shade_partitions(ax, specfile):
    blob = json.loads(Path(specfile).read_text())
    modes = blob["plant"]["modes"]
    colors = ["#c6dbef", "#c7e9c0", "#fdd0a2", "#dadaeb"]
    for i, mode in enumerate(modes):
        poly = polygon_vertices(mode["F"], mode["h"])
        if poly.shape[0] >= 3:
            ax.fill(poly[:, 0], poly[:, 1], color=colors[i % len(colors)],
                    alpha=0.5, zorder=0, label=f"mode {i + 1}")


def plot_roa(indir, outfile, specfile=None, spot_checks=100):
    cert = json.loads((indir / "certificate.json").read_text())
    if cert.get("P_star") is None:
        raise SystemExit("certificate is not feasible; nothing to draw")
    P = np.asarray(cert["P_star"], dtype=float)
    meta = json.loads((indir / "roa.json").read_text())
    alpha = float(meta["alpha"])

    fig, ax = plt.subplots(figsize=(6, 5))
    if specfile:
        _shade_partitions(ax, specfile)

    gamma = cert.get("gamma") or 1.0
    roi = cert["roi"]
    roi_poly = polygon_vertices(roi["F"], roi["h"])
    if roi_poly.shape[0] >= 3:
        closed = np.vstack([roi_poly, roi_poly[:1]])
        ax.plot(closed[:, 0], closed[:, 1], "k-", lw=1.5,
                label=f"region of interest (gamma={gamma:g})")

    if meta["kind"] == "ellipse":
        _, bdata = read_csv(indir / "roa_boundary.csv")
        pts = bdata[:, :2]
        # recompute the level on a spot-check subset; a drawn boundary that
        # drifts from V = alpha would make the figure lie
        idx = np.linspace(0, len(pts) - 1, min(spot_checks, len(pts))).astype(int)
        worst = max(abs(p @ P @ p - alpha) for p in pts[idx])
        if worst > 1e-6:
            raise SystemExit(f"boundary level drift {worst:.2e} exceeds 1e-6")
        ax.fill(pts[:, 0], pts[:, 1], color="gold", alpha=0.65, zorder=1)
        closed = np.vstack([pts, pts[:1]])
        ax.plot(closed[:, 0], closed[:, 1], color="darkgoldenrod", lw=1.2,
                label=f"V(x) <= {alpha:.3g}")
    else:
        _, cdata = read_csv(indir / "roa_contour.csv")
        n = int(np.sqrt(cdata.shape[0]))
        X = cdata[:, 0].reshape(n, n)
        Y = cdata[:, 1].reshape(n, n)
        inside = cdata[:, 3].reshape(n, n)
        ax.contourf(X, Y, inside, levels=[0.5, 1.5], colors=["gold"], alpha=0.65, zorder=1)
        ax.contour(X, Y, inside, levels=[0.5], colors=["darkgoldenrod"], linewidths=1.2)
        ax.plot([], [], color="darkgoldenrod", label=f"V(x) <= {alpha:.3g}")

    traj_file = indir / "trajectories.csv"
    if traj_file.exists():
        _, tdata = read_csv(traj_file)
        if tdata.size:
            for tid in np.unique(tdata[:, 0]):
                seg = tdata[tdata[:, 0] == tid]
                ax.plot(seg[:, 2], seg[:, 3], "-", color="dimgray", lw=0.4,
                        alpha=0.6, zorder=2)

    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.set_title("region-of-attraction estimate")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(outfile, dpi=150)
    print(f"wrote {outfile} (alpha = {alpha:.6g})")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    sub = ap.add_subparsers(dest="what", required=True)
    for name in ("history", "roa"):
        sp = sub.add_parser(name)
        sp.add_argument("--in", dest="indir", required=True)
        sp.add_argument("--out", dest="outfile", required=True)
        if name == "roa":
            sp.add_argument("--spec", default=None,
                            help="problem JSON, used to shade the mode partition")
    args = ap.parse_args(argv)
    indir = Path(args.indir)
    if args.what == "history":
        plot_history(indir, args.outfile)
    else:
        plot_roa(indir, args.outfile, specfile=args.spec)
    return 0


if __name__ == "__main__":
    sys.exit(main())
