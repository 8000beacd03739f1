#!/usr/bin/env python3
"""Plot a run CSV produced by `formsim run`.

Usage: python scripts/plot_run.py out/sin300.csv [--save fig.png]

Top panel: vessel tracks and the barycenter; bottom panels: path-frame
errors, formation error and sway speeds over time.
"""

import argparse

import numpy as np


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("csv")
    ap.add_argument("--save", help="write the figure instead of showing it")
    args = ap.parse_args()

    try:
        import matplotlib
        if args.save:
            matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        raise SystemExit("matplotlib is required for plotting: pip install matplotlib")

    d = np.genfromtxt(args.csv, delimiter=",", names=True)

    fig, axes = plt.subplots(2, 2, figsize=(12, 8))
    ax = axes[0, 0]
    ax.plot(d["x_1"], d["y_1"], lw=0.8, label="vessel 1")
    ax.plot(d["x_2"], d["y_2"], lw=0.8, label="vessel 2")
    ax.plot(0.5 * (d["x_1"] + d["x_2"]), 0.5 * (d["y_1"] + d["y_2"]),
            "k--", lw=1.0, label="barycenter")
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    ax.set_title("tracks")
    ax.axis("equal")
    ax.legend(loc="best", fontsize=8)

    ax = axes[0, 1]
    ax.plot(d["t"], d["x_pb"], label="along-track")
    ax.plot(d["t"], d["y_pb"], label="cross-track")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("error [m]")
    ax.set_title("barycenter path errors")
    ax.legend(fontsize=8)

    ax = axes[1, 0]
    ax.plot(d["t"], np.hypot(d["sigma_f_err_x"], d["sigma_f_err_y"]), label="|formation err|")
    ax.plot(d["t"], d["sigma_ca"], label="inter-vessel distance")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("[m]")
    ax.set_title("formation / separation")
    ax.legend(fontsize=8)

    ax = axes[1, 1]
    ax.plot(d["t"], d["v_1"], label="sway 1")
    ax.plot(d["t"], d["v_2"], label="sway 2")
    ax.plot(d["t"], d["u_err_1"], label="surge err 1")
    ax.plot(d["t"], d["psi_err_1"], label="heading err 1")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("[m/s] / [rad]")
    ax.set_title("velocities and autopilot errors")
    ax.legend(fontsize=8)

    fig.tight_layout()
    if args.save:
        fig.savefig(args.save, dpi=150)
        print(f"wrote {args.save}")
    else:
        plt.show()


if __name__ == "__main__":
    main()
