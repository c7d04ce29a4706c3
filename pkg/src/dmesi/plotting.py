"""Figures written next to the CSV reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

RC = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": (5.0, 3.2),
    "savefig.dpi": 150,
}


def plot_region(rows, delta_t, delta_ti, n, path):
    """Effective squared distance of the two-hop chain against delta_i**2."""
    di = [r["delta_i"] for r in rows]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(di, [r["delta_i_sq"] for r in rows], label=r"$\Delta_i^2$")
        ax.plot(di, [r["d_value"] for r in rows], "--", label="chain D (eq15)")
        ax.plot(di, [r["strict_lhs"] for r in rows], ":", label="strict region lhs")
        inside = [r["delta_i"] for r in rows if r["in_region_eq15"]]
        if inside:
            ax.axvspan(min(inside), max(inside), alpha=0.12, color="C2", label="chain helps")
        ax.set_xlabel(r"$\Delta_i$")
        ax.set_ylabel("squared distance")
        ax.set_yscale("log")
        ax.set_title(rf"$\Delta_t={delta_t:g},\ \Delta_{{ti}}={delta_ti:g},\ n={n}$")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)


def plot_simulation(rows, path):
    """Empirical MSE (with 2 standard errors) and analytic bound per row."""
    labels = [f"{r['estimator']}\nseed {r['seed']}" for r in rows]
    xs = range(len(rows))
    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(max(5.0, 0.7 * len(rows) + 1.5), 3.2))
        ax.bar(xs, [r["mse_empirical"] for r in rows],
               yerr=[2 * r["mse_stderr"] if r["mse_stderr"] == r["mse_stderr"] else 0 for r in rows],
               color=["C0" if r["estimator"] == "wz" else "C1" for r in rows], capsize=3,
               label="empirical MSE")
        ax.plot(xs, [r["bound"] for r in rows], "k_", markersize=14, label="bound")
        ax.set_xticks(list(xs))
        ax.set_xticklabels(labels, rotation=0)
        ax.set_yscale("log")
        ax.set_ylabel("MSE")
        ax.legend(loc="best")
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
