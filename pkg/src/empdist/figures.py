"""Matplotlib rendering of the reproduction targets.

Each render_* function takes the already-computed table data (what the CLI
writes to CSV) and draws the companion figure next to it.  Rendering is
file-only; no interactive backends.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_GOLDEN = (math.sqrt(5) - 1) / 2

RC = {
    "figure.figsize": (5.2, 5.2 * _GOLDEN),
    "font.size": 9,
    "axes.labelsize": 10,
    "legend.fontsize": 8,
    "lines.linewidth": 1.4,
    "savefig.dpi": 180,
    "savefig.bbox": "tight",
}


def _save(fig, path: str) -> None:
    fig.savefig(path)
    plt.close(fig)


def render_corr_info_grid(lams, phis, table, path: str) -> None:
    """I(lambda) curves, one per rotation angle."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for j, phi in enumerate(phis):
            ax.plot(lams, table[:, j], label=rf"$\phi={phi:.3f}$")
        ax.set_xlabel(r"damping $\lambda$")
        ax.set_ylabel(r"$\mathcal{I}$ [nats]")
        ax.legend(ncol=2)
        _save(fig, path)


def render_markov_table(lengths, orders, values, path: str, title: str = "") -> None:
    """Markov-comparison table as grouped bars; divergent entries hatched at the axis top."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        width = 0.8 / len(orders)
        finite_vals = [v for row in values for v in row if not math.isinf(v)]
        top = max(finite_vals) * 1.3 if finite_vals else 1.0
        for j, k in enumerate(orders):
            xs = np.arange(len(lengths)) + j * width
            heights, hatches = [], []
            for i, _ in enumerate(lengths):
                v = values[i][j]
                heights.append(top if math.isinf(v) else v)
                hatches.append("//" if math.isinf(v) else None)
            bars = ax.bar(xs, heights, width=width, label=rf"$k={k}$")
            for bar, hatch in zip(bars, hatches):
                if hatch:
                    bar.set_hatch(hatch)
                    bar.set_facecolor("none")
        ax.set_xticks(np.arange(len(lengths)) + 0.4 - width / 2)
        ax.set_xticklabels([rf"$L={length}$" for length in lengths])
        ax.set_ylabel(r"$\mathcal{I}_L^k$ [nats] (hatched: divergent)")
        if title:
            ax.set_title(title)
        ax.legend()
        _save(fig, path)


def render_fisher_rate(hs, rates_by_sites, path: str) -> None:
    """Fisher-information rate versus field gradient, one curve per chain size."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for sites, rates in rates_by_sites.items():
            ax.loglog(hs, rates, label=f"{sites} sites")
        ax.set_xlabel(r"field gradient $h$")
        ax.set_ylabel(r"$F/N$")
        ax.legend()
        _save(fig, path)


def render_info_vs_field(hs, info_by_sites, bound: float, path: str) -> None:
    """Correlation information versus field gradient with the asymptotic bound."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for sites, vals in info_by_sites.items():
            ax.semilogx(hs, vals, label=f"{sites} sites")
        ax.axhline(bound, linestyle="--", color="k", label="asymptotic bound")
        ax.set_xlabel(r"field gradient $h$")
        ax.set_ylabel(r"$\mathcal{I}$ [nats]")
        ax.legend()
        _save(fig, path)


def render_ed_histograms(samples_by_tau, path: str, bins: int = 120) -> None:
    """Overlaid histograms of the ED entry for rapid vs gradual measurement."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        for tau, samples in samples_by_tau.items():
            ax.hist(
                samples,
                bins=bins,
                range=(0.0, 1.0),
                density=True,
                alpha=0.55,
                label=rf"$\tau={tau}$",
            )
        ax.set_xlabel("ED entry for outcome '+'")
        ax.set_ylabel("density across runs")
        ax.legend()
        _save(fig, path)
