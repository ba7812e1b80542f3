"""Matplotlib renderings of the sweep tables."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .sweep import Table  # noqa: E402

FIGSIZE = (6.0, 4.2)


def _axes():
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.grid(True, alpha=0.3)
    return fig, ax


def _x_scale(ax, xs):
    positive = [x for x in xs if x > 0]
    if positive and max(positive) / min(positive) > 1e3:
        ax.set_xscale("log")


def plot_fig4(table: Table, ax):
    xs = table.column("n_loss")
    for name in table.columns:
        if name.startswith("enhancement["):
            ax.plot(xs, table.column(name), label=name[len("enhancement["):-1].replace("mu=", "μ = "))
    ax.set_ylabel("(F − N) / N²")
    ax.legend()


def plot_fig5(table: Table, ax):
    xs = table.column("n_loss")
    ax.plot(xs, table.column("enhancement_opt"), label="μ = μ_opt")
    ax.plot(xs, table.column("enhancement_half"), "--", label="μ = 1/2")
    ax.set_ylabel("(F − N) / N²")
    ax.legend()


def plot_fig6(table: Table, ax):
    xs = table.column("n_loss")
    ax.plot(xs, table.column("improvement_ratio"))
    ax.axhline(2.0, color="grey", lw=0.8, ls=":")
    ax.set_ylabel("improvement ratio")


def plot_compare(table: Table, ax):
    rows = [(a, o) for a, o in zip(table.column("F_analytic"), table.column("F_oracle")) if o is not None]
    if rows:
        fa, fo = zip(*rows)
        ax.plot(fa, fo, "o", label="Fock oracle")
        lo, hi = min(fa), max(fa)
        ax.plot([lo, hi], [lo, hi], "k-", lw=0.8, label="closed form")
    ax.set_xlabel("F (closed form)")
    ax.set_ylabel("F (oracle)")
    ax.legend()


def plot_measure(table: Table, ax):
    idx = range(len(table.rows))
    ax.plot(idx, table.column("F_analytic"), "k_", ms=14, label="F (closed form)")
    ax.plot(idx, table.column("sensitivity_measurement"), "o", label="measured 1/δφ²")
    ax.set_xlabel("row")
    ax.set_ylabel("1/δφ²")
    ax.legend()


_PLOTTERS = {
    "fig4": plot_fig4,
    "fig5": plot_fig5,
    "fig6": plot_fig6,
    "compare": plot_compare,
    "measure": plot_measure,
}


def render(command: str, table: Table, path) -> None:
    """Draw ``table`` for ``command`` and save it to ``path`` (format from suffix)."""
    fig, ax = _axes()
    _PLOTTERS[command](table, ax)
    if command.startswith("fig"):
        xs = table.column("n_loss")
        ax.set_xlabel("n_loss")
        _x_scale(ax, xs)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
