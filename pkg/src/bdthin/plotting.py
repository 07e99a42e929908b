"""Figure rendering for sweep reports."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

_SERIES_STYLE = {
    "D_closed": dict(label="closed form", color="C0", lw=1.5),
    "D_oracle": dict(label="moment oracle", color="C1", lw=1.0, ls="--"),
    "D_sim": dict(label="simulation", color="C2", ls="none", marker="o", ms=3),
}


def save_sweep_figure(path, sweep_values, series, var_name, title=None, logx=False):
    """Render dispersion-vs-parameter curves to an image file.

    series maps column names (D_closed, D_oracle, D_sim, D_sim_stderr)
    to equal-length value lists; None entries are skipped. A dotted
    reference line marks the Poisson level D = 1.
    """
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.axhline(1.0, color="gray", lw=0.8, ls=":", label="Poisson (D = 1)")
    for name, style in _SERIES_STYLE.items():
        values = series.get(name)
        if values is None or all(v is None for v in values):
            continue
        xs = [x for x, v in zip(sweep_values, values) if v is not None]
        ys = [v for v in values if v is not None]
        if name == "D_sim" and series.get("D_sim_stderr") is not None:
            errs = [e for v, e in zip(values, series["D_sim_stderr"]) if v is not None]
            ax.errorbar(xs, ys, yerr=errs, **style)
        else:
            ax.plot(xs, ys, **style)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(var_name)
    ax.set_ylabel("index of dispersion")
    if title:
        ax.set_title(title)
    ax.legend(frameon=False, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
