"""Figure rendering for the CLI report path.

Each function draws one PNG next to the delimited output it illustrates.
The figures are conveniences for eyeballing a run; the CSV files remain
the numeric contract.  Rendering uses matplotlib's object-oriented API
directly, so importing this module never touches the pyplot global state
or requires a display.
"""

from __future__ import annotations

import numpy as np
from matplotlib.figure import Figure

from .analysis import EffluentPoint, RegimeHistogram, WashoutResult
from .engine import Trajectory
from .model import ChemostatModel

_DPI = 150


def _regime_spans(t: np.ndarray, regime: np.ndarray):
    """Contiguous (t_start, t_end, regime) runs of a recorded regime path."""
    breaks = np.flatnonzero(np.diff(regime)) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [len(t) - 1]))
    return [(t[a], t[b], int(regime[a])) for a, b in zip(starts, ends)]


def render_paths(path, trajectory: Trajectory, model: ChemostatModel) -> None:
    """Substrate and biomass sample paths; regimes shaded when switching."""
    fig = Figure(figsize=(8.0, 5.0))
    ax_s, ax_x = fig.subplots(2, 1, sharex=True)
    if model.m0 > 1:
        for t_a, t_b, i in _regime_spans(trajectory.t, trajectory.regime):
            if i > 0:
                for ax in (ax_s, ax_x):
                    ax.axvspan(t_a, t_b, color="0.85", lw=0,
                               zorder=0, alpha=0.8)
    ax_s.plot(trajectory.t, trajectory.s, lw=0.7, color="tab:blue")
    ax_s.axhline(model.S0, ls="--", lw=0.8, color="0.4")
    ax_s.set_ylabel("substrate S (mg/L)")
    ax_x.plot(trajectory.t, trajectory.x, lw=0.7, color="tab:green")
    ax_x.set_ylabel("biomass X (mg/L)")
    ax_x.set_xlabel("t (day)")
    if model.m0 > 1:
        ax_s.set_title("shaded spans: regime > 1", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)


def render_density(path, histogram: RegimeHistogram) -> None:
    """Per-regime occupation mass over the (S, X) plane."""
    m0 = histogram.mass.shape[0]
    fig = Figure(figsize=(4.5 * m0 + 0.8, 4.0))
    axes = fig.subplots(1, m0, squeeze=False)[0]
    vmax = float(histogram.mass.max()) or 1.0
    mesh = None
    for i, ax in enumerate(axes):
        mesh = ax.pcolormesh(histogram.s_edges, histogram.x_edges,
                             histogram.mass[i].T, cmap="viridis",
                             vmin=0.0, vmax=vmax)
        ax.set_xlabel("S (mg/L)")
        if i == 0:
            ax.set_ylabel("X (mg/L)")
        if m0 > 1:
            ax.set_title(f"regime {i + 1}", fontsize=9)
    fig.colorbar(mesh, ax=list(axes), label="occupation mass")
    fig.savefig(path, dpi=_DPI)


def render_sweep(path, points: list[EffluentPoint],
                 washout: WashoutResult | None = None) -> None:
    """Threshold and effluent mean across residence times."""
    theta = [p.theta for p in points]
    fig = Figure(figsize=(7.0, 5.5))
    ax_l, ax_e = fig.subplots(2, 1, sharex=True)
    ax_l.errorbar(theta, [p.lam for p in points],
                  yerr=[3.0 * p.lam_se for p in points],
                  fmt="o-", ms=3, lw=0.9, color="tab:blue", capsize=2)
    ax_l.axhline(0.0, ls=":", lw=0.8, color="0.3")
    ax_l.set_ylabel("threshold")
    ax_e.errorbar(theta, [p.es_star for p in points],
                  yerr=[3.0 * p.es_star_se for p in points],
                  fmt="s-", ms=3, lw=0.9, color="tab:red", capsize=2)
    ax_e.set_ylabel("long-run mean S (mg/L)")
    ax_e.set_xlabel("residence time theta (day)")
    if washout is not None:
        for ax in (ax_l, ax_e):
            ax.axvline(washout.theta0, ls="--", lw=0.8, color="0.4")
        ax_l.annotate(f"wash-out {washout.theta0:.3g}",
                      (washout.theta0, 0.0), textcoords="offset points",
                      xytext=(4, 4), fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI)
