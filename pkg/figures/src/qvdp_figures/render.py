"""Deterministic figure rendering.

Color scales are fixed per figure family: non-negative Wigner panels are
normalized to W/max(W) on a [0, 1] viridis scale with the classical
limit-cycle circle overlaid; signed Wigner maps use a diverging scale
symmetric about zero. Rendering is a pure function of the CSV contents,
so re-rendering the same inputs is byte-stable for a fixed toolchain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from qvdp_figures.io import InputError, read_csv, read_wigner_grid

_DPI = 150


@dataclass
class FigureSpec:
    figure: str
    inputs: list[str]
    output: str
    normalization: str = "max"  # "max" for W/max(W) panels, "none" otherwise
    options: dict = field(default_factory=dict)


def _save(fig, output: str) -> None:
    fig.savefig(output, dpi=_DPI, metadata={"Software": "qvdp-figures"})
    plt.close(fig)


def _overlay_circle(ax, radius: float) -> None:
    t = np.linspace(0, 2 * math.pi, 256)
    ax.plot(radius * np.cos(t), radius * np.sin(t), color="white", lw=0.8)


def _panel(ax, meta, q, p, dens, normalization: str, signed: bool) -> None:
    if signed:
        m = float(np.max(np.abs(dens))) or 1.0
        kw = dict(cmap="RdBu_r", vmin=-m, vmax=m)
        data = dens
    else:
        peak = float(dens.max())
        if normalization == "max":
            if peak <= 0:
                raise InputError("cannot normalize an all-zero panel")
            data = dens / peak
            kw = dict(cmap="viridis", vmin=0.0, vmax=1.0)
        else:
            data = dens
            kw = dict(cmap="viridis", vmin=0.0)
    ax.imshow(data.T, origin="lower", extent=(q[0], q[-1], p[0], p[-1]),
              aspect="equal", interpolation="nearest", **kw)
    r = meta.get("limit_cycle_radius")
    if r:
        _overlay_circle(ax, float(r))
    ax.set_xticks([])
    ax.set_yticks([])


def ridge_radius(q: np.ndarray, p: np.ndarray, dens: np.ndarray) -> float:
    """Radius of the annular ridge of a phase-space density.

    Angle-averages the 2D density into radial shells (no Jacobian weight:
    the stationary 2D density peaks exactly on the limit cycle) and
    refines the peak shell with a local quadratic fit.
    """
    qq, pp = np.meshgrid(q, p, indexing="ij")
    rr = np.hypot(qq, pp)
    dr = float(q[1] - q[0]) if len(q) > 1 else 1.0
    nshell = int(rr.max() / dr) + 1
    idx = np.minimum((rr / dr).astype(int), nshell - 1)
    sums = np.bincount(idx.ravel(), weights=dens.ravel(), minlength=nshell)
    counts = np.bincount(idx.ravel(), minlength=nshell)
    profile = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    shells = (np.arange(nshell) + 0.5) * dr
    k = int(np.argmax(profile))
    if 1 <= k < nshell - 1:
        y0, y1, y2 = profile[k - 1], profile[k], profile[k + 1]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0 else 0.0
        return float(shells[k] + shift * dr)
    return float(shells[k])


def render_wigner_grid_figure(spec: FigureSpec):
    """Panel grid: rows are measurement schedules, columns are times."""
    panels = []
    for path in spec.inputs:
        meta, q, p, dens = read_wigner_grid(path)
        panels.append((meta, q, p, dens))
    if not panels:
        raise InputError("no input panels")

    def row_key(meta):
        raw = meta.get("delta_t", "inf")
        return math.inf if raw in ("inf", math.inf) else float(raw)

    rows = sorted({row_key(m) for m, *_ in panels}, reverse=True)
    cols = sorted({float(m.get("time", 0.0)) for m, *_ in panels})
    fig, axes = plt.subplots(len(rows), len(cols),
                             figsize=(2.0 * len(cols), 2.0 * len(rows)),
                             squeeze=False)
    for meta, q, p, dens in panels:
        i = rows.index(row_key(meta))
        j = cols.index(float(meta.get("time", 0.0)))
        _panel(axes[i][j], meta, q, p, dens, spec.normalization, signed=False)
        if i == 0:
            axes[i][j].set_title(f"t = {cols[j]:g}", fontsize=8)
        if j == 0:
            label = "no meas." if math.isinf(rows[i]) else f"dt = {rows[i]:g}"
            axes[i][j].set_ylabel(label, fontsize=8)
    fig.tight_layout()
    return fig


def render_signed_wigner_figure(spec: FigureSpec):
    """Row of signed Wigner maps (positive/negative regions)."""
    fig, axes = plt.subplots(1, len(spec.inputs),
                             figsize=(2.2 * len(spec.inputs), 2.4), squeeze=False)
    for ax, path in zip(axes[0], spec.inputs):
        meta, q, p, dens = read_wigner_grid(path)
        _panel(ax, meta, q, p, dens, "none", signed=True)
        ax.set_title(str(meta.get("panel", "")), fontsize=8)
    fig.tight_layout()
    return fig


def render_spectrum_heatmap(spec: FigureSpec):
    """Spectra versus measurement count as a heatmap plus selected cuts."""
    table = read_csv(spec.inputs[0], required=("n", "omega", "magnitude"))
    ns = np.unique(table["n"])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.2))
    omega_max = spec.options.get("omega_max", 3.0)
    grid = []
    for n in ns:
        sel = table["n"] == n
        om = table["omega"][sel]
        mag = table["magnitude"][sel]
        keep = om <= omega_max
        grid.append((n, om[keep], mag[keep]))
    # heatmap on the union grid of the first row (all rows share spacing
    # only when records share stride; interpolate for robustness)
    om0 = grid[0][1]
    img = np.vstack([np.interp(om0, om, mag) for _, om, mag in grid])
    ax1.imshow(np.log10(img + 1e-12), origin="lower", aspect="auto",
               extent=(om0[0], om0[-1], 0, len(ns)), cmap="magma")
    ax1.set_yticks(np.arange(len(ns)) + 0.5)
    ax1.set_yticklabels([f"{int(n)}" for n in ns], fontsize=7)
    ax1.set_xlabel("omega")
    ax1.set_ylabel("measurements n")
    for n, om, mag in grid:
        ax2.plot(om, mag, lw=0.8, label=f"n={int(n)}")
    ax2.set_xlabel("omega")
    ax2.set_ylabel("|Q(omega)|")
    ax2.legend(fontsize=6)
    fig.tight_layout()
    return fig


def render_threshold_scan(spec: FigureSpec):
    table = read_csv(spec.inputs[0], required=("kappa2_over_kappa1", "peak_normalized"))
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    ax.loglog(table["kappa2_over_kappa1"], table["peak_normalized"], "o-", ms=4)
    knee = table.meta.get("threshold_ratio")
    if knee:
        ax.axvline(float(knee), color="gray", ls="--", lw=0.8)
    ax.set_xlabel("kappa2 / kappa1")
    ax.set_ylabel("Q_n(omega_m)")
    fig.tight_layout()
    return fig


def render_phase_distribution(spec: FigureSpec):
    """Stationary theta_- distribution and the two well densities in time."""
    dist = read_csv(spec.inputs[0], required=("theta", "density"))
    fig, axes = plt.subplots(1, 2, figsize=(8, 3))
    axes[0].plot(dist["theta"], dist["density"], lw=1.0)
    axes[0].set_xlabel("theta_-")
    axes[0].set_ylabel("density (1/rad)")
    axes[0].axhline(1 / (2 * math.pi), color="gray", lw=0.6, ls=":")
    if len(spec.inputs) > 1:
        series = read_csv(spec.inputs[1], required=("time", "w0", "wpi"))
        axes[1].plot(series["time"], series["w0"], lw=0.9, label="W(0)")
        axes[1].plot(series["time"], series["wpi"], lw=0.9, label="W(pi)")
        axes[1].set_xlabel("time")
        axes[1].legend(fontsize=7)
    fig.tight_layout()
    return fig


def render_sync_scan(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    for path in spec.inputs:
        table = read_csv(path, required=("delta_t", "s_ratio", "sigma"))
        ax.errorbar(table["delta_t"], table["s_ratio"], yerr=table["sigma"],
                    fmt="o-", ms=4, capsize=3)
    ax.axhline(1.0, color="gray", lw=0.8, ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("measurement interval delta_t")
    ax.set_ylabel("S / S_l")
    fig.tight_layout()
    return fig


def render_survival(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(4.2, 3.2))
    styles = ("-", "--", ":")
    col = spec.options.get("columns", ("p1_from_m1", "p1_from_m2"))
    xname = spec.options.get("x", "delta_t")
    for path, style in zip(spec.inputs, styles):
        table = read_csv(path, required=(xname,) + tuple(col))
        for c, color in zip(col, ("C0", "C3")):
            ax.plot(table[xname], table[c], style, color=color, lw=1.0,
                    label=f"{c} ({table.meta.get('kappa1', '?')})")
    if xname == "n":
        ax.set_xscale("log")
    ax.set_xlabel(xname)
    ax.set_ylabel("probability")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=6)
    fig.tight_layout()
    return fig


FIGURES = {
    "fig2": render_wigner_grid_figure,
    "fig3": render_spectrum_heatmap,
    "fig3c": render_threshold_scan,
    "fig5": render_phase_distribution,
    "fig6": render_sync_scan,
    "fig7": render_signed_wigner_figure,
    "fig8a": render_survival,
    "fig8b": lambda spec: render_survival(
        FigureSpec(spec.figure, spec.inputs, spec.output, spec.normalization,
                   {"columns": ("pt1_from_m1", "pt1_from_m2"), "x": "n"})),
}


def render(spec: FigureSpec) -> str:
    """Render one figure spec to its output path; returns the path."""
    if spec.figure not in FIGURES:
        raise InputError(f"unknown figure {spec.figure!r}; "
                         f"choose from {', '.join(sorted(FIGURES))}")
    if not spec.inputs:
        raise InputError("figure spec has no inputs")
    fig = FIGURES[spec.figure](spec)
    _save(fig, spec.output)
    return spec.output
