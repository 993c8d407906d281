"""Matplotlib renderers, one per figure id.

Renders are pure functions of the input files: fixed style, no timestamps in
the output metadata, so re-rendering the same inputs is byte-identical.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .figspec import EXPECTED_COLUMNS, FigureSpec, SchemaError, read_summary, read_table

__all__ = ["render"]

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _split_inputs(spec: FigureSpec):
    csvs = [p for p in spec.inputs if str(p).endswith(".csv")]
    jsons = [p for p in spec.inputs if str(p).endswith(".json")]
    return csvs, jsons


def _save(fig, out_path: str):
    path = Path(out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    suffix = path.suffix.lower()
    if suffix == ".png":
        metadata = {"Software": None}
    elif suffix == ".svg":
        metadata = {"Date": None}
    else:
        metadata = None
    fig.savefig(path, metadata=metadata)
    plt.close(fig)


def _render_fig2(spec: FigureSpec):
    csvs, _ = _split_inputs(spec)
    cols = EXPECTED_COLUMNS["fig2"]
    sweep = read_table(csvs[0], cols[0])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(sweep["x"], sweep["mean_sz_norm"], yerr=sweep["sem_sz_norm"],
                    fmt="o", ms=3, lw=1, capsize=2, label="circuit average")
        band = np.sqrt(np.maximum(sweep["var_circ_sz"], 0.0))
        n = 2 * (len(sweep["x"]) and max(sweep["x"] / np.maximum(sweep["theta"], 1e-300)))
        ax.fill_between(sweep["x"], sweep["mean_sz_norm"] - band / max(n / 2, 1.0),
                        sweep["mean_sz_norm"] + band / max(n / 2, 1.0),
                        alpha=0.25, label="circuit-to-circuit band")
        if len(csvs) > 1:
            overlay = read_table(csvs[1], cols[1])
            ax.plot(overlay["x"], overlay["mean_sz_norm"], "k-", lw=1.2, label="closed form")
        ax.set_xlabel("x = S theta")
        ax.set_ylabel("<Sz> / S")
        ax.set_title("Echo polarization signal")
        ax.legend(loc="upper right")
        _save(fig, spec.out_path)


def _render_fig3(spec: FigureSpec):
    csvs, jsons = _split_inputs(spec)
    stats = read_table(csvs[0], EXPECTED_COLUMNS["fig3"][0])
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(6.0, 5.5))
        ax1.errorbar(stats["step"], stats["mean_qfi"],
                     yerr=stats["std_qfi"] / np.sqrt(np.maximum(stats["n_circuits"], 1)),
                     fmt="o-", ms=4, lw=1)
        ax2.plot(stats["step"], stats["std_qfi"], "o-", ms=4, lw=1)
        if jsons:
            summary = read_summary(jsons[0])
            if "qfi_mean" in summary:
                ax1.axhline(summary["qfi_mean"], ls="--", c="k", lw=1,
                            label=f"scrambled-ensemble value {summary['qfi_mean']:.4g}")
                ax1.legend(loc="lower right")
            if "qfi_std" in summary:
                ax2.axhline(summary["qfi_std"], ls="--", c="k", lw=1)
        ax1.set_ylabel("mean QFI")
        ax2.set_ylabel("std QFI (fixed axis)")
        ax2.set_xlabel("twist steps")
        ax1.set_title("QFI convergence under random twisting")
        _save(fig, spec.out_path)


def _gain_rows(table):
    rows = {}
    for x, cgt, g in zip(table["x"], table["c_gamma_T"], table["gain_db"]):
        rows.setdefault(float(cgt), []).append((float(x), float(g)))
    return {k: np.array(sorted(v)) for k, v in sorted(rows.items())}


def _render_fig4a(spec: FigureSpec):
    csvs, _ = _split_inputs(spec)
    table = read_table(csvs[0], EXPECTED_COLUMNS["fig4a"][0])
    rows = _gain_rows(table)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for cgt, arr in rows.items():
            ax.plot(arr[:, 0], arr[:, 1], lw=1.4, label=f"c gamma T = {cgt:g}")
        ax.axhline(0.0, c="k", lw=0.8)
        ax.set_xlabel("x = S theta")
        ax.set_ylabel("gain over standard quantum limit (dB)")
        ax.set_ylim(bottom=-5)
        ax.set_title("Decoherence narrows gain and bandwidth")
        ax.legend(loc="upper right", fontsize=7)
        _save(fig, spec.out_path)


def _render_gain_contour(spec: FigureSpec):
    csvs, _ = _split_inputs(spec)
    cols = EXPECTED_COLUMNS["gain_contour"]
    table = read_table(csvs[0], cols[0])
    rows = _gain_rows(table)
    cgts = np.array(list(rows))
    xs = next(iter(rows.values()))[:, 0]
    grid = np.vstack([rows[c][:, 1] for c in cgts])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        mesh = ax.pcolormesh(xs, cgts, np.maximum(grid, 0.0), cmap="magma", shading="auto")
        fig.colorbar(mesh, ax=ax, label="gain (dB, clipped at 0)")
        levels = np.arange(3, grid.max() + 3, 3)
        if len(levels) and grid.max() > 3:
            ax.contour(xs, cgts, grid, levels=levels, colors="k", linewidths=0.5)
        if len(csvs) > 1:
            opt = read_table(csvs[1], cols[1])
            mask = opt["c_gamma_T"] > 0
            ax.plot(opt["optimal_x"][mask], opt["c_gamma_T"][mask], "c-o", ms=3, lw=1.2,
                    label="optimal sensing angle")
            ax.legend(loc="upper right", fontsize=7)
        ax.set_xlabel("x = S theta")
        ax.set_ylabel("c gamma T")
        ax.set_title("Gain surface")
        _save(fig, spec.out_path)


def _render_heff_spectrum(spec: FigureSpec):
    csvs, _ = _split_inputs(spec)
    table = read_table(csvs[0], EXPECTED_COLUMNS["heff_spectrum"][0])
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for k, marker in ((1, "o"), (2, "s")):
            mask = table["k"] == k
            if not np.any(mask):
                continue
            ax.scatter(table["S"][mask], table["energy_over_J"][mask],
                       s=8 + 4 * table["degeneracy"][mask], marker=marker,
                       alpha=0.7, label=f"{2*k} replicas")
        ax.axhline(4.0, ls="--", c="k", lw=1, label="4 J asymptote")
        ax.set_xlabel("spin S")
        ax.set_ylabel("energy / J")
        ax.set_ylim(-0.5, 25)
        ax.set_title("Replica generator spectrum (marker size = degeneracy)")
        ax.legend(loc="upper left", fontsize=7)
        _save(fig, spec.out_path)


def _render_husimi(spec: FigureSpec):
    csvs, _ = _split_inputs(spec)
    table = read_table(csvs[0], EXPECTED_COLUMNS["husimi"][0])
    polar = np.unique(table["polar"])
    azimuth = np.unique(table["azimuth"])
    grid = table["q"].reshape(len(polar), len(azimuth))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        mesh = ax.pcolormesh(azimuth, polar, grid, cmap="viridis", shading="auto")
        fig.colorbar(mesh, ax=ax, label="Q")
        ax.set_xlabel("azimuth (rad)")
        ax.set_ylabel("polar (rad)")
        ax.invert_yaxis()
        ax.set_title("Husimi field")
        _save(fig, spec.out_path)


_RENDERERS = {
    "fig2": _render_fig2,
    "fig3": _render_fig3,
    "fig4a": _render_fig4a,
    "gain_contour": _render_gain_contour,
    "heff_spectrum": _render_heff_spectrum,
    "husimi": _render_husimi,
}


def render(spec: FigureSpec) -> str:
    """Validate the spec's inputs and write the figure; returns the output path."""
    spec.validate()
    _RENDERERS[spec.figure_id](spec)
    return spec.out_path
