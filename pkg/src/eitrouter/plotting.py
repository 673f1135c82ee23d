"""Static SVG figures of spectra, switching, extinction and pulse routing.

Figures are rendered with the Agg backend and written with a fixed SVG
hash salt and no date stamp, so identical data give identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .analysis import (  # noqa: E402
    ExponentialFit,
    ExtinctionCurve,
    LorentzianFit,
    SwitchingCurve,
    decay_model,
    lorentzian,
    rise_model,
)
from .ensemble import SpectrumTable  # noqa: E402

STYLE = {
    "svg.hashsalt": "eitrouter",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "figure.dpi": 100,
}

REFL_COLOR = "tab:blue"
TRANS_COLOR = "tab:red"


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)
    return path


def _band(ax, x, y, err, color, label, ls="-"):
    ax.plot(x, y, color=color, ls=ls, lw=1.2, label=label)
    if err is not None and np.any(np.isfinite(err)):
        e = np.nan_to_num(err)
        ax.fill_between(x, y - e, y + e, color=color, alpha=0.2, lw=0)


def plot_spectrum(path, off: SpectrumTable | None = None, on: SpectrumTable | None = None, title=None) -> Path:
    """Reflection (top) and transmission (bottom) versus probe detuning."""
    with plt.rc_context(STYLE):
        fig, (ax_r, ax_t) = plt.subplots(2, 1, figsize=(4.5, 5), sharex=True, constrained_layout=True)
        for spec, ls, tag in ((off, "-", "control off"), (on, "--", "control on")):
            if spec is None:
                continue
            _band(ax_r, spec.delta, spec.r_mean, spec.r_stderr, REFL_COLOR, tag, ls)
            _band(ax_t, spec.delta, spec.t_mean, spec.t_stderr, TRANS_COLOR, tag, ls)
        ax_r.set_ylabel("R")
        ax_t.set_ylabel("T")
        ax_t.set_xlabel(r"probe detuning $\Delta_i$ (MHz)")
        ax_r.legend(loc="upper left")
        if title:
            ax_r.set_title(title)
        return _save(fig, path)


def plot_switching(path, curve: SwitchingCurve, fit: ExponentialFit | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2), constrained_layout=True)
        e = curve.energies
        ax.errorbar(e, curve.r, yerr=np.nan_to_num(curve.r_stderr), fmt="o", ms=3, color=REFL_COLOR, label="R")
        ax.errorbar(e, curve.t, yerr=np.nan_to_num(curve.t_stderr), fmt="s", ms=3, color=TRANS_COLOR, label="T")
        if fit is not None:
            xs = np.linspace(0, e.max(), 300)
            ax.plot(xs, decay_model(xs, *fit.r_fit.params), color=REFL_COLOR, lw=1,
                    label=f"$E_R$ = {fit.e_r:.3g} fJ")
            ax.plot(xs, rise_model(xs, *fit.t_fit.params), color=TRANS_COLOR, lw=1,
                    label=f"$E_T$ = {fit.e_t:.3g} fJ")
        ax.set_xlabel("control pulse energy (fJ)")
        ax.set_ylabel("R, T")
        ax.set_title(rf"$\Delta_i$ = {curve.delta_i:g} MHz")
        ax.legend()
        return _save(fig, path)


def plot_extinction(path, curves: list[ExtinctionCurve], fit: LorentzianFit | None = None) -> Path:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2), constrained_layout=True)
        for c in curves:
            color = REFL_COLOR if c.port == "reflection" else TRANS_COLOR
            ax.plot(c.delta, c.db, ".", ms=3, color=color, label=c.port)
        if fit is not None:
            x = curves[0].delta
            xs = np.linspace(x.min(), x.max(), 600)
            label = f"peak {fit.peak:.3g} dB"
            if fit.bandwidth_3db is not None:
                label += f", 3 dB width {fit.bandwidth_3db:.3g} MHz"
            ax.plot(xs, lorentzian(xs, fit.baseline, fit.peak - fit.baseline, fit.center, fit.fwhm), "k-", lw=1,
                    label=label)
        ax.set_xlabel(r"probe detuning $\Delta_i$ (MHz)")
        ax.set_ylabel("extinction ratio (dB)")
        ax.legend(fontsize=7)
        return _save(fig, path)


def plot_pulse(path, off, on) -> Path:
    """Time histograms of both ports without (top) and with (bottom) control."""
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 1, figsize=(4.5, 5), sharex=True, constrained_layout=True)
        for ax, res, tag in ((axes[0], off, "control off"), (axes[1], on, "control on")):
            t = res.time_ns
            half = 0.5 * (t[1] - t[0]) if t.size > 1 else 0.5
            edges = np.append(t - half, t[-1] + half)
            if res.n_shots:
                ax.stairs(res.refl_counts, edges, fill=True, color=REFL_COLOR, alpha=0.4, label="R counts")
                ax.stairs(res.trans_counts, edges, fill=True, color=TRANS_COLOR, alpha=0.4, label="T counts")
                scale = res.n_shots * res.efficiency
                ax.set_ylabel("counts per bin")
            else:
                scale = 1.0
                ax.set_ylabel("mean photons per bin")
            ax.plot(t, res.refl_mean * scale, color=REFL_COLOR, lw=1, label="R expected")
            ax.plot(t, res.trans_mean * scale, color=TRANS_COLOR, lw=1, label="T expected")
            ax.set_title(tag)
            ax.legend(fontsize=7, loc="upper right")
        lo, hi = _active_window(off.input, off.time_ns)
        axes[1].set_xlim(lo, hi)
        axes[1].set_xlabel("time (ns)")
        return _save(fig, path)


def _active_window(envelope, t):
    cum = np.cumsum(envelope)
    if cum[-1] <= 0:
        return t[0], t[-1]
    lo = t[np.searchsorted(cum, 1e-4 * cum[-1])]
    hi = t[min(np.searchsorted(cum, (1 - 1e-4) * cum[-1]), t.size - 1)]
    pad = hi - lo
    return lo - pad, hi + 2 * pad


def plot_truth_table(path, table: dict) -> Path:
    """Bar chart of the four port probabilities (``TruthTable.probabilities()``)."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 3), constrained_layout=True)
        x = np.arange(2)
        w = 0.38
        r = [table["control_off"]["reflection"], table["control_on"]["reflection"]]
        t = [table["control_off"]["transmission"], table["control_on"]["transmission"]]
        ax.bar(x - w / 2, r, w, color=REFL_COLOR, label="reflection")
        ax.bar(x + w / 2, t, w, color=TRANS_COLOR, label="transmission")
        ax.set_xticks(x, ["control off", "control on"])
        ax.set_ylabel("probability")
        ax.set_ylim(0, 1)
        ax.legend()
        return _save(fig, path)
