"""Router figures of merit derived from ensemble spectra.

Extinction ratios between control states, bandgap location, Lorentzian fits
of extinction peaks, and switching curves versus control pulse energy with
their exponential fits and the energy-to-Rabi-frequency calibration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import find_peaks

from .ensemble import SpectrumTable, ensemble_responses
from .errors import ConfigError, FitError
from .fitting import FitResult, levenberg_marquardt, numeric_jacobian
from .io import write_csv
from .lattice import LatticeConfig
from .scatter import AtomParams, atom_polarizability

ER_FLOOR = 1e-6


# --------------------------------------------------------------------------
# extinction ratio
# --------------------------------------------------------------------------


@dataclass
class ExtinctionCurve:
    delta: np.ndarray
    db: np.ndarray  # NaN where masked
    port: str

    @property
    def mask(self) -> np.ndarray:
        return np.isfinite(self.db)

    def to_csv(self, path, comments=()):
        rows = ([float(d), None if not np.isfinite(v) else float(v)] for d, v in zip(self.delta, self.db))
        write_csv(path, ("delta_i_mhz", "extinction_db"), rows, comments)


def extinction_ratio(off: SpectrumTable, on: SpectrumTable, port: str, floor: float = ER_FLOOR) -> ExtinctionCurve:
    """Contrast between control states in dB.

    reflection: ``10 log10(R_off / R_on)``; transmission: ``10 log10(T_on / T_off)``.
    Points whose denominator is below ``floor`` (or whose numerator is not
    positive) are masked.
    """
    if off.delta.shape != on.delta.shape or np.any(off.delta != on.delta):
        raise ConfigError("extinction ratio needs spectra on identical detuning grids")
    if port == "reflection":
        num, den = off.r_mean, on.r_mean
    elif port == "transmission":
        num, den = on.t_mean, off.t_mean
    else:
        raise ConfigError(f"port must be 'reflection' or 'transmission', got {port!r}")
    ok = (den >= floor) & (num > 0)
    db = np.full(num.shape, np.nan)
    db[ok] = 10 * np.log10(num[ok] / den[ok])
    return ExtinctionCurve(off.delta.copy(), db, port)


# --------------------------------------------------------------------------
# Lorentzian fit
# --------------------------------------------------------------------------


def lorentzian(x, baseline, amplitude, center, fwhm):
    u = 2 * (np.asarray(x) - center) / fwhm
    return baseline + amplitude / (1 + u * u)


def _lorentzian_jac(x, baseline, amplitude, center, fwhm):
    u = 2 * (x - center) / fwhm
    q = 1 / (1 + u * u)
    return np.column_stack([
        np.ones_like(x),
        q,
        4 * amplitude * u * q * q / fwhm,
        2 * amplitude * u * u * q * q / fwhm,
    ])


@dataclass
class LorentzianFit:
    center: float
    peak: float
    fwhm: float
    baseline: float
    bandwidth_3db: float | None
    fit: FitResult

    def to_dict(self) -> dict:
        return {
            "center_mhz": self.center,
            "peak_db": self.peak,
            "fwhm_mhz": self.fwhm,
            "baseline_db": self.baseline,
            "bandwidth_3db_mhz": self.bandwidth_3db,
            "fit": self.fit.to_dict(),
        }


def _half_width_guess(x, y, base, amp, i_peak):
    half = base + amp / 2
    above = y >= half
    lo = i_peak
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = i_peak
    while hi < len(y) - 1 and above[hi + 1]:
        hi += 1
    width = x[hi] - x[lo]
    return width if width > 0 else (x[-1] - x[0]) / 10


def lorentzian_fit(curve, y=None, max_iter: int = 200) -> LorentzianFit:
    """Fit ``a + b / (1 + ((x - x0) / (w / 2))^2)`` to an extinction curve.

    Accepts an :class:`ExtinctionCurve` (masked points dropped) or ``x, y``
    arrays.  ``peak = a + b``; the 3-dB bandwidth is the width over which the
    fitted curve stays within 3 dB of its peak, ``w * sqrt(3 / (b - 3))``,
    and is ``None`` when the peak rises less than 3 dB above the baseline.
    """
    if y is None:
        keep = curve.mask
        x, y = np.asarray(curve.delta)[keep], np.asarray(curve.db)[keep]
    else:
        x, y = np.asarray(curve, dtype=float), np.asarray(y, dtype=float)
    if x.size < 5:
        raise FitError(f"Lorentzian fit needs at least 5 points, got {x.size}", {"n_points": int(x.size)})
    i_peak = int(np.argmax(y))
    base = float(np.min(y))
    amp = float(y[i_peak] - base)
    p0 = [base, amp, float(x[i_peak]), _half_width_guess(x, y, base, amp, i_peak)]
    res = levenberg_marquardt(
        lambda p: lorentzian(x, *p) - y,
        lambda p: _lorentzian_jac(x, *p),
        p0,
        names=("baseline", "amplitude", "center", "fwhm"),
        max_iter=max_iter,
    )
    baseline, amplitude, center, fwhm = res.params
    fwhm = abs(fwhm)
    bw = fwhm * math.sqrt(3 / (amplitude - 3)) if amplitude > 3 else None
    return LorentzianFit(float(center), float(baseline + amplitude), float(fwhm), float(baseline), bw, res)


# --------------------------------------------------------------------------
# bandgap
# --------------------------------------------------------------------------


@dataclass
class Bandgap:
    center: float
    peak: float
    width: float
    boundary: bool
    multi_peak: bool
    peaks: list = field(default_factory=list)


def reflection_peaks(spec: SpectrumTable, rel_prominence: float = 0.1) -> np.ndarray:
    """Indices of local reflection maxima with prominence above ``rel_prominence * max``."""
    r = np.asarray(spec.r_mean, dtype=float)
    padded = np.concatenate([[-np.inf], r, [-np.inf]])
    idx, _ = find_peaks(padded, prominence=rel_prominence * r.max())
    return idx - 1


def _crossing(x, y, i_from, i_to, level):
    """Linear-interpolated position where ``y`` first drops below ``level`` walking from ``i_from``."""
    step = 1 if i_to > i_from else -1
    for i in range(i_from, i_to, step):
        j = i + step
        if y[j] < level:
            return x[i] + (level - y[i]) * (x[j] - x[i]) / (y[j] - y[i]), False
    return x[i_to], True


def find_bandgap(spec: SpectrumTable, rel_prominence: float = 0.1) -> Bandgap:
    """Global reflection maximum and its full width at half maximum.

    Peaks equal to the maximum within 1e-12 are resolved in favour of the
    lowest detuning.  ``boundary`` is set when the peak or a half-maximum
    crossing falls on the grid edge.
    """
    x = np.asarray(spec.delta, dtype=float)
    r = np.asarray(spec.r_mean, dtype=float)
    if r.size == 0:
        raise ConfigError("empty spectrum")
    i_peak = int(np.flatnonzero(r >= r.max() - 1e-12)[0])
    peak = float(r[i_peak])
    lo, lo_edge = _crossing(x, r, i_peak, 0, peak / 2)
    hi, hi_edge = _crossing(x, r, i_peak, r.size - 1, peak / 2)
    peaks = reflection_peaks(spec, rel_prominence)
    return Bandgap(
        center=float(x[i_peak]),
        peak=peak,
        width=float(hi - lo),
        boundary=bool(i_peak in (0, r.size - 1) or lo_edge or hi_edge),
        multi_peak=bool(len(peaks) > 1),
        peaks=[float(x[i]) for i in peaks],
    )


def transparency_dip(spec: SpectrumTable, rel_prominence: float = 0.1) -> float | None:
    """Detuning of the reflection minimum between the two tallest peaks."""
    peaks = reflection_peaks(spec, rel_prominence)
    if len(peaks) < 2:
        return None
    top = np.sort(peaks[np.argsort(spec.r_mean[peaks])[-2:]])
    seg = slice(top[0], top[1] + 1)
    return float(spec.delta[seg][np.argmin(spec.r_mean[seg])])


# --------------------------------------------------------------------------
# switching curves
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class EnergyCalibration:
    """Control pulse energy to Rabi frequency: ``Omega_c^2 = kappa * E / tau_c``.

    ``E`` in fJ, ``tau_c`` in microseconds, ``Omega_c`` in MHz, so ``kappa``
    is in MHz^2 us / fJ.
    """

    kappa: float
    tau_c_us: float = 1.4

    def __post_init__(self):
        if not (self.kappa > 0 and self.tau_c_us > 0):
            raise ConfigError("calibration needs kappa > 0 and tau_c_us > 0")

    def omega_c(self, energy_fj):
        return np.sqrt(self.kappa * np.asarray(energy_fj, dtype=float) / self.tau_c_us)


@dataclass
class SwitchingCurve:
    energies: np.ndarray
    r: np.ndarray
    r_stderr: np.ndarray
    t: np.ndarray
    t_stderr: np.ndarray
    delta_i: float
    calibration: EnergyCalibration

    CSV_HEADER = ("energy_fj", "r", "r_stderr", "t", "t_stderr")

    def to_csv(self, path, comments=()):
        rows = (
            [float(v) for v in row] for row in zip(self.energies, self.r, self.r_stderr, self.t, self.t_stderr)
        )
        write_csv(path, self.CSV_HEADER, rows, comments)

    def monotonic(self) -> bool:
        """True when R never rises and T never falls with energy (1e-12 slack)."""
        return bool(np.all(np.diff(self.r) <= 1e-12) and np.all(np.diff(self.t) >= -1e-12))


def switching_response(p_base: AtomParams, cfg: LatticeConfig, delta_i: float, energies, cal: EnergyCalibration,
                       n_real: int, seed: int, workers=None):
    """Mean R and T (with standard errors) at ``delta_i`` for each control energy."""
    energies = np.asarray(energies, dtype=float)
    if np.any(energies < 0) or not np.all(np.isfinite(energies)):
        raise ConfigError("control energies must be finite and >= 0")
    omegas = cal.omega_c(energies)
    xi = np.array([atom_polarizability(p_base.with_control(float(o)), delta_i) for o in omegas], dtype=complex)
    r, t = ensemble_responses(xi, cfg, n_real, seed, workers)
    spec = SpectrumTable.from_samples(energies, r, t)
    return spec.r_mean, spec.r_stderr, spec.t_mean, spec.t_stderr


def switching_curve(p_base: AtomParams, cfg: LatticeConfig, delta_i: float, energies, cal: EnergyCalibration,
                    n_real: int = 200, seed: int = 0, workers=None) -> SwitchingCurve:
    """Ensemble R(E), T(E) at fixed probe detuning; ``E = 0`` is control off."""
    energies = np.asarray(energies, dtype=float)
    rm, rs, tm, ts = switching_response(p_base, cfg, delta_i, energies, cal, n_real, seed, workers)
    return SwitchingCurve(energies, rm, rs, tm, ts, float(delta_i), cal)


def decay_model(e, amplitude, e_char, offset):
    return amplitude * np.exp(-np.asarray(e) / e_char) + offset


def rise_model(e, amplitude, e_char, offset):
    return amplitude * (1 - np.exp(-np.asarray(e) / e_char)) + offset


def _exp_guess(e, y):
    offset = float(y[np.argmax(e)])
    start = float(y[np.argmin(e)])
    amp = start - offset
    dev = np.abs(y - offset)
    order = np.argsort(e)
    es, ds = e[order], dev[order]
    e_char = (es[-1] - es[0]) / 4 if es[-1] > es[0] else 1.0
    for i in range(1, es.size):
        if ds[i] <= abs(amp) / math.e < ds[i - 1]:
            f = (ds[i - 1] - abs(amp) / math.e) / (ds[i - 1] - ds[i])
            e_char = es[i - 1] + f * (es[i] - es[i - 1])
            break
    return amp, max(e_char, 1e-6 * max(es[-1], 1e-12)), offset


def fit_decay(e, y, max_iter=200) -> FitResult:
    """``y = A exp(-E / E_c) + c``; returns parameters (amplitude, e_char, offset)."""
    e, y = np.asarray(e, dtype=float), np.asarray(y, dtype=float)
    if e.size < 4:
        raise FitError(f"exponential fit needs at least 4 points, got {e.size}", {"n_points": int(e.size)})
    amp, ec, off = _exp_guess(e, y)

    def jac(p):
        a, c, _ = p
        x = np.exp(-e / c)
        return np.column_stack([x, a * x * e / c**2, np.ones_like(e)])

    return levenberg_marquardt(lambda p: decay_model(e, *p) - y, jac, [amp, ec, off],
                               names=("amplitude", "e_char", "offset"), max_iter=max_iter)


def fit_rise(e, y, max_iter=200) -> FitResult:
    """``y = A (1 - exp(-E / E_c)) + c``; returns parameters (amplitude, e_char, offset)."""
    e, y = np.asarray(e, dtype=float), np.asarray(y, dtype=float)
    if e.size < 4:
        raise FitError(f"exponential fit needs at least 4 points, got {e.size}", {"n_points": int(e.size)})
    amp, ec, off = _exp_guess(e, y)
    # for the rise form the value at E=0 is the offset and the amplitude is the total change
    amp, off = -amp, off + amp

    def jac(p):
        a, c, _ = p
        x = np.exp(-e / c)
        return np.column_stack([1 - x, -a * x * e / c**2, np.ones_like(e)])

    return levenberg_marquardt(lambda p: rise_model(e, *p) - y, jac, [amp, ec, off],
                               names=("amplitude", "e_char", "offset"), max_iter=max_iter)


@dataclass
class ExponentialFit:
    e_r: float
    e_r_err: float
    e_t: float
    e_t_err: float
    r_fit: FitResult
    t_fit: FitResult

    def to_dict(self) -> dict:
        return {
            "e_r_fj": self.e_r,
            "e_r_err_fj": self.e_r_err,
            "e_t_fj": self.e_t,
            "e_t_err_fj": self.e_t_err,
            "reflection_fit": self.r_fit.to_dict(),
            "transmission_fit": self.t_fit.to_dict(),
        }


def exponential_fit(curve: SwitchingCurve) -> ExponentialFit:
    """Characteristic switching energies of both ports with 1-sigma errors."""
    rf = fit_decay(curve.energies, curve.r)
    tf = fit_rise(curve.energies, curve.t)
    return ExponentialFit(rf["e_char"], rf.error("e_char"), tf["e_char"], tf.error("e_char"), rf, tf)


# --------------------------------------------------------------------------
# calibration
# --------------------------------------------------------------------------


def calibrate_kappa(p_base: AtomParams, cfg: LatticeConfig, delta_i: float, energies, cal: EnergyCalibration,
                    target_e_r: float = 0.16, n_real: int = 200, seed: int = 0, workers=None,
                    rtol: float = 1e-6, max_iter: int = 50) -> tuple[EnergyCalibration, ExponentialFit]:
    """Choose ``kappa`` so the simulated reflection switching energy equals ``target_e_r``.

    The response depends on ``kappa * E`` only, so ``E_R`` scales roughly
    as ``1 / kappa``; the update ``kappa <- kappa * E_R / target`` converges
    in a few steps.
    """
    kappa = cal.kappa
    for _ in range(max_iter):
        curve = switching_curve(p_base, cfg, delta_i, energies, replace(cal, kappa=kappa), n_real, seed, workers)
        fit = exponential_fit(curve)
        if abs(fit.e_r / target_e_r - 1) <= rtol:
            return replace(cal, kappa=kappa), fit
        kappa *= fit.e_r / target_e_r
    raise FitError("kappa calibration did not converge", {"kappa": kappa, "e_r_fj": fit.e_r})


def fit_kappa(p_base: AtomParams, cfg: LatticeConfig, delta_i: float, energies, r_data, t_data,
              cal: EnergyCalibration, n_real: int = 200, seed: int = 0, workers=None,
              fit_gamma_1d: bool = False) -> tuple[EnergyCalibration, AtomParams, FitResult]:
    """Least-squares ``kappa`` (and optionally ``gamma_1d``) against a measured switching curve.

    The model is the ensemble simulation itself, evaluated on the same
    realizations for every trial so the objective is smooth in the
    parameters.  Parameters are fitted in log space.
    """
    energies = np.asarray(energies, dtype=float)
    data = np.concatenate([np.asarray(r_data, dtype=float), np.asarray(t_data, dtype=float)])
    gamma_tot = p_base.gamma_tot

    def unpack(q):
        kappa = math.exp(q[0])
        p = p_base
        if fit_gamma_1d:
            g1d = min(math.exp(q[1]), gamma_tot)
            p = replace(p_base, gamma_1d=g1d, gamma_prime=gamma_tot - g1d)
        return kappa, p

    def resid(q):
        kappa, p = unpack(q)
        rm, _, tm, _ = switching_response(p, cfg, delta_i, energies, replace(cal, kappa=kappa), n_real, seed, workers)
        return np.concatenate([rm, tm]) - data

    q0 = [math.log(cal.kappa)] + ([math.log(p_base.gamma_1d)] if fit_gamma_1d else [])
    names = ("log_kappa",) + (("log_gamma_1d",) if fit_gamma_1d else ())
    res = levenberg_marquardt(resid, lambda q: numeric_jacobian(resid, q), q0, names=names, xtol=1e-12)
    kappa, p = unpack(res.params)
    return replace(cal, kappa=kappa), p, res
