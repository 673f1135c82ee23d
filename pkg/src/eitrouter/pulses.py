"""Time-domain routing of probe pulses and photon-counting detection.

The control field is treated as static while the probe pulse is present
(the control pulse is long and fully overlaps it), so the chain acts as a
linear filter: the output envelope of each port is the inverse Fourier
transform of the input spectrum multiplied by ``r`` or ``t``.

Two ensemble averages are produced.  The *incoherent* envelope averages
``|out(t)|^2`` over disorder realizations, which is what a detector
accumulating many shots (each with a fresh atom loading) records; its time
integral equals the mean reflection/transmission probability.  The
*coherent* envelope is ``|IFFT(<r> A)|^2`` built from the mean amplitude
response and is reported alongside for comparison.

Time is in ns, frequency in MHz.  With numpy's FFT sign convention the
Fourier component at frequency ``f`` has optical detuning ``delta_i - f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .ensemble import ensemble_responses
from .errors import ConfigError, GridSpanError
from .io import write_csv
from .lattice import LatticeConfig, make_rng
from .scatter import AtomParams, atom_polarizability

# intensity-spectrum FWHM times pulse FWHM
_GAUSS_TBP = 2 * math.log(2) / math.pi
_SQUARE_TBP = 0.885893


@dataclass(frozen=True)
class PulseSpec:
    """Probe pulse: Gaussian (intensity FWHM) or square (full duration)."""

    shape: str = "gaussian"
    fwhm_ns: float = 300.0
    detuning: float = 14.7
    mean_photons: float = 1.0

    def __post_init__(self):
        if self.shape not in ("gaussian", "square"):
            raise ConfigError(f"pulse shape must be 'gaussian' or 'square', got {self.shape!r}")
        if not self.fwhm_ns > 0:
            raise ConfigError("pulse duration must be > 0")
        if not self.mean_photons >= 0:
            raise ConfigError("mean photon number must be >= 0")

    @property
    def spectral_fwhm_mhz(self) -> float:
        tbp = _GAUSS_TBP if self.shape == "gaussian" else _SQUARE_TBP
        return tbp / (self.fwhm_ns * 1e-3)

    def amplitude(self, t_ns: np.ndarray) -> np.ndarray:
        """Unnormalized field envelope centred on ``t = 0``."""
        if self.shape == "gaussian":
            return np.exp(-2 * math.log(2) * (t_ns / self.fwhm_ns) ** 2)
        return (np.abs(t_ns) <= self.fwhm_ns / 2).astype(float)


@dataclass(frozen=True)
class PulseGrid:
    """FFT grid: ``n_points`` samples spanning ``span_mhz`` around the carrier."""

    n_points: int = 1 << 14
    span_mhz: float = 128.0
    bin_ns: float = 20.0
    support_tol: float = 1e-15

    def __post_init__(self):
        if self.n_points < 16 or self.span_mhz <= 0 or self.bin_ns <= 0:
            raise ConfigError("pulse grid needs n_points >= 16, span_mhz > 0, bin_ns > 0")

    @property
    def dt_ns(self) -> float:
        return 1e3 / self.span_mhz

    @property
    def window_ns(self) -> float:
        return self.n_points * self.dt_ns

    def times(self) -> np.ndarray:
        # a quarter of the window precedes the pulse centre
        return (np.arange(self.n_points) - self.n_points // 4) * self.dt_ns

    def frequencies(self) -> np.ndarray:
        return np.fft.fftfreq(self.n_points, d=self.dt_ns * 1e-3)


def check_grid(pulse: PulseSpec, grid: PulseGrid, auto_widen: bool = False) -> PulseGrid:
    """Ensure the grid spans 8x the pulse bandwidth and the window 12x its duration.

    With ``auto_widen`` the span and point count are increased (by powers of
    two) instead of raising :class:`GridSpanError`.
    """
    need_span = 8 * pulse.spectral_fwhm_mhz
    need_window = 12 * pulse.fwhm_ns
    if grid.span_mhz >= need_span and grid.window_ns >= need_window:
        return grid
    if not auto_widen:
        raise GridSpanError(
            f"pulse grid too small: need span >= {need_span:.6g} MHz (have {grid.span_mhz:.6g}) "
            f"and window >= {need_window:.6g} ns (have {grid.window_ns:.6g})",
            need_span,
        )
    span, n = grid.span_mhz, grid.n_points
    while span < need_span:
        span *= 2
        n *= 2
    while n * 1e3 / span < need_window:
        n *= 2
    return replace(grid, span_mhz=span, n_points=n)


@dataclass
class PulseResult:
    """Binned output envelopes (mean photons per bin) and optional counts."""

    time_ns: np.ndarray  # bin centres
    input: np.ndarray
    refl_mean: np.ndarray
    trans_mean: np.ndarray
    refl_coherent: np.ndarray
    trans_coherent: np.ndarray
    refl_energy: float
    trans_energy: float
    refl_energy_spectral: float
    trans_energy_spectral: float
    mean_photons: float
    refl_counts: np.ndarray | None = None
    trans_counts: np.ndarray | None = None
    n_shots: int = 0
    efficiency: float = 1.0

    @property
    def refl_probability(self) -> float:
        return self.refl_energy / self.mean_photons if self.mean_photons else 0.0

    @property
    def trans_probability(self) -> float:
        return self.trans_energy / self.mean_photons if self.mean_photons else 0.0

    CSV_HEADER = ("time_ns", "refl_mean", "refl_counts", "trans_mean", "trans_counts")

    def to_csv(self, path, comments=()):
        n = self.time_ns.size
        rc = self.refl_counts if self.refl_counts is not None else [None] * n
        tc = self.trans_counts if self.trans_counts is not None else [None] * n
        rows = (
            [float(t), float(r), None if a is None else int(a), float(x), None if b is None else int(b)]
            for t, r, a, x, b in zip(self.time_ns, self.refl_mean, rc, self.trans_mean, tc)
        )
        write_csv(path, self.CSV_HEADER, rows, comments)

    def coherent_to_csv(self, path, comments=()):
        rows = ([float(t), float(r), float(x)] for t, r, x in zip(self.time_ns, self.refl_coherent, self.trans_coherent))
        write_csv(path, ("time_ns", "refl_coherent", "trans_coherent"), rows, comments)


def _bin(energy_per_sample: np.ndarray, times: np.ndarray, dt: float, bin_ns: float):
    """Integrate per-sample energies into bins of width ``bin_ns`` (exact totals)."""
    start, stop = times[0], times[-1] + dt
    edges = np.arange(start, stop, bin_ns)
    edges = np.append(edges, stop)
    cum = np.concatenate([[0.0], np.cumsum(energy_per_sample, axis=-1)])
    bounds = np.append(times, stop)
    binned = np.diff(np.interp(edges, bounds, cum))
    return 0.5 * (edges[:-1] + edges[1:]), binned


def pulse_from_responses(pulse: PulseSpec, grid: PulseGrid, response) -> PulseResult:
    """Filter the input pulse through per-realization responses.

    ``response(detunings)`` returns complex ``(r, t)`` arrays of shape
    ``(n_real, len(detunings))``.  It is only evaluated where the input
    spectral power exceeds ``grid.support_tol`` of its peak; the discarded
    components carry a negligible fraction of the pulse energy.
    """
    times = grid.times()
    dt = grid.dt_ns
    a = pulse.amplitude(times).astype(complex)
    norm = np.sum(np.abs(a) ** 2) * dt
    a *= math.sqrt(pulse.mean_photons / norm) if norm > 0 else 0.0
    spec = np.fft.fft(a)
    power = np.abs(spec) ** 2
    support = np.flatnonzero(power > grid.support_tol * power.max()) if power.max() > 0 else np.arange(0)
    detunings = pulse.detuning - grid.frequencies()[support]

    r, t = response(detunings)
    n_real = r.shape[0]
    a_s = spec[support]
    n = grid.n_points

    def envelope(amp_rows):
        full = np.zeros((amp_rows.shape[0], n), dtype=complex)
        full[:, support] = amp_rows * a_s
        return np.abs(np.fft.ifft(full, axis=-1)) ** 2

    out = {}
    for name, resp in (("refl", r), ("trans", t)):
        acc = np.zeros(n)
        for lo in range(0, n_real, 32):
            acc += envelope(resp[lo : lo + 32]).sum(axis=0)
        out[name] = acc / n_real
        out[name + "_coh"] = envelope(resp.sum(axis=0, keepdims=True) / n_real)[0]
        out[name + "_spec"] = float(np.sum((np.abs(resp) ** 2).sum(axis=0) / n_real * np.abs(a_s) ** 2) * dt / n)

    # the input as injected: band-limited to the evaluated support
    centres, inp = _bin(envelope(np.ones((1, support.size)))[0] * dt, times, dt, grid.bin_ns)
    binned = {k: _bin(out[k] * dt, times, dt, grid.bin_ns)[1] for k in ("refl", "trans", "refl_coh", "trans_coh")}
    return PulseResult(
        time_ns=centres,
        input=inp,
        refl_mean=binned["refl"],
        trans_mean=binned["trans"],
        refl_coherent=binned["refl_coh"],
        trans_coherent=binned["trans_coh"],
        refl_energy=float(out["refl"].sum() * dt),
        trans_energy=float(out["trans"].sum() * dt),
        refl_energy_spectral=out["refl_spec"],
        trans_energy_spectral=out["trans_spec"],
        mean_photons=pulse.mean_photons,
    )


def _ensemble_response(params_list, cfg, n_real, seed, workers):
    """Response callback evaluating several parameter sets on shared realizations."""
    cache = {}

    def for_params(k):
        def response(detunings):
            if "rt" not in cache:
                xi = np.concatenate([atom_polarizability(p, detunings) for p in params_list])
                cache["rt"] = ensemble_responses(xi, cfg, n_real, seed, workers)
                cache["n"] = detunings.size
            r, t = cache["rt"]
            m = cache["n"]
            return r[:, k * m : (k + 1) * m], t[:, k * m : (k + 1) * m]

        return response

    return for_params


def propagate_pulse(
    p: AtomParams,
    cfg: LatticeConfig,
    pulse: PulseSpec,
    n_real: int = 100,
    seed: int = 0,
    grid: PulseGrid = PulseGrid(),
    workers: int | None = None,
    auto_widen: bool = False,
) -> PulseResult:
    """Ensemble-averaged output envelopes of both ports (no counts yet)."""
    grid = check_grid(pulse, grid, auto_widen)
    return pulse_from_responses(pulse, grid, _ensemble_response([p], cfg, n_real, seed, workers)(0))


def detect(result: PulseResult, n_shots: int, efficiency: float = 1.0, seed: int = 0) -> PulseResult:
    """Poisson counts per bin with mean ``envelope * efficiency * n_shots``."""
    if not 0 <= efficiency <= 1:
        raise ConfigError(f"detection efficiency must be in [0, 1], got {efficiency}")
    if n_shots < 0:
        raise ConfigError("n_shots must be >= 0")
    rng = make_rng(seed)
    scale = efficiency * n_shots
    refl = rng.poisson(np.clip(result.refl_mean, 0, None) * scale)
    trans = rng.poisson(np.clip(result.trans_mean, 0, None) * scale)
    return replace(result, refl_counts=refl, trans_counts=trans, n_shots=int(n_shots), efficiency=float(efficiency))


@dataclass
class TruthTable:
    off: PulseResult
    on: PulseResult
    efficiency: float = 1.0

    def probabilities(self) -> dict:
        return {
            "control_off": {"reflection": self.off.refl_probability, "transmission": self.off.trans_probability},
            "control_on": {"reflection": self.on.refl_probability, "transmission": self.on.trans_probability},
        }

    def detected(self) -> dict | None:
        if not self.off.n_shots:
            return None
        out = {}
        for name, res in (("control_off", self.off), ("control_on", self.on)):
            out[name] = {
                "reflection_counts": int(res.refl_counts.sum()),
                "transmission_counts": int(res.trans_counts.sum()),
                "reflection_per_shot": float(res.refl_counts.sum() / res.n_shots),
                "transmission_per_shot": float(res.trans_counts.sum() / res.n_shots),
            }
        return out

    def is_binary(self) -> bool:
        """Reflection dominates without control and transmission with it."""
        p = self.probabilities()
        return (
            p["control_off"]["reflection"] > p["control_off"]["transmission"]
            and p["control_on"]["transmission"] > p["control_on"]["reflection"]
        )

    def to_dict(self) -> dict:
        return {
            "probabilities": self.probabilities(),
            "detected": self.detected(),
            "n_shots": self.off.n_shots,
            "efficiency": self.efficiency,
            "binary": self.is_binary(),
        }


def truth_table(
    p_on: AtomParams,
    p_off: AtomParams,
    cfg: LatticeConfig,
    pulse: PulseSpec,
    n_shots: int = 0,
    seed: int = 0,
    n_real: int = 100,
    efficiency: float = 1.0,
    grid: PulseGrid = PulseGrid(),
    workers: int | None = None,
    auto_widen: bool = False,
) -> TruthTable:
    """Both ports with and without control, on one shared realization set."""
    grid = check_grid(pulse, grid, auto_widen)
    responses = _ensemble_response([p_off, p_on], cfg, n_real, seed, workers)
    off = pulse_from_responses(pulse, grid, responses(0))
    on = pulse_from_responses(pulse, grid, responses(1))
    if n_shots:
        off = detect(off, n_shots, efficiency, seed=seed ^ 0x5EED0FF)
        on = detect(on, n_shots, efficiency, seed=seed ^ 0x5EED00)
    return TruthTable(off, on, efficiency)
