"""Command-line front end: ``eitrouter {spectrum,switching,extinction,pulse,fit}``.

Every command writes CSV/JSON data plus SVG figures into ``--out`` and
embeds the resolved configuration in each file.  Exit codes: 0 success,
2 configuration or input error, 3 fit failure, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .analysis import (
    calibrate_kappa,
    exponential_fit,
    extinction_ratio,
    find_bandgap,
    fit_kappa,
    lorentzian_fit,
    switching_curve,
    transparency_dip,
)
from .config import RunConfig, load_config
from .ensemble import average_spectrum, spectrum_pair
from .errors import ConfigError, FitError, RouterError
from .io import provenance_lines, read_csv_rows, write_json
from .pulses import check_grid, truth_table

log = logging.getLogger("eitrouter")

EXIT_OK, EXIT_INPUT, EXIT_FIT, EXIT_NUMERIC = 0, 2, 3, 4


class _Run:
    """Resolved config plus output helpers shared by the commands."""

    def __init__(self, cfg: RunConfig, command: str):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.config = cfg.resolved()
        self.comments = provenance_lines(self.config) + [f"command: {command}"]

    def path(self, name: str) -> Path:
        return self.out / name

    def json(self, name: str, payload: dict):
        write_json(self.path(name), payload, self.config)


def _plotting():
    from . import plotting

    return plotting


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------


def cmd_spectrum(cfg: RunConfig, args) -> int:
    run = _Run(cfg, f"spectrum --control {args.control}")
    grid = cfg.detuning_grid()
    lat = cfg.lattice_config()
    n_real = cfg.ensemble.n_realizations
    p_on, p_off = cfg.atom_params(), cfg.atom_params(0.0)
    on = off = None
    if args.control == "both":
        on, off = spectrum_pair(p_on, p_off, lat, grid, n_real, cfg.seed, cfg.workers, run.config)
    elif args.control == "on":
        on = average_spectrum(p_on, lat, grid, n_real, cfg.seed, cfg.workers, run.config)
    else:
        off = average_spectrum(p_off, lat, grid, n_real, cfg.seed, cfg.workers, run.config)
    summary = {}
    for tag, spec in (("control_off", off), ("control_on", on)):
        if spec is None:
            continue
        spec.to_csv(run.path(f"spectrum_{tag.split('_')[1]}.csv"), run.comments)
        gap = find_bandgap(spec)
        summary[tag] = {
            "bandgap_center_mhz": gap.center,
            "peak_reflection": gap.peak,
            "bandgap_width_mhz": gap.width,
            "at_grid_boundary": gap.boundary,
            "reflection_peaks_mhz": list(gap.peaks),
            "transparency_dip_mhz": transparency_dip(spec),
        }
    run.json("spectrum.json", summary)
    _plotting().plot_spectrum(run.path("spectrum.svg"), off, on)
    for tag, s in summary.items():
        print(f"{tag}: bandgap center {s['bandgap_center_mhz']:.3f} MHz, peak R {s['peak_reflection']:.4f}, "
              f"dip {s['transparency_dip_mhz']}")
    return EXIT_OK


def _energies(cfg: RunConfig, text: str | None) -> np.ndarray:
    if text is None:
        return cfg.energies()
    try:
        values = np.array([float(v) for v in text.split(",") if v.strip()], dtype=float)
    except ValueError:
        raise ConfigError(f"--energies must be a comma-separated list of numbers, got {text!r}") from None
    if values.size == 0:
        raise ConfigError("--energies is empty")
    return values


def _write_calibration(run: _Run, cfg: RunConfig, kappa: float, extra: dict | None = None):
    block = {"calibration": {"kappa": float(kappa), "tau_c_us": cfg.calibration.tau_c_us,
                             "target_e_r_fj": cfg.calibration.target_e_r_fj}}
    if extra:
        block.update(extra)
    text = "".join(f"# {line}\n" for line in run.comments) + yaml.safe_dump(block, sort_keys=True)
    run.path("calibration.yaml").write_text(text)


def cmd_switching(cfg: RunConfig, args) -> int:
    delta = cfg.analysis.switching_detuning_mhz if args.detuning is None else args.detuning
    run = _Run(cfg, f"switching --detuning {delta!r}")
    energies = _energies(cfg, args.energies)
    p_base = cfg.atom_params()
    lat = cfg.lattice_config()
    n_real = cfg.ensemble.n_realizations
    cal = cfg.calibration_model()
    report: dict = {"detuning_mhz": delta}
    if args.calibrate:
        cal, _ = calibrate_kappa(p_base, lat, delta, energies, cal, cfg.calibration.target_e_r_fj,
                                 n_real, cfg.seed, cfg.workers)
        report["calibrated_kappa"] = cal.kappa
        _write_calibration(run, cfg, cal.kappa)
    curve = switching_curve(p_base, lat, delta, energies, cal, n_real, cfg.seed, cfg.workers)
    curve.to_csv(run.path("switching.csv"), run.comments)
    report["kappa"] = cal.kappa
    try:
        fit = exponential_fit(curve)
    except FitError as exc:
        report["fit_error"] = {"message": str(exc), **exc.report}
        run.json("switching_fit.json", report)
        _plotting().plot_switching(run.path("switching.svg"), curve)
        raise
    report.update(fit.to_dict())
    report["reflection_switches_first"] = bool(fit.e_r < fit.e_t)
    run.json("switching_fit.json", report)
    _plotting().plot_switching(run.path("switching.svg"), curve, fit)
    print(f"E_R = {fit.e_r:.6g} +- {fit.e_r_err:.2g} fJ, E_T = {fit.e_t:.6g} +- {fit.e_t_err:.2g} fJ "
          f"(kappa {cal.kappa:.6g})")
    return EXIT_OK


def cmd_extinction(cfg: RunConfig, args) -> int:
    run = _Run(cfg, f"extinction --port {args.port}")
    grid = cfg.detuning_grid()
    on, off = spectrum_pair(cfg.atom_params(), cfg.atom_params(0.0), cfg.lattice_config(), grid,
                            cfg.ensemble.n_realizations, cfg.seed, cfg.workers, run.config)
    curves = {}
    for port in ("reflection", "transmission"):
        curves[port] = extinction_ratio(off, on, port, cfg.analysis.er_floor)
        curves[port].to_csv(run.path(f"extinction_{port}.csv"), run.comments)
    curve = curves[args.port]
    report: dict = {"port": args.port, "masked_points": int((~curve.mask).sum())}
    try:
        fit = lorentzian_fit(curve)
    except FitError as exc:
        report["fit_error"] = {"message": str(exc), **exc.report}
        run.json("extinction.json", report)
        _plotting().plot_extinction(run.path("extinction.svg"), list(curves.values()))
        raise
    report.update(fit.to_dict())
    run.json("extinction.json", report)
    _plotting().plot_extinction(run.path("extinction.svg"), list(curves.values()), fit)
    bw = "n/a" if fit.bandwidth_3db is None else f"{fit.bandwidth_3db:.4g} MHz"
    print(f"{args.port} extinction: peak {fit.peak:.4g} dB at {fit.center:.4g} MHz, 3-dB bandwidth {bw}")
    return EXIT_OK


def cmd_pulse(cfg: RunConfig, args) -> int:
    shots = cfg.pulse.n_shots if args.shots is None else args.shots
    if shots < 0:
        raise ConfigError("--shots must be >= 0")
    run = _Run(cfg, f"pulse --shots {shots}")
    pulse = cfg.pulse_spec()
    grid = check_grid(pulse, cfg.pulse_grid(), auto_widen=True)
    omega_on = cfg.pulse_control_omega()
    table = truth_table(
        cfg.atom_params(omega_on), cfg.atom_params(0.0), cfg.lattice_config(), pulse, shots, cfg.seed,
        cfg.pulse.n_realizations, cfg.pulse.efficiency, grid, cfg.workers,
    )
    for tag, res in (("off", table.off), ("on", table.on)):
        res.to_csv(run.path(f"pulse_{tag}.csv"), run.comments)
        res.coherent_to_csv(run.path(f"pulse_coherent_{tag}.csv"), run.comments)
    payload = table.to_dict()
    payload["control_omega_mhz"] = omega_on
    payload["grid"] = {"n_points": grid.n_points, "span_mhz": grid.span_mhz, "bin_ns": grid.bin_ns}
    payload["parseval"] = {
        tag: {"reflection": [res.refl_energy, res.refl_energy_spectral],
              "transmission": [res.trans_energy, res.trans_energy_spectral]}
        for tag, res in (("control_off", table.off), ("control_on", table.on))
    }
    run.json("truth_table.json", payload)
    plots = _plotting()
    plots.plot_pulse(run.path("pulse.svg"), table.off, table.on)
    plots.plot_truth_table(run.path("truth_table.svg"), table.probabilities())
    for state, probs in table.probabilities().items():
        print(f"{state}: R {probs['reflection']:.4f}  T {probs['transmission']:.4f}")
    print("binary routing" if table.is_binary() else "no binary contrast")
    return EXIT_OK


def read_switching_data(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read ``energy_fj, r, t`` columns; errors name the offending line."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"{path}: no such file")
    header, rows = read_csv_rows(path)
    if header is None:
        raise ConfigError(f"{path}: file is empty")
    missing = [c for c in ("energy_fj", "r", "t") if c not in header]
    if missing:
        raise ConfigError(f"{path}: header lacks column(s) {', '.join(missing)}")
    if not rows:
        raise ConfigError(f"{path}: no data rows")
    cols = {"energy_fj": [], "r": [], "t": []}
    for lineno, row, ok in rows:
        if not ok:
            raise ConfigError(f"{path}: row at line {lineno} has the wrong number of fields")
        for key, out in cols.items():
            try:
                value = float(row[key])
            except ValueError:
                raise ConfigError(f"{path}: row at line {lineno}: {key} = {row[key]!r} is not a number") from None
            if not math.isfinite(value):
                raise ConfigError(f"{path}: row at line {lineno}: {key} is not finite")
            out.append(value)
    e = np.array(cols["energy_fj"])
    if np.any(e < 0):
        raise ConfigError(f"{path}: energies must be >= 0")
    return e, np.array(cols["r"]), np.array(cols["t"])


def cmd_fit(cfg: RunConfig, args) -> int:
    energies, r, t = read_switching_data(args.data)
    delta = cfg.analysis.switching_detuning_mhz if args.detuning is None else args.detuning
    run = _Run(cfg, f"fit --detuning {delta!r}" + (" --fit-gamma-1d" if args.fit_gamma_1d else ""))
    lat = cfg.lattice_config()
    n_real = cfg.ensemble.n_realizations
    if energies.size < 1 + args.fit_gamma_1d:
        raise FitError(f"need at least {1 + args.fit_gamma_1d} data points, got {energies.size}")
    cal, p_fit, res = fit_kappa(cfg.atom_params(), lat, delta, energies, r, t, cfg.calibration_model(),
                                n_real, cfg.seed, cfg.workers, args.fit_gamma_1d)
    report = {
        "detuning_mhz": delta,
        "kappa": cal.kappa,
        "kappa_stderr": cal.kappa * res.error("log_kappa"),
        "residual_norm": res.residual_norm,
        "fit": res.to_dict(),
    }
    extra = None
    if args.fit_gamma_1d:
        frac = p_fit.gamma_1d / p_fit.gamma_tot
        report["gamma_1d_mhz"] = p_fit.gamma_1d
        report["gamma_1d_fraction"] = frac
        extra = {"atom": {"gamma_1d_fraction": frac}}
    # switching energies implied by the fitted model
    curve = switching_curve(p_fit, lat, delta, energies, cal, n_real, cfg.seed, cfg.workers) if energies.size >= 4 else None
    if curve is not None:
        try:
            fit = exponential_fit(curve)
            report["model_switching"] = {"e_r_fj": fit.e_r, "e_t_fj": fit.e_t,
                                         "reflection_switches_first": bool(fit.e_r < fit.e_t)}
        except FitError as exc:
            report["model_switching"] = {"fit_error": str(exc)}
    _write_calibration(run, cfg, cal.kappa, extra)
    run.json("fit_report.json", report)
    print(f"kappa = {cal.kappa:.10g} (residual norm {res.residual_norm:.3g})")
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _global_options(defaults: bool) -> argparse.ArgumentParser:
    """Global flags, accepted both before and after the subcommand."""
    p = argparse.ArgumentParser(add_help=False)
    d = {} if defaults else {"default": argparse.SUPPRESS}
    p.add_argument("--config", help="config file or preset name (default, paper-preset)", **d)
    p.add_argument("--seed", type=int, help="master seed (overrides config)", **d)
    p.add_argument("--workers", type=int, help="worker threads (overrides config and EITROUTER_WORKERS)", **d)
    p.add_argument("--out", help="output directory (overrides config)", **d)
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging", **d)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eitrouter",
        description="Simulate and analyse an EIT atom-array optical router on a nanofiber.",
        parents=[_global_options(True)],
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    common = [_global_options(False)]

    p = sub.add_parser("spectrum", parents=common, help="ensemble R/T spectra with and without control")
    p.add_argument("--control", choices=("on", "off", "both"), default="both")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("switching", parents=common, help="R, T versus control energy with exponential fits")
    p.add_argument("--detuning", type=float, help="probe detuning in MHz")
    p.add_argument("--energies", help="comma-separated control energies in fJ")
    p.add_argument("--calibrate", action="store_true", help="first tune kappa so E_R hits its target")
    p.set_defaults(func=cmd_switching)

    p = sub.add_parser("extinction", parents=common, help="extinction ratio spectrum with Lorentzian fit")
    p.add_argument("--port", choices=("reflection", "transmission"), default="reflection",
                   help="port whose curve is fitted")
    p.set_defaults(func=cmd_extinction)

    p = sub.add_parser("pulse", parents=common, help="pulse routing truth table and time histograms")
    p.add_argument("--shots", type=int, help="number of shots for photon counting (0: envelopes only)")
    p.set_defaults(func=cmd_pulse)

    p = sub.add_parser("fit", parents=common, help="fit the energy calibration to a switching curve")
    p.add_argument("--data", required=True, help="CSV with columns energy_fj, r, t")
    p.add_argument("--detuning", type=float, help="probe detuning of the data in MHz")
    p.add_argument("--fit-gamma-1d", action="store_true", help="also fit the guided coupling rate")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(args.seed, args.workers, args.out)
        log.debug("config %s, seed %s", cfg.source, cfg.seed)
        return args.func(cfg, args)
    except ConfigError as exc:
        print(f"eitrouter: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except FitError as exc:
        detail = "".join(f"\n  {k}: {v}" for k, v in exc.report.items())
        print(f"eitrouter: fit failed: {exc}{detail}", file=sys.stderr)
        return EXIT_FIT
    except (RouterError, ArithmeticError) as exc:
        print(f"eitrouter: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"eitrouter: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
