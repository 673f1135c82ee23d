"""Run configuration: a YAML tree validated against typed sections.

Every error names the dotted key and, where the key appears in the file,
its line number.  Unknown keys are rejected so typos never pass silently.
"""

from __future__ import annotations

import math
import types
import typing
from dataclasses import MISSING, asdict, dataclass, field, fields, replace
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .analysis import ER_FLOOR, EnergyCalibration
from .constants import cs_d2_linewidth_mhz, cs_d2_wavelength_nm
from .ensemble import detuning_grid
from .errors import ConfigError
from .lattice import LatticeConfig
from .pulses import PulseGrid, PulseSpec
from .scatter import AtomParams, propagation_phase

PRESETS = ("default", "paper-preset")

DEFAULT_ENERGIES_FJ = tuple([0.0] + np.geomspace(0.02, 3.0, 19).tolist())


@dataclass(frozen=True)
class AtomSection:
    gamma_1d_fraction: float
    omega_c_mhz: float
    delta_c_mhz: float
    gamma_tot_mhz: float | None = None
    gamma_gs_mhz: float = 0.0


@dataclass(frozen=True)
class LatticeSection:
    n_atoms: int
    filling: float
    trap_offset_nm: float
    n_sites: int | None = None
    probe_wavelength_nm: float | None = None
    position_jitter_rms: float = 0.0


@dataclass(frozen=True)
class EnsembleSection:
    n_realizations: int = 200
    detuning_min_mhz: float = -30.0
    detuning_max_mhz: float = 40.0
    detuning_step_mhz: float = 0.25


@dataclass(frozen=True)
class PulseSection:
    shape: str = "gaussian"
    fwhm_ns: float = 300.0
    detuning_mhz: float = 14.7
    mean_photons: float = 1.0
    control_energy_fj: float | None = None
    n_points: int = 1 << 14
    span_mhz: float = 128.0
    bin_ns: float = 20.0
    n_realizations: int = 100
    efficiency: float = 1.0
    n_shots: int = 4000


@dataclass(frozen=True)
class CalibrationSection:
    kappa: float
    tau_c_us: float = 1.4
    target_e_r_fj: float = 0.16


@dataclass(frozen=True)
class AnalysisSection:
    switching_detuning_mhz: float = 14.7
    energies_fj: list[float] | None = None
    er_floor: float = ER_FLOOR


# dotted key -> (predicate, requirement text)
_CHECKS = {
    "atom.gamma_1d_fraction": (lambda v: 0 < v <= 1, "must be in (0, 1]"),
    "atom.omega_c_mhz": (lambda v: v >= 0, "must be >= 0"),
    "atom.gamma_tot_mhz": (lambda v: v is None or v > 0, "must be > 0"),
    "atom.gamma_gs_mhz": (lambda v: v >= 0, "must be >= 0"),
    "lattice.n_atoms": (lambda v: v > 0, "must be > 0"),
    "lattice.filling": (lambda v: 0 < v <= 1, "must be in (0, 1]"),
    "lattice.n_sites": (lambda v: v is None or v >= 1, "must be >= 1"),
    "lattice.probe_wavelength_nm": (lambda v: v is None or v > 0, "must be > 0"),
    "lattice.position_jitter_rms": (lambda v: v >= 0, "must be >= 0"),
    "ensemble.n_realizations": (lambda v: v >= 1, "must be >= 1"),
    "ensemble.detuning_step_mhz": (lambda v: v > 0, "must be > 0"),
    "pulse.shape": (lambda v: v in ("gaussian", "square"), "must be 'gaussian' or 'square'"),
    "pulse.fwhm_ns": (lambda v: v > 0, "must be > 0"),
    "pulse.mean_photons": (lambda v: v >= 0, "must be >= 0"),
    "pulse.control_energy_fj": (lambda v: v is None or v >= 0, "must be >= 0"),
    "pulse.n_points": (lambda v: v >= 16, "must be >= 16"),
    "pulse.span_mhz": (lambda v: v > 0, "must be > 0"),
    "pulse.bin_ns": (lambda v: v > 0, "must be > 0"),
    "pulse.n_realizations": (lambda v: v >= 1, "must be >= 1"),
    "pulse.efficiency": (lambda v: 0 <= v <= 1, "must be in [0, 1]"),
    "pulse.n_shots": (lambda v: v >= 0, "must be >= 0"),
    "calibration.kappa": (lambda v: v > 0, "must be > 0"),
    "calibration.tau_c_us": (lambda v: v > 0, "must be > 0"),
    "calibration.target_e_r_fj": (lambda v: v > 0, "must be > 0"),
    "analysis.energies_fj": (lambda v: v is None or (len(v) > 0 and min(v) >= 0), "must be a non-empty list of values >= 0"),
    "analysis.er_floor": (lambda v: v > 0, "must be > 0"),
    "seed": (lambda v: 0 <= v < 2**64, "must be in [0, 2**64)"),
    "workers": (lambda v: v is None or v >= 1, "must be >= 1"),
}


@dataclass(frozen=True)
class RunConfig:
    atom: AtomSection
    lattice: LatticeSection
    calibration: CalibrationSection
    ensemble: EnsembleSection = field(default_factory=EnsembleSection)
    pulse: PulseSection = field(default_factory=PulseSection)
    analysis: AnalysisSection = field(default_factory=AnalysisSection)
    seed: int = 0
    workers: int | None = None
    out_dir: str = "out"
    source: str = field(default="<memory>", compare=False)

    # ---- derived objects ---------------------------------------------------

    @property
    def gamma_tot(self) -> float:
        g = self.atom.gamma_tot_mhz
        return cs_d2_linewidth_mhz() if g is None else g

    @property
    def probe_wavelength_nm(self) -> float:
        w = self.lattice.probe_wavelength_nm
        return cs_d2_wavelength_nm() if w is None else w

    def atom_params(self, omega_c: float | None = None) -> AtomParams:
        """Atom parameters; ``omega_c`` overrides the configured control (0 = off)."""
        a = self.atom
        oc = a.omega_c_mhz if omega_c is None else omega_c
        return AtomParams.from_fraction(
            self.gamma_tot, a.gamma_1d_fraction, omega_c=oc, delta_c=a.delta_c_mhz, gamma_gs=a.gamma_gs_mhz
        )

    def lattice_config(self) -> LatticeConfig:
        lat = self.lattice
        phase = propagation_phase(self.probe_wavelength_nm, self.probe_wavelength_nm + lat.trap_offset_nm)
        return LatticeConfig(
            n_atoms_target=lat.n_atoms,
            filling=lat.filling,
            n_sites=lat.n_sites,
            phase_per_site=phase,
            position_jitter_rms=lat.position_jitter_rms,
        )

    def detuning_grid(self) -> np.ndarray:
        e = self.ensemble
        return detuning_grid(e.detuning_min_mhz, e.detuning_max_mhz, e.detuning_step_mhz)

    def calibration_model(self) -> EnergyCalibration:
        return EnergyCalibration(self.calibration.kappa, self.calibration.tau_c_us)

    def energies(self) -> np.ndarray:
        e = self.analysis.energies_fj
        return np.array(DEFAULT_ENERGIES_FJ if e is None else e, dtype=float)

    def pulse_spec(self) -> PulseSpec:
        p = self.pulse
        return PulseSpec(p.shape, p.fwhm_ns, p.detuning_mhz, p.mean_photons)

    def pulse_grid(self) -> PulseGrid:
        return PulseGrid(self.pulse.n_points, self.pulse.span_mhz, self.pulse.bin_ns)

    def pulse_control_omega(self) -> float:
        """Control Rabi frequency used for the control-on pulse."""
        e = self.pulse.control_energy_fj
        if e is None:
            return self.atom.omega_c_mhz
        return float(self.calibration_model().omega_c(e))

    def resolved(self) -> dict:
        """Every setting that affects results, with defaults and constants filled in.

        Worker count and output directory are left out: they never change
        the numbers, and omitting them keeps outputs byte-identical.
        """
        d = asdict(self)
        for key in ("source", "workers", "out_dir"):
            d.pop(key)
        d["atom"]["gamma_tot_mhz"] = self.gamma_tot
        d["lattice"]["probe_wavelength_nm"] = self.probe_wavelength_nm
        d["lattice"]["n_sites"] = self.lattice_config().n_sites
        d["analysis"]["energies_fj"] = self.energies().tolist()
        return d

    def with_overrides(self, seed=None, workers=None, out_dir=None) -> "RunConfig":
        kw = {}
        if seed is not None:
            _check("seed", seed, None)
            kw["seed"] = seed
        if workers is not None:
            _check("workers", workers, None)
            kw["workers"] = workers
        if out_dir is not None:
            kw["out_dir"] = str(out_dir)
        return replace(self, **kw)


_SECTIONS = {
    "atom": AtomSection,
    "lattice": LatticeSection,
    "ensemble": EnsembleSection,
    "pulse": PulseSection,
    "calibration": CalibrationSection,
    "analysis": AnalysisSection,
}


def _where(source, node) -> str:
    return f"{source}:{node.start_mark.line + 1}" if node is not None else source


def _check(key, value, node, source="<config>"):
    test = _CHECKS.get(key)
    if test and not test[0](value):
        raise ConfigError(f"{_where(source, node)}: {key} {test[1]}, got {value!r}")


def _coerce(value, hint, key, node, source):
    """Convert a YAML scalar to the annotated field type or raise with location."""
    optional = False
    if isinstance(hint, types.UnionType) or typing.get_origin(hint) is typing.Union:
        args = [a for a in typing.get_args(hint) if a is not type(None)]
        optional, hint = True, args[0]
    if value is None:
        if optional:
            return None
        raise ConfigError(f"{_where(source, node)}: {key} must not be null")
    where = _where(source, node)
    if typing.get_origin(hint) is list:
        if not isinstance(value, list):
            raise ConfigError(f"{where}: {key} must be a list, got {value!r}")
        return [_coerce(v, float, f"{key}[{i}]", node, source) for i, v in enumerate(value)]
    if hint is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: {key} must be a number, got {value!r}")
        if not math.isfinite(value):
            raise ConfigError(f"{where}: {key} must be finite, got {value!r}")
        return float(value)
    if hint is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: {key} must be an integer, got {value!r}")
        return value
    if hint is str:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: {key} must be a string, got {value!r}")
        return value
    raise TypeError(hint)  # pragma: no cover


def _build(cls, data: dict, nodes: dict, prefix: str, section_node, source):
    hints = typing.get_type_hints(cls)
    known = {f.name for f in fields(cls) if f.name != "source"}
    for key in data:
        if key not in known:
            name = f"{prefix}{key}"
            raise ConfigError(f"{_where(source, nodes.get(key, section_node))}: unknown key '{name}'")
    kw = {}
    for f in fields(cls):
        if f.name == "source":
            continue
        name = f"{prefix}{f.name}"
        if f.name not in data:
            if f.default is MISSING and f.default_factory is MISSING:
                raise ConfigError(f"{_where(source, section_node)}: missing required key '{name}'")
            continue
        node = nodes.get(f.name)
        if f.name in _SECTIONS:
            sub = data[f.name]
            if not isinstance(sub, dict):
                raise ConfigError(f"{_where(source, node)}: '{name}' must be a mapping")
            kw[f.name] = _build(_SECTIONS[f.name], sub, _key_nodes(node), f"{name}.", node, source)
            continue
        value = _coerce(data[f.name], hints[f.name], name, node, source)
        _check(name, value, node, source)
        kw[f.name] = value
    return cls(**kw)


def _key_nodes(mapping_node) -> dict:
    """Map each key of a YAML mapping node to its value node (for line numbers)."""
    if not isinstance(mapping_node, yaml.MappingNode):
        return {}
    return {k.value: v for k, v in mapping_node.value}


class _UniqueKeyLoader(yaml.SafeLoader):
    def construct_mapping(self, node, deep=False):
        seen = set()
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=deep)
            if key in seen:
                raise ConfigError(f"line {key_node.start_mark.line + 1}: duplicate key '{key}'")
            seen.add(key)
        return super().construct_mapping(node, deep=deep)


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and validate YAML text."""
    loader = _UniqueKeyLoader(text)
    try:
        root = loader.get_single_node()
        if root is None:
            raise ConfigError(f"{source}: configuration is empty")
        data = loader.construct_document(root)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = f":{mark.line + 1}" if mark else ""
        raise ConfigError(f"{source}{line}: invalid YAML: {exc.problem or exc}") from None
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    finally:
        loader.dispose()
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    cfg = _build(RunConfig, data, _key_nodes(root), "", root, source)
    cfg = replace(cfg, source=source)
    try:
        cfg.lattice_config()
        cfg.atom_params()
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return cfg


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset '{name}' (available: {', '.join(PRESETS)})")
    return resources.files("eitrouter").joinpath(f"data/{name}.yaml").read_text()


def load_config(path_or_preset: str | Path | None = None) -> RunConfig:
    """Load a config file, or a packaged preset by name (default: 'default')."""
    if path_or_preset is None:
        path_or_preset = "default"
    path = Path(path_or_preset)
    if path.is_file():
        try:
            text = path.read_text()
        except (OSError, UnicodeDecodeError) as exc:
            raise ConfigError(f"{path}: cannot read config: {exc}") from None
        return parse_config(text, str(path))
    if str(path_or_preset) in PRESETS:
        return parse_config(preset_text(str(path_or_preset)), f"preset:{path_or_preset}")
    raise ConfigError(f"config '{path_or_preset}' is neither a file nor a preset ({', '.join(PRESETS)})")
