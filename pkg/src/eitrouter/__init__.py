"""Simulation and analysis of an EIT atom-array router on an optical nanofiber.

A disordered lattice of three-level atoms beside a nanofiber reflects probe
light through Bragg scattering; a control field opens an EIT window that
switches the light to the transmission port.  The package computes
ensemble-averaged spectra, switching curves, extinction ratios and
time-resolved pulse routing.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    DegenerateElementError,
    FitError,
    GridSpanError,
    NumericalError,
    ResonantDivergenceError,
    RouterError,
)
from .lattice import LatticeConfig, LatticeRealization, derive_site_count, sample_realization  # noqa: E402
from .scatter import (  # noqa: E402
    AtomParams,
    ScatterElement,
    ScatterMatrix,
    atom_polarizability,
    atom_rt,
    chain_response,
    element_transfer,
    propagation_phase,
    redheffer_compose,
)
from .ensemble import SpectrumTable, average_spectrum, spectrum_pair  # noqa: E402
from .analysis import (  # noqa: E402
    EnergyCalibration,
    extinction_ratio,
    find_bandgap,
    fit_kappa,
    lorentzian_fit,
    switching_curve,
    transparency_dip,
)
from .pulses import PulseGrid, PulseSpec, detect, propagate_pulse, truth_table  # noqa: E402
from .config import RunConfig, load_config  # noqa: E402

__all__ = [
    "AtomParams",
    "ConfigError",
    "DegenerateElementError",
    "EnergyCalibration",
    "FitError",
    "GridSpanError",
    "LatticeConfig",
    "LatticeRealization",
    "NumericalError",
    "PulseGrid",
    "PulseSpec",
    "ResonantDivergenceError",
    "RouterError",
    "RunConfig",
    "ScatterElement",
    "ScatterMatrix",
    "SpectrumTable",
    "atom_polarizability",
    "atom_rt",
    "average_spectrum",
    "chain_response",
    "derive_site_count",
    "detect",
    "element_transfer",
    "extinction_ratio",
    "find_bandgap",
    "fit_kappa",
    "load_config",
    "lorentzian_fit",
    "propagate_pulse",
    "propagation_phase",
    "redheffer_compose",
    "sample_realization",
    "spectrum_pair",
    "switching_curve",
    "transparency_dip",
    "truth_table",
]
