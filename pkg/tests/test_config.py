import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eitrouter.config import PRESETS, load_config, parse_config, preset_text
from eitrouter.constants import cs_d2_linewidth_mhz, cs_d2_wavelength_nm
from eitrouter.errors import ConfigError

MINIMAL = """\
atom:
  gamma_1d_fraction: 0.01
  omega_c_mhz: 8.0
  delta_c_mhz: 15.0
lattice:
  n_atoms: 100
  filling: 0.5
  trap_offset_nm: 0.15
calibration:
  kappa: 100.0
"""


@pytest.mark.parametrize("name", PRESETS)
def test_presets_load(name):
    cfg = load_config(name)
    assert cfg.lattice_config().n_sites == 6154
    assert cfg.atom.delta_c_mhz == 15.0
    assert cfg.lattice.trap_offset_nm == 0.15
    assert cfg.source == f"preset:{name}"


def test_default_when_omitted():
    assert load_config() == load_config("default")


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.gamma_tot == cs_d2_linewidth_mhz()
    assert cfg.probe_wavelength_nm == cs_d2_wavelength_nm()
    assert cfg.lattice_config().n_sites == 200
    assert cfg.pulse.n_points == 16384 and cfg.pulse.bin_ns == 20.0
    assert cfg.energies()[0] == 0.0 and cfg.energies().size == 20
    assert cfg.seed == 0 and cfg.workers is None


def test_trap_offset_sets_phase():
    cfg = parse_config(MINIMAL)
    lam = cs_d2_wavelength_nm()
    assert cfg.lattice_config().phase_per_site == pytest.approx(math.pi * (lam + 0.15) / lam, rel=1e-15)


def test_atom_params():
    cfg = parse_config(MINIMAL)
    p = cfg.atom_params()
    assert p.gamma_1d == pytest.approx(0.01 * cs_d2_linewidth_mhz())
    assert p.gamma_tot == pytest.approx(cs_d2_linewidth_mhz())
    assert cfg.atom_params(0.0).omega_c == 0.0 and p.omega_c == 8.0


def test_pulse_control_omega_uses_calibration():
    cfg = parse_config(MINIMAL + "pulse:\n  control_energy_fj: 2.8\n")
    assert cfg.pulse_control_omega() == pytest.approx(math.sqrt(100.0 * 2.8 / 1.4))
    assert parse_config(MINIMAL).pulse_control_omega() == 8.0


def test_missing_key_is_named():
    text = MINIMAL.replace("  filling: 0.5\n", "")
    with pytest.raises(ConfigError, match=r"lattice\.filling") as exc:
        parse_config(text, "run.yaml")
    assert "run.yaml:6" in str(exc.value)


def test_missing_section():
    text = MINIMAL.split("calibration:")[0]
    with pytest.raises(ConfigError, match="'calibration'"):
        parse_config(text)


def test_unknown_key_with_line():
    text = MINIMAL.replace("  filling: 0.5\n", "  filling: 0.5\n  fillng: 0.4\n")
    with pytest.raises(ConfigError, match=r"<config>:8: unknown key 'lattice\.fillng'"):
        parse_config(text)


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown key 'extras'"):
        parse_config(MINIMAL + "extras: 1\n")


@pytest.mark.parametrize(
    "old, new, pattern",
    [
        ("filling: 0.5", "filling: abc", r":7: lattice\.filling must be a number"),
        ("filling: 0.5", "filling: 1.5", r":7: lattice\.filling must be in \(0, 1\]"),
        ("filling: 0.5", "filling: true", r"lattice\.filling must be a number"),
        ("filling: 0.5", "filling: .nan", r"lattice\.filling must be finite"),
        ("n_atoms: 100", "n_atoms: 100.5", r":6: lattice\.n_atoms must be an integer"),
        ("kappa: 100.0", "kappa: -1", r"calibration\.kappa must be > 0"),
        ("omega_c_mhz: 8.0", "omega_c_mhz: null", r"atom\.omega_c_mhz must not be null"),
    ],
)
def test_bad_values(old, new, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(MINIMAL.replace(old, new))


def test_section_must_be_mapping():
    with pytest.raises(ConfigError, match="'lattice' must be a mapping"):
        parse_config(MINIMAL.replace("lattice:\n  n_atoms: 100\n  filling: 0.5\n  trap_offset_nm: 0.15\n",
                                     "lattice: 3\n"))


def test_duplicate_key():
    with pytest.raises(ConfigError, match="duplicate key 'filling'"):
        parse_config(MINIMAL.replace("  filling: 0.5\n", "  filling: 0.5\n  filling: 0.6\n"))


def test_yaml_syntax_error_line():
    with pytest.raises(ConfigError, match=r"x\.yaml:3: invalid YAML"):
        parse_config("atom:\n  a: [1,\n", "x.yaml")


@pytest.mark.parametrize("text", ["", "# only a comment\n", "- 1\n- 2\n"])
def test_empty_or_non_mapping(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_energy_list():
    cfg = parse_config(MINIMAL + "analysis:\n  energies_fj: [0, 0.1, 1]\n")
    assert cfg.energies().tolist() == [0.0, 0.1, 1.0]
    with pytest.raises(ConfigError, match=r"energies_fj\[1\] must be a number"):
        parse_config(MINIMAL + "analysis:\n  energies_fj: [0, x]\n")
    with pytest.raises(ConfigError, match="non-empty"):
        parse_config(MINIMAL + "analysis:\n  energies_fj: []\n")


def test_unknown_preset_or_file():
    with pytest.raises(ConfigError, match="neither a file nor a preset"):
        load_config("no-such-config")
    with pytest.raises(ConfigError, match="unknown preset"):
        preset_text("nope")


def test_load_from_file(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text(MINIMAL)
    cfg = load_config(path)
    assert cfg.source == str(path)
    assert cfg == parse_config(MINIMAL)


def test_overrides():
    cfg = parse_config(MINIMAL).with_overrides(seed=7, workers=3, out_dir="x")
    assert (cfg.seed, cfg.workers, cfg.out_dir) == (7, 3, "x")
    with pytest.raises(ConfigError, match="workers"):
        parse_config(MINIMAL).with_overrides(workers=0)
    with pytest.raises(ConfigError, match="seed"):
        parse_config(MINIMAL).with_overrides(seed=-1)


def test_resolved_omits_run_only_settings():
    a = parse_config(MINIMAL).with_overrides(workers=1, out_dir="a").resolved()
    b = parse_config(MINIMAL).with_overrides(workers=8, out_dir="b").resolved()
    assert a == b
    assert "workers" not in a and a["atom"]["gamma_tot_mhz"] == cs_d2_linewidth_mhz()
    assert a["lattice"]["n_sites"] == 200


@settings(max_examples=40, deadline=None)
@given(
    filling=st.floats(1e-3, 1.0),
    n_atoms=st.integers(1, 10_000),
    frac=st.floats(1e-4, 1.0),
    seed=st.integers(0, 2**64 - 1),
)
def test_values_round_trip(filling, n_atoms, frac, seed):
    text = (MINIMAL.replace("filling: 0.5", f"filling: {filling!r}")
            .replace("n_atoms: 100", f"n_atoms: {n_atoms}")
            .replace("gamma_1d_fraction: 0.01", f"gamma_1d_fraction: {frac!r}")) + f"seed: {seed}\n"
    cfg = parse_config(text)
    assert cfg.lattice.filling == filling
    assert cfg.lattice.n_atoms == n_atoms
    assert cfg.atom.gamma_1d_fraction == frac
    assert cfg.seed == seed
