import numpy as np
import pytest

from eitrouter.ensemble import (
    SpectrumTable,
    average_spectrum,
    detuning_grid,
    ensemble_responses,
    spectrum_pair,
)
from eitrouter.errors import ConfigError
from eitrouter.lattice import LatticeConfig, sample_realization
from eitrouter.scatter import AtomParams, atom_polarizability, chain_response

P = AtomParams(0.3, 4.9, 0.0, 15.0, 0.05)
SMALL = LatticeConfig(n_atoms_target=120, filling=0.3, phase_per_site=np.pi * 1.003)
GRID = np.linspace(-20, 30, 26)


def test_grid_defaults():
    g = detuning_grid()
    assert g[0] == -30 and g[-1] == 40 and g.size == 281
    assert np.all(np.diff(g) > 0)


def test_full_filling_single_realization_is_ordered_chain():
    cfg = LatticeConfig(n_atoms_target=80, filling=1.0, phase_per_site=np.pi * 1.01)
    spec = average_spectrum(P, cfg, GRID, n_real=1, master_seed=3)
    z = sample_realization(cfg, 0)
    r, t = chain_response(P, z, GRID)
    np.testing.assert_array_equal(spec.r_mean, np.abs(r) ** 2)
    np.testing.assert_array_equal(spec.t_mean, np.abs(t) ** 2)


def test_lossless_sum_rule():
    lossless = AtomParams(0.4, 0.0, 3.0, 10.0, 0.0)
    spec = average_spectrum(lossless, SMALL, GRID, n_real=20, master_seed=1)
    np.testing.assert_allclose(spec.r_mean + spec.t_mean, 1.0, atol=1e-10)


def test_physical_bounds():
    spec = average_spectrum(P.with_control(6.0), SMALL, GRID, n_real=30, master_seed=2)
    assert np.all(spec.r_mean >= 0) and np.all(spec.t_mean >= 0)
    assert np.all(spec.r_mean + spec.t_mean <= 1 + 3 * (spec.r_stderr + spec.t_stderr))


@pytest.mark.parametrize("workers", [2, 8])
def test_worker_count_does_not_change_results(workers):
    a = average_spectrum(P, SMALL, GRID, n_real=300, master_seed=5, workers=1)
    b = average_spectrum(P, SMALL, GRID, n_real=300, master_seed=5, workers=workers)
    for name in ("r_mean", "r_stderr", "t_mean", "t_stderr", "r_amp", "t_amp"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))


def test_pair_without_control_is_identical():
    on, off = spectrum_pair(P.with_control(0.0), P, SMALL, GRID, n_real=10, master_seed=4)
    np.testing.assert_array_equal(on.r_mean, off.r_mean)
    np.testing.assert_array_equal(on.t_stderr, off.t_stderr)


def test_pair_matches_separate_runs():
    on, off = spectrum_pair(P.with_control(5.0), P, SMALL, GRID, n_real=12, master_seed=4)
    single = average_spectrum(P, SMALL, GRID, n_real=12, master_seed=4)
    np.testing.assert_allclose(off.r_mean, single.r_mean, rtol=1e-13)


def test_pair_requires_control_off():
    with pytest.raises(ConfigError):
        spectrum_pair(P.with_control(2.0), P.with_control(1.0), SMALL, GRID)


def test_eit_suppresses_reflection_at_two_photon_resonance():
    p_off = AtomParams(0.5, 4.7, 0.0, 10.0, 0.0)
    on, off = spectrum_pair(p_off.with_control(6.0), p_off, SMALL, [9.0, 10.0, 11.0], n_real=20, master_seed=8)
    assert on.r_mean[1] == 0.0
    assert on.r_mean[1] < off.r_mean[1]


def test_stderr_scales_as_inverse_sqrt():
    d = [2.0, 5.0, 8.0]
    small = average_spectrum(P, SMALL, d, n_real=40, master_seed=10)
    large = average_spectrum(P, SMALL, d, n_real=400, master_seed=11)
    ratio = small.r_stderr / large.r_stderr
    np.testing.assert_allclose(ratio, np.sqrt(10), rtol=0.2)


def test_common_random_numbers_reduce_variance():
    cfg = SMALL
    d = np.array([4.0])
    xi_on = atom_polarizability(P.with_control(4.0), d)
    xi_off = atom_polarizability(P, d)
    r_on, _ = ensemble_responses(xi_on, cfg, 400, master_seed=21)
    r_off, _ = ensemble_responses(xi_off, cfg, 400, master_seed=21)
    r_off_other, _ = ensemble_responses(xi_off, cfg, 400, master_seed=22)
    matched = np.var(np.abs(r_on) ** 2 - np.abs(r_off) ** 2, ddof=1)
    unmatched = np.var(np.abs(r_on) ** 2 - np.abs(r_off_other) ** 2, ddof=1)
    # F-test for equal variances would put the ratio near 1; require a decisive gap
    assert matched < 0.5 * unmatched


def test_bad_grid():
    with pytest.raises(ConfigError):
        average_spectrum(P, SMALL, [1.0, 0.5], n_real=2)
    with pytest.raises(ConfigError):
        average_spectrum(P, SMALL, [], n_real=2)
    with pytest.raises(ConfigError):
        average_spectrum(P, SMALL, [1.0], n_real=0)


def test_csv_roundtrip(tmp_path):
    spec = average_spectrum(P, SMALL, GRID, n_real=5, master_seed=1)
    spec.to_csv(tmp_path / "s.csv", comments=["test"])
    text = (tmp_path / "s.csv").read_text().splitlines()
    assert text[0] == "# test"
    assert text[1] == "delta_i_mhz,r_mean,r_stderr,t_mean,t_stderr"
    back = SpectrumTable.from_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.r_mean, spec.r_mean)
    np.testing.assert_array_equal(back.delta, spec.delta)
