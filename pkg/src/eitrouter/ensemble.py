"""Monte Carlo averaging of chain responses over lattice disorder.

Work is split per realization.  Realization ``i`` always uses the seed
``child_seed(master_seed, i)`` and is batched into fixed-size chunks whose
boundaries do not depend on the worker count; per-realization results are
assembled in index order before any reduction.  Results are therefore
bit-identical for any number of workers.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericalError
from .lattice import LatticeConfig, sample_ensemble
from .scatter import AtomParams, atom_polarizability, fold_chain

WORKERS_ENV = "EITROUTER_WORKERS"

# complex entries per (chunk x points) work array
_CHUNK_ELEMENTS = 1 << 15


def resolve_workers(workers: int | None = None) -> int:
    if workers is None:
        workers = int(os.environ.get(WORKERS_ENV, "1"))
    if workers < 1:
        raise ConfigError(f"worker count must be >= 1, got {workers}")
    return workers


def _chunks(n_real: int, n_points: int):
    size = max(1, min(n_real, _CHUNK_ELEMENTS // max(n_points, 1)))
    return [range(lo, min(lo + size, n_real)) for lo in range(0, n_real, size)]


def ensemble_map(func, n_real: int, n_points: int, workers: int | None = None) -> list:
    """Apply ``func(index_range)`` over fixed realization chunks, in order."""
    chunks = _chunks(n_real, n_points)
    workers = resolve_workers(workers)
    if workers == 1 or len(chunks) == 1:
        return [func(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, chunks))


def ensemble_responses(xi, cfg: LatticeConfig, n_real: int, master_seed: int, workers: int | None = None):
    """Complex ``(r, t)`` for every realization, shape ``(n_real, len(xi))``."""
    if n_real < 1:
        raise ConfigError(f"n_real must be >= 1, got {n_real}")
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))

    def run(idx):
        reals = sample_ensemble(cfg, master_seed, idx)
        try:
            r, t, _ = fold_chain(xi, [z.phases for z in reals], [z.length for z in reals])
        except NumericalError as exc:
            raise NumericalError(f"{exc} (realization offset {idx.start})") from exc
        return r, t

    parts = ensemble_map(run, n_real, xi.size, workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _mean_stderr(x: np.ndarray):
    n = x.shape[0]
    mean = x.sum(axis=0) / n
    if n < 2:
        return mean, np.full_like(mean, np.nan)
    var = ((x - mean) ** 2).sum(axis=0) / (n - 1)
    return mean, np.sqrt(var / n)


@dataclass
class SpectrumTable:
    """Ensemble-averaged reflection and transmission on a detuning grid."""

    delta: np.ndarray
    r_mean: np.ndarray
    r_stderr: np.ndarray
    t_mean: np.ndarray
    t_stderr: np.ndarray
    n_realizations: int
    r_amp: np.ndarray | None = None
    t_amp: np.ndarray | None = None
    config: dict = field(default_factory=dict)

    CSV_HEADER = ("delta_i_mhz", "r_mean", "r_stderr", "t_mean", "t_stderr")

    @classmethod
    def from_samples(cls, delta, r, t, config=None) -> "SpectrumTable":
        rm, rs = _mean_stderr(np.abs(r) ** 2)
        tm, ts = _mean_stderr(np.abs(t) ** 2)
        return cls(
            delta=np.asarray(delta, dtype=float),
            r_mean=rm,
            r_stderr=rs,
            t_mean=tm,
            t_stderr=ts,
            n_realizations=r.shape[0],
            r_amp=r.sum(axis=0) / r.shape[0],
            t_amp=t.sum(axis=0) / t.shape[0],
            config=dict(config or {}),
        )

    def rows(self):
        for row in zip(self.delta, self.r_mean, self.r_stderr, self.t_mean, self.t_stderr):
            yield [float(v) for v in row]

    def to_csv(self, path, comments=()) -> None:
        from .io import write_csv

        write_csv(path, self.CSV_HEADER, self.rows(), comments)

    @classmethod
    def from_csv(cls, path) -> "SpectrumTable":
        with open(path, newline="") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            cols = {k: [] for k in cls.CSV_HEADER}
            for row in reader:
                for k in cols:
                    cols[k].append(float(row[k]))
        arr = {k: np.array(v) for k, v in cols.items()}
        return cls(arr["delta_i_mhz"], arr["r_mean"], arr["r_stderr"], arr["t_mean"], arr["t_stderr"], 0)


def detuning_grid(start: float = -30.0, stop: float = 40.0, step: float = 0.25) -> np.ndarray:
    """Inclusive, strictly increasing grid built from integer multiples of ``step``."""
    if step <= 0 or stop < start:
        raise ConfigError("detuning grid needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(n)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("detuning grid must be a non-empty 1-D list")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("detuning grid must be strictly increasing")
    return grid


def average_spectrum(
    p: AtomParams,
    cfg: LatticeConfig,
    grid,
    n_real: int = 400,
    master_seed: int = 0,
    workers: int | None = None,
    config: dict | None = None,
) -> SpectrumTable:
    """Mean R = |r|^2 and T = |t|^2 over ``n_real`` disorder realizations."""
    grid = _check_grid(grid)
    r, t = ensemble_responses(atom_polarizability(p, grid), cfg, n_real, master_seed, workers)
    return SpectrumTable.from_samples(grid, r, t, config)


def spectrum_pair(
    p_on: AtomParams,
    p_off: AtomParams,
    cfg: LatticeConfig,
    grid,
    n_real: int = 400,
    master_seed: int = 0,
    workers: int | None = None,
    config: dict | None = None,
) -> tuple[SpectrumTable, SpectrumTable]:
    """Control-on and control-off spectra evaluated on the same realizations."""
    if p_off.omega_c != 0:
        raise ConfigError("control-off parameters must have omega_c = 0")
    grid = _check_grid(grid)
    xi = np.concatenate([atom_polarizability(p_on, grid), atom_polarizability(p_off, grid)])
    r, t = ensemble_responses(xi, cfg, n_real, master_seed, workers)
    n = grid.size
    on = SpectrumTable.from_samples(grid, r[:, :n], t[:, :n], config)
    off = SpectrumTable.from_samples(grid, r[:, n:], t[:, n:], config)
    return on, off
