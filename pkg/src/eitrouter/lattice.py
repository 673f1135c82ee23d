"""Disordered lattice realizations: random site filling plus optional jitter."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError


def derive_site_count(n_atoms: float, filling: float) -> int:
    """Number of trap sites giving ``n_atoms`` on average at this filling."""
    if not filling > 0:
        raise ConfigError(f"filling must be > 0, got {filling}")
    if not n_atoms > 0:
        raise ConfigError(f"atom number must be > 0, got {n_atoms}")
    return int(math.floor(n_atoms / filling + 0.5))


@dataclass(frozen=True)
class LatticeConfig:
    n_atoms_target: int = 1600
    filling: float = 0.26
    n_sites: int | None = None
    phase_per_site: float = math.pi
    position_jitter_rms: float = 0.0

    def __post_init__(self):
        if not 0 < self.filling <= 1:
            raise ConfigError(f"filling must be in (0, 1], got {self.filling}")
        if self.position_jitter_rms < 0:
            raise ConfigError("position_jitter_rms must be >= 0")
        if self.n_sites is None:
            object.__setattr__(self, "n_sites", derive_site_count(self.n_atoms_target, self.filling))
        if self.n_sites < 1:
            raise ConfigError(f"n_sites must be >= 1, got {self.n_sites}")

    @property
    def expected_atoms(self) -> float:
        return self.filling * self.n_sites


@dataclass(frozen=True, eq=False)
class LatticeRealization:
    """Occupied site indices and the phase position of each atom."""

    n_sites: int
    phase_per_site: float
    sites: np.ndarray
    phases: np.ndarray = field(default=None)

    def __post_init__(self):
        sites = np.asarray(self.sites, dtype=np.int64)
        if sites.size and (sites[0] < 0 or sites[-1] >= self.n_sites or np.any(np.diff(sites) <= 0)):
            raise ConfigError("site indices must be strictly increasing within [0, n_sites)")
        object.__setattr__(self, "sites", sites)
        if self.phases is None:
            object.__setattr__(self, "phases", sites * self.phase_per_site)
        else:
            object.__setattr__(self, "phases", np.asarray(self.phases, dtype=float))

    @property
    def n_atoms(self) -> int:
        return int(self.sites.size)

    @property
    def length(self) -> float:
        """Total phase length of the lattice (one period per site)."""
        return self.n_sites * self.phase_per_site

    def reversed(self) -> "LatticeRealization":
        """Mirror image of the chain, as seen by light entering from the right."""
        sites = (self.n_sites - 1 - self.sites)[::-1]
        phases = (self.length - self.phase_per_site - self.phases)[::-1]
        return LatticeRealization(self.n_sites, self.phase_per_site, sites, phases)

    def to_text(self) -> str:
        lines = [f"# n_sites={self.n_sites}", f"# phase_per_site={self.phase_per_site!r}"]
        lines += [str(int(s)) for s in self.sites]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LatticeRealization":
        meta, sites = {}, []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition("=")
                meta[key.strip()] = value.strip()
                continue
            try:
                sites.append(int(line))
            except ValueError:
                raise ConfigError(f"line {lineno}: expected a site index, got {line!r}") from None
        try:
            return cls(int(meta["n_sites"]), float(meta["phase_per_site"]), np.array(sites, dtype=np.int64))
        except KeyError as exc:
            raise ConfigError(f"missing header field {exc.args[0]!r}") from None

    def save(self, path) -> None:
        Path(path).write_text(self.to_text())


def child_seed(master_seed: int, index: int) -> int:
    """64-bit seed for realization ``index``, independent of evaluation order."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    lo, hi = ss.generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator for a 64-bit seed."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def sample_realization(cfg: LatticeConfig, seed: int) -> LatticeRealization:
    """Fill each site independently with probability ``cfg.filling``."""
    rng = make_rng(seed)
    sites = np.flatnonzero(rng.random(cfg.n_sites) < cfg.filling)
    phases = sites * cfg.phase_per_site
    if cfg.position_jitter_rms > 0:
        phases = phases + rng.normal(0.0, cfg.position_jitter_rms, size=sites.size)
    return LatticeRealization(cfg.n_sites, cfg.phase_per_site, sites, phases)


def sample_ensemble(cfg: LatticeConfig, master_seed: int, indices) -> list[LatticeRealization]:
    return [sample_realization(cfg, child_seed(master_seed, i)) for i in indices]
