"""Single-atom EIT response and composition of scatterers along the fiber.

Unit convention
---------------
Every rate and detuning in this package (``gamma_1d``, ``gamma_prime``,
``omega_c``, ``delta_c``, ``gamma_gs`` and the probe detuning) is a *linear*
frequency in MHz, i.e. Gamma/2pi and Omega/2pi.  Only ratios of these enter
the polarizability, so there are no factors of 2pi anywhere in this module.
Propagation phases are in radians.

Two-port conventions
--------------------
Amplitudes are ordered (right-moving, left-moving).  A transfer matrix ``M``
maps the amplitudes on the left of an element to those on its right, so a
chain's matrix is the product with the *last* element leftmost.  A
:class:`ScatterMatrix` stores the reflection seen from each side and the
transmission in each direction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateElementError, NumericalError, ResonantDivergenceError

# below this |t| the transfer form 1/t is meaningless
_TINY_T = 1e-300


@dataclass(frozen=True)
class AtomParams:
    """Three-level (Lambda) atom coupled to the guided mode.

    All values in MHz (linear frequency).  ``omega_c = 0`` turns the control
    field off and reduces the atom to a two-level scatterer.
    """

    gamma_1d: float
    gamma_prime: float
    omega_c: float = 0.0
    delta_c: float = 0.0
    gamma_gs: float = 0.0

    def __post_init__(self):
        values = (self.gamma_1d, self.gamma_prime, self.omega_c, self.delta_c, self.gamma_gs)
        if not all(np.isfinite(v) for v in values):
            raise ConfigError(f"atom parameters must be finite, got {values}")
        if self.gamma_1d <= 0:
            raise ConfigError(f"gamma_1d must be > 0, got {self.gamma_1d}")
        if self.gamma_prime < 0:
            raise ConfigError(f"gamma_prime must be >= 0, got {self.gamma_prime}")
        if self.gamma_gs < 0:
            raise ConfigError(f"gamma_gs must be >= 0, got {self.gamma_gs}")
        if self.omega_c < 0:
            raise ConfigError(f"omega_c must be >= 0, got {self.omega_c}")

    @property
    def gamma_tot(self) -> float:
        return self.gamma_1d + self.gamma_prime

    @classmethod
    def from_fraction(cls, gamma_tot, gamma_1d_fraction, **kw) -> "AtomParams":
        """Build from a total linewidth and the guided fraction Gamma_1D/Gamma_tot."""
        g1d = gamma_tot * gamma_1d_fraction
        return cls(gamma_1d=g1d, gamma_prime=gamma_tot - g1d, **kw)

    def with_control(self, omega_c: float) -> "AtomParams":
        return AtomParams(self.gamma_1d, self.gamma_prime, omega_c, self.delta_c, self.gamma_gs)

    def as_dict(self) -> dict:
        return {
            "gamma_1d": self.gamma_1d,
            "gamma_prime": self.gamma_prime,
            "omega_c": self.omega_c,
            "delta_c": self.delta_c,
            "gamma_gs": self.gamma_gs,
        }


@dataclass(frozen=True)
class ScatterElement:
    """Reflection and transmission amplitudes of a symmetric point scatterer."""

    r: complex
    t: complex


@dataclass(frozen=True)
class ScatterMatrix:
    """Two-port scattering matrix ``[[r_left, t_rl], [t_lr, r_right]]``.

    Entries may be scalars or broadcast-compatible arrays.
    """

    r_left: complex
    t_lr: complex
    t_rl: complex
    r_right: complex

    @classmethod
    def identity(cls) -> "ScatterMatrix":
        return cls(0j, 1 + 0j, 1 + 0j, 0j)

    def as_array(self) -> np.ndarray:
        return np.array([[self.r_left, self.t_rl], [self.t_lr, self.r_right]], dtype=complex)


def atom_polarizability(p: AtomParams, delta_i):
    """Return xi(delta_i), the fraction of the field scattered by one atom.

    ``xi = (G1D/2) / (Gtot/2 - i D + (Oc^2/4) / (ggs/2 - i (D - Dc)))``.
    The expression is evaluated with the two-photon factor cleared from the
    denominator, which makes the dark-state point (``gamma_gs = 0`` and
    ``delta_i = delta_c``) return exactly zero instead of 0/0.
    """
    scalar = np.ndim(delta_i) == 0
    # scalars go through the array loops so both paths round identically
    d = np.atleast_1d(np.asarray(delta_i, dtype=float))
    one_photon = p.gamma_tot / 2 - 1j * d
    if p.omega_c == 0:
        xi = (p.gamma_1d / 2) / one_photon
    else:
        two_photon = p.gamma_gs / 2 - 1j * (d - p.delta_c)
        xi = (p.gamma_1d / 2) * two_photon / (one_photon * two_photon + p.omega_c**2 / 4)
    return xi[0] if scalar else xi


def atom_rt(xi) -> ScatterElement:
    """Side-coupled point scatterer: ``r = -xi``, ``t = 1 - xi``."""
    return ScatterElement(r=-xi, t=1 - xi)


def propagation_phase(lambda_probe: float, lambda_trap: float) -> float:
    """One-way probe phase across one lattice period ``a = lambda_trap / 2``.

    Exact Bragg condition (``lambda_trap == lambda_probe``) gives pi.
    """
    if lambda_probe <= 0 or lambda_trap <= 0:
        raise ConfigError("wavelengths must be positive")
    return np.pi * (lambda_trap / lambda_probe)


def element_transfer(e: ScatterElement) -> np.ndarray:
    """Transfer matrix ``(1/t) [[t^2 - r^2, r], [-r, 1]]`` of a symmetric element."""
    if abs(e.t) < _TINY_T:
        raise DegenerateElementError(
            f"|t| = {abs(e.t):.3g}: opaque element has no transfer matrix, compose in scattering form"
        )
    r, t = complex(e.r), complex(e.t)
    return np.array([[t * t - r * r, r], [-r, 1.0]], dtype=complex) / t


def propagation_transfer(phase: float) -> np.ndarray:
    return np.array([[np.exp(1j * phase), 0.0], [0.0, np.exp(-1j * phase)]], dtype=complex)


def element_scatter(e: ScatterElement) -> ScatterMatrix:
    return ScatterMatrix(e.r, e.t, e.t, e.r)


def propagation_scatter(phase) -> ScatterMatrix:
    f = np.exp(1j * np.asarray(phase, dtype=float))
    return ScatterMatrix(0j * f, f, f, 0j * f)


def transfer_to_scatter(m: np.ndarray) -> ScatterMatrix:
    """Convert a transfer matrix (left -> right convention) to scattering form."""
    m = np.asarray(m, dtype=complex)
    det = m[0, 0] * m[1, 1] - m[0, 1] * m[1, 0]
    return ScatterMatrix(
        r_left=-m[1, 0] / m[1, 1],
        t_lr=det / m[1, 1],
        t_rl=1 / m[1, 1],
        r_right=m[0, 1] / m[1, 1],
    )


def redheffer_compose(a: ScatterMatrix, b: ScatterMatrix) -> ScatterMatrix:
    """Star product: ``a`` on the left, ``b`` on the right.

    Sums all internal bounces between the two ports in closed form, so it
    stays bounded where products of transfer matrices blow up.
    """
    denom = 1 - a.r_right * b.r_left
    if np.any(denom == 0):
        raise ResonantDivergenceError("1 - r_right(a) * r_left(b) vanished in star product")
    return ScatterMatrix(
        r_left=a.r_left + a.t_lr * b.r_left * a.t_rl / denom,
        t_lr=a.t_lr * b.t_lr / denom,
        t_rl=b.t_rl * a.t_rl / denom,
        r_right=b.r_right + b.t_rl * a.r_right * b.t_lr / denom,
    )


def fold_chain(xi, positions: Sequence[np.ndarray], lengths: Sequence[float]):
    """Compose identical atoms at the given phase positions into chain responses.

    Parameters
    ----------
    xi : complex array, shape (n_points,)
        Polarizability of every atom at each evaluation point (detuning,
        control energy, ...).
    positions : sequence of float arrays
        Cumulative phase position of each atom, one array per realization,
        in spatial order.  The chain starts at phase 0.
    lengths : sequence of float
        Total phase length of each chain; the field propagates from the last
        atom to this point before exiting on the right.

    Returns
    -------
    r_left, t, r_right : complex arrays, shape (n_realizations, n_points)
        ``t`` is the same in both directions (reciprocal elements).

    Atoms are appended on the right one at a time with the star product.
    Realizations have different atom counts; rows are processed in
    decreasing-count order so that at step ``k`` the still-active rows form
    a contiguous prefix, and each row's arithmetic is independent of how
    realizations are batched.
    """
    xi = np.atleast_1d(np.asarray(xi, dtype=complex))
    n_real = len(positions)
    counts = np.array([len(p) for p in positions], dtype=int)
    order = np.argsort(-counts, kind="stable")
    n_max = int(counts.max()) if n_real else 0

    gaps = np.zeros((n_max, n_real))
    for row, idx in enumerate(order):
        pos = np.asarray(positions[idx], dtype=float)
        if pos.size:
            gaps[: pos.size, row] = np.diff(pos, prepend=0.0)
    step = np.exp(1j * gaps)
    step2 = step * step
    sorted_counts = counts[order]

    shape = (n_real, xi.size)
    r_left = np.zeros(shape, dtype=complex)
    r_right = np.zeros(shape, dtype=complex)
    t = np.ones(shape, dtype=complex)

    ra = -xi
    ta = 1 - xi
    ta2 = ta * ta
    active = n_real
    for k in range(n_max):
        while active and sorted_counts[active - 1] <= k:
            active -= 1
        tt, rl, rr = t[:active], r_left[:active], r_right[:active]
        tt *= step[k, :active, None]
        rr *= step2[k, :active, None]
        denom = 1 - rr * ra
        if not denom.all():
            row, col = np.argwhere(denom == 0)[0]
            raise ResonantDivergenceError(
                f"lossless resonance between atoms at realization {order[row]}, point {col}"
            )
        u = tt / denom
        tt *= ra
        tt *= u
        rl += tt
        np.multiply(u, ta, out=tt)
        rr /= denom
        rr *= ta2
        rr += ra

    tail = np.empty(n_real)
    for row, idx in enumerate(order):
        pos = positions[idx]
        tail[row] = lengths[idx] - (pos[-1] if len(pos) else 0.0)
    tail_f = np.exp(1j * tail)[:, None]
    t *= tail_f
    r_right *= tail_f * tail_f

    inv = np.empty_like(order)
    inv[order] = np.arange(n_real)
    r_left, t, r_right = r_left[inv], t[inv], r_right[inv]

    bad = ~(np.isfinite(r_left) & np.isfinite(t) & np.isfinite(r_right))
    if bad.any():
        row, col = np.argwhere(bad)[0]
        raise NumericalError(f"non-finite chain response at realization {row}, point {col}")
    return r_left, t, r_right


def chain_response(params: AtomParams, realization, delta_i):
    """Total ``(r, t)`` of one lattice realization at detuning(s) ``delta_i``.

    Scattering-form composition; stable inside the bandgap for any length.
    An empty chain gives ``r = 0`` and a pure propagation phase in ``t``.
    """
    xi = atom_polarizability(params, delta_i)
    r, t, _ = fold_chain(xi, [realization.phases], [realization.length])
    if np.ndim(delta_i) == 0:
        return complex(r[0, 0]), complex(t[0, 0])
    return r[0], t[0]


def chain_transfer_matrix(params: AtomParams, realization, delta_i: float) -> np.ndarray:
    """Product of element and propagation transfer matrices for one realization.

    Grows exponentially inside a bandgap; meant for short chains and
    cross-checks only.
    """
    elem = element_transfer(atom_rt(atom_polarizability(params, delta_i)))
    m = np.eye(2, dtype=complex)
    last = 0.0
    for pos in realization.phases:
        m = elem @ propagation_transfer(pos - last) @ m
        last = pos
    return propagation_transfer(realization.length - last) @ m


def chain_response_transfer(params: AtomParams, realization, delta_i: float):
    """``(r, t)`` from the transfer-matrix product (unit determinant assumed)."""
    m = chain_transfer_matrix(params, realization, delta_i)
    return complex(-m[1, 0] / m[1, 1]), complex(1 / m[1, 1])
