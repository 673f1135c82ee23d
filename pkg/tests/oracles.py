"""Reference computations that share no code with the package's composition path."""

import numpy as np


def coupled_dipole(xi, positions, length):
    """Solve the self-consistent driving fields of point scatterers directly.

    Atom ``i`` at phase ``positions[i]`` is driven by the incident wave plus
    the waves scattered by every other atom, each atom re-radiating ``-xi``
    times its driving field symmetrically in both directions.
    """
    pos = np.asarray(positions, dtype=float)
    n = pos.size
    if n == 0:
        return 0j, np.exp(1j * length)
    g = np.exp(1j * np.abs(pos[:, None] - pos[None, :]))
    a = np.eye(n, dtype=complex) + xi * (g - np.eye(n))
    drive = np.linalg.solve(a, np.exp(1j * pos))
    r = -xi * np.sum(drive * np.exp(1j * pos))
    t = (1 - xi * np.sum(drive * np.exp(-1j * pos))) * np.exp(1j * length)
    return r, t


def two_scatterer_reflection(r, t, phi):
    """Geometric series of bounces between two identical scatterers ``phi`` apart."""
    z = np.exp(2j * phi)
    return r + t * t * r * z / (1 - r * r * z)


def pairwise_series(elements, gaps):
    """Fold asymmetric two-ports left to right with explicit bounce sums.

    ``elements`` are ``(r, t)`` symmetric scatterers; ``gaps[k]`` is the
    phase between element ``k`` and ``k + 1``.
    """
    r_l, r_r, t = elements[0][0], elements[0][0], elements[0][1]
    for (r2, t2), phi in zip(elements[1:], gaps):
        z = np.exp(2j * phi)
        bounce = 1 / (1 - r_r * r2 * z)
        r_l, r_r, t = (
            r_l + t * t * r2 * z * bounce,
            r2 + t2 * t2 * r_r * z * bounce,
            t * t2 * np.exp(1j * phi) * bounce,
        )
    return r_l, t
