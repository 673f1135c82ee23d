"""Damped Gauss-Newton (Levenberg-Marquardt) least squares for small models."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import FitError


@dataclass
class FitResult:
    names: tuple
    params: np.ndarray
    covariance: np.ndarray
    residual_norm: float
    n_iter: int
    converged: bool
    identifiable: bool = True
    n_points: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def stderr(self) -> np.ndarray:
        return np.sqrt(np.diag(self.covariance))

    def __getitem__(self, name):
        return float(self.params[self.names.index(name)])

    def error(self, name) -> float:
        return float(self.stderr[self.names.index(name)])

    def to_dict(self) -> dict:
        return {
            "parameters": {n: float(v) for n, v in zip(self.names, self.params)},
            "uncertainties": {n: float(v) for n, v in zip(self.names, self.stderr)},
            "covariance": self.covariance.tolist(),
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.n_iter),
            "converged": bool(self.converged),
            "identifiable": bool(self.identifiable),
            "n_points": int(self.n_points),
            **self.extra,
        }


def _covariance(jac: np.ndarray, resid: np.ndarray, rcond: float = 1e-9):
    """Linearized parameter covariance ``s^2 (J^T J)^-1``.

    Directions the data cannot constrain (relative singular value of the
    column-normalized Jacobian below ``rcond``) get infinite variance.
    """
    m, n = jac.shape
    dof = m - n
    s2 = float(resid @ resid) / dof if dof > 0 else np.nan
    scale = np.linalg.norm(jac, axis=0)
    dead = scale == 0
    scale[dead] = 1.0
    u, sv, vt = np.linalg.svd(jac / scale, full_matrices=False)
    keep = sv > rcond * sv.max() if sv.size and sv.max() > 0 else np.zeros_like(sv, dtype=bool)
    inv = np.zeros_like(sv)
    inv[keep] = 1.0 / sv[keep] ** 2
    cov = (vt.T * inv) @ vt
    cov = cov / np.outer(scale, scale) * s2
    free = dead.copy()
    for k in np.flatnonzero(~keep):
        free |= np.abs(vt[k]) > 0.1
    identifiable = not free.any()
    if not identifiable:
        cov[free, :] = np.inf
        cov[:, free] = np.inf
    return cov, identifiable


def levenberg_marquardt(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    p0: Sequence[float],
    names: Sequence[str] | None = None,
    max_iter: int = 200,
    xtol: float = 1e-10,
    lam0: float = 1e-3,
) -> FitResult:
    """Minimize ``|residual(p)|^2`` with Marquardt-scaled adaptive damping.

    Converges when an accepted step changes every parameter by less than
    ``xtol`` relative, or the residual vanishes.  Raises :class:`FitError`
    after ``max_iter`` iterations without convergence.
    """
    p = np.asarray(p0, dtype=float).copy()
    names = tuple(names) if names is not None else tuple(f"p{i}" for i in range(p.size))
    r = np.asarray(residual(p), dtype=float)
    if not np.all(np.isfinite(r)):
        raise FitError("residual is not finite at the initial guess", {"initial": p.tolist()})
    cost = float(r @ r)
    lam = lam0
    converged = False
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        jac = np.asarray(jacobian(p), dtype=float)
        jtj = jac.T @ jac
        grad = jac.T @ r
        if cost == 0.0 or not np.any(grad):
            converged = True
            break
        diag = np.diag(jtj).copy()
        diag = np.maximum(diag, 1e-12 * max(diag.max(), 1e-300))
        accepted = False
        while lam < 1e16:
            try:
                step = np.linalg.solve(jtj + lam * np.diag(diag), -grad)
            except np.linalg.LinAlgError:
                lam *= 10
                continue
            trial = p + step
            r_trial = np.asarray(residual(trial), dtype=float)
            cost_trial = float(r_trial @ r_trial) if np.all(np.isfinite(r_trial)) else np.inf
            if cost_trial <= cost:
                accepted = True
                break
            lam *= 4
        if not accepted:
            # no downhill step at any damping: a (possibly flat) minimum
            converged = True
            break
        small = np.all(np.abs(step) <= xtol * (np.abs(p) + xtol))
        p, r, cost = trial, r_trial, cost_trial
        lam = max(lam / 3, 1e-12)
        if small or cost == 0.0:
            converged = True
            break
    report = {"parameters": dict(zip(names, p.tolist())), "residual_norm": float(np.sqrt(cost)), "iterations": n_iter}
    if not converged:
        raise FitError(f"no convergence after {max_iter} iterations", report)
    jac = np.asarray(jacobian(p), dtype=float)
    cov, identifiable = _covariance(jac, r)
    return FitResult(names, p, cov, float(np.sqrt(cost)), n_iter, True, identifiable, r.size)


def numeric_jacobian(residual, p, rel_step=1e-6):
    """Central differences; each parameter stepped by ``rel_step * max(|p|, 1)``."""
    p = np.asarray(p, dtype=float)
    cols = []
    for k in range(p.size):
        h = rel_step * max(abs(p[k]), 1.0)
        up, dn = p.copy(), p.copy()
        up[k] += h
        dn[k] -= h
        cols.append((np.asarray(residual(up)) - np.asarray(residual(dn))) / (2 * h))
    return np.column_stack(cols)
