"""Lasso regularisation path by cyclic coordinate descent.

Objective ``(1/2) ||Y - X beta||^2 + lam * ||beta||_1`` (no 1/n factor), so
the smallest lam with an all-zero solution is ``||X'Y||_inf``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .io import write_csv
from .trex import entry_values

logger = logging.getLogger(__name__)


def default_lambda_grid(X: np.ndarray, Y: np.ndarray, n_lambda: int = 100,
                        ratio: float = 1e-3) -> np.ndarray:
    lam_max = float(np.max(np.abs(X.T @ Y)))
    if lam_max == 0.0:
        raise ValueError("X'Y is zero; the lasso path is identically zero")
    return np.geomspace(lam_max, ratio * lam_max, n_lambda)


@dataclass(frozen=True)
class LassoPath:
    lambda_grid: np.ndarray
    coefficients: np.ndarray  # (len(grid), p)
    entry_values: np.ndarray
    converged: np.ndarray
    kkt_violation: np.ndarray

    def write_csv(self, path) -> None:
        p = self.coefficients.shape[1]
        write_csv(path, ["lambda"] + [f"beta_{j}" for j in range(p)],
                  ([lam, *row] for lam, row in zip(self.lambda_grid, self.coefficients)))


def kkt_violation(G: np.ndarray, c: np.ndarray, beta: np.ndarray, lam: float) -> float:
    """Largest violation of the lasso optimality conditions, given ``G = X'X`` and ``c = X'Y``."""
    grad = c - G @ beta  # X'(Y - X beta)
    active = beta != 0
    viol = np.where(active, np.abs(grad - lam * np.sign(beta)), np.maximum(np.abs(grad) - lam, 0.0))
    return float(viol.max()) if viol.size else 0.0


@numba.njit(cache=True)
def _kkt(G, c, beta, lam):
    worst = 0.0
    for j in range(beta.size):
        g = c[j] - np.dot(G[j], beta)
        if beta[j] > 0:
            v = abs(g - lam)
        elif beta[j] < 0:
            v = abs(g + lam)
        else:
            v = max(abs(g) - lam, 0.0)
        worst = max(worst, v)
    return worst


@numba.njit(cache=True)
def _cd(G, c, beta, lam, kkt_tol, max_sweeps):
    """Coordinate descent at one lam until the KKT violation is below ``kkt_tol``.

    Full sweeps alternate with sweeps over the current active set; the KKT
    check runs after every full sweep.  Returns the number of sweeps, or -1
    if ``max_sweeps`` ran out.
    """
    p = beta.size
    Gb = G @ beta
    full = True
    for sweep in range(max_sweeps):
        for j in range(p):
            old = beta[j]
            if not full and old == 0.0:
                continue
            z = c[j] - Gb[j] + G[j, j] * old
            if z > lam:
                new = (z - lam) / G[j, j]
            elif z < -lam:
                new = (z + lam) / G[j, j]
            else:
                new = 0.0
            if new != old:
                beta[j] = new
                d = new - old
                for i in range(p):
                    Gb[i] += d * G[i, j]
        if full:
            if _kkt(G, c, beta, lam) <= kkt_tol:
                return sweep + 1
            full = False
        else:
            full = True
    return -1


def lasso_path(X: np.ndarray, Y: np.ndarray, lambda_grid: Sequence[float] | None = None,
               kkt_tol: float = 1e-9, max_sweeps: int = 100_000) -> LassoPath:
    """Solve the lasso along a strictly decreasing grid, warm-starting each point.

    ``entry_values[j]`` is the largest grid value at which ``beta_j != 0``
    (0 if the coefficient never leaves zero).  A grid point whose KKT
    violation exceeds ``kkt_tol * max(1, lam)`` is flagged unconverged and
    its best iterate is kept.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if np.any(np.linalg.norm(X, axis=0) == 0):
        raise ValueError("X has an all-zero column")
    grid = default_lambda_grid(X, Y) if lambda_grid is None else np.asarray(lambda_grid, float).ravel()
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
        raise ValueError("lambda_grid must be positive and strictly decreasing")
    G = np.ascontiguousarray(X.T @ X)
    c = X.T @ Y
    beta = np.zeros(X.shape[1])
    coefs = np.empty((grid.size, beta.size))
    converged = np.zeros(grid.size, dtype=bool)
    violations = np.empty(grid.size)
    for k, lam in enumerate(grid):
        _cd(G, c, beta, float(lam), kkt_tol * max(1.0, float(lam)), max_sweeps)
        violations[k] = kkt_violation(G, c, beta, float(lam))
        converged[k] = violations[k] <= kkt_tol * max(1.0, float(lam))
        if not converged[k]:
            logger.warning("lasso did not converge at lambda=%g (KKT violation %.2e)", lam, violations[k])
        coefs[k] = beta
    return LassoPath(lambda_grid=grid, coefficients=coefs,
                     entry_values=entry_values(coefs, grid, 0.0),
                     converged=converged, kkt_violation=violations)


def lasso_objective(X: np.ndarray, Y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    r = Y - X @ beta
    return 0.5 * float(r @ r) + lam * float(np.abs(beta).sum())
