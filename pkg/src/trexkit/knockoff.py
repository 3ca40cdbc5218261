"""Fixed-design knockoffs, the TREX and lasso W statistics, and selection rules.

Feature indices are 0-based everywhere; the knockoff of column ``j`` is
column ``j + p`` of the augmented design ``[X X_tilde]``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import scipy.linalg as la
from scipy import stats

from . import conic
from .io import write_csv
from .lasso import lasso_path
from .qtrex import QtrexParams, qtrex_solve
from .trex import (DegenerateObjectiveError, RegressionProblem, TrexParams, ctrex, ctrex_path,
                   entry_values, topology_report)

logger = logging.getLogger(__name__)

VARIANTS = ("f_value", "phi_path", "lasso_signed_max")
DEFAULT_PHI_GRID = np.round(np.arange(1.5, 0.1 - 1e-9, -0.05), 10)
PSD_SLACK = 1e-10


@dataclass(frozen=True)
class KnockoffAugmentation:
    """Knockoff design for a (possibly row-augmented, unit-normalised) ``X``.

    ``X`` and ``Y`` are the matrices the statistics must be computed on:
    when ``p <= n < 2p`` they carry ``augmented_rows`` extra rows (zeros in
    ``X``, fresh noise of scale ``sigma_hat`` in ``Y``).
    """

    X: np.ndarray
    X_tilde: np.ndarray
    gap_vector: np.ndarray
    Y: np.ndarray | None = None
    augmented_rows: int = 0
    sigma_hat: float | None = None
    column_norms: np.ndarray | None = None
    seed: int | tuple[int, ...] = 0

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def design(self) -> np.ndarray:
        return np.hstack([self.X, self.X_tilde])

    def gram_errors(self) -> tuple[float, float]:
        """Max-norm errors of the identities ``X~'X~ = X'X`` and ``X'X~ = X'X - diag(s)``."""
        G = self.X.T @ self.X
        e1 = np.max(np.abs(self.X_tilde.T @ self.X_tilde - G))
        e2 = np.max(np.abs(self.X.T @ self.X_tilde - (G - np.diag(self.gap_vector))))
        return float(e1), float(e2)

    def to_dict(self) -> dict[str, Any]:
        return {"gap_vector": self.gap_vector, "augmented_rows": self.augmented_rows,
                "sigma_hat": self.sigma_hat, "seed": self.seed,
                "gram_errors": list(self.gram_errors()), "X_tilde": self.X_tilde}


def construct_knockoffs(X: np.ndarray, Y: np.ndarray | None = None,
                        seed: int | Sequence[int] = 0) -> KnockoffAugmentation:
    """Equi-correlated knockoffs with gap ``s = min(2 * lambda_min(X'X), 1)``.

    Columns are rescaled to unit norm first (logged) if they are not already.
    ``Y`` is required when ``p <= n < 2p``, where ``2p - n`` zero rows are
    appended to ``X`` and ``Y`` is extended with ``N(0, sigma_hat^2)`` draws,
    ``sigma_hat`` being the least-squares residual scale on the original data.
    """
    X = np.array(X, dtype=float)
    n, p = X.shape
    if n < p:
        raise ValueError(f"knockoffs need n >= p, got n = {n}, p = {p}")
    norms = np.linalg.norm(X, axis=0)
    if np.any(norms == 0):
        raise ValueError("X has an all-zero column")
    if np.max(np.abs(norms - 1.0)) > 1e-10:
        logger.warning("normalising the columns of X to unit Euclidean norm")
        X = X / norms
    Yv = None if Y is None else np.array(Y, dtype=float).ravel()
    if Yv is not None and Yv.shape != (n,):
        raise ValueError(f"dimension mismatch: X has {n} rows, Y has length {Yv.size}")

    G = X.T @ X
    eig = np.linalg.eigvalsh(G)
    if eig[0] <= 1e-10 * eig[-1]:
        cond = np.inf if eig[0] <= 0 else eig[-1] / eig[0]
        raise ValueError(f"X'X is singular to working precision (condition number {cond:.3g})")

    rng = np.random.default_rng([*np.atleast_1d(seed).tolist(), 1])
    extra = max(0, 2 * p - n)
    sigma_hat = None
    if extra:
        if Yv is None:
            raise ValueError("Y is required to augment rows when n < 2p")
        if n == p:
            raise ValueError("n = p leaves no residual degrees of freedom to estimate the noise")
        coef, *_ = np.linalg.lstsq(X, Yv, rcond=None)
        resid = Yv - X @ coef
        sigma_hat = float(np.sqrt(resid @ resid / (n - p)))
        X = np.vstack([X, np.zeros((extra, p))])
        Yv = np.concatenate([Yv, sigma_hat * rng.standard_normal(extra)])
        logger.info("appended %d rows for knockoff construction (sigma_hat = %.4g)", extra, sigma_hat)

    s = min(2.0 * eig[0], 1.0)
    cf = la.cho_factor(G)
    Ginv = la.cho_solve(cf, np.eye(p))
    # Orthonormal basis of a p-dimensional subspace orthogonal to span(X).
    Q, _ = np.linalg.qr(np.hstack([X, rng.standard_normal((X.shape[0], p))]))
    U_tilde = Q[:, p:2 * p]
    M = 2.0 * s * np.eye(p) - s * s * Ginv
    w, V = np.linalg.eigh((M + M.T) / 2.0)
    if w[0] < -PSD_SLACK:
        raise ValueError(f"gap matrix is not positive semidefinite (eigenvalue {w[0]:.3g})")
    C = np.sqrt(np.clip(w, 0.0, None))[:, None] * V.T
    X_tilde = X - s * (X @ Ginv) + U_tilde @ C
    return KnockoffAugmentation(X=X, X_tilde=X_tilde, gap_vector=np.full(p, s), Y=Yv,
                                augmented_rows=extra, sigma_hat=sigma_hat, column_norms=norms,
                                seed=seed)


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class KnockoffStats:
    W: np.ndarray
    variant: str
    Z: np.ndarray  # length 2p: originals then knockoffs
    failures: tuple[str, ...] = ()

    @property
    def Z_pairs(self) -> np.ndarray:
        p = self.W.size
        return np.column_stack([self.Z[:p], self.Z[p:]])

    def to_dict(self) -> dict[str, Any]:
        return {"variant": self.variant, "W": self.W, "Z_pairs": self.Z_pairs,
                "failures": list(self.failures)}

    def write_csv(self, path) -> None:
        write_csv(path, ["feature", "W", "Z", "Z_knockoff"],
                  ((j, w, z[0], z[1]) for j, (w, z) in enumerate(zip(self.W, self.Z_pairs))))


def signed_max(Z: np.ndarray) -> np.ndarray:
    """``W_j = max(Z_j, Z_{j+p}) * sign(Z_j - Z_{j+p})`` for a length-2p vector ``Z``."""
    Z = np.asarray(Z, dtype=float)
    p = Z.size // 2
    a, b = Z[:p], Z[p:]
    return np.maximum(a, b) * np.sign(a - b)


def _augmented(X, X_tilde, Y) -> RegressionProblem:
    X = np.asarray(X, dtype=float)
    X_tilde = np.asarray(X_tilde, dtype=float)
    if X.shape != X_tilde.shape:
        raise ValueError(f"X and X_tilde shapes differ: {X.shape} vs {X_tilde.shape}")
    return RegressionProblem(np.hstack([X, X_tilde]), Y)


def stat_lasso_signed_max(X, X_tilde, Y, lambda_grid: Sequence[float] | None = None) -> KnockoffStats:
    prob = _augmented(X, X_tilde, Y)
    path = lasso_path(prob.X, prob.Y, lambda_grid)
    failures = tuple(f"lambda={lam!r} unconverged"
                     for lam, ok in zip(path.lambda_grid, path.converged) if not ok)
    return KnockoffStats(W=signed_max(path.entry_values), variant="lasso_signed_max",
                         Z=path.entry_values, failures=failures)


def stat_trex_phi_path(X, X_tilde, Y, phi_grid: Sequence[float] = DEFAULT_PHI_GRID,
                       heuristic_params: QtrexParams | None = None, solver: str = "qtrex",
                       settings: conic.SolverSettings | None = None,
                       support_threshold: float = 1e-10) -> KnockoffStats:
    """``Z_j`` is the largest phi on the grid at which feature j is in the TREX estimate.

    With ``solver="qtrex"`` a single proximal-gradient run is carried down
    the grid, each phi starting from the previous estimate (the first from
    zero).  ``solver="ctrex"`` uses the global path instead.  A grid point
    whose solve fails counts as all-inactive and is reported.
    """
    prob = _augmented(X, X_tilde, Y)
    grid = np.asarray(phi_grid, dtype=float).ravel()
    if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
        raise ValueError("phi_grid must be positive and strictly decreasing")
    failures: list[str] = []
    if solver == "ctrex":
        path = ctrex_path(prob, grid, TrexParams(support_threshold=support_threshold), settings)
        for phi, sol in zip(grid, path.solutions):
            failures += [f"phi={phi!r} ({r.j},{r.s:+d}) {r.status.value}" for r in sol.failures]
        Z = path.entry_values
    elif solver == "qtrex":
        base = heuristic_params or QtrexParams()
        betas = np.zeros((grid.size, prob.p))
        beta = np.zeros(prob.p)
        for k, phi in enumerate(grid):
            params = QtrexParams(**{**base.__dict__, "phi": float(phi)})
            try:
                beta = qtrex_solve(prob, params, beta).beta
                betas[k] = beta
            except DegenerateObjectiveError as exc:
                failures.append(f"phi={phi!r}: {exc}")
        Z = entry_values(betas, grid, support_threshold)
    else:
        raise ValueError(f"solver must be 'qtrex' or 'ctrex', got {solver!r}")
    return KnockoffStats(W=signed_max(Z), variant="phi_path", Z=Z, failures=tuple(failures))


def stat_trex_fvalue(X, X_tilde, Y, phi: float = 0.5, settings: conic.SolverSettings | None = None,
                     parallelism: int = 1) -> KnockoffStats:
    """``Z_j = 1 / P*_j`` with ``P*_j`` the better of the two signed subproblems of column j.

    A column whose two subproblems both failed gets ``Z = nan``; its pair is
    excluded (``W_j = 0``) and reported.
    """
    prob = _augmented(X, X_tilde, Y)
    sol = ctrex(prob, TrexParams(phi=phi), parallelism=parallelism, settings=settings)
    topo = topology_report(sol)
    p = prob.p // 2
    per = topo.per_feature
    with np.errstate(divide="ignore"):
        Z = np.where(np.isfinite(per), 1.0 / per, np.nan)
    failures = [f"({j},{s:+d})" for j, s in topo.failed]
    W = np.zeros(p)
    for j in range(p):
        a, b = Z[j], Z[j + p]
        if np.isnan(a) or np.isnan(b):
            failures.append(f"pair {j} excluded")
            continue
        W[j] = max(a, b) * np.sign(a - b)
    return KnockoffStats(W=W, variant="f_value", Z=Z, failures=tuple(failures))


def compute_statistic(aug: KnockoffAugmentation, variant: str, **kwargs) -> KnockoffStats:
    if aug.Y is None:
        raise ValueError("the augmentation carries no response")
    funcs = {"f_value": stat_trex_fvalue, "phi_path": stat_trex_phi_path,
             "lasso_signed_max": stat_lasso_signed_max}
    if variant not in funcs:
        raise ValueError(f"unknown statistic {variant!r}; choose from {VARIANTS}")
    return funcs[variant](aug.X, aug.X_tilde, aug.Y, **kwargs)


# ---------------------------------------------------------------------------
# selection


@dataclass(frozen=True)
class SelectionResult:
    """Selected features.  For ``rule="knockoff"`` the threshold applies to W;
    for ``rule="bhq"`` it is the p-value cutoff ``k q / m`` (0 if nothing is selected)."""

    threshold: float
    selected: np.ndarray
    q_target: float
    variant: str | None = None
    rule: str = "knockoff"
    trace: tuple[tuple[float, float], ...] = field(default=(), repr=False)

    def to_dict(self) -> dict[str, Any]:
        return {"threshold": self.threshold, "selected": self.selected.tolist(),
                "q_target": self.q_target, "variant": self.variant, "rule": self.rule,
                "trace": [{"t": t, "ratio": r} for t, r in self.trace]}


def _check_q(q: float) -> float:
    q = float(q)
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return q


def knockoff_threshold(W: np.ndarray, q: float, variant: str | None = None) -> SelectionResult:
    """``T = min{t in |W| \\ {0} : #{W <= -t} / max(#{W >= t}, 1) <= q}``; ``+inf`` if none."""
    q = _check_q(q)
    W = np.asarray(W, dtype=float).ravel()
    cands = np.unique(np.abs(W[W != 0]))
    Ws = np.sort(W)
    neg = np.searchsorted(Ws, -cands, side="right")
    pos = W.size - np.searchsorted(Ws, cands, side="left")
    ratio = neg / np.maximum(pos, 1)
    ok = np.flatnonzero(ratio <= q)
    T = float(cands[ok[0]]) if ok.size else np.inf
    selected = np.flatnonzero(W >= T)
    trace = tuple((float(t), float(r)) for t, r in zip(cands, ratio))
    return SelectionResult(threshold=T, selected=selected, q_target=q, variant=variant, trace=trace)


def bh_stepup(pvalues: np.ndarray, q: float) -> tuple[np.ndarray, float]:
    """Benjamini-Hochberg step-up: indices with ``p <= k q / m`` for the largest qualifying k."""
    q = _check_q(q)
    pv = np.asarray(pvalues, dtype=float).ravel()
    m = pv.size
    order = np.argsort(pv, kind="stable")
    below = np.flatnonzero(pv[order] <= q * np.arange(1, m + 1) / m)
    if not below.size:
        return np.array([], dtype=int), 0.0
    k = below[-1] + 1
    return np.sort(order[:k]), q * k / m


def ols_pvalues(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Two-sided p-values of the least-squares t-statistics."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    n, p = X.shape
    if n <= p:
        raise ValueError(f"least-squares p-values need n > p, got n = {n}, p = {p}")
    if np.linalg.matrix_rank(X) < p:
        raise ValueError("X is rank deficient")
    Q, R = np.linalg.qr(X)
    coef = la.solve_triangular(R, Q.T @ Y)
    resid = Y - X @ coef
    df = n - p
    sigma2 = float(resid @ resid) / df
    Rinv = la.solve_triangular(R, np.eye(p))
    se = np.sqrt(sigma2 * np.sum(Rinv ** 2, axis=1))
    t = coef / se
    return 2.0 * stats.t.sf(np.abs(t), df)


def bhq_select(X: np.ndarray, Y: np.ndarray, q: float) -> SelectionResult:
    selected, cutoff = bh_stepup(ols_pvalues(X, Y), q)
    return SelectionResult(threshold=cutoff, selected=selected, q_target=float(q), variant="bhq",
                           rule="bhq")


# ---------------------------------------------------------------------------
# swap rotation


def swap_columns(B: np.ndarray, S: Sequence[int]) -> np.ndarray:
    """``[X X~]`` with column j exchanged with column j + p for every j in S."""
    p = B.shape[1] // 2
    out = B.copy()
    for j in S:
        if not 0 <= j < p:
            raise IndexError(f"swap index {j} out of range for p = {p}")
        out[:, [j, j + p]] = B[:, [j + p, j]]
    return out


def swap_rotation(X: np.ndarray, X_tilde: np.ndarray, S: Sequence[int], tol: float = 1e-8) -> np.ndarray:
    """Orthogonal ``R`` with ``R [X X~] = [X X~]_swap(S)``.

    ``R = U V'`` from the SVD of ``M = [X X~]_swap(S) [X X~]'``.  Such an R
    exists only when the augmented Gram matrix is swap-invariant, which is
    checked first.
    """
    X = np.asarray(X, dtype=float)
    X_tilde = np.asarray(X_tilde, dtype=float)
    G = X.T @ X
    scale = max(1.0, float(np.max(np.abs(G))))
    cross = X.T @ X_tilde - G
    err = max(float(np.max(np.abs(X_tilde.T @ X_tilde - G))),
              float(np.max(np.abs(cross - np.diag(np.diag(cross))))))
    if err > tol * scale:
        raise ValueError(f"knockoff Gram identities fail (error {err:.3g}); no swap rotation exists")
    B = np.hstack([X, X_tilde])
    U, _, Vt = np.linalg.svd(swap_columns(B, S) @ B.T)
    return U @ Vt
