"""Global minimisation of the TREX objective.

The objective, in the form used throughout this package, is

    F(beta) = ||Y - X beta||^2 / (phi * max_j |x_j'(Y - X beta)|) + ||beta||_1.

(The more common way of writing it puts phi in front of the l1 term instead;
that version is phi * F and has the same minimisers.)  F is the pointwise
minimum of the 2p functions obtained by fixing the maximising column j and the
sign s of ``x_j'(Y - X beta)``.  Each of those is a convex
quadratic-over-linear program over a half-space and is solved as an SOCP;
the smallest of the 2p optimal values is the global minimum of F.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp

from . import conic
from ._parallel import ordered_map
from .io import parse_float, read_csv_matrix, read_csv_vector

logger = logging.getLogger(__name__)

SIGNS = (-1, 1)


class DegenerateObjectiveError(ArithmeticError):
    """``X'(Y - X beta) = 0`` while the residual is nonzero: the ratio is undefined."""


class CtrexFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class RegressionProblem:
    """Design matrix ``X`` (n x p) and response ``Y`` (n).

    Columns are never rescaled silently; :meth:`normalized` returns a copy
    with unit-norm columns and logs that it did so.
    """

    X: np.ndarray
    Y: np.ndarray
    column_norms: np.ndarray = field(default=None)
    standardized: bool = False

    def __post_init__(self):
        X = np.array(self.X, dtype=float)
        Y = np.array(self.Y, dtype=float).ravel()
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise ValueError(f"X must be a matrix, got {X.ndim} dimensions")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError(f"X must have at least one row and one column, got {X.shape}")
        if Y.shape != (n,):
            raise ValueError(f"dimension mismatch: X has {n} rows, Y has length {Y.size}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Y))):
            raise ValueError("X and Y must be finite")
        norms = np.linalg.norm(X, axis=0)
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ValueError(f"all-zero columns in X: {zero.tolist()}")
        X.setflags(write=False)
        Y.setflags(write=False)
        norms.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "column_norms", norms)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def normalized(self) -> "RegressionProblem":
        """Copy with every column scaled to unit Euclidean norm."""
        logger.info("normalising %d columns to unit Euclidean norm", self.p)
        return RegressionProblem(self.X / self.column_norms, self.Y, standardized=True)

    @classmethod
    def from_csv(cls, x_path: str | Path, y_path: str | Path) -> "RegressionProblem":
        X, _ = read_csv_matrix(x_path)
        Y = read_csv_vector(y_path)
        return cls(X, Y)


@dataclass(frozen=True)
class TrexParams:
    phi: float = 0.5
    objective_tolerance: float = 1e-4
    support_threshold: float = 1e-10

    def __post_init__(self):
        if not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if not self.support_threshold > 0:
            raise ValueError(f"support_threshold must be positive, got {self.support_threshold}")
        if self.objective_tolerance < 0:
            raise ValueError("objective_tolerance must be nonnegative")


@dataclass(frozen=True)
class SubproblemResult:
    j: int
    s: int
    beta: np.ndarray | None
    value: float
    status: conic.Status
    iterations: int = 0
    margin: float = np.nan
    near_boundary: bool = False
    solution: conic.ConicSolution | None = field(default=None, repr=False, compare=False)

    @property
    def optimal(self) -> bool:
        return self.status is conic.Status.OPTIMAL

    def to_dict(self, include_beta: bool = False) -> dict[str, Any]:
        out = {"j": self.j, "s": self.s, "value": self.value, "status": self.status.value,
               "iterations": self.iterations, "margin": self.margin,
               "near_boundary": self.near_boundary}
        if include_beta and self.beta is not None:
            out["beta"] = self.beta.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SubproblemResult":
        beta = np.asarray(d["beta"], dtype=float) if "beta" in d else None
        return cls(j=int(d["j"]), s=int(d["s"]), beta=beta, value=parse_float(d["value"]),
                   status=conic.Status(d["status"]), iterations=int(d.get("iterations", 0)),
                   margin=parse_float(d.get("margin", "nan")),
                   near_boundary=bool(d.get("near_boundary", False)))


@dataclass(frozen=True)
class TrexSolution:
    beta_hat: np.ndarray
    value: float
    winner: tuple[int, int]
    all_values: tuple[SubproblemResult, ...]
    phi: float = 0.5

    @property
    def failures(self) -> list[SubproblemResult]:
        return [r for r in self.all_values if not r.optimal]

    @property
    def iterations(self) -> int:
        return sum(r.iterations for r in self.all_values)

    def subproblem(self, j: int, s: int) -> SubproblemResult:
        return self.all_values[2 * j + (s > 0)]

    def to_dict(self, include_betas: bool = False) -> dict[str, Any]:
        return {
            "phi": self.phi,
            "value": self.value,
            "winner": {"j": self.winner[0], "s": self.winner[1]},
            "beta_hat": self.beta_hat.tolist(),
            "subproblems": [r.to_dict(include_betas) for r in self.all_values],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "TrexSolution":
        return cls(beta_hat=np.asarray(d["beta_hat"], dtype=float), value=parse_float(d["value"]),
                   winner=(int(d["winner"]["j"]), int(d["winner"]["s"])),
                   all_values=tuple(SubproblemResult.from_dict(r) for r in d["subproblems"]),
                   phi=parse_float(d["phi"]))


# ---------------------------------------------------------------------------
# objective


def trex_objective(problem: RegressionProblem, beta: np.ndarray, phi: float) -> float:
    """TREX objective with phi in the denominator.

    At an exact fit (zero residual) the ratio is taken to be 0, its limit
    along every ray into the fit point, so the value is ``||beta||_1``.
    """
    if not phi > 0:
        raise ValueError(f"phi must be positive, got {phi}")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (problem.p,):
        raise ValueError(f"beta has shape {beta.shape}, expected ({problem.p},)")
    r = problem.Y - problem.X @ beta
    l1 = float(np.abs(beta).sum())
    if not r.any():
        return l1
    denom = phi * float(np.max(np.abs(problem.X.T @ r)))
    if denom == 0.0:
        raise DegenerateObjectiveError("X'(Y - X beta) vanishes at a nonzero residual")
    return float(r @ r) / denom + l1


def subproblem_integrand(problem: RegressionProblem, beta: np.ndarray, phi: float,
                         j: int, s: int) -> float:
    """Objective of subproblem (j, s) at ``beta``; +inf outside its half-space."""
    beta = np.asarray(beta, dtype=float)
    r = problem.Y - problem.X @ beta
    a = s * phi * float(problem.X[:, j] @ r)
    l1 = float(np.abs(beta).sum())
    if a > 0:
        return float(r @ r) / a + l1
    if a == 0 and not r.any():
        return l1
    return np.inf


# ---------------------------------------------------------------------------
# subproblems


def _check_index(problem: RegressionProblem, phi: float, j: int, s: int) -> None:
    if not phi > 0:
        raise ValueError(f"phi must be positive, got {phi}")
    if not 0 <= j < problem.p:
        raise IndexError(f"feature index {j} out of range for p = {problem.p}")
    if s not in SIGNS:
        raise ValueError(f"sign must be -1 or +1, got {s}")
    if problem.column_norms[j] == 0:
        raise ValueError(f"column {j} is zero; the half-space direction must be nonzero")


def assemble_subproblem(problem: RegressionProblem, phi: float, j: int, s: int) -> conic.ConicProblem:
    """SOCP for subproblem (j, s) with half-space direction ``v = s * phi * x_j``.

    Variables are ``(t_0, ..., t_p, beta_1, ..., beta_p)``, the objective is
    ``sum(t)``, and the constraints are

        ||(2 r, v'r - t_0)||_2 <= v'r + t_0      (one cone of size n + 2)
        |beta_k| <= t_k                          (p cones of size 2)

    with ``r = Y - X beta``.  The first cone implies ``v'r >= 0``.
    """
    _check_index(problem, phi, j, s)
    X, Y = problem.X, problem.Y
    n, p = X.shape
    v = s * phi * X[:, j]
    vX = v @ X
    vY = float(v @ Y)

    top = np.zeros((n + 2, 2 * p + 1))
    top[0, 0] = -1.0
    top[0, p + 1:] = vX
    top[1:n + 1, p + 1:] = 2.0 * X
    top[n + 1, 0] = 1.0
    top[n + 1, p + 1:] = vX
    rows = np.arange(2 * p)
    cols = np.empty(2 * p, dtype=int)
    cols[0::2] = np.arange(1, p + 1)
    cols[1::2] = np.arange(p + 1, 2 * p + 1)
    blocks = sp.csc_matrix((-np.ones(2 * p), (rows, cols)), shape=(2 * p, 2 * p + 1))
    A = sp.vstack([sp.csc_matrix(top), blocks], format="csc")
    b = np.concatenate([[vY], 2.0 * Y, [vY], np.zeros(2 * p)])
    c = np.concatenate([np.ones(p + 1), np.zeros(p)])
    return conic.ConicProblem(c=c, A=A, b=b, cones=conic.ConeSpec(0, 0, (n + 2,) + (2,) * p))


def solve_subproblem(problem: RegressionProblem, phi: float, j: int, s: int,
                     warm: conic.ConicSolution | SubproblemResult | None = None,
                     settings: conic.SolverSettings | None = None) -> SubproblemResult:
    """Solve subproblem (j, s); solver failures are reported in the status, not raised.

    ``beta`` is read from the slack of the ``|beta_k| <= t_k`` cones, which the
    solver keeps exactly inside the cone, so inactive coefficients come out
    as exact zeros.
    """
    settings = settings or conic.SolverSettings()
    if isinstance(warm, SubproblemResult):
        warm = warm.solution
    cp = assemble_subproblem(problem, phi, j, s)
    sol = conic.solve(cp, settings, warm=warm)
    n, p = problem.n, problem.p
    beta = np.array(sol.s[n + 3::2], dtype=float)
    if sol.status in (conic.Status.OPTIMAL, conic.Status.MAX_ITERATIONS) and np.all(np.isfinite(beta)):
        r = problem.Y - problem.X @ beta
        margin = float(s * phi * (problem.X[:, j] @ r))
        scale = 1.0 + abs(s * phi * float(problem.X[:, j] @ problem.Y))
        near = margin <= 10.0 * settings.tolerance * scale
        value = float(sol.primal_objective)
    else:
        margin, near, value = np.nan, False, np.inf
    if near:
        logger.info("subproblem (%d, %+d) sits on its half-space boundary", j, s)
    return SubproblemResult(j=j, s=s, beta=beta, value=value, status=sol.status,
                            iterations=sol.iterations, margin=margin, near_boundary=near,
                            solution=sol)


# ---------------------------------------------------------------------------
# global algorithm


def _select_winner(results: Sequence[SubproblemResult], tol: float) -> SubproblemResult:
    ok = [r for r in results if r.optimal]
    if not ok:
        raise CtrexFailure("every subproblem failed: " +
                           ", ".join(f"({r.j},{r.s:+d}) {r.status.value}" for r in results))
    best = min(r.value for r in ok)
    # ties inside the tolerance go to the smallest (j, s), with s = -1 first
    return min((r for r in ok if r.value <= best + tol), key=lambda r: (r.j, r.s))


def _assemble_solution(results: list[SubproblemResult], params: TrexParams) -> TrexSolution:
    winner = _select_winner(results, params.objective_tolerance)
    failed = [r for r in results if not r.optimal]
    if failed:
        logger.warning("%d of %d subproblems failed and were excluded: %s", len(failed),
                       len(results), ", ".join(f"({r.j},{r.s:+d}) {r.status.value}" for r in failed))
    value = min(r.value for r in results if r.optimal)
    return TrexSolution(beta_hat=winner.beta.copy(), value=value, winner=(winner.j, winner.s),
                        all_values=tuple(results), phi=params.phi)


def ctrex(problem: RegressionProblem, params: TrexParams | None = None, parallelism: int = 1,
          settings: conic.SolverSettings | None = None) -> TrexSolution:
    """Global TREX minimiser from all 2p subproblems.

    The result does not depend on ``parallelism``: subproblems are merged in
    (j, s) order and the winner is chosen by a fixed tie-break.
    """
    params = params or TrexParams()
    tasks = [(j, s) for j in range(problem.p) for s in SIGNS]
    results = ordered_map(
        lambda js: solve_subproblem(problem, params.phi, js[0], js[1], settings=settings),
        tasks, parallelism)
    return _assemble_solution(results, params)


@dataclass(frozen=True)
class TrexPath:
    phi_grid: np.ndarray
    solutions: tuple[TrexSolution, ...]
    entry_values: np.ndarray
    iterations: int

    def to_dict(self) -> dict[str, Any]:
        return {"phi_grid": self.phi_grid.tolist(), "entry_values": self.entry_values.tolist(),
                "iterations": self.iterations,
                "solutions": [s.to_dict() for s in self.solutions]}


def entry_values(betas: np.ndarray, grid: np.ndarray, threshold: float) -> np.ndarray:
    """Largest grid value at which each coefficient is above ``threshold``; 0 if never.

    ``betas`` has one row per grid point.
    """
    betas = np.atleast_2d(betas)
    grid = np.asarray(grid, dtype=float)
    active = np.abs(betas) > threshold
    z = np.zeros(betas.shape[1])
    for k in range(betas.shape[1]):
        hits = grid[active[:, k]]
        if hits.size:
            z[k] = hits.max()
    return z


def _check_descending(grid: np.ndarray, name: str) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError(f"{name} is empty")
    if np.any(grid <= 0):
        raise ValueError(f"{name} must be positive")
    if np.any(np.diff(grid) >= 0):
        raise ValueError(f"{name} must be strictly decreasing")
    return grid


def ctrex_path(problem: RegressionProblem, phi_grid: Sequence[float],
               params: TrexParams | None = None, settings: conic.SolverSettings | None = None,
               parallelism: int = 1, warm_start: bool = True) -> TrexPath:
    """c-TREX along a decreasing phi grid.

    Each subproblem (j, s) is warm-started from its own solution at the
    previous grid value.  ``entry_values[k]`` is the largest phi at which the
    global minimiser has ``|beta_k| > params.support_threshold``.
    """
    params = params or TrexParams()
    grid = _check_descending(phi_grid, "phi_grid")
    tasks = [(j, s) for j in range(problem.p) for s in SIGNS]
    previous: dict[tuple[int, int], SubproblemResult] = {}
    solutions = []
    for phi in grid:
        def run(js, phi=phi):
            warm = previous.get(js) if warm_start else None
            return solve_subproblem(problem, float(phi), js[0], js[1], warm=warm, settings=settings)

        results = ordered_map(run, tasks, parallelism)
        local = TrexParams(phi=float(phi), objective_tolerance=params.objective_tolerance,
                           support_threshold=params.support_threshold)
        solutions.append(_assemble_solution(results, local))
        previous = {(r.j, r.s): r for r in results if r.solution is not None and r.optimal}
    betas = np.array([sol.beta_hat for sol in solutions])
    z = entry_values(betas, grid, params.support_threshold)
    return TrexPath(phi_grid=grid, solutions=tuple(solutions), entry_values=z,
                    iterations=sum(sol.iterations for sol in solutions))


# ---------------------------------------------------------------------------
# topology


@dataclass(frozen=True)
class TopologyReport:
    sorted_values: np.ndarray
    per_feature: np.ndarray
    importance: np.ndarray
    ranking: np.ndarray
    bin_counts: np.ndarray
    bin_edges: np.ndarray
    failed: tuple[tuple[int, int], ...]

    def rows(self):
        """(feature, P*_j, importance, rank) rows for CSV export."""
        rank = np.empty_like(self.ranking)
        rank[self.ranking] = np.arange(self.ranking.size)
        for j in range(self.per_feature.size):
            yield j, self.per_feature[j], self.importance[j], int(rank[j])


def topology_report(solution: TrexSolution, bins: int = 20) -> TopologyReport:
    """Distribution of the 2p subproblem values and the derived variable ranking.

    ``per_feature[j] = min(P*(phi x_j), P*(-phi x_j))`` and the importance of
    feature j is its reciprocal.  Failed subproblems are listed separately
    and left out of the histogram.
    """
    ok = [r for r in solution.all_values if r.optimal]
    failed = tuple((r.j, r.s) for r in solution.all_values if not r.optimal)
    values = np.sort(np.array([r.value for r in ok]))
    p = len(solution.beta_hat)
    per_feature = np.full(p, np.inf)
    for r in ok:
        per_feature[r.j] = min(per_feature[r.j], r.value)
    with np.errstate(divide="ignore"):
        importance = np.where(per_feature > 0, 1.0 / per_feature, np.inf)
    ranking = np.argsort(-importance, kind="stable")
    counts, edges = np.histogram(values, bins=bins) if values.size else (np.zeros(bins, int),
                                                                          np.zeros(bins + 1))
    return TopologyReport(sorted_values=values, per_feature=per_feature, importance=importance,
                          ranking=ranking, bin_counts=counts, bin_edges=edges, failed=failed)
