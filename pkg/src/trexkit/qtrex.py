"""q-TREX: the smooth heuristic for the TREX objective.

The l-infinity norm in the denominator is replaced by an l_q norm with a
large even q, giving the surrogate

    G(beta) = ||Y - X beta||^2 / (phi * ||X'(Y - X beta)||_q) + ||beta||_1

which is differentiable in its first term but still non-convex.  It is
minimised by proximal gradient with backtracking from one or more starting
points.  Reported values are always the exact TREX objective, so they can
be compared with the global minimum from :func:`trexkit.trex.ctrex`.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from ._parallel import ordered_map
from .io import write_csv
from .trex import DegenerateObjectiveError, RegressionProblem, trex_objective

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QtrexParams:
    q_exponent: int = 40
    phi: float = 0.5
    n_starts: int = 21
    nonzero_fraction: float = 0.25
    max_iterations: int = 20_000
    step_tolerance: float = 1e-10
    value_tolerance: float = 1e-13
    initial_step: float = 1.0
    backtrack_factor: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.q_exponent < 2 or self.q_exponent % 2:
            raise ValueError(f"q_exponent must be an even integer >= 2, got {self.q_exponent}")
        if not self.phi > 0:
            raise ValueError(f"phi must be positive, got {self.phi}")
        if self.n_starts < 1:
            raise ValueError("n_starts must be at least 1")
        if not 0 < self.nonzero_fraction <= 1:
            raise ValueError("nonzero_fraction must lie in (0, 1]")
        if not 0 < self.backtrack_factor < 1:
            raise ValueError("backtrack_factor must lie in (0, 1)")


def lq_norm(u: np.ndarray, q: int) -> float:
    m = float(np.max(np.abs(u))) if u.size else 0.0
    if m == 0.0:
        return 0.0
    return m * float(np.sum((np.abs(u) / m) ** q)) ** (1.0 / q)


def _smooth_parts(problem: RegressionProblem, beta: np.ndarray, phi: float, q: int):
    r = problem.Y - problem.X @ beta
    g = problem.X.T @ r
    N = lq_norm(g, q)
    if N == 0.0:
        raise DegenerateObjectiveError("X'(Y - X beta) vanishes; the smooth term is undefined")
    rr = float(r @ r)
    return r, g, N, rr


def smooth_objective(problem: RegressionProblem, beta: np.ndarray, phi: float,
                     q_exponent: int = 40) -> float:
    """The surrogate G(beta); never larger than the exact objective since ``||u||_q >= ||u||_inf``."""
    beta = np.asarray(beta, dtype=float)
    _, _, N, rr = _smooth_parts(problem, beta, phi, q_exponent)
    return rr / (phi * N) + float(np.abs(beta).sum())


def smooth_gradient(problem: RegressionProblem, beta: np.ndarray, phi: float,
                    q_exponent: int = 40) -> np.ndarray:
    """Gradient of the quotient term of G (the l1 term is handled by the prox step).

    With ``r = Y - X beta``, ``g = X'r`` and ``N = ||g||_q``:
    ``grad = (||r||^2 X'X w - 2 N g) / (phi N^2)`` where
    ``w_i = sign(g_i) (|g_i| / N)^(q-1)`` is the gradient of ``N`` in ``g``.
    """
    beta = np.asarray(beta, dtype=float)
    _, g, N, rr = _smooth_parts(problem, beta, phi, q_exponent)
    return _quotient_gradient(problem, g, N, rr, phi, q_exponent)


def _quotient_gradient(problem, g, N, rr, phi, q):
    w = np.sign(g) * np.abs(g / N) ** (q - 1)
    XtXw = problem.X.T @ (problem.X @ w)
    return (rr * XtXw - 2.0 * N * g) / (phi * N * N)


def _soft(z: np.ndarray, t: float) -> np.ndarray:
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


@dataclass(frozen=True)
class QtrexRun:
    beta: np.ndarray
    exact_value: float
    smooth_value: float
    iterations: int
    converged: bool
    perturbations: int = 0
    smooth_trace: np.ndarray | None = field(default=None, repr=False, compare=False)


def _exact_or_inf(problem, beta, phi):
    try:
        return trex_objective(problem, beta, phi)
    except DegenerateObjectiveError:
        return np.inf


def qtrex_solve(problem: RegressionProblem, params: QtrexParams | None = None,
                beta0: np.ndarray | None = None, record_trace: bool = False) -> QtrexRun:
    """Proximal gradient on the surrogate from ``beta0`` (zero by default).

    Each step backtracks from ``min(initial_step, 2 * last accepted step)`` by
    ``backtrack_factor`` until the quadratic upper bound on the quotient term
    holds, which makes the surrogate non-increasing along accepted iterates.
    Stops when the step or the relative change of the surrogate falls below
    its tolerance, or at ``max_iterations``.
    """
    params = params or QtrexParams()
    phi, q = params.phi, params.q_exponent
    beta = np.zeros(problem.p) if beta0 is None else np.array(beta0, dtype=float)
    if beta.shape != (problem.p,) or not np.all(np.isfinite(beta)):
        raise ValueError("initial beta must be a finite vector of length p")

    perturbations = 0
    rng = None
    while True:
        try:
            _, g, N, rr = _smooth_parts(problem, beta, phi, q)
            break
        except DegenerateObjectiveError:
            if perturbations >= 10:
                raise
            rng = rng or np.random.default_rng([params.seed, 7919])
            beta = beta + 1e-6 * rng.standard_normal(problem.p)
            perturbations += 1
            logger.info("degenerate start, perturbing (attempt %d)", perturbations)

    f = rr / (phi * N)
    F = f + float(np.abs(beta).sum())
    trace = [F] if record_trace else None
    step = params.initial_step
    converged = False
    it = 0
    for it in range(1, params.max_iterations + 1):
        grad = _quotient_gradient(problem, g, N, rr, phi, q)
        t = min(params.initial_step, 2.0 * step)
        while True:
            cand = _soft(beta - t * grad, t)
            d = cand - beta
            try:
                _, g_c, N_c, rr_c = _smooth_parts(problem, cand, phi, q)
                f_c = rr_c / (phi * N_c)
            except DegenerateObjectiveError:
                f_c = np.inf
            if np.isfinite(f_c) and f_c <= f + float(grad @ d) + float(d @ d) / (2.0 * t):
                break
            t *= params.backtrack_factor
            if t < 1e-300:
                d = np.zeros_like(beta)
                cand, f_c = beta, f
                g_c, N_c, rr_c = g, N, rr
                break
        step = t
        F_c = f_c + float(np.abs(cand).sum())
        small_step = float(np.max(np.abs(d))) <= params.step_tolerance * max(1.0, float(np.max(np.abs(beta))))
        small_change = abs(F - F_c) <= params.value_tolerance * max(1.0, abs(F))
        beta, f, F, g, N, rr = cand, f_c, F_c, g_c, N_c, rr_c
        if record_trace:
            trace.append(F)
        if small_step or small_change:
            converged = True
            break
    return QtrexRun(beta=beta, exact_value=_exact_or_inf(problem, beta, phi), smooth_value=F,
                    iterations=it, converged=converged, perturbations=perturbations,
                    smooth_trace=np.array(trace) if record_trace else None)


def random_starts(p: int, params: QtrexParams) -> np.ndarray:
    """Start matrix: row 0 is zero, row k has ceil(fraction * p) N(0, 1) entries.

    Row k draws from its own stream seeded by ``(seed, k)``, so the start set
    is nested in ``n_starts`` and independent of execution order.
    """
    starts = np.zeros((params.n_starts, p))
    k_nonzero = math.ceil(params.nonzero_fraction * p)
    for k in range(1, params.n_starts):
        rng = np.random.default_rng([params.seed, k])
        idx = rng.choice(p, size=k_nonzero, replace=False)
        starts[k, idx] = rng.standard_normal(k_nonzero)
    return starts


@dataclass(frozen=True)
class StartTrace:
    start: int
    smooth_value: float
    exact_value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class QtrexResult:
    best_beta: np.ndarray
    best_value: float
    best_start: int
    traces: tuple[StartTrace, ...]
    betas: np.ndarray = field(repr=False, compare=False, default=None)

    def exact_values(self) -> np.ndarray:
        return np.array([t.exact_value for t in self.traces])

    def to_dict(self) -> dict[str, Any]:
        return {"best_value": self.best_value, "best_start": self.best_start,
                "best_beta": self.best_beta.tolist(),
                "starts": [t.__dict__ for t in self.traces]}

    def write_traces(self, path) -> None:
        write_csv(path, ["start", "smooth_value", "exact_value", "iterations", "converged"],
                  ((t.start, t.smooth_value, t.exact_value, t.iterations, int(t.converged))
                   for t in self.traces))


def qtrex_multistart(problem: RegressionProblem, params: QtrexParams | None = None,
                     parallelism: int = 1) -> QtrexResult:
    params = params or QtrexParams()
    starts = random_starts(problem.p, params)
    runs = ordered_map(lambda k: qtrex_solve(problem, params, starts[k]),
                       list(range(params.n_starts)), parallelism)
    traces = tuple(StartTrace(k, r.smooth_value, r.exact_value, r.iterations, r.converged)
                   for k, r in enumerate(runs))
    exact = np.array([t.exact_value for t in traces])
    best = int(np.argmin(exact))
    return QtrexResult(best_beta=runs[best].beta, best_value=float(exact[best]), best_start=best,
                       traces=traces, betas=np.array([r.beta for r in runs]))
