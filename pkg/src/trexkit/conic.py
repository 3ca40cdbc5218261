"""Second-order cone programs in standard conic form.

Problems are stated as

    minimize    c'x
    subject to  Ax + s = b,   s in K

where K is a product of a zero cone, a nonnegative orthant and a list of
second-order cones ``{(t, z): ||z||_2 <= t}``.  The dual is

    maximize    -b'y
    subject to  A'y + c = 0,  y in K*

The solver runs over-relaxed Douglas-Rachford splitting on the homogeneous
self-dual embedding of this primal-dual pair.  The embedding makes
infeasibility and unboundedness detectable from the iterates, and any
previous primal-dual triple (x, y, s) can be used as a warm start.  The
linear system of the embedding is factored once per value of the dual weight,
which is rebalanced against the primal and dual residuals as the iteration
runs.
"""

from __future__ import annotations

import enum
import json
import logging
from dataclasses import dataclass, field
from typing import Any

import numba
import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

logger = logging.getLogger(__name__)

_MIN_NORM = 1e-4
_MAX_NORM = 1e4


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITERATIONS = "max_iterations"
    NUMERICAL_FAILURE = "numerical_failure"


@dataclass(frozen=True)
class ConeSpec:
    """Cone product ``{0}^zero_dim x R_+^nonneg_dim x Q^{d_1} x ... x Q^{d_k}``.

    A second-order cone of size 1 is the nonnegative half-line and is
    projected as such.
    """

    zero_dim: int = 0
    nonneg_dim: int = 0
    soc_dims: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "zero_dim", int(self.zero_dim))
        object.__setattr__(self, "nonneg_dim", int(self.nonneg_dim))
        object.__setattr__(self, "soc_dims", tuple(int(d) for d in self.soc_dims))
        if self.zero_dim < 0 or self.nonneg_dim < 0 or any(d < 0 for d in self.soc_dims):
            raise ValueError(f"cone dimensions must be nonnegative, got {self}")

    @property
    def total(self) -> int:
        return self.zero_dim + self.nonneg_dim + sum(self.soc_dims)

    def soc_offsets(self) -> list[tuple[int, int]]:
        """Return ``(start, size)`` of every second-order cone block."""
        start = self.zero_dim + self.nonneg_dim
        out = []
        for d in self.soc_dims:
            out.append((start, d))
            start += d
        return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ConicProblem:
    """Standard-form cone program; see the module docstring for the sign convention.

    Shapes are not checked on construction so that :func:`validate` can
    report every structural defect at once.
    """

    c: np.ndarray
    A: sp.csc_matrix
    b: np.ndarray
    cones: ConeSpec

    def __post_init__(self):
        c = _frozen(np.array(self.c, dtype=float).ravel())
        b = _frozen(np.array(self.b, dtype=float).ravel())
        A = sp.csc_matrix(self.A, dtype=float)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "A", A)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def to_dict(self, dense: bool = False) -> dict[str, Any]:
        return problem_to_dict(self, dense=dense)


@dataclass(frozen=True)
class ConicSolution:
    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    status: Status
    iterations: int = 0
    primal_residual: float = np.inf
    dual_residual: float = np.inf
    duality_gap: float = np.inf
    primal_objective: float = np.nan
    dual_objective: float = np.nan

    @property
    def objective(self) -> float:
        return self.primal_objective

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass(frozen=True)
class SolverSettings:
    """Knobs of the ADMM solver.

    ``tolerance`` bounds all three relative residuals reported by
    :func:`residuals` when the returned status is optimal.
    """

    tolerance: float = 1e-8
    max_iterations: int = 100_000
    relaxation: float = 1.5
    rho_x: float = 1e-3
    scale: float = 0.1
    adaptive_scale: bool = True
    check_interval: int = 20
    equilibration_passes: int = 25
    infeasibility_tolerance: float = 1e-7
    dense_limit: int = 4_000_000


@dataclass
class Diagnostics:
    defects: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.defects

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        return "pass" if self.ok else "; ".join(self.defects)


def validate(problem: ConicProblem) -> Diagnostics:
    """Check the problem structure; never raises."""
    report = Diagnostics()
    m, n = problem.A.shape
    total = problem.cones.total
    if m != total:
        report.defects.append(
            f"dimension mismatch: A has {m} rows but the cones total {total}")
    if problem.b.size != m:
        report.defects.append(f"dimension mismatch: b has length {problem.b.size}, A has {m} rows")
    if problem.c.size != n:
        report.defects.append(f"dimension mismatch: c has length {problem.c.size}, A has {n} columns")
    if n == 0:
        report.defects.append("empty problem: no variables")
    for k, d in enumerate(problem.cones.soc_dims):
        if d < 1:
            report.defects.append(f"empty cone: second-order cone {k} has size {d}")
    for name, values in (("c", problem.c), ("b", problem.b), ("A", problem.A.data)):
        if not np.all(np.isfinite(values)):
            report.defects.append(f"non-finite entry in {name}")
    return report


# ---------------------------------------------------------------------------
# cone projections


class _ConeLayout:
    """Index bookkeeping for the projection kernel."""

    def __init__(self, cones: ConeSpec):
        self.zero_dim = cones.zero_dim
        self.zero = slice(0, cones.zero_dim)
        nonneg = list(range(cones.zero_dim, cones.zero_dim + cones.nonneg_dim))
        blocks = []
        for start, d in cones.soc_offsets():
            if d == 1:
                nonneg.append(start)
            elif d > 1:
                blocks.append((start, d))
        self.nonneg = np.array(nonneg, dtype=np.int64)
        self.soc_starts = np.array([b[0] for b in blocks], dtype=np.int64)
        self.soc_sizes = np.array([b[1] for b in blocks], dtype=np.int64)
        # (start, size) of every block that must share one equilibration scale
        self.soc_blocks = blocks


@numba.njit(cache=True, nogil=True)
def _project_kernel(v, zero_dim, nonneg, soc_starts, soc_sizes, dual):
    out = v.copy()
    if not dual:
        out[:zero_dim] = 0.0
    for i in nonneg:
        out[i] = max(v[i], 0.0)
    for k in range(soc_starts.size):
        start, d = soc_starts[k], soc_sizes[k]
        t = v[start]
        nw = 0.0
        for i in range(start + 1, start + d):
            nw += v[i] * v[i]
        nw = np.sqrt(nw)
        if nw <= -t:
            out[start:start + d] = 0.0
        elif nw > abs(t):
            a = 0.5 * (t + nw)
            out[start] = a
            for i in range(start + 1, start + d):
                out[i] = v[i] * (a / nw)
    return out


def _project(v: np.ndarray, layout: _ConeLayout, dual: bool) -> np.ndarray:
    return _project_kernel(np.ascontiguousarray(v, dtype=float), layout.zero_dim, layout.nonneg,
                           layout.soc_starts, layout.soc_sizes, dual)


def project_cone(v: np.ndarray, cones: ConeSpec, dual: bool = False) -> np.ndarray:
    """Euclidean projection onto K (or onto K* when ``dual``)."""
    v = np.asarray(v, dtype=float)
    if v.size != cones.total:
        raise ValueError(f"vector of length {v.size} does not match cone size {cones.total}")
    return _project(v, _ConeLayout(cones), dual)


# ---------------------------------------------------------------------------
# residuals


def _relative_residuals(A, b, c, x, y, s) -> tuple[float, float, float, float, float]:
    Ax = A @ x
    Aty = A.T @ y
    inf = np.inf
    nb = np.linalg.norm(b, inf) if b.size else 0.0
    nc = np.linalg.norm(c, inf) if c.size else 0.0
    pres = np.linalg.norm(Ax + s - b, inf) if b.size else 0.0
    pres /= 1.0 + max(np.linalg.norm(Ax, inf) if b.size else 0.0,
                      np.linalg.norm(s, inf) if b.size else 0.0, nb)
    dres = np.linalg.norm(Aty + c, inf) if c.size else 0.0
    dres /= 1.0 + max(np.linalg.norm(Aty, inf) if c.size else 0.0, nc)
    pobj = float(c @ x)
    dobj = float(-(b @ y))
    gap = abs(pobj - dobj) / (1.0 + max(abs(pobj), abs(dobj)))
    return float(pres), float(dres), float(gap), pobj, dobj


def residuals(problem: ConicProblem, candidate: ConicSolution) -> tuple[float, float, float]:
    """Relative KKT residuals of a candidate primal-dual point.

    primal: ``||Ax + s - b||_inf / (1 + max(||Ax||, ||s||, ||b||))``
    dual:   ``||A'y + c||_inf / (1 + max(||A'y||, ||c||))``
    gap:    ``|c'x + b'y| / (1 + max(|c'x|, |b'y|))``

    Cone membership of ``s`` and ``y`` is not part of these numbers; check it
    with :func:`project_cone`.
    """
    m, n = problem.A.shape
    x = np.asarray(candidate.x, dtype=float)
    y = np.asarray(candidate.y, dtype=float)
    s = np.asarray(candidate.s, dtype=float)
    if x.shape != (n,) or y.shape != (m,) or s.shape != (m,):
        raise ValueError(
            f"candidate shapes x{x.shape} y{y.shape} s{s.shape} do not match problem ({m}, {n})")
    return _relative_residuals(problem.A, problem.b, problem.c, x, y, s)[:3]


# ---------------------------------------------------------------------------
# solver


class _Equilibrated:
    """Scaled data ``A_hat = D A E``, ``b_hat = sigma_b D b``, ``c_hat = sigma_c E c``."""

    def __init__(self, problem: ConicProblem, layout: _ConeLayout, settings: SolverSettings):
        m, n = problem.A.shape
        self.dense = m * n <= settings.dense_limit
        A = problem.A.toarray() if self.dense else problem.A.copy()
        D = np.ones(m)
        E = np.ones(n)
        # Ruiz passes in the max-norm, then one pass in the 2-norm.  Rows of a
        # second-order cone share one factor so the scaled cone is unchanged.
        for k in range(settings.equilibration_passes + 1):
            final = k == settings.equilibration_passes
            rn = self._row_norms(A) if final else self._row_max(A)
            for start, d in layout.soc_blocks:
                block = rn[start:start + d]
                rn[start:start + d] = np.sqrt(np.mean(block ** 2)) if final else block.max()
            d_step = 1.0 / np.sqrt(np.clip(rn, _MIN_NORM, _MAX_NORM))
            A = self._scale_rows(A, d_step)
            D *= d_step
            cn = self._col_norms(A) if final else self._col_max(A)
            e_step = 1.0 / np.sqrt(np.clip(cn, _MIN_NORM, _MAX_NORM))
            A = self._scale_cols(A, e_step)
            E *= e_step
        mean_row = float(np.mean(self._row_norms(A))) if m else 1.0
        mean_col = float(np.mean(self._col_norms(A))) if n else 1.0
        b_hat = D * problem.b
        c_hat = E * problem.c
        self.sigma_b = mean_col / max(np.linalg.norm(b_hat), _MIN_NORM)
        self.sigma_c = mean_row / max(np.linalg.norm(c_hat), _MIN_NORM)
        self.A = A
        self.b = b_hat * self.sigma_b
        self.c = c_hat * self.sigma_c
        self.D = D
        self.E = E

    def _row_norms(self, A):
        if self.dense:
            return np.sqrt(np.einsum("ij,ij->i", A, A))
        return np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel())

    def _row_max(self, A):
        if self.dense:
            return np.abs(A).max(axis=1) if A.shape[1] else np.zeros(A.shape[0])
        return np.asarray(abs(A).max(axis=1).todense()).ravel()

    def _col_max(self, A):
        if self.dense:
            return np.abs(A).max(axis=0) if A.shape[0] else np.zeros(A.shape[1])
        return np.asarray(abs(A).max(axis=0).todense()).ravel()

    def _col_norms(self, A):
        if self.dense:
            return np.sqrt(np.einsum("ij,ij->j", A, A))
        return np.sqrt(np.asarray(A.multiply(A).sum(axis=0)).ravel())

    def _scale_rows(self, A, d):
        return A * d[:, None] if self.dense else sp.csc_matrix(sp.diags(d) @ A)

    def _scale_cols(self, A, e):
        return A * e[None, :] if self.dense else sp.csc_matrix(A @ sp.diags(e))

    # maps between the original and the scaled variables
    def unscale(self, ux, uy, vy, tau):
        x = self.E * ux / (tau * self.sigma_b)
        y = self.D * uy / (tau * self.sigma_c)
        s = vy / (self.D * tau * self.sigma_b)
        return x, y, s

    def scale(self, x, y, s):
        return x * self.sigma_b / self.E, y * self.sigma_c / self.D, s * self.D * self.sigma_b


class _LinearSystem:
    """Solves ``[[rho I, A'], [A, -diag(r)]] (x, y) = (w1, w2)`` from one factorisation.

    Dense problems store the inverse of ``rho I + A' diag(r)^-1 A`` explicitly.
    """

    def __init__(self, A, dense: bool, rho: float, r: np.ndarray):
        self.A = A
        self.r = r
        m, n = A.shape
        self.n = n
        if dense:
            chol = sla.cho_factor(rho * np.eye(n) + A.T @ (A / r[:, None]))
            self._inv = np.ascontiguousarray(sla.cho_solve(chol, np.eye(n)))
            self._lu = None
        else:
            kkt = sp.bmat([[rho * sp.eye(n), A.T], [A, -sp.diags(r)]], format="csc")
            self._lu = spla.splu(kkt)

    def solve(self, w1, w2):
        if self._lu is None:
            x = self._inv @ (w1 + self.A.T @ (w2 / self.r))
            return x, (self.A @ x - w2) / self.r
        sol = self._lu.solve(np.concatenate([w1, w2]))
        return sol[: self.n], sol[self.n:]


# dual weights of the zero-cone rows relative to the other rows
_ZERO_CONE_WEIGHT = 1e-3
_SCALE_BOUNDS = (1e-6, 1e6)
_RESCALE_MIN_ITERATIONS = 100
_RESCALE_FACTOR = 1.5


@numba.njit(cache=True, nogil=True)
def _dense_steps(inv, indptr, indices, data, r, rho, c, b, gx, gy, g_denom, w, alpha, weights,
                 zero_dim, nonneg, soc_starts, soc_sizes, count):
    """``count`` iterations using the inverse of ``rho I + A' R^-1 A`` and A in CSR form."""
    n, m = inv.shape[0], r.size
    u = w.copy()
    v = np.zeros_like(w)
    ut = np.empty_like(w)
    for _ in range(count):
        rhs = rho * w[:n]
        for i in range(m):
            wy = w[n + i]
            for k in range(indptr[i], indptr[i + 1]):
                rhs[indices[k]] -= data[k] * wy
        px = inv @ rhs
        tau = w[n + m]
        for i in range(n):
            tau += c[i] * px[i]
        for i in range(m):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc += data[k] * px[indices[k]]
            py = acc / r[i] + w[n + i]
            ut[n + i] = py
            tau += b[i] * py
        tau /= g_denom
        for i in range(n):
            ut[i] = px[i] + tau * gx[i]
        for i in range(m):
            ut[n + i] += tau * gy[i]
        ut[n + m] = tau
        z = 2.0 * ut - w
        u = z.copy()
        u[n:n + m] = _project_kernel(z[n:n + m], zero_dim, nonneg, soc_starts, soc_sizes, True)
        u[n + m] = max(z[n + m], 0.0)
        v = weights * (w + u - 2.0 * ut)
        w = w + alpha * (u - ut)
    return w, u, v


class _Iteration:
    """Douglas-Rachford splitting on the homogeneous self-dual embedding.

    With ``u = (x, y, tau)`` and the skew operator ``M`` of the embedding, the
    iteration is ``u~ = (R + M)^-1 R w``, ``u = Pi(2 u~ - w)``,
    ``w += alpha (u - u~)`` in the metric ``R = diag(rho_x I, R_y, 1)``.
    The dual weight ``R_y = 1/scale`` is adapted to balance the primal and
    dual residuals.
    """

    def __init__(self, eq: "_Equilibrated", layout: _ConeLayout, settings: SolverSettings):
        self.eq, self.layout, self.settings = eq, layout, settings
        self.n = eq.A.shape[1]
        self.zero_rows = layout.zero
        if eq.dense:
            csr = sp.csr_matrix(eq.A)
            csr.indptr = csr.indptr.astype(np.int64)
            csr.indices = csr.indices.astype(np.int64)
            self.csr = csr
        self.set_scale(settings.scale)

    def set_scale(self, scale: float) -> None:
        eq = self.eq
        self.scale = scale
        r = np.full(eq.A.shape[0], 1.0 / scale)
        r[self.zero_rows] *= _ZERO_CONE_WEIGHT
        self.r = r
        self.lin = _LinearSystem(eq.A, eq.dense, self.settings.rho_x, r)
        self.gx, self.gy = self.lin.solve(-eq.c, eq.b)
        self.g_denom = 1.0 - eq.c @ self.gx - eq.b @ self.gy
        self._weights = np.concatenate([np.full(self.n, self.settings.rho_x), r, [1.0]])

    def run(self, w, count: int):
        if self.eq.dense:
            eq, lay, csr = self.eq, self.layout, self.csr
            return _dense_steps(self.lin._inv, csr.indptr, csr.indices, csr.data, self.r,
                                self.settings.rho_x, eq.c, eq.b, self.gx, self.gy, self.g_denom,
                                w, self.settings.relaxation, self._weights, lay.zero_dim,
                                lay.nonneg, lay.soc_starts, lay.soc_sizes, count)
        for _ in range(count):
            w, u, v = self.step(w)
        return w, u, v

    def step(self, w):
        eq, rho, n = self.eq, self.settings.rho_x, self.n
        wx, wy, wt = w[:n], w[n:-1], w[-1]
        px, py = self.lin.solve(rho * wx, -self.r * wy)
        tau = (wt + eq.c @ px + eq.b @ py) / self.g_denom
        ut = np.concatenate([px + tau * self.gx, py + tau * self.gy, [tau]])
        z = 2.0 * ut - w
        u = z.copy()
        u[n:-1] = _project(z[n:-1], self.layout, dual=True)
        u[-1] = max(z[-1], 0.0)
        v = self._weights * (w + u - 2.0 * ut)
        w = w + self.settings.relaxation * (u - ut)
        return w, u, v

    def weights(self):
        return self._weights


def solve(problem: ConicProblem, settings: SolverSettings | None = None,
          warm: ConicSolution | None = None) -> ConicSolution:
    """Solve a cone program.

    Parameters
    ----------
    problem : ConicProblem
    settings : SolverSettings, optional
    warm : ConicSolution, optional
        Primal-dual triple used to initialise the iterates.  Any point of the
        right dimensions is accepted; only the number of iterations depends
        on it.

    Returns
    -------
    ConicSolution
        With status ``max_iterations`` the best iterate seen (smallest
        largest residual) is returned.
    """
    settings = settings or SolverSettings()
    report = validate(problem)
    if not report.ok:
        raise ValueError(f"invalid conic problem: {report}")
    m, n = problem.A.shape
    if warm is not None and (np.shape(warm.x) != (n,) or np.shape(warm.y) != (m,)
                             or np.shape(warm.s) != (m,)):
        raise ValueError("warm start dimensions do not match the problem")

    layout = _ConeLayout(problem.cones)
    eq = _Equilibrated(problem, layout, settings)
    A0, b0, c0 = (problem.A.toarray() if eq.dense else problem.A), problem.b, problem.c
    admm = _Iteration(eq, layout, settings)

    u = np.zeros(n + m + 1)
    v = np.zeros(n + m + 1)
    u[-1] = 1.0
    if warm is not None and np.all(np.isfinite(warm.x)) and np.all(np.isfinite(warm.y)) \
            and np.all(np.isfinite(warm.s)):
        ux, uy, vy = eq.scale(np.asarray(warm.x, float), np.asarray(warm.y, float),
                              np.asarray(warm.s, float))
        u[:n], u[n:-1] = ux, _project(uy, layout, dual=True)
        v[n:-1] = _project(vy, layout, dual=False)
    w = u + v / admm.weights()

    best = None
    best_err = np.inf
    log_ratio, n_ratio, since_rescale = 0.0, 0, 0
    it = 0
    while it < settings.max_iterations:
        count = min(settings.check_interval, settings.max_iterations - it)
        w, u, v = admm.run(w, count)
        it += count
        since_rescale += count
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            logger.warning("non-finite iterate at iteration %d", it)
            return _finish(best, Status.NUMERICAL_FAILURE, it, n, m)
        ux, uy, ut, vy = u[:n], u[n:-1], u[-1], v[n:-1]
        if ut > 0:
            x, y, s = eq.unscale(ux, uy, vy, ut)
            pres, dres, gap, pobj, dobj = _relative_residuals(A0, b0, c0, x, y, s)
            err = max(pres, dres, gap)
            if err < best_err:
                best_err = err
                best = (x, y, s, pres, dres, gap, pobj, dobj)
            if err <= settings.tolerance:
                return _finish(best, Status.OPTIMAL, it, n, m)
        cert = _certificate(eq, A0, b0, c0, ux, uy, vy, settings.infeasibility_tolerance)
        if cert is not None:
            status, x, y, s = cert
            return ConicSolution(x=x, y=y, s=s, status=status, iterations=it)

        if settings.adaptive_scale and ut > 0:
            log_ratio += np.log(np.clip(max(pres, 1e-16) / max(dres, 1e-16), 1e-8, 1e8))
            n_ratio += 1
            if since_rescale >= _RESCALE_MIN_ITERATIONS:
                factor = np.sqrt(np.exp(log_ratio / n_ratio))
                if not 1.0 / _RESCALE_FACTOR < factor < _RESCALE_FACTOR:
                    new_scale = float(np.clip(admm.scale * factor, *_SCALE_BOUNDS))
                    if new_scale != admm.scale:
                        admm.set_scale(new_scale)
                        w = u + v / admm.weights()
                log_ratio, n_ratio, since_rescale = 0.0, 0, 0
    return _finish(best, Status.MAX_ITERATIONS, settings.max_iterations, n, m)


def _finish(best, status: Status, iterations: int, n: int, m: int) -> ConicSolution:
    if best is None:
        nan_n, nan_m = np.full(n, np.nan), np.full(m, np.nan)
        return ConicSolution(x=nan_n, y=nan_m, s=nan_m.copy(), status=Status.NUMERICAL_FAILURE
                             if status is Status.OPTIMAL else status, iterations=iterations)
    x, y, s, pres, dres, gap, pobj, dobj = best
    return ConicSolution(x=x, y=y, s=s, status=status, iterations=iterations,
                         primal_residual=pres, dual_residual=dres, duality_gap=gap,
                         primal_objective=pobj, dual_objective=dobj)


def _certificate(eq: _Equilibrated, A, b, c, ux, uy, vy, tol):
    """Farkas certificates read off the un-normalised embedding iterate."""
    m, n = len(b), len(c)
    y = eq.D * uy / eq.sigma_c
    by = float(b @ y)
    if by < 0:
        y = y / -by
        if np.linalg.norm(A.T @ y, np.inf) <= tol:
            return Status.INFEASIBLE, np.full(n, np.nan), y, np.full(m, np.nan)
    x = eq.E * ux / eq.sigma_b
    s = vy / (eq.D * eq.sigma_b)
    cx = float(c @ x)
    if cx < 0:
        x, s = x / -cx, s / -cx
        if np.linalg.norm(A @ x + s, np.inf) <= tol:
            return Status.UNBOUNDED, x, np.full(m, np.nan), s
    return None


# ---------------------------------------------------------------------------
# serialisation
#
# {
#   "c": [...], "b": [...],
#   "A": {"format": "triplet", "shape": [m, n], "rows": [...], "cols": [...], "vals": [...]}
#        or {"format": "dense", "data": [[...], ...]},
#   "cones": {"zero": int, "nonneg": int, "soc": [int, ...]}
# }


def problem_to_dict(problem: ConicProblem, dense: bool = False) -> dict[str, Any]:
    if dense:
        A = {"format": "dense", "data": problem.A.toarray().tolist()}
    else:
        coo = problem.A.tocoo()
        A = {"format": "triplet", "shape": list(coo.shape), "rows": coo.row.tolist(),
             "cols": coo.col.tolist(), "vals": coo.data.tolist()}
    return {
        "c": problem.c.tolist(),
        "A": A,
        "b": problem.b.tolist(),
        "cones": {"zero": problem.cones.zero_dim, "nonneg": problem.cones.nonneg_dim,
                  "soc": list(problem.cones.soc_dims)},
    }


def problem_from_dict(data: dict[str, Any]) -> ConicProblem:
    a = data["A"]
    fmt = a.get("format", "dense")
    if fmt == "dense":
        A = sp.csc_matrix(np.array(a["data"], dtype=float).reshape(len(a["data"]), -1))
    elif fmt == "triplet":
        A = sp.csc_matrix((a["vals"], (a["rows"], a["cols"])), shape=tuple(a["shape"]))
    else:
        raise ValueError(f"unknown matrix format {fmt!r}")
    cones = data.get("cones", {})
    return ConicProblem(c=data["c"], A=A, b=data["b"],
                        cones=ConeSpec(cones.get("zero", 0), cones.get("nonneg", 0),
                                       tuple(cones.get("soc", ()))))


def dumps(problem: ConicProblem, dense: bool = False) -> str:
    return json.dumps(problem_to_dict(problem, dense=dense))


def loads(text: str) -> ConicProblem:
    return problem_from_dict(json.loads(text))
