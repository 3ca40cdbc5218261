"""Synthetic linear-model data and the two simulation harnesses.

``run_heuristic_study`` measures how often q-TREX reaches the global TREX
value as the number of restarts grows; ``run_fdr_experiment`` runs the
knockoff filter with several W statistics and tallies false discoveries.
Every repetition draws from its own stream seeded by ``(seed, rep)``, so a
report is a pure function of its config whatever the parallelism.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import conic
from ._parallel import ordered_map
from .io import jsonable, write_csv, write_json
from .knockoff import (DEFAULT_PHI_GRID, VARIANTS, bhq_select, compute_statistic,
                       construct_knockoffs, knockoff_threshold)
from .qtrex import QtrexParams, qtrex_multistart
from .trex import CtrexFailure, RegressionProblem, TrexParams, ctrex

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

BETA_PATTERNS = ("unit", "amplitude", "ramp")
NOISE_KINDS = ("homoscedastic", "heteroscedastic", "correlated")
NORMALIZATIONS = ("none", "unit", "sqrt_n")
FDR_STATISTICS = VARIANTS + ("bhq",)


class SimConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``normalize`` centres the columns of X and scales them to unit norm
    (``"unit"``) or to norm sqrt(n) (``"sqrt_n"``) before the response is
    generated.  The correlated-noise scenario uses the same equi-correlation
    ``kappa`` and unit diagonal as the features, scaled by ``sigma``.
    """

    n: int
    p: int
    sparsity: int
    beta_pattern: str = "unit"
    amplitude: float = 1.0
    kappa: float = 0.0
    noise: str = "homoscedastic"
    sigma: float = 1.0
    sigma1: float = 0.7
    normalize: str = "none"
    n_reps: int = 10
    seed: int = 0
    phi: float = 0.5
    phi_grid: tuple[float, ...] = tuple(DEFAULT_PHI_GRID.tolist())
    q_levels: tuple[float, ...] = (0.1, 0.2)
    statistics: tuple[str, ...] = ("f_value", "lasso_signed_max")
    n_starts: int = 21
    q_exponent: int = 40
    solver_tolerance: float = 1e-6
    success_tolerance: float = 1e-4

    def __post_init__(self):
        for name in ("n", "p", "n_reps", "n_starts"):
            if not isinstance(getattr(self, name), int) or getattr(self, name) < 1:
                raise SimConfigError(name, "must be a positive integer")
        if not isinstance(self.sparsity, int) or not 0 <= self.sparsity <= self.p:
            raise SimConfigError("sparsity", f"must be an integer in [0, p = {self.p}]")
        if self.beta_pattern not in BETA_PATTERNS:
            raise SimConfigError("beta_pattern", f"must be one of {BETA_PATTERNS}")
        if self.noise not in NOISE_KINDS:
            raise SimConfigError("noise", f"must be one of {NOISE_KINDS}")
        if self.normalize not in NORMALIZATIONS:
            raise SimConfigError("normalize", f"must be one of {NORMALIZATIONS}")
        if not 0.0 <= self.kappa < 1.0:
            raise SimConfigError("kappa", "must lie in [0, 1)")
        if not self.sigma > 0:
            raise SimConfigError("sigma", "must be positive")
        if not 0 < self.sigma1 < math.sqrt(2.0):
            raise SimConfigError("sigma1", "must lie in (0, sqrt(2)) so that sigma2^2 = 2 - sigma1^2 > 0")
        if not self.phi > 0:
            raise SimConfigError("phi", "must be positive")
        grid = np.asarray(self.phi_grid, dtype=float)
        if grid.size == 0 or np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
            raise SimConfigError("phi_grid", "must be positive and strictly decreasing")
        if any(not 0.0 <= q <= 1.0 for q in self.q_levels) or not self.q_levels:
            raise SimConfigError("q_levels", "must be a nonempty list of values in [0, 1]")
        bad = [s for s in self.statistics if s not in FDR_STATISTICS]
        if bad:
            raise SimConfigError("statistics", f"unknown {bad}; choose from {FDR_STATISTICS}")
        if self.q_exponent < 2 or self.q_exponent % 2:
            raise SimConfigError("q_exponent", "must be an even integer >= 2")
        if not self.solver_tolerance > 0 or not self.success_tolerance >= 0:
            raise SimConfigError("solver_tolerance", "tolerances must be positive")

    @property
    def sigma2(self) -> float:
        return math.sqrt(2.0 - self.sigma1 ** 2)

    def beta_star(self) -> np.ndarray:
        beta = np.zeros(self.p)
        s = self.sparsity
        if self.beta_pattern == "unit":
            beta[:s] = 1.0
        elif self.beta_pattern == "amplitude":
            beta[:s] = self.amplitude
        else:
            beta[:s] = self.amplitude * np.arange(1, s + 1) / max(s, 1)
        return beta

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in dataclasses.fields(self)}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SimConfig":
        known = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise SimConfigError(unknown[0], "unknown field")
        for name in ("n", "p", "sparsity"):
            if name not in d:
                raise SimConfigError(name, "required field missing")
        kwargs = {}
        for name, value in d.items():
            default = known[name].default
            try:
                if name in ("phi_grid", "q_levels"):
                    value = tuple(float(v) for v in value)
                elif name == "statistics":
                    value = (value,) if isinstance(value, str) else tuple(str(v) for v in value)
                elif isinstance(default, bool) or name in ("beta_pattern", "noise", "normalize"):
                    value = str(value)
                elif isinstance(default, float):
                    value = float(value)
                elif name in ("n", "p", "sparsity") or isinstance(default, int):
                    if isinstance(value, bool) or int(value) != value:
                        raise ValueError("not an integer")
                    value = int(value)
            except (TypeError, ValueError) as exc:
                raise SimConfigError(name, f"invalid value {value!r} ({exc})") from None
            kwargs[name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "SimConfig":
        """Read a ``.json`` or ``.toml`` config file."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        try:
            if path.suffix.lower() == ".toml":
                data = tomllib.loads(text)
            else:
                data = json.loads(text)
        except (ValueError, tomllib.TOMLDecodeError) as exc:
            raise SimConfigError("<file>", f"{path}: {exc}") from None
        if not isinstance(data, dict):
            raise SimConfigError("<file>", f"{path}: top level must be a table/object")
        return cls.from_dict(data)


def _equicorrelated(rng: np.random.Generator, rows: int, cols: int, kappa: float) -> np.ndarray:
    """Rows drawn from N(0, Sigma) with unit diagonal and off-diagonal ``kappa``."""
    Z = rng.standard_normal((rows, cols))
    w = rng.standard_normal((rows, 1))
    return math.sqrt(1.0 - kappa) * Z + math.sqrt(kappa) * w


def gen_linear_data(config: SimConfig, rep: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(X, Y, beta_star)`` for repetition ``rep``, determined by ``(config.seed, rep)``."""
    rng = np.random.default_rng([config.seed, rep])
    n, p = config.n, config.p
    X = _equicorrelated(rng, n, p, config.kappa)
    if config.normalize != "none":
        X = X - X.mean(axis=0)
        X = X / np.linalg.norm(X, axis=0)
        if config.normalize == "sqrt_n":
            X = X * math.sqrt(n)
    beta = config.beta_star()
    if config.noise == "homoscedastic":
        eps = config.sigma * rng.standard_normal(n)
    elif config.noise == "heteroscedastic":
        scale = np.where(rng.random(n) < 0.5, config.sigma1, config.sigma2)
        eps = scale * rng.standard_normal(n)
    else:
        eps = config.sigma * _equicorrelated(rng, 1, n, config.kappa).ravel()
    return X, X @ beta + eps, beta


def estimation_error(beta_hat: np.ndarray, beta_star: np.ndarray) -> float:
    beta_hat = np.asarray(beta_hat, dtype=float).ravel()
    beta_star = np.asarray(beta_star, dtype=float).ravel()
    if beta_hat.shape != beta_star.shape:
        raise ValueError(f"length mismatch: {beta_hat.size} vs {beta_star.size}")
    return float(np.linalg.norm(beta_hat - beta_star))


def mean_se(values) -> tuple[float, float]:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return float("nan"), float("nan")
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    return float(v.mean()), se


@dataclass(frozen=True)
class SimReport:
    kind: str
    config: SimConfig
    records: tuple[dict[str, Any], ...]
    aggregates: dict[str, Any] = field(default_factory=dict)
    failures: tuple[dict[str, Any], ...] = ()

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "config": self.config.to_dict(), "records": list(self.records),
                "aggregates": self.aggregates, "failures": list(self.failures)}

    def csv_rows(self) -> tuple[list[str], list[list[Any]]]:
        if self.kind == "fdr":
            header = ["rep", "statistic", "q", "n_selected", "true_positives", "false_positives",
                      "fdp", "modified_fdp"]
            rows = [[r["rep"], r["statistic"], r["q"], r["n_selected"], r["true_positives"],
                     r["false_positives"], r["fdp"], r["modified_fdp"]] for r in self.records]
        else:
            header = ["rep", "restarts", "success", "ctrex_value", "best_qtrex_value"]
            rows = []
            for r in self.records:
                for k, ok in enumerate(r["success_curve"], start=1):
                    rows.append([r["rep"], k, int(ok), r["ctrex_value"], r["qtrex_best_value_curve"][k - 1]])
        return header, rows

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        json_path, csv_path = out / f"{self.kind}_report.json", out / f"{self.kind}_records.csv"
        write_json(json_path, self.to_dict())
        header, rows = self.csv_rows()
        write_csv(csv_path, header, rows)
        return json_path, csv_path


# ---------------------------------------------------------------------------
# heuristic study


def _heuristic_rep(config: SimConfig, rep: int) -> dict[str, Any]:
    X, Y, beta = gen_linear_data(config, rep)
    problem = RegressionProblem(X, Y)
    settings = conic.SolverSettings(tolerance=config.solver_tolerance)
    sol = ctrex(problem, TrexParams(phi=config.phi), settings=settings)
    params = QtrexParams(q_exponent=config.q_exponent, phi=config.phi, n_starts=config.n_starts,
                         seed=config.seed)
    heur = qtrex_multistart(problem, params)
    exact = heur.exact_values()
    best_curve = np.minimum.accumulate(exact)
    success = best_curve <= sol.value + config.success_tolerance
    return {
        "rep": rep,
        "ctrex_value": sol.value,
        "ctrex_winner": list(sol.winner),
        "ctrex_failures": len(sol.failures),
        "qtrex_values": exact.tolist(),
        "qtrex_best_value_curve": best_curve.tolist(),
        "success_curve": success.tolist(),
        "zero_start_success": bool(exact[0] <= sol.value + config.success_tolerance),
        "ctrex_error": estimation_error(sol.beta_hat, beta),
        "qtrex_error": estimation_error(heur.best_beta, beta),
        "qtrex_zero_start_error": estimation_error(heur.betas[0], beta),
    }


def heuristic_aggregates(records) -> dict[str, Any]:
    if not records:
        return {"n_records": 0}
    curves = np.array([r["success_curve"] for r in records], dtype=float)
    means, ses = zip(*(mean_se(curves[:, k]) for k in range(curves.shape[1])))
    c_err = [r["ctrex_error"] for r in records]
    q_err = [r["qtrex_error"] for r in records]
    diff = np.subtract(q_err, c_err)
    return {
        "n_records": len(records),
        "success_probability": list(means),
        "success_probability_se": list(ses),
        "zero_start_success": mean_se([r["zero_start_success"] for r in records])[0],
        "ctrex_error": mean_se(c_err),
        "qtrex_error": mean_se(q_err),
        "paired_error_difference": mean_se(diff),
    }


def _run_reps(func, config, parallelism):
    def safe(rep):
        try:
            return func(config, rep), None
        except (CtrexFailure, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
            logger.warning("rep %d failed: %s", rep, exc)
            return None, {"rep": rep, "error": f"{type(exc).__name__}: {exc}"}

    out = ordered_map(safe, list(range(config.n_reps)), parallelism)
    return [r for r, _ in out if r is not None], [f for _, f in out if f is not None]


def run_heuristic_study(config: SimConfig, parallelism: int = 1) -> SimReport:
    records, failures = _run_reps(_heuristic_rep, config, parallelism)
    return SimReport(kind="heuristic", config=config, records=tuple(jsonable(records)),
                     aggregates=jsonable(heuristic_aggregates(records)),
                     failures=tuple(failures))


# ---------------------------------------------------------------------------
# FDR experiment


def _tally(selected, beta, q) -> dict[str, Any]:
    selected = np.asarray(selected, dtype=int)
    nonnull = beta != 0
    tp = int(nonnull[selected].sum())
    fp = int(selected.size - tp)
    return {"n_selected": int(selected.size), "true_positives": tp, "false_positives": fp,
            "fdp": fp / max(selected.size, 1),
            "modified_fdp": fp / (selected.size + 1.0 / q) if q > 0 else 0.0,
            "tp_rate": tp / max(int(nonnull.sum()), 1),
            "selected": selected.tolist()}


def _fdr_rep(config: SimConfig, rep: int) -> list[dict[str, Any]]:
    X, Y, beta = gen_linear_data(config, rep)
    aug = construct_knockoffs(X, Y, seed=(config.seed, rep))
    settings = conic.SolverSettings(tolerance=config.solver_tolerance)
    rows = []
    for stat in config.statistics:
        if stat == "bhq":
            for q in config.q_levels:
                sel = bhq_select(X, Y, q)
                rows.append({"rep": rep, "statistic": stat, "q": q, "threshold": sel.threshold,
                             **_tally(sel.selected, beta, q)})
            continue
        kwargs: dict[str, Any] = {}
        if stat == "f_value":
            kwargs = {"phi": config.phi, "settings": settings}
        elif stat == "phi_path":
            kwargs = {"phi_grid": config.phi_grid,
                      "heuristic_params": QtrexParams(q_exponent=config.q_exponent, seed=config.seed)}
        W = compute_statistic(aug, stat, **kwargs)
        for q in config.q_levels:
            sel = knockoff_threshold(W.W, q, variant=stat)
            rows.append({"rep": rep, "statistic": stat, "q": q, "threshold": sel.threshold,
                         "stat_failures": len(W.failures), **_tally(sel.selected, beta, q)})
    return rows


def fdr_aggregates(records) -> dict[str, Any]:
    out: dict[str, Any] = {}
    keys = sorted({(r["statistic"], r["q"]) for r in records})
    for stat, q in keys:
        rs = [r for r in records if r["statistic"] == stat and r["q"] == q]
        fdr, fdr_se = mean_se([r["fdp"] for r in rs])
        mfdr, mfdr_se = mean_se([r["modified_fdp"] for r in rs])
        tpr, tpr_se = mean_se([r["tp_rate"] for r in rs])
        out.setdefault(stat, {})[repr(float(q))] = {
            "n_records": len(rs), "fdr": fdr, "fdr_se": fdr_se,
            "modified_fdr": mfdr, "modified_fdr_se": mfdr_se,
            "tp_rate": tpr, "tp_rate_se": tpr_se}
    return out


def run_fdr_experiment(config: SimConfig, parallelism: int = 1) -> SimReport:
    if config.n < config.p:
        raise SimConfigError("n", "knockoffs need n >= p")
    per_rep, failures = _run_reps(_fdr_rep, config, parallelism)
    records = [row for rows in per_rep for row in rows]
    return SimReport(kind="fdr", config=config, records=tuple(jsonable(records)),
                     aggregates=jsonable(fdr_aggregates(records)), failures=tuple(failures))
