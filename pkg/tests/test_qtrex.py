import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from trexkit.qtrex import (QtrexParams, lq_norm, qtrex_multistart, qtrex_solve, random_starts,
                           smooth_gradient, smooth_objective)
from trexkit.trex import DegenerateObjectiveError, RegressionProblem, ctrex, trex_objective

from conftest import random_regression


def quotient_term(prob, beta, phi, q):
    r = prob.Y - prob.X @ beta
    return (r @ r) / (phi * np.sum(np.abs(prob.X.T @ r) ** q) ** (1.0 / q))


def test_smooth_objective_example():
    prob = RegressionProblem(np.eye(2), [2.0, 0.0])
    assert smooth_objective(prob, np.zeros(2), 0.5, 40) == pytest.approx(4.0, abs=1e-12)
    assert trex_objective(prob, np.zeros(2), 0.5) == 4.0


def test_lq_norm_is_overflow_safe():
    u = np.array([1e200, -1e200, 3.0])
    assert lq_norm(u, 40) == pytest.approx(1e200 * 2 ** (1 / 40))
    assert lq_norm(np.zeros(3), 40) == 0.0


@given(st.integers(0, 10_000), st.sampled_from([2, 4, 10, 40]))
def test_smooth_never_exceeds_exact(seed, q):
    X, Y = random_regression(seed, 10, 6)
    prob = RegressionProblem(X, Y)
    beta = np.random.default_rng(seed).standard_normal(6)
    assert smooth_objective(prob, beta, 0.5, q) <= trex_objective(prob, beta, 0.5) * (1 + 1e-12)


def test_gradient_matches_central_differences():
    h = 1e-6
    worst = 0.0
    for k in range(20):
        X, Y = random_regression(500 + k, 15, 6)
        prob = RegressionProblem(X, Y)
        beta = np.random.default_rng(k).standard_normal(6) * 0.3
        g = smooth_gradient(prob, beta, 0.5, 40)
        fd = np.array([(quotient_term(prob, beta + h * e, 0.5, 40) -
                        quotient_term(prob, beta - h * e, 0.5, 40)) / (2 * h) for e in np.eye(6)])
        worst = max(worst, np.abs(g - fd).max() / np.abs(fd).max())
    assert worst <= 1e-4


def test_degenerate_point_signalled():
    prob = RegressionProblem(np.array([[1.0], [0.0]]), [0.0, 1.0])
    with pytest.raises(DegenerateObjectiveError):
        smooth_objective(prob, np.zeros(1), 0.5)
    with pytest.raises(DegenerateObjectiveError):
        smooth_gradient(prob, np.zeros(1), 0.5)


def test_degenerate_start_is_perturbed():
    X = np.array([[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]])
    prob = RegressionProblem(X, [0.0, 0.0, 1.0])
    run = qtrex_solve(prob, QtrexParams(q_exponent=2))
    assert run.perturbations >= 1


def test_params_validation():
    with pytest.raises(ValueError):
        QtrexParams(q_exponent=3)
    with pytest.raises(ValueError):
        QtrexParams(n_starts=0)
    with pytest.raises(ValueError):
        QtrexParams(phi=0)
    with pytest.raises(ValueError):
        QtrexParams(nonzero_fraction=0)
    with pytest.raises(ValueError):
        qtrex_solve(RegressionProblem(np.eye(2), [1.0, 2.0]), beta0=np.array([np.nan, 0.0]))


def test_fixed_point_terminates_immediately(toy_problem):
    # For phi = 2 the minimiser is 0: the gradient of the quotient at 0 is -3/8,
    # inside the l1 subdifferential [-1, 1].
    run = qtrex_solve(toy_problem, QtrexParams(phi=2.0), np.zeros(1))
    assert run.iterations == 1 and run.converged
    assert run.beta[0] == 0.0
    assert smooth_gradient(toy_problem, np.zeros(1), 2.0)[0] == pytest.approx(-3 / 8)


def test_toy_reaches_global_minimum(toy_problem):
    run = qtrex_solve(toy_problem)
    assert run.exact_value == pytest.approx(2 + 2 * math.sqrt(2), abs=1e-6)


@given(st.integers(0, 10_000))
def test_smooth_value_never_increases(seed):
    X, Y = random_regression(seed, 20, 30)
    prob = RegressionProblem(X, Y)
    beta0 = np.random.default_rng(seed).standard_normal(30) * 0.5
    run = qtrex_solve(prob, QtrexParams(max_iterations=300), beta0, record_trace=True)
    trace = run.smooth_trace
    assert np.all(np.diff(trace) <= 1e-12 * np.abs(trace[:-1]))


def test_start_matrix():
    params = QtrexParams(n_starts=6, seed=3)
    starts = random_starts(40, params)
    assert starts.shape == (6, 40)
    assert not starts[0].any()
    assert all(np.count_nonzero(row) == 10 for row in starts[1:])
    np.testing.assert_array_equal(starts, random_starts(40, params))
    # nested in n_starts
    np.testing.assert_array_equal(random_starts(40, QtrexParams(n_starts=3, seed=3)), starts[:3])


def test_single_start_equals_zero_start_solve():
    X, Y = random_regression(4, 20, 30)
    prob = RegressionProblem(X, Y)
    params = QtrexParams(n_starts=1)
    multi = qtrex_multistart(prob, params)
    single = qtrex_solve(prob, params)
    assert multi.best_value == single.exact_value
    np.testing.assert_array_equal(multi.best_beta, single.beta)


def test_multistart_bookkeeping_and_determinism():
    X, Y = random_regression(6, 20, 30)
    prob = RegressionProblem(X, Y)
    params = QtrexParams(n_starts=5, seed=11)
    a = qtrex_multistart(prob, params)
    b = qtrex_multistart(prob, params, parallelism=3)
    assert a.to_dict() == b.to_dict()
    assert a.best_value == min(t.exact_value for t in a.traces)
    assert [t.start for t in a.traces] == list(range(5))


def test_success_curve_monotone_in_restarts():
    X, Y = random_regression(9, 20, 30)
    prob = RegressionProblem(X, Y)
    res = qtrex_multistart(prob, QtrexParams(n_starts=8))
    curve = np.minimum.accumulate(res.exact_values())
    for k in range(1, 9):
        assert qtrex_multistart(prob, QtrexParams(n_starts=k)).best_value == curve[k - 1]


@pytest.mark.parametrize("seed", range(4))
def test_heuristic_never_beats_global(seed):
    X, Y = random_regression(700 + seed, 15, 8)
    prob = RegressionProblem(X, Y)
    best = qtrex_multistart(prob, QtrexParams(n_starts=5)).best_value
    assert best >= ctrex(prob).value - 1e-4


def test_trace_csv(tmp_path):
    X, Y = random_regression(1, 10, 5)
    res = qtrex_multistart(RegressionProblem(X, Y), QtrexParams(n_starts=3))
    res.write_traces(tmp_path / "t.csv")
    rows = list(csv.DictReader((tmp_path / "t.csv").open()))
    assert [int(r["start"]) for r in rows] == [0, 1, 2]
    assert float(rows[0]["exact_value"]) == res.traces[0].exact_value
