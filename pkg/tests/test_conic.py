import itertools

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given
from hypothesis import strategies as st

from trexkit import conic
from trexkit.conic import ConeSpec, ConicProblem, ConicSolution, SolverSettings, Status


def lp_x_ge_1():
    # minimize x s.t. x >= 1  ->  -x + s = -1, s >= 0
    return ConicProblem(c=[1.0], A=sp.csc_matrix([[-1.0]]), b=[-1.0], cones=ConeSpec(0, 1, ()))


def norm_of_3_4():
    # minimize t s.t. ||(3, 4)|| <= t  ->  s = (t, 3, 4) in Q^3
    A = sp.csc_matrix(np.array([[-1.0], [0.0], [0.0]]))
    return ConicProblem(c=[1.0], A=A, b=[0.0, 3.0, 4.0], cones=ConeSpec(0, 0, (3,)))


def test_one_dimensional_lp():
    sol = conic.solve(lp_x_ge_1())
    assert sol.status is Status.OPTIMAL
    assert sol.x[0] == pytest.approx(1.0, abs=1e-7)
    assert sol.objective == pytest.approx(1.0, abs=1e-7)


def test_norm_of_3_4():
    sol = conic.solve(norm_of_3_4())
    assert sol.optimal
    assert sol.x[0] == pytest.approx(5.0, abs=1e-6)


def test_optimal_status_implies_residuals_within_tolerance():
    for prob in (lp_x_ge_1(), norm_of_3_4()):
        settings = SolverSettings(tolerance=1e-8)
        sol = conic.solve(prob, settings)
        pres, dres, gap = conic.residuals(prob, sol)
        assert max(pres, dres, gap) <= settings.tolerance
        assert (sol.primal_residual, sol.dual_residual, sol.duality_gap) == pytest.approx((pres, dres, gap))


def test_residuals_of_exact_optimum_are_zero():
    prob = lp_x_ge_1()
    exact = ConicSolution(x=np.array([1.0]), y=np.array([1.0]), s=np.array([0.0]), status=Status.OPTIMAL)
    assert conic.residuals(prob, exact) == (0.0, 0.0, 0.0)


def test_perturbed_optimum_has_primal_residual():
    prob = lp_x_ge_1()
    bumped = ConicSolution(x=np.array([1.01]), y=np.array([1.0]), s=np.array([0.0]), status=Status.OPTIMAL)
    assert conic.residuals(prob, bumped)[0] >= 1e-3


def test_residuals_reject_wrong_shapes():
    bad = ConicSolution(x=np.zeros(2), y=np.zeros(1), s=np.zeros(1), status=Status.OPTIMAL)
    with pytest.raises(ValueError):
        conic.residuals(lp_x_ge_1(), bad)


def test_primal_infeasible():
    # x >= 1 and x <= 0
    A = sp.csc_matrix([[-1.0], [1.0]])
    prob = ConicProblem(c=[1.0], A=A, b=[-1.0, 0.0], cones=ConeSpec(0, 2, ()))
    assert conic.solve(prob).status is Status.INFEASIBLE


def test_unbounded():
    # minimize -x s.t. x >= 0
    prob = ConicProblem(c=[-1.0], A=sp.csc_matrix([[-1.0]]), b=[0.0], cones=ConeSpec(0, 1, ()))
    assert conic.solve(prob).status is Status.UNBOUNDED


def test_iteration_cap_reports_status():
    sol = conic.solve(norm_of_3_4(), SolverSettings(max_iterations=2, check_interval=1))
    assert sol.status is Status.MAX_ITERATIONS
    assert sol.x.shape == (1,)


def test_equality_rows():
    # minimize x1 + x2 s.t. x1 + x2 = 2... with x >= 0 and x1 - x2 = 0.5
    A = sp.csc_matrix(np.array([[1.0, -1.0], [-1.0, 0.0], [0.0, -1.0]]))
    prob = ConicProblem(c=[1.0, 2.0], A=A, b=[0.5, 0.0, 0.0], cones=ConeSpec(1, 2, ()))
    sol = conic.solve(prob)
    assert sol.optimal
    np.testing.assert_allclose(sol.x, [0.5, 0.0], atol=1e-6)


def test_soc_of_size_one_is_nonnegative_cone():
    as_soc = ConicProblem(c=[1.0], A=sp.csc_matrix([[-1.0]]), b=[-1.0], cones=ConeSpec(0, 0, (1,)))
    sol = conic.solve(as_soc)
    assert sol.optimal and sol.x[0] == pytest.approx(1.0, abs=1e-7)
    np.testing.assert_array_equal(conic.project_cone(np.array([-2.0]), ConeSpec(0, 0, (1,))), [0.0])


def test_validate_pass_and_defects():
    assert conic.validate(lp_x_ge_1()).ok
    A = sp.csc_matrix(np.ones((5, 1)))
    bad_rows = ConicProblem(c=[1.0], A=A, b=np.zeros(5), cones=ConeSpec(0, 6, ()))
    report = conic.validate(bad_rows)
    assert not report.ok and any("dimension mismatch" in d for d in report.defects)
    nonfinite = ConicProblem(c=[1.0], A=sp.csc_matrix([[-1.0]]), b=[np.inf], cones=ConeSpec(0, 1, ()))
    assert any("non-finite" in d for d in conic.validate(nonfinite).defects)
    empty = ConicProblem(c=[1.0], A=sp.csc_matrix([[-1.0]]), b=[0.0], cones=ConeSpec(0, 1, (0,)))
    assert any("empty cone" in d for d in conic.validate(empty).defects)


def test_solve_rejects_invalid_problem():
    A = sp.csc_matrix(np.ones((5, 1)))
    with pytest.raises(ValueError, match="dimension mismatch"):
        conic.solve(ConicProblem(c=[1.0], A=A, b=np.zeros(5), cones=ConeSpec(0, 6, ())))


def test_negative_cone_dimension_rejected():
    with pytest.raises(ValueError):
        ConeSpec(-1, 0, ())


def test_json_round_trip():
    prob = norm_of_3_4()
    for dense in (False, True):
        back = conic.loads(conic.dumps(prob, dense=dense))
        np.testing.assert_array_equal(back.A.toarray(), prob.A.toarray())
        np.testing.assert_array_equal(back.b, prob.b)
        assert back.cones == prob.cones


# ---------------------------------------------------------------------------
# projections


def _soc_vectors(size):
    return st.lists(st.floats(-100, 100), min_size=size, max_size=size).map(np.array)


@given(_soc_vectors(4))
def test_soc_projection_properties(v):
    cones = ConeSpec(0, 0, (4,))
    p = conic.project_cone(v, cones)
    # inside the cone, idempotent, and v - p is in the polar cone (Moreau)
    assert np.linalg.norm(p[1:]) <= p[0] + 1e-9 * (1 + abs(p[0]))
    np.testing.assert_allclose(conic.project_cone(p, cones), p, atol=1e-9 * (1 + np.abs(v).max()))
    d = p - v
    assert np.linalg.norm(d[1:]) <= d[0] + 1e-9 * (1 + np.abs(v).max())
    assert abs(d @ p) <= 1e-8 * (1 + (v @ v))


@given(st.lists(st.floats(-10, 10), min_size=6, max_size=6).map(np.array))
def test_dual_of_zero_cone_is_free(v):
    cones = ConeSpec(2, 2, (2,))
    primal = conic.project_cone(v, cones)
    dual = conic.project_cone(v, cones, dual=True)
    np.testing.assert_array_equal(primal[:2], 0.0)
    np.testing.assert_array_equal(dual[:2], v[:2])
    np.testing.assert_array_equal(primal[2:], dual[2:])


# ---------------------------------------------------------------------------
# random SOCPs against a grid oracle


def bounded_socp(seed):
    """minimize c'x over {|x_i| <= 1} intersected with a ball ||x - a|| <= r (5 variables)."""
    rng = np.random.default_rng(seed)
    n = 5
    c = rng.standard_normal(n)
    a = rng.uniform(-0.3, 0.3, n)
    r = rng.uniform(0.6, 1.2)
    A_box = np.vstack([np.eye(n), -np.eye(n)])
    A_ball = np.vstack([np.zeros((1, n)), -np.eye(n)])
    A = sp.csc_matrix(np.vstack([A_box, A_ball]))
    b = np.concatenate([np.ones(2 * n), [r], -a])
    return ConicProblem(c=c, A=A, b=b, cones=ConeSpec(0, 2 * n, (n + 1,))), (c, a, r)


def grid_oracle(c, a, r, resolution=1e-3):
    """Smallest c'x over feasible grid points, refining a 9-point-per-axis grid around the best point."""
    n = c.size
    centre, half = np.zeros(n), 1.0
    best_val, best_x = np.inf, None
    while True:
        step = max(half / 4, resolution)
        axes = [np.clip(centre[i] + step * np.arange(-4, 5), -1, 1) for i in range(n)]
        pts = np.array(list(itertools.product(*axes)))
        feas = np.linalg.norm(pts - a, axis=1) <= r
        if feas.any():
            vals = pts[feas] @ c
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_x = float(vals[k]), pts[feas][k]
        if step <= resolution:
            return best_val, best_x
        centre, half = best_x, half / 2


@pytest.mark.parametrize("seed", range(5))
def test_random_socp_matches_grid_oracle(seed):
    prob, (c, a, r) = bounded_socp(seed)
    sol = conic.solve(prob, SolverSettings(tolerance=1e-8))
    assert sol.optimal
    oracle, _ = grid_oracle(c, a, r)
    # The oracle only sees feasible grid points, so it can only overshoot.
    assert sol.objective <= oracle + 1e-6
    assert oracle - sol.objective <= 1e-3 * np.abs(c).sum()
    s_proj = conic.project_cone(sol.s, prob.cones)
    assert np.abs(s_proj - sol.s).max() <= 10 * 1e-8 * (1 + np.abs(sol.s).max())


@pytest.mark.parametrize("seed", range(3))
def test_warm_start_same_optimum_fewer_iterations(seed):
    prob, _ = bounded_socp(seed)
    settings = SolverSettings(tolerance=1e-8)
    cold = conic.solve(prob, settings)
    warm = conic.solve(prob, settings, warm=cold)
    assert warm.optimal
    assert abs(warm.objective - cold.objective) <= 10 * settings.tolerance * (1 + abs(cold.objective))
    assert warm.iterations <= cold.iterations
    # an arbitrary warm point gives the same optimum too
    rng = np.random.default_rng(seed)
    junk = ConicSolution(x=rng.standard_normal(5), y=rng.standard_normal(prob.b.size),
                         s=rng.standard_normal(prob.b.size), status=Status.OPTIMAL)
    other = conic.solve(prob, settings, warm=junk)
    assert abs(other.objective - cold.objective) <= 10 * settings.tolerance * (1 + abs(cold.objective))


def test_warm_start_shape_mismatch_rejected():
    bad = ConicSolution(x=np.zeros(3), y=np.zeros(1), s=np.zeros(1), status=Status.OPTIMAL)
    with pytest.raises(ValueError):
        conic.solve(lp_x_ge_1(), warm=bad)


def test_deterministic_iterates():
    prob, _ = bounded_socp(7)
    a, b = conic.solve(prob), conic.solve(prob)
    assert a.iterations == b.iterations
    np.testing.assert_array_equal(a.x, b.x)
    np.testing.assert_array_equal(a.y, b.y)


def test_dense_and_sparse_factorisations_agree():
    prob, _ = bounded_socp(3)
    dense = conic.solve(prob, SolverSettings(dense_limit=10**9))
    sparse = conic.solve(prob, SolverSettings(dense_limit=0))
    assert dense.objective == pytest.approx(sparse.objective, abs=1e-7)


def test_agrees_with_reference_interior_point_solver():
    clarabel = pytest.importorskip("clarabel")
    prob, _ = bounded_socp(11)
    cones = [clarabel.NonnegativeConeT(10), clarabel.SecondOrderConeT(6)]
    ref_settings = clarabel.DefaultSettings()
    ref_settings.verbose = False
    ref = clarabel.DefaultSolver(sp.csc_matrix((5, 5)), np.asarray(prob.c), prob.A, np.asarray(prob.b),
                                 cones, ref_settings).solve()
    ours = conic.solve(prob)
    assert ours.objective == pytest.approx(ref.obj_val, abs=1e-6)
