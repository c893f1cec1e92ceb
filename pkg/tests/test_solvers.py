import numpy as np
import pytest

from conftest import direct_quadratic_solve, nonlinear_instance, quadratic_instance
from saddlebvp import (GridFunction, ParameterFunction, ProblemSpec, SolverConfig,
                       h_norm, make_candidate, product_distance)
from saddlebvp.solvers import (SolverError, extragradient, lipschitz_estimate,
                               nested_minimax, newton, saddle_set, verify_saddle)

TIGHT = SolverConfig(tol_grad=1e-12, tol_res=1e-12)


def bilinear_spec(u_value=1.0):
    spec = ProblemSpec.create(1, 2.0, "x*y + u*(x - y)")
    return spec, ParameterFunction.constant(u_value, 1, 2.0)


def start(xv, yv):
    return (GridFunction.from_interior(np.atleast_1d(xv)),
            GridFunction.from_interior(np.atleast_1d(yv)))


def zero_problem(T=3):
    return ProblemSpec.create(T, 1.0, "0*x"), ParameterFunction.constant(0.0, T, 1.0)


# --- extragradient ------------------------------------------------------------

def test_extragradient_zero_field():
    spec, u = zero_problem()
    rng = np.random.default_rng(16)
    z0 = start(rng.standard_normal(3), rng.standard_normal(3))
    cand = extragradient(spec, u, z0, TIGHT)
    assert cand.converged
    assert cand.residual_norm <= 1e-10
    assert h_norm(cand.x) <= 1e-10 and h_norm(cand.y) <= 1e-10


def test_extragradient_closed_form():
    spec, u = bilinear_spec(1.0)
    cand = extragradient(spec, u, start(0.8, -1.1), TIGHT)
    assert cand.x(1) == pytest.approx(-0.2, abs=1e-8)
    assert cand.y(1) == pytest.approx(-0.6, abs=1e-8)
    assert cand.value == pytest.approx(0.2, abs=1e-10)


def test_extragradient_linear_solve_example():
    # 2x + y + u = 0, x - 2y - u = 0 at u = 0.5 -> (-0.1, -0.3)
    spec, u = bilinear_spec(0.5)
    cand = extragradient(spec, u, start(0.0, 0.0), TIGHT)
    assert cand.x(1) == pytest.approx(-0.1, abs=1e-8)
    assert cand.y(1) == pytest.approx(-0.3, abs=1e-8)


def test_extragradient_nonconvergence_flagged():
    spec, u = bilinear_spec(1.0)
    cfg = SolverConfig(method="extragradient", max_iter=3, tol_grad=1e-14)
    cand = extragradient(spec, u, start(0.8, -1.1), cfg)
    assert not cand.converged


def test_extragradient_divergence_detector():
    spec, u = bilinear_spec(1.0)
    cfg = SolverConfig(method="extragradient", step=10.0, max_iter=5000, tol_grad=1e-12)
    cand = extragradient(spec, u, start(0.5, 0.5), cfg)
    assert not cand.converged
    assert cand.iterations < 5000 - 1  # stopped early, not exhausted


def test_extragradient_gradient_norm_monotone_after_warmup():
    spec = ProblemSpec.create(4, 1.0, "x^2 - y^2 + 0.5*x*y")
    u = ParameterFunction.constant(0.0, 4, 1.0)
    cfg = SolverConfig(method="extragradient", tol_grad=1e-11, record_trace=True)
    z0 = start([1.0, 2.0, -1.0, 0.5], [-2.0, 1.0, 1.0, -0.5])
    cand = extragradient(spec, u, z0, cfg)
    norms = [row[1] for row in cand.trace]
    assert cand.converged
    for i in range(11, len(norms)):
        assert norms[i] <= norms[i - 1] * (1 + 1e-12)


def test_extragradient_deterministic_iterates():
    spec, u = bilinear_spec(1.0)
    cfg = SolverConfig(method="extragradient", record_trace=True, seed=4)
    a = extragradient(spec, u, start(0.3, 0.4), cfg)
    b = extragradient(spec, u, start(0.3, 0.4), cfg)
    assert a.trace == b.trace
    assert np.array_equal(a.x.values, b.x.values)


# --- newton ---------------------------------------------------------------------

def test_newton_zero_field_one_step():
    spec, u = zero_problem()
    cand = newton(spec, u, start([1.0, -2.0, 0.7], [0.1, 0.2, 0.3]), TIGHT)
    assert cand.converged and cand.iterations == 1
    assert h_norm(cand.x) <= 1e-12 and h_norm(cand.y) <= 1e-12


def test_newton_one_step_on_quadratics():
    rng = np.random.default_rng(17)
    for _ in range(10):
        T = int(rng.integers(1, 9))
        spec, u, coeffs = quadratic_instance(rng, T)
        z0 = start(rng.standard_normal(T) * 3, rng.standard_normal(T) * 3)
        cand = newton(spec, u, z0, TIGHT)
        assert cand.converged and cand.iterations == 1
        x_ref, y_ref = direct_quadratic_solve(T, u, coeffs)
        assert np.allclose(cand.x.interior, x_ref, atol=1e-10)
        assert np.allclose(cand.y.interior, y_ref, atol=1e-10)


def test_newton_exponential_instance():
    spec = ProblemSpec.create(1, 1.0, "x*y + exp(x) - exp(y)")
    u = ParameterFunction.constant(0.0, 1, 1.0)
    cand = newton(spec, u, start(0.5, -0.5), TIGHT)
    assert cand.converged
    assert cand.residual_norm <= 1e-12
    assert cand.iterations <= 20
    other = extragradient(spec, u, start(0.5, -0.5),
                          SolverConfig(tol_grad=1e-11, max_iter=100000))
    assert product_distance(cand, other) <= 1e-8


def test_newton_singular_jacobian_reports_condition():
    spec = ProblemSpec.create(1, 1.0, "-x^2")
    u = ParameterFunction.constant(0.0, 1, 1.0)
    with pytest.raises(SolverError) as err:
        newton(spec, u, start(1.0, 1.0), SolverConfig())
    assert "cond" in str(err.value)


# --- nested minimax ----------------------------------------------------------------

def test_nested_zero_field():
    spec, u = zero_problem()
    cand = nested_minimax(spec, u, GridFunction.from_interior([0.4, -0.2, 0.9]), TIGHT)
    assert cand.converged
    assert h_norm(cand.x) <= 1e-10 and h_norm(cand.y) <= 1e-10


def test_nested_one_variable_calculus_oracle():
    # reduced function -(y+1)^2/4 - y^2 - y peaks at y = -3/5 with x = -(y+1)/2
    spec = ProblemSpec.create(1, 2.0, "x*y + x - y")
    u = ParameterFunction.constant(0.0, 1, 2.0)
    cand = nested_minimax(spec, u, GridFunction.from_interior([1.5]), TIGHT)
    assert cand.y(1) == pytest.approx(-0.6, abs=1e-10)
    assert cand.x(1) == pytest.approx(-0.2, abs=1e-10)
    assert cand.value == pytest.approx(0.2, abs=1e-12)


def test_nested_agrees_with_extragradient():
    rng = np.random.default_rng(18)
    for _ in range(20):
        T = int(rng.integers(1, 7))
        spec, u, _ = quadratic_instance(rng, T)
        y0 = GridFunction.from_interior(rng.standard_normal(T))
        nested = nested_minimax(spec, u, y0, TIGHT)
        eg = extragradient(spec, u, (GridFunction.zeros(T), y0),
                           SolverConfig(tol_grad=1e-11, max_iter=200000))
        assert nested.converged and eg.converged
        assert abs(nested.value - eg.value) <= 1e-8


def test_nested_both_orders_match():
    spec = ProblemSpec.create(3, 1.0, "x*y + exp(x/2) - exp(y/2) + u*x")
    u = ParameterFunction.constant(0.4, 3, 1.0)
    y0 = GridFunction.from_interior([0.3, -0.1, 0.2])
    maxmin = nested_minimax(spec, u, y0, TIGHT)
    minmax = nested_minimax(spec, u, y0, TIGHT, outer="x")
    assert maxmin.converged and minmax.converged
    assert abs(maxmin.value - minmax.value) <= 1e-10
    assert product_distance(maxmin, minmax) <= 1e-8


# --- verification --------------------------------------------------------------------

def test_verify_saddle_zero_field():
    spec, u = zero_problem()
    cand = make_candidate(spec, u, GridFunction.zeros(3), GridFunction.zeros(3),
                          "manual", 0)
    rep = verify_saddle(spec, u, cand, probes=64, eps=1e-9)
    assert rep.passed
    assert rep.residual_ok and rep.inequalities_ok and rep.minimax_ok


def test_verify_saddle_accepts_true_and_rejects_perturbed():
    spec = ProblemSpec.create(1, 2.0, "x*y + x - y")
    u = ParameterFunction.constant(0.0, 1, 2.0)
    good = make_candidate(spec, u, GridFunction.from_interior([-0.2]),
                          GridFunction.from_interior([-0.6]), "manual", 0)
    assert verify_saddle(spec, u, good, probes=128, eps=1e-9).passed

    bad = make_candidate(spec, u, GridFunction.from_interior([-0.2]),
                         GridFunction.from_interior([-0.5]), "manual", 0)
    rep = verify_saddle(spec, u, bad, probes=512, eps=1e-9, seed=0)
    assert not rep.passed
    assert rep.inequality_gap_y > 1e-9  # probe found the saddle inequality breach
    assert not rep.minimax_ok


def test_verify_saddle_residual_tolerance_scaling():
    spec, u = zero_problem(5)
    cand = make_candidate(spec, u, GridFunction.zeros(5), GridFunction.zeros(5),
                          "manual", 0)
    rep = verify_saddle(spec, u, cand)
    # default threshold is 1e-8 * (1 + max row sum) = 5e-8 for T >= 3
    assert rep.residual_ok
    assert rep.residual_norm <= 1e-8 * (1 + 4.0)


# --- saddle sets ----------------------------------------------------------------------

def test_saddle_set_unique_under_strict_convexity():
    spec = ProblemSpec.create(4, 1.0, "x^2 - y^2 + 0.5*x*y")
    u = ParameterFunction.constant(0.0, 4, 1.0)
    cfg = SolverConfig(method="newton", multistart=32, cluster_radius=1e-6,
                       tol_res=1e-12)
    sset = saddle_set(spec, u, cfg, radii=(3.0, 3.0))
    assert len(sset.points) == 1
    assert sset.failures == 0
    assert sset.attempts == 32


def test_saddle_set_zero_field_origin():
    spec, u = zero_problem(2)
    sset = saddle_set(spec, u, SolverConfig(method="newton", multistart=8), radii=(2.0, 2.0))
    assert len(sset.points) == 1
    cand = sset.points[0]
    assert h_norm(cand.x) <= 1e-10 and h_norm(cand.y) <= 1e-10


def test_saddle_set_equivalent_expressions_identical():
    u = ParameterFunction.constant(0.0, 2, 1.0)
    cfg = SolverConfig(method="newton", multistart=4, seed=5)
    s1 = saddle_set(ProblemSpec.create(2, 1.0, "0*x"), u, cfg, radii=(2.0, 2.0))
    s2 = saddle_set(ProblemSpec.create(2, 1.0, "0*x*y"), u, cfg, radii=(2.0, 2.0))
    assert len(s1.points) == len(s2.points) == 1
    assert np.array_equal(s1.points[0].x.values, s2.points[0].x.values)
    assert np.array_equal(s1.points[0].y.values, s2.points[0].y.values)


def test_saddle_set_all_starts_fail_is_flagged():
    spec = ProblemSpec.create(1, 1.0, "-x^2")  # singular Jacobian everywhere
    u = ParameterFunction.constant(0.0, 1, 1.0)
    sset = saddle_set(spec, u, SolverConfig(method="newton", multistart=5))
    assert sset.all_failed
    assert sset.failures == 5


def test_saddle_set_representatives_well_separated():
    rng = np.random.default_rng(19)
    spec, u, _ = quadratic_instance(rng, 3)
    cfg = SolverConfig(method="newton", multistart=16, cluster_radius=1e-4)
    sset = saddle_set(spec, u, cfg, radii=(3.0, 3.0))
    for i, a in enumerate(sset.points):
        for b in sset.points[i + 1:]:
            assert product_distance(a, b) > cfg.cluster_radius


def test_all_three_methods_agree_pairwise():
    # certified smooth instances: positions within 1e-6, values within 1e-8
    rng = np.random.default_rng(23)
    for _ in range(5):
        T = int(rng.integers(1, 6))
        spec, u = nonlinear_instance(rng, T)
        z0 = start(rng.standard_normal(T), rng.standard_normal(T))
        cands = [
            newton(spec, u, z0, TIGHT),
            extragradient(spec, u, z0, SolverConfig(tol_grad=1e-10, max_iter=200000)),
            nested_minimax(spec, u, z0[1], TIGHT),
        ]
        for i, a in enumerate(cands):
            assert a.converged
            for b in cands[i + 1:]:
                assert product_distance(a, b) <= 1e-6
                assert abs(a.value - b.value) <= 1e-8


def test_saddle_set_thread_count_does_not_change_results(monkeypatch):
    spec = ProblemSpec.create(3, 1.0, "x^2 - y^2 + 0.3*x*y + u*x")
    u = ParameterFunction.constant(0.5, 3, 1.0)
    cfg = SolverConfig(method="newton", multistart=8, seed=21)
    monkeypatch.delenv("SADDLEBVP_THREADS", raising=False)
    serial = saddle_set(spec, u, cfg, radii=(3.0, 3.0))
    monkeypatch.setenv("SADDLEBVP_THREADS", "4")
    threaded = saddle_set(spec, u, cfg, radii=(3.0, 3.0))
    assert len(serial.points) == len(threaded.points)
    for a, b in zip(serial.points, threaded.points):
        assert np.array_equal(a.x.values, b.x.values)
        assert np.array_equal(a.y.values, b.y.values)


# --- misc ------------------------------------------------------------------------------

def test_lipschitz_estimate_quadratic_exact():
    # constant Jacobian [[L+2I, 0], [0, L+2I]]: norm = largest eigenvalue + 2
    spec = ProblemSpec.create(3, 1.0, "x^2 - y^2")
    u = ParameterFunction.constant(0.0, 3, 1.0)
    expected = (2.0 + np.sqrt(2.0)) + 2.0
    assert lipschitz_estimate(spec, u, 2.0, 2.0, samples=3) == pytest.approx(
        expected, rel=1e-6)


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(method="sgd")
    with pytest.raises(ValueError):
        SolverConfig(tol_grad=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(step=-1.0)


def test_candidate_value_consistency_invariant():
    # value of every solver output equals the recomputed action
    from saddlebvp import action
    spec, u = bilinear_spec(1.0)
    for cand in (newton(spec, u, start(1.0, 1.0), TIGHT),
                 extragradient(spec, u, start(1.0, 1.0), TIGHT),
                 nested_minimax(spec, u, GridFunction.from_interior([1.0]), TIGHT)):
        recomputed = action(spec, u, cand.x, cand.y)
        assert abs(cand.value - recomputed) <= 1e-10 * (1 + abs(recomputed))
