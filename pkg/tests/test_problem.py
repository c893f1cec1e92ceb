import json

import numpy as np
import pytest

from conftest import central_fd_gradient, dirichlet_matrix, quadratic_instance
from saddlebvp import (GridFunction, ParameterFunction, ProblemSpec, action, grad,
                       hessian_blocks, load_problem, make_candidate, residual)
from saddlebvp.expressions import Call, Neg, Num, Pow, Var
from saddlebvp.problem import ProblemError, problem_from_dict


def closed_form_instance():
    spec = ProblemSpec.create(1, 2.0, "x*y + x - y")
    u = ParameterFunction.constant(0.3, 1, 2.0)  # F ignores u here
    x = GridFunction.from_interior([-0.2])
    y = GridFunction.from_interior([-0.6])
    return spec, u, x, y


# --- parameter box -----------------------------------------------------------

def test_parameter_box_enforced():
    ParameterFunction(np.array([1.0, -1.0]), 1.0)
    with pytest.raises(ProblemError):
        ParameterFunction(np.array([1.0, -1.0000001]), 1.0)


def test_parameter_from_expression():
    u = ParameterFunction.from_expression("sin(3.141592653589793*k/6)", 5, 1.0)
    assert u.values == pytest.approx(np.sin(np.pi * np.arange(1, 6) / 6), abs=1e-12)
    with pytest.raises(ProblemError):
        ParameterFunction.from_expression("x + k", 5, 1.0)
    with pytest.raises(ProblemError):
        ParameterFunction.from_expression("2*k", 5, 1.0)  # exits the box


def test_parameter_constant():
    u = ParameterFunction.constant(-0.5, 4, 1.0)
    assert u.max_norm == 0.5
    assert u.T == 4


# --- action -------------------------------------------------------------------

def test_action_zero_field():
    spec = ProblemSpec.create(3, 1.0, "0*x")
    u = ParameterFunction.constant(0.0, 3, 1.0)
    z = GridFunction.zeros(3)
    assert action(spec, u, z, z) == 0.0


def test_action_closed_form_saddle_value():
    spec, u, x, y = closed_form_instance()
    assert action(spec, u, x, y) == pytest.approx(0.2, abs=1e-12)


def test_action_linear_parameter_field():
    spec = ProblemSpec.create(2, 1.0, "u*x")
    u = ParameterFunction.constant(1.0, 2, 1.0)
    x = GridFunction(np.array([0.0, 1.0, 1.0, 0.0]))
    y = GridFunction.zeros(2)
    assert action(spec, u, x, y) == pytest.approx(3.0, abs=1e-14)


def test_action_dimension_mismatch():
    spec = ProblemSpec.create(3, 1.0, "x*y")
    u = ParameterFunction.constant(0.0, 3, 1.0)
    with pytest.raises(ProblemError):
        action(spec, u, GridFunction.zeros(2), GridFunction.zeros(3))


def test_action_antisymmetry_under_swap():
    # with F'(k,x,y,u) = -F(k,y,x,u), swapping the pair negates the value
    def swap_negate(node):
        if isinstance(node, Var):
            return Var({"x": "y", "y": "x"}.get(node.name, node.name))
        if isinstance(node, Num):
            return node
        if isinstance(node, Neg):
            return Neg(swap_negate(node.arg))
        if isinstance(node, Call):
            return Call(node.func, swap_negate(node.arg))
        if isinstance(node, Pow):
            return Pow(swap_negate(node.base), swap_negate(node.exponent))
        return type(node)(swap_negate(node.left), swap_negate(node.right))

    from saddlebvp.expressions import ScalarField, parse
    rng = np.random.default_rng(9)
    text = "x^2*y - sin(y) + u*x + k*y/3"
    spec = ProblemSpec.create(4, 1.0, text)
    swapped = ProblemSpec.create(4, 1.0, ScalarField.from_ast(Neg(swap_negate(parse(text)))))
    u = ParameterFunction(rng.uniform(-1, 1, 4), 1.0)
    for _ in range(20):
        x = GridFunction.from_interior(rng.standard_normal(4))
        y = GridFunction.from_interior(rng.standard_normal(4))
        assert action(swapped, u, y, x) == pytest.approx(-action(spec, u, x, y), abs=1e-12)


# --- gradient -----------------------------------------------------------------

def test_grad_zero_field_at_origin():
    spec = ProblemSpec.create(3, 1.0, "0*x")
    u = ParameterFunction.constant(0.0, 3, 1.0)
    z = GridFunction.zeros(3)
    gx, gy = grad(spec, u, z, z)
    assert np.array_equal(gx, np.zeros(3))
    assert np.array_equal(gy, np.zeros(3))


def test_grad_vanishes_at_closed_form_saddle():
    spec, u, x, y = closed_form_instance()
    gx, gy = grad(spec, u, x, y)
    assert gx == pytest.approx([0.0], abs=1e-14)
    assert gy == pytest.approx([0.0], abs=1e-14)


def test_grad_matches_finite_differences():
    rng = np.random.default_rng(10)
    fields = ["x*y + x - y", "x^2 - y^2 + u*(x - y)", "sin(x)*cos(y) + u*x",
              "exp(x/3 - y/3) + k*x/10", "tanh(x*y) + u*y"]
    for trial in range(30):
        T = int(rng.integers(1, 21))
        spec = ProblemSpec.create(T, 1.0, fields[trial % len(fields)])
        u = ParameterFunction(rng.uniform(-1, 1, T), 1.0)
        x = GridFunction.from_interior(rng.uniform(-1.5, 1.5, T))
        y = GridFunction.from_interior(rng.uniform(-1.5, 1.5, T))
        gx, gy = grad(spec, u, x, y)
        fx, fy = central_fd_gradient(spec, u, x, y)
        assert np.all(np.abs(gx - fx) <= 1e-6 * (1 + np.abs(fx)))
        assert np.all(np.abs(gy - fy) <= 1e-6 * (1 + np.abs(fy)))


# --- residual -----------------------------------------------------------------

def test_residual_zero_cases():
    spec = ProblemSpec.create(3, 1.0, "0*x")
    u = ParameterFunction.constant(0.0, 3, 1.0)
    z = GridFunction.zeros(3)
    assert residual(spec, u, z, z) == 0.0


def test_residual_closed_form_saddle():
    spec, u, x, y = closed_form_instance()
    assert residual(spec, u, x, y) <= 1e-12


def test_residual_direct_substitution():
    spec = ProblemSpec.create(1, 1.0, "x*y")
    u = ParameterFunction.constant(0.0, 1, 1.0)
    x = GridFunction.from_interior([1.0])
    y = GridFunction.from_interior([0.0])
    # max(|-2 - 0|, |0 + 1|) = 2
    assert residual(spec, u, x, y) == 2.0


def test_residual_equals_gradient_max_norm():
    # the defect components are -(grad_x) and +(grad_y) entrywise
    rng = np.random.default_rng(11)
    spec = ProblemSpec.create(6, 1.0, "x^2 - y^2 + sin(x*y) + u*x")
    u = ParameterFunction(rng.uniform(-1, 1, 6), 1.0)
    for _ in range(20):
        x = GridFunction.from_interior(rng.standard_normal(6))
        y = GridFunction.from_interior(rng.standard_normal(6))
        gx, gy = grad(spec, u, x, y)
        expected = max(np.max(np.abs(gx)), np.max(np.abs(gy)))
        assert residual(spec, u, x, y) == pytest.approx(expected, rel=1e-15)


# --- hessian blocks -------------------------------------------------------------

def test_hessian_blocks_zero_field():
    spec = ProblemSpec.create(3, 1.0, "0*x")
    u = ParameterFunction.constant(0.0, 3, 1.0)
    z = GridFunction.zeros(3)
    Axx, Axy, Ayy = hessian_blocks(spec, u, z, z)
    L = dirichlet_matrix(3)
    assert np.array_equal(Axx, L)
    assert np.array_equal(Axy, np.zeros((3, 3)))
    assert np.array_equal(Ayy, -L)


def test_hessian_blocks_bilinear_t1():
    spec = ProblemSpec.create(1, 1.0, "x*y")
    u = ParameterFunction.constant(0.0, 1, 1.0)
    z = GridFunction.zeros(1)
    Axx, Axy, Ayy = hessian_blocks(spec, u, z, z)
    assert np.array_equal(Axx, [[2.0]])
    assert np.array_equal(Axy, [[1.0]])
    assert np.array_equal(Ayy, [[-2.0]])


def test_hessian_blocks_match_directional_second_differences():
    rng = np.random.default_rng(12)
    spec = ProblemSpec.create(5, 1.0, "exp(x/2)*y + sin(x) - y^2 + u*x*y")
    u = ParameterFunction(rng.uniform(-1, 1, 5), 1.0)
    x = GridFunction.from_interior(rng.uniform(-1, 1, 5))
    y = GridFunction.from_interior(rng.uniform(-1, 1, 5))
    Axx, Axy, Ayy = hessian_blocks(spec, u, x, y)
    h = 1e-4
    for _ in range(10):
        v = rng.standard_normal(5)
        w = rng.standard_normal(5)

        def val(t):
            return action(spec, u, GridFunction.from_interior(x.interior + t * v),
                          GridFunction.from_interior(y.interior + t * w))

        second_fd = (val(h) - 2.0 * val(0.0) + val(-h)) / h ** 2
        quad = v @ Axx @ v + 2.0 * v @ Axy @ w + w @ Ayy @ w
        assert second_fd == pytest.approx(quad, abs=1e-5 * (1 + abs(quad)))


# --- candidates ------------------------------------------------------------------

def test_make_candidate_recomputes_value():
    spec, u, x, y = closed_form_instance()
    cand = make_candidate(spec, u, x, y, method="test", iterations=3)
    assert cand.value == pytest.approx(action(spec, u, x, y), rel=1e-10)
    assert cand.residual_norm == residual(spec, u, x, y)
    assert cand.method == "test" and cand.iterations == 3 and cand.converged


# --- problem files ----------------------------------------------------------------

def test_load_problem_roundtrip(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"T": 2, "D": 1.5, "F": "x*y + u*x",
                                "u": [0.5, -1.0]}))
    spec, u = load_problem(path)
    assert spec.T == 2 and spec.D == 1.5
    assert np.array_equal(u.values, [0.5, -1.0])


def test_load_problem_u_expression(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"T": 3, "D": 2.0, "F": "u*x", "u": "k/2"}))
    _, u = load_problem(path)
    assert np.array_equal(u.values, [0.5, 1.0, 1.5])


def test_load_problem_validates_box(tmp_path):
    path = tmp_path / "p.json"
    path.write_text(json.dumps({"T": 2, "D": 1.0, "F": "u*x", "u": [0.0, 1.5]}))
    with pytest.raises(ProblemError):
        load_problem(path)


def test_problem_from_dict_errors():
    with pytest.raises(ProblemError):
        problem_from_dict({"T": 2, "D": 1.0, "F": "x"})
    with pytest.raises(ProblemError):
        problem_from_dict({"T": 0, "D": 1.0, "F": "x", "u": []})
    with pytest.raises(ProblemError):
        problem_from_dict({"T": 2, "D": 1.0, "F": "x", "u": [0.0, 0.0, 0.0]})


def test_load_problem_bad_json(tmp_path):
    path = tmp_path / "p.json"
    path.write_text("{not json")
    with pytest.raises(ProblemError):
        load_problem(path)


def test_quadratic_instance_generator_is_certifiable():
    # the conftest generator must produce convex-concave fields
    rng = np.random.default_rng(13)
    for _ in range(5):
        spec, u, coeffs = quadratic_instance(rng, 4)
        Axx, _, Ayy = hessian_blocks(spec, u, GridFunction.zeros(4), GridFunction.zeros(4))
        assert np.min(np.linalg.eigvalsh(Axx)) > 0
        assert np.max(np.linalg.eigvalsh(Ayy)) < 0
