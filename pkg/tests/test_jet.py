import random

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from condsym.expr import DeclarationError, normalize, opaque
from condsym.jet import JetSpace, OrderError, VectorFieldOp, apply_op, prolong, total_derivative
from oracles import jet_values_at, prolongation_fd, random_jet_expr, random_operator, sample_function, sample_points


@pytest.fixture
def S():
    return JetSpace(["x0", "x1", "x2", "x3"], order=2)


def wave(S):
    return S.jet(0, 0) - S.jet(1, 1) - S.jet(2, 2) - S.jet(3, 3) - opaque("F")(S.u)


def test_jet_names(S):
    assert S.jet(0, 1).name == "u_[0 1]"
    assert S.jet(1, 0) is S.jet(0, 1)
    assert S.coord(()) == S.u


def test_order_limit(S):
    with pytest.raises(OrderError):
        S.jet(0, 1, 2)
    with pytest.raises(DeclarationError):
        S.jet(7)


def test_total_derivative_examples(S):
    x1 = S.variables[1]
    assert sp.expand(total_derivative(x1 * S.u, 1, S) - (S.u + x1 * S.jet(1))) == 0
    assert total_derivative(S.jet(1), 2, S) == S.jet(1, 2)
    assert sp.expand(total_derivative(S.u**2, 1, S) - 2 * S.u * S.jet(1)) == 0


def test_total_derivative_beyond_order(S):
    with pytest.raises(OrderError):
        total_derivative(S.jet(0, 1), 2, S)


def test_translation_prolongs_trivially(S):
    P = prolong(VectorFieldOp.partial(S, 1), 2)
    assert all(c == 0 for c in P.coeffs.values())
    x1 = S.variables[1]
    assert apply_op(P, x1 * S.jet(2)) == S.jet(2)
    assert apply_op(P, wave(S)) == 0


def test_boost_leaves_wave_invariant(S):
    x0, x1 = S.variables[:2]
    J01 = VectorFieldOp.from_dict(S, {0: x1, 1: x0})
    assert normalize(apply_op(prolong(J01, 2), wave(S))) == 0


def test_scaling_prolongation():
    S = JetSpace(["x1", "x2"], order=2)
    x1 = S.variables[0]
    Q = VectorFieldOp.from_dict(S, {1: x1}, eta=-S.u)
    P = prolong(Q, 2)
    assert sp.expand(P.coeffs[(0,)] + 2 * S.jet(1)) == 0
    assert sp.expand(P.coeffs[(0, 0)] + 3 * S.jet(1, 1)) == 0


def test_apply_requires_order(S):
    P = prolong(VectorFieldOp.partial(S, 0), 1)
    with pytest.raises(OrderError):
        apply_op(P, S.jet(0, 0))


def test_prolong_order_range(S):
    with pytest.raises(OrderError):
        prolong(VectorFieldOp.partial(S, 0), 3)


def test_coefficients_must_be_point_functions(S):
    with pytest.raises(DeclarationError):
        VectorFieldOp.from_dict(S, {0: S.jet(1)})


def test_operator_printing(S):
    x0, x1 = S.variables[:2]
    Q = VectorFieldOp.from_dict(S, {0: x1, 1: x0}, eta=-S.u)
    assert str(Q) == "x1*d/dx0 + x0*d/dx1 - u*d/du"


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_prolongation_matches_flow_oracle(seed):
    rng = random.Random(seed)
    Q = random_operator(rng, rng.randint(1, 3))
    S = Q.space
    e = random_jet_expr(rng, S)
    g = sample_function(rng, S)
    pts = sample_points(rng, S.n, k=4)
    got = jet_values_at(apply_op(prolong(Q, 2), e), S, g, pts)
    want = prolongation_fd(Q, e, g, pts)
    for a, b in zip(got, want):
        assert abs(a - b) <= 1e-7 * max(1.0, abs(b))
