import math

import mpmath

import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from condsym.expr import (
    Context,
    CyclicBindingError,
    DeclarationError,
    ZeroVerdict,
    differentiate,
    eval_numeric,
    is_zero,
    normalize,
    opaque,
    substitute,
)
from condsym.printing import to_text

x0, x1, x2, x3, u, w = sp.symbols("x0 x1 x2 x3 u w")
X = (x0, x1, x2, x3)


def minkowski_ctx():
    ctx = Context(variables=X)
    ctx.declare(u)
    ctx.define(w, w**2 - (x0**2 - x1**2 - x2**2 - x3**2))
    ctx.region[x0] = (3, 5)
    for v in X[1:]:
        ctx.region[v] = (-1, 1)
    return ctx


def test_product_rule():
    assert differentiate(x1 * u, x1) == u


def test_opaque_chain_rule():
    F = opaque("F")
    d = differentiate(F(u), u)
    assert d == opaque("F", 1, [1])(u)
    assert to_text(d) == "d[F;1](u)"


def test_opaque_zero_orders_collapse():
    assert opaque("F", 1, [0]) is opaque("F")


def test_constant_not_a_variable():
    ctx = Context(variables=X, constants=("C",))
    with pytest.raises(DeclarationError):
        differentiate(sp.Symbol("C") * x0, "C", ctx)


def test_undeclared_symbol():
    ctx = Context(variables=X)
    with pytest.raises(DeclarationError):
        differentiate(x0, "y", ctx)


def test_implicit_sqrt_derivative_matches_fd():
    ctx = minkowski_ctx()
    d = differentiate(w, x0, ctx)
    assert is_zero(d - x0 / w, ctx).zero
    # central differences of the closed form at a few points
    s = sp.sqrt(x0**2 - x1**2 - x2**2 - x3**2)
    f = sp.lambdify(X, s)
    for pt in [(3.5, 0.2, -0.4, 0.7), (4.1, -0.9, 0.3, 0.1), (4.8, 0.5, 0.5, -0.5)]:
        h = 1e-5
        fd = (f(pt[0] + h, *pt[1:]) - f(pt[0] - h, *pt[1:])) / (2 * h)
        env = dict(zip(X, pt))
        exact = eval_numeric(d, env, ctx=ctx)
        assert abs(fd - exact) / abs(exact) < 1e-6


def test_substitute_symbols():
    u1, u2 = sp.symbols("u1 u2")
    assert substitute(u1 + u2, {u1: 0}) == u2


def test_substitute_opaque_reapplication():
    F, phi = opaque("F"), opaque("phi")
    assert substitute(F(u), {u: phi(w)}) == F(phi(w))


def test_substitute_pins_closed_form():
    F = opaque("F")
    t = sp.Symbol("t")
    assert substitute(F(u) + differentiate(F(u), u), {F: sp.Lambda(t, t**3)}) == u**3 + 3 * u**2


def test_substitute_cycle_rejected():
    with pytest.raises(CyclicBindingError):
        substitute(x0, {x0: x1, x1: x0})


def test_substitute_self_reference_once():
    assert substitute(x0, {x0: x0 + 1}) == x0 + 1


def test_is_zero_polynomial_identity():
    assert is_zero((u + 1) ** 2 - u**2 - 2 * u - 1).verdict is ZeroVerdict.PROVED_ZERO


def test_is_zero_nonzero():
    r = is_zero(x1, Context(variables=X))
    assert r.verdict is ZeroVerdict.PROVED_NONZERO
    assert r.witness is not None


def test_box_of_sqrt():
    ctx = minkowski_ctx()
    box = sum(s * differentiate(differentiate(w, v, ctx), v, ctx) for s, v in zip((1, -1, -1, -1), X))
    assert is_zero(box - 3 / w, ctx).zero


def test_is_zero_unknown_below_threshold():
    ctx = Context(variables=X)
    r = is_zero(sp.Float(1e-14) * x0, ctx, tol=1e-9)
    # numerically tiny but structurally nonzero
    assert r.verdict is ZeroVerdict.UNKNOWN
    assert r.max_abs is not None and r.max_abs < 1e-9


def test_is_zero_deterministic():
    ctx = Context(variables=X)
    e = x0**2 - x1 * x2 + 1
    assert is_zero(e, ctx, seed=7) == is_zero(e, ctx, seed=7)


def test_eval_numeric_basic():
    assert eval_numeric(x0**2 - x1**2, {x0: 2, x1: 1}) == 3


def test_eval_numeric_opaque_impl():
    F = opaque("F")
    e = F(x0) + differentiate(F(x0), x0)
    v = eval_numeric(e, {x0: 0.5}, {"F": [math.sin, math.cos]})
    assert v == pytest.approx(math.sin(0.5) + math.cos(0.5))


def test_normalize_idempotent_on_definitions():
    ctx = minkowski_ctx()
    e = (w**3 + x0 * w) / (w + 1)
    n = normalize(e, ctx)
    assert normalize(n, ctx) == n


# -- properties ---------------------------------------------------------------

_atoms = st.sampled_from([x0, x1, x2, sp.Integer(2), sp.Rational(1, 3)])


exprs = st.recursive(
    _atoms,
    lambda sub: st.one_of(
        st.tuples(sub, sub).map(lambda p: p[0] + p[1]),
        st.tuples(sub, sub).map(lambda p: p[0] * p[1]),
        st.tuples(sub, st.integers(1, 3)).map(lambda p: p[0] ** p[1]),
        sub.map(sp.sin),
    ),
    max_leaves=6,
)


@settings(max_examples=40, deadline=None)
@given(exprs, exprs, st.integers(-3, 3), st.integers(-3, 3))
def test_differentiation_linear(e1, e2, a, b):
    lhs = differentiate(a * e1 + b * e2, x0)
    rhs = a * differentiate(e1, x0) + b * differentiate(e2, x0)
    assert is_zero(lhs - rhs, Context(variables=X)).zero


@settings(max_examples=40, deadline=None)
@given(exprs)
def test_mixed_partials_commute(e):
    d01 = differentiate(differentiate(e, x0), x1)
    d10 = differentiate(differentiate(e, x1), x0)
    assert not is_zero(d01 - d10, Context(variables=X)).nonzero


@settings(max_examples=40, deadline=None)
@given(exprs)
def test_normalize_idempotent(e):
    n = normalize(e)
    assert normalize(n) == n


@settings(max_examples=25, deadline=None)
@given(exprs, st.floats(0.2, 1.5), st.floats(0.2, 1.5), st.floats(0.2, 1.5))
def test_derivative_agrees_with_fd(e, a, b, c):
    d = differentiate(e, x1)
    f = sp.lambdify((x0, x1, x2), e, "mpmath")
    g = sp.lambdify((x0, x1, x2), d, "mpmath")
    with mpmath.workdps(30):
        h = mpmath.mpf("1e-10")
        fd = (f(a, b + h, c) - f(a, b - h, c)) / (2 * h)
        ex = g(a, b, c)
        assert abs(fd - ex) <= 1e-6 * max(1, abs(ex))
