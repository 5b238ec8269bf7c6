import pytest
import sympy as sp

from condsym.expr import normalize, opaque
from condsym.families import OperatorFamily, UnsupportedAnsatz, transform_family
from condsym.jet import JetSpace, VectorFieldOp
from condsym.reduction import (
    PDE,
    Ansatz,
    NotReduced,
    ReducedEquation,
    build_ansatz,
    check_conditional_invariance,
    check_conditional_invariance_alt,
    factor_reduction,
    invariant_surface_system,
    restrict_to_manifold,
    substitute_ansatz,
    verify_first_integrals,
)
from condsym.wave import poincare_generators, wave_family_from_omega

F = opaque("F")
phi = opaque("phi")


@pytest.fixture
def S():
    return JetSpace(["x0", "x1", "x2", "x3"], order=2)


def wave(S):
    return PDE(S.jet(0, 0) - S.jet(1, 1) - S.jet(2, 2) - S.jet(3, 3) - F(S.u), S, "wave")


def op(S, d, eta=0):
    return VectorFieldOp.from_dict(S, d, eta)


def shift_family(S, f):
    return OperatorFamily(tuple(op(S, {a: 1, 0: -fa}) for a, fa in zip((1, 2, 3), f)))


# -- invariant surface and integrals --------------------------------------------


def test_invariant_surface_examples():
    S = JetSpace(["x1", "x2"], order=2)
    x1 = S.variables[0]
    assert invariant_surface_system(OperatorFamily((op(S, {x1: 1}),))).Y == (S.jet(1),)
    Y = invariant_surface_system(OperatorFamily((op(S, {x1: S.u}, 1),))).Y
    assert sp.expand(Y[0] - (S.u * S.jet(1) - 1)) == 0


def test_invariant_surface_shift_family(S):
    f1 = opaque("f1", 4)(*S.variables)
    Y = invariant_surface_system(shift_family(S, (f1, 0, 0))).Y
    assert sp.expand(Y[0] - (S.jet(1) - f1 * S.jet(0))) == 0


def test_first_integrals_translations(S):
    x = S.variables
    fam = OperatorFamily((op(S, {1: 1}), op(S, {2: 1})))
    rep = verify_first_integrals(fam, [x[0], x[3], S.u], certify_complete=True)
    assert rep.ok and rep.complete


def test_first_integrals_failure(S):
    x = S.variables
    rep = verify_first_integrals(OperatorFamily((op(S, {1: 1}),)), [x[1]])
    assert not rep.ok and rep.failures[0]["operator"] == "Q1"


def test_build_ansatz_examples():
    S = JetSpace(["x1", "x2", "x3"], order=2)
    x1, x2, x3 = S.variables
    ans = build_ansatz(OperatorFamily((op(S, {x1: 1}),)), [S.u, x2, x3])
    assert ans.explicit == opaque("phi", 2)(x2, x3)
    S2 = JetSpace(["x1", "x2"], order=2)
    y1, y2 = S2.variables
    ans = build_ansatz(OperatorFamily((op(S2, {y1: y1}, -S2.u),)), [S2.u * y1, y2])
    assert normalize(ans.explicit - phi(y2) / y1) == 0


def test_build_ansatz_needs_u(S):
    with pytest.raises(UnsupportedAnsatz):
        build_ansatz(OperatorFamily((op(S, {1: 1}),)), [S.variables[0]])


# -- substitution and reduction ----------------------------------------------------


def test_substitute_keeps_source_term(S):
    x = S.variables
    w = x[0] * x[1]
    W = substitute_ansatz(wave(S), Ansatz.from_explicit(S, phi(w), (w,)))
    assert W.expr.has(F(W.phi_space.u))


def test_traveling_wave_annihilated():
    S = JetSpace(["x1", "x2"], order=1)
    x1, x2 = S.variables
    W = substitute_ansatz(PDE(S.jet(1) - S.jet(2), S), Ansatz.from_explicit(S, phi(x1 + x2), (x1 + x2,)))
    assert normalize(W.expr) == 0
    r = factor_reduction(W)
    assert isinstance(r, ReducedEquation) and r.degenerate


def test_phi_of_x2_into_u1():
    S = JetSpace(["x1", "x2"], order=1)
    x2 = S.variables[1]
    W = substitute_ansatz(PDE(S.jet(1), S), Ansatz.from_explicit(S, phi(x2), (x2,)))
    assert normalize(W.expr) == 0


def test_reduction_x0_plus_x1(S):
    x = S.variables
    w = x[0] + x[1]
    r = factor_reduction(substitute_ansatz(wave(S), Ansatz.from_explicit(S, phi(w), (w,))))
    assert r.reduces
    assert r.Ltilde == F(r.phi_space.u)


def test_reduction_x0(S):
    x0 = S.variables[0]
    r = factor_reduction(substitute_ansatz(wave(S), Ansatz.from_explicit(S, phi(x0), (x0,))))
    P = r.phi_space
    assert r.reduces and sp.expand(r.Ltilde - (P.jet(1, 1) - F(P.u))) == 0


def test_not_reduced_x0x1(S):
    x = S.variables
    w = x[0] * x[1]
    r = factor_reduction(substitute_ansatz(wave(S), Ansatz.from_explicit(S, phi(w), (w,))))
    assert isinstance(r, NotReduced)
    assert "theta" in r.reason and r.witness["ratio"] != 0


def test_reduction_p3_implicit(S):
    ctx = S.ctx
    x = S.variables
    w = ctx.define("w", sp.Symbol("w") ** 2 - (x[0] ** 2 - x[1] ** 2 - x[2] ** 2 - x[3] ** 2))
    ctx.region[x[0]] = (3, 5)
    for v in x[1:]:
        ctx.region[v] = (-1, 1)
    r = factor_reduction(substitute_ansatz(wave(S), Ansatz.from_explicit(S, phi(w), (w,))))
    P = r.phi_space
    assert r.reduces
    assert normalize(r.Ltilde - (P.jet(1, 1) + 3 * P.jet(1) / w - F(P.u))) == 0


# -- manifold restriction and invariance --------------------------------------------


def test_restriction_laplace():
    S = JetSpace(["x1", "x2"], order=2)
    x1 = S.variables[0]
    R = restrict_to_manifold(PDE(S.jet(1, 1) + S.jet(2, 2), S), OperatorFamily((op(S, {x1: 1}),)))
    assert R.Lam == S.jet(2, 2)


def test_restriction_shift_family(S):
    R = restrict_to_manifold(wave(S), shift_family(S, (1, 0, 0)))
    assert R.Lam == -F(S.u)


def test_empty_intersection_flag():
    S = JetSpace(["x1", "x2"], order=1)
    x1 = S.variables[0]
    R = restrict_to_manifold(PDE(S.jet(1) - 1, S), OperatorFamily((op(S, {x1: 1}),)))
    assert R.Lam == -1 and R.flags


@pytest.mark.parametrize("name", ["P0", "P3", "J01", "J12", "J23"])
def test_poincare_invariant(S, name):
    Q = dict(poincare_generators(S))[name]
    fam = OperatorFamily((Q,), (name,))
    assert check_conditional_invariance(wave(S), fam).verdict == "invariant"
    assert check_conditional_invariance_alt(wave(S), fam).verdict == "invariant"


def test_shift_family_constant_f(S):
    fam = shift_family(S, (1, 0, 0))
    assert check_conditional_invariance(wave(S), fam).verdict == "invariant"
    assert check_conditional_invariance_alt(wave(S), fam).verdict == "invariant"


def test_shift_family_x0_not_invariant(S):
    fam = shift_family(S, (S.variables[0], 0, 0))
    a = check_conditional_invariance(wave(S), fam)
    b = check_conditional_invariance_alt(wave(S), fam)
    assert a.verdict == b.verdict == "not_invariant"
    assert a.witness is not None


def test_p3_family_invariant(S):
    x = S.variables
    fam = shift_family(S, tuple(-x[a] / x[0] for a in (1, 2, 3)))
    assert check_conditional_invariance(wave(S), fam).invariant
    assert check_conditional_invariance_alt(wave(S), fam).invariant


def test_lambda_zero_is_trivially_invariant():
    S = JetSpace(["x1", "x2"], order=2)
    x1 = S.variables[0]
    fam = OperatorFamily((op(S, {x1: 1}),))
    pde = PDE(S.jet(1, 1) + S.jet(1), S)
    assert check_conditional_invariance_alt(pde, fam).verdict == "invariant"
    assert check_conditional_invariance(pde, fam).verdict == "invariant"


def test_non_involutive_family_refused(S):
    x = S.variables
    fam = OperatorFamily((op(S, {1: 1}), op(S, {2: x[1], 3: 1})))
    res = check_conditional_invariance(wave(S), fam)
    assert res.verdict == "unknown" and "involutive" in res.reason


def test_canonical_coordinates_family():
    # {d/dy}: both checks reduce to d Lambda / dy = 0
    S = JetSpace(["y", "z"], order=2)
    y, z = S.variables
    fam = OperatorFamily((op(S, {y: 1}),))
    good = PDE(S.jet(z, z) - S.u * z, S)
    bad = PDE(S.jet(z, z) - S.u * y, S)
    assert check_conditional_invariance(good, fam).verdict == "invariant"
    assert check_conditional_invariance_alt(good, fam).verdict == "invariant"
    assert check_conditional_invariance(bad, fam).verdict == "not_invariant"
    assert check_conditional_invariance_alt(bad, fam).verdict == "not_invariant"


def test_verdict_stable_under_lambda(S):
    x = S.variables
    fam = shift_family(S, tuple(-x[a] / x[0] for a in (1, 2, 3)))
    L = sp.Matrix([[1, 2, 0], [0, 1, x[1]], [1, 0, 3]])
    assert check_conditional_invariance(wave(S), transform_family(fam, L)).invariant


def test_wave_family_helper_consistent(S):
    x = S.variables
    fam = wave_family_from_omega(x[0] + x[1], S)
    assert check_conditional_invariance(wave(S), fam).verdict == "invariant"
