"""Operator families: commutators, rank and involutivity tests, equivalence
transformations, canonical form and the family attached to an ansatz."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from sympy.polys.matrices import DomainMatrix
from sympy.polys.matrices.exceptions import DMNotAField

from .expr import DeclarationError, differentiate, is_zero, normalize, sample_values
from .jet import JetSpace, VectorFieldOp

__all__ = [
    "CanonicalForm",
    "DependentCoordinates",
    "InvolutivityResult",
    "LambdaTransform",
    "MuCoefficients",
    "OperatorFamily",
    "RankResult",
    "SingularTransformError",
    "UnsupportedAnsatz",
    "canonicalize_family",
    "check_involutive",
    "check_rank",
    "commutator",
    "default_theta",
    "family_from_ansatz",
    "resolve_in_span",
    "transform_family",
]


class SingularTransformError(ValueError):
    pass


class DependentCoordinates(ValueError):
    def __init__(self, msg, sample=None):
        super().__init__(msg)
        self.sample = sample


class UnsupportedAnsatz(ValueError):
    pass


class NoPivotError(ValueError):
    pass


@dataclass(frozen=True)
class OperatorFamily:
    ops: tuple
    names: tuple = ()

    def __post_init__(self):
        ops = tuple(self.ops)
        object.__setattr__(self, "ops", ops)
        if not ops:
            raise DeclarationError("a family needs at least one operator")
        sp0 = ops[0].space
        for q in ops[1:]:
            if q.space is not sp0 and (q.space.variables != sp0.variables or q.space.u != sp0.u):
                raise DeclarationError("family members live on different spaces")
        if len(ops) >= sp0.n:
            raise DeclarationError(f"family of {len(ops)} operators needs more than {len(ops)} variables")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"Q{i + 1}" for i in range(len(ops))))

    @property
    def space(self) -> JetSpace:
        return self.ops[0].space

    @property
    def m(self) -> int:
        return len(self.ops)

    def __len__(self):
        return len(self.ops)

    def __iter__(self):
        return iter(self.ops)

    def __getitem__(self, i):
        return self.ops[i]

    def xi_matrix(self) -> sp.Matrix:
        return sp.Matrix([list(q.xi) for q in self.ops])

    def eta_vector(self) -> sp.Matrix:
        return sp.Matrix([q.eta for q in self.ops])

    def __str__(self):
        return "\n".join(f"{nm} = {q}" for nm, q in zip(self.names, self.ops))


def commutator(Qa: VectorFieldOp, Qb: VectorFieldOp) -> VectorFieldOp:
    """``[Qa, Qb]`` with coefficients ``Qa(xi_b) - Qb(xi_a)``, normalized."""
    if Qa.space.variables != Qb.space.variables:
        raise DeclarationError("operators live on different spaces")
    xi = tuple(Qa(b) - Qb(a) for a, b in zip(Qa.xi, Qb.xi))
    return VectorFieldOp(xi, Qa(Qb.eta) - Qb(Qa.eta), Qa.space).normalized()


# ---------------------------------------------------------------------------
# rank


@dataclass
class RankResult:
    verdict: str  # holds | fails | unknown
    witnesses: list = field(default_factory=list)
    samples: int = 0
    skipped: int = 0
    seed: int = 0

    @property
    def holds(self):
        return self.verdict == "holds"


def _num_rank(rows):
    a = np.array(rows, dtype=float)
    scale = max(1.0, float(np.abs(a).max()) if a.size else 1.0)
    return int(np.linalg.matrix_rank(a, tol=1e-9 * scale * max(a.shape)))


def check_rank(fam: OperatorFamily, samples=None, seed=None) -> RankResult:
    ctx = fam.space.ctx
    seed = ctx.seed if seed is None else seed
    n, m = fam.space.n, fam.m
    entries = [c for q in fam.ops for c in q.coefficients()]
    rows, skipped = sample_values(entries, ctx, seed, samples)
    if not rows:
        return RankResult("unknown", [], 0, skipped, seed)
    witnesses, ok = [], True
    for pt, vals in rows:
        aug = [vals[a * (n + 1):(a + 1) * (n + 1)] for a in range(m)]
        r_xi = _num_rank([row[:n] for row in aug])
        r_aug = _num_rank(aug)
        if r_xi != m or r_aug != m:
            ok = False
            witnesses.append({"point": {str(k): str(v) for k, v in pt.items()}, "rank_xi": r_xi, "rank_aug": r_aug})
            break
    if ok:
        pt = rows[0][0]
        witnesses.append({"point": {str(k): str(v) for k, v in pt.items()}, "rank_xi": m, "rank_aug": m})
    return RankResult("holds" if ok else "fails", witnesses, len(rows), skipped, seed)


# ---------------------------------------------------------------------------
# involutivity


@dataclass
class MuCoefficients:
    m: int
    table: dict = field(default_factory=dict)  # (a, b, c) -> mu^c_ab

    def __getitem__(self, key):
        return self.table.get(key, sp.S.Zero)

    def nonzero_entries(self):
        return {k: v for k, v in self.table.items() if v != 0}

    def is_identically_zero(self) -> bool:
        return all(v == 0 for v in self.table.values())


@dataclass
class InvolutivityResult:
    verdict: str  # involutive | not_involutive | unknown
    mu: MuCoefficients | None = None
    witness: dict | None = None
    pivots: tuple | None = None
    reason: str = ""

    @property
    def involutive(self):
        return self.verdict == "involutive"


def _pivots(fam: OperatorFamily, ctx):
    X = fam.xi_matrix()
    for cols in itertools.combinations(range(fam.space.n), fam.m):
        minor = normalize(X[:, list(cols)].det(method="berkowitz"), ctx)
        if minor != 0 and (minor.is_number or is_zero(minor, ctx).nonzero):
            return cols
    return None


def _solve_block(block: sp.Matrix, rhs: sp.Matrix, ctx):
    """Solve ``block * x = rhs`` exactly and normalize each entry."""
    if block == sp.eye(block.rows):
        return [normalize(v, ctx) for v in rhs]
    sol = block.LUsolve(rhs)
    return [normalize(v, ctx) for v in sol]


def check_involutive(fam: OperatorFamily, numeric_ok: bool = False, check_rank_first: bool = True) -> InvolutivityResult:
    ctx = fam.space.ctx
    if check_rank_first:
        rk = check_rank(fam)
        if not rk.holds:
            return InvolutivityResult("unknown", reason=f"rank condition {rk.verdict}", witness=(rk.witnesses or [None])[0])
    piv = _pivots(fam, ctx)
    if piv is None:
        return InvolutivityResult("unknown", reason="no invertible xi minor found")
    m, n = fam.m, fam.space.n
    X = fam.xi_matrix()
    block = X[:, list(piv)].T  # rows: pivot columns, cols: operators
    mu = MuCoefficients(m)
    unknown = None
    for a, b in itertools.combinations(range(m), 2):
        C = commutator(fam[a], fam[b])
        coeffs = C.coefficients()
        sol = _solve_block(block, sp.Matrix([coeffs[i] for i in piv]), ctx)
        for c in range(m):
            mu.table[(a, b, c)] = sol[c]
            mu.table[(b, a, c)] = normalize(-sol[c], ctx)
        others = [i for i in range(n) if i not in piv] + [n]
        for i in others:
            comb = sum((sol[c] * fam[c].coefficients()[i] for c in range(m)), sp.S.Zero)
            res = is_zero(comb - coeffs[i], ctx)
            if res.nonzero:
                slot = str(fam.space.variables[i]) if i < n else str(fam.space.u)
                return InvolutivityResult("not_involutive", mu, {
                    "pair": (fam.names[a], fam.names[b]), "component": slot,
                    "residual": res.expr, "point": res.witness}, piv)
            if not res.vanishes(numeric_ok):
                unknown = {"pair": (fam.names[a], fam.names[b]), "residual": res.expr, "max_abs": res.max_abs}
    if unknown is not None:
        return InvolutivityResult("unknown", mu, unknown, piv, reason="residual undecided")
    return InvolutivityResult("involutive", mu, None, piv)


# ---------------------------------------------------------------------------
# equivalence transformations


@dataclass(frozen=True)
class LambdaTransform:
    matrix: sp.Matrix

    def __post_init__(self):
        object.__setattr__(self, "matrix", sp.ImmutableMatrix(self.matrix))

    @property
    def det(self):
        return self.matrix.det(method="berkowitz")

    @classmethod
    def identity(cls, m):
        return cls(sp.eye(m))


def transform_family(fam: OperatorFamily, lam) -> OperatorFamily:
    """``Q'_a = sum_b lambda_ab Q_b``; rejects a determinant not proved nonzero."""
    lam = lam if isinstance(lam, LambdaTransform) else LambdaTransform(sp.Matrix(lam))
    L = lam.matrix
    if L.shape != (fam.m, fam.m):
        raise SingularTransformError(f"lambda must be {fam.m}x{fam.m}")
    ctx = fam.space.ctx
    det = normalize(lam.det, ctx)
    if det == 0 or not (det.is_number or is_zero(det, ctx).nonzero):
        raise SingularTransformError(f"determinant {det} is not proved nonzero")
    ops = []
    for a in range(fam.m):
        xi = tuple(sum((L[a, b] * fam[b].xi[i] for b in range(fam.m)), sp.S.Zero) for i in range(fam.space.n))
        eta = sum((L[a, b] * fam[b].eta for b in range(fam.m)), sp.S.Zero)
        ops.append(VectorFieldOp(xi, eta, fam.space).normalized())
    return OperatorFamily(tuple(ops), fam.names)


@dataclass
class CanonicalForm:
    family: OperatorFamily
    transform: LambdaTransform
    pivots: tuple
    commutes: bool | None

    def __iter__(self):
        return iter((self.family, self.transform))


def canonicalize_family(fam: OperatorFamily) -> CanonicalForm:
    """Bring the xi matrix to an identity block on the pivot columns.

    A family that already carries an identity block is left unchanged.
    """
    ctx = fam.space.ctx
    X = fam.xi_matrix()
    m = fam.m
    for cols in itertools.combinations(range(fam.space.n), m):
        if X[:, list(cols)] == sp.eye(m):
            return CanonicalForm(fam, LambdaTransform.identity(m), cols, _commutes(fam))
    piv = _pivots(fam, ctx)
    if piv is None:
        raise NoPivotError("no m x m block of the xi matrix is proved invertible at sampled points")
    inv = _inverse(X[:, list(piv)])
    lam = LambdaTransform(inv.applyfunc(lambda v: normalize(v, ctx)))
    out = transform_family(fam, lam)
    return CanonicalForm(out, lam, piv, _commutes(out))


def _inverse(M):
    # exact inverse over the rational function field; LU on sympy expressions swells badly
    try:
        return DomainMatrix.from_Matrix(M).to_field().inv().to_Matrix()
    except (DMNotAField, ValueError, NotImplementedError):
        return M.inv(method="LU")


def _commutes(fam: OperatorFamily):
    ctx = fam.space.ctx
    undecided = False
    for a, b in itertools.combinations(range(fam.m), 2):
        for c in commutator(fam[a], fam[b]).coefficients():
            if c == 0:
                continue
            zt = is_zero(c, ctx)
            if zt.nonzero:
                return False
            if not zt.zero:
                undecided = True
    return None if undecided else True


# ---------------------------------------------------------------------------
# family from an ansatz


def _jacobian(funcs, space: JetSpace):
    ctx = space.ctx
    cols = list(space.variables) + [space.u]
    return sp.Matrix([[differentiate(f, v, ctx) for v in cols] for f in funcs])


def _numeric_rank_check(J: sp.Matrix, ctx, samples=None, seed=None):
    rows, _ = sample_values(list(J), ctx, seed, samples)
    k = J.rows
    for pt, vals in rows:
        r = _num_rank([vals[i * J.cols:(i + 1) * J.cols] for i in range(k)])
        if r < min(J.shape):
            return r, {str(a): str(b) for a, b in pt.items()}
    return min(J.shape), None


def default_theta(ansatz, m=None):
    """First set of ``m`` coordinates (declared order) completing the integrals to a chart."""
    space = ansatz.space
    m = space.n - len(ansatz.omegas) if m is None else m
    for cols in itertools.combinations(space.variables, m):
        J = _jacobian(list(cols) + list(ansatz.omegas) + [ansatz.omega], space)
        r, _ = _numeric_rank_check(J, space.ctx, samples=8)
        if r == space.n + 1:
            return list(cols)
    raise DependentCoordinates("no coordinate subset completes the integrals to a chart")


def family_from_ansatz(ansatz, theta=None) -> OperatorFamily:
    """Operators ``d/dtheta_a`` in the chart (theta, omega_j, omega), written in (x, u)."""
    space = ansatz.space
    ctx = space.ctx
    for w in ansatz.omegas:
        if sp.sympify(w).has(space.u) or differentiate(w, space.u, ctx) != 0:
            raise UnsupportedAnsatz("only integrals omega_j free of u are supported here")
    if not is_zero(differentiate(ansatz.omega, space.u, ctx), ctx).nonzero:
        raise UnsupportedAnsatz("d omega/du is not proved nonzero")
    theta = default_theta(ansatz) if theta is None else [sp.sympify(t) for t in theta]
    m = len(theta)
    if m + len(ansatz.omegas) != space.n:
        raise DeclarationError(f"need {space.n - len(ansatz.omegas)} theta functions, got {m}")
    J = _jacobian(list(theta) + list(ansatz.omegas) + [ansatz.omega], space)
    r, sample = _numeric_rank_check(J, ctx)
    if sample is not None:
        raise DependentCoordinates(f"Jacobian of the coordinate change has rank {r} < {space.n + 1}", sample)
    ops = []
    for a in range(m):
        rhs = sp.Matrix([1 if i == a else 0 for i in range(space.n + 1)])
        sol = J.LUsolve(rhs)
        sol = [normalize(v, ctx) for v in sol]
        ops.append(VectorFieldOp(tuple(sol[:-1]), sol[-1], space))
    return OperatorFamily(tuple(ops))


# ---------------------------------------------------------------------------
# span membership with constant coefficients


def resolve_in_span(op: VectorFieldOp, basis, ctx=None):
    """Constants ``c`` with ``op = sum c_k basis_k``, or None.

    Coefficients must be polynomial in the variables and ``u``.
    """
    space = op.space
    cs = sp.symbols(f"_c0:{len(basis)}")
    gens = list(space.variables) + [space.u]
    eqs = []
    for slot in range(space.n + 1):
        expr = sum((c * b.coefficients()[slot] for c, b in zip(cs, basis)), sp.S.Zero) - op.coefficients()[slot]
        expr = sp.expand(expr)
        if expr == 0:
            continue
        try:
            poly = sp.Poly(expr, *gens)
        except sp.PolynomialError:
            return None
        eqs.extend(poly.coeffs())
    if not eqs:
        return [sp.S.Zero] * len(basis)
    sol = sp.linsolve(eqs, cs)
    if not sol:
        return None
    (vals,) = tuple(sol)
    return [v.subs({c: 0 for c in cs}) for v in vals]
