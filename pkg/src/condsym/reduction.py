"""Ansatz construction, substitution into a PDE, the factorization test for
reduction, restriction to the invariant-surface manifold and the two
conditional-invariance checks."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import mpmath
import numpy as np
import sympy as sp
from scipy.optimize import brentq

from .expr import (
    Context,
    DeclarationError,
    OpaqueFunction,
    SingularEvaluation,
    _Evaluator,
    differentiate,
    is_zero,
    normalize,
    numeric_sampler,
    opaque,
    sample_values,
)
from .families import (
    OperatorFamily,
    UnsupportedAnsatz,
    _jacobian,
    _num_rank,
    canonicalize_family,
    check_involutive,
)
from .jet import JetSpace, OrderError, apply_op, prolong, total_derivative

__all__ = [
    "Ansatz",
    "InvarianceResult",
    "InvariantSurfaceSystem",
    "ManifoldRestriction",
    "NotReduced",
    "PDE",
    "ReducedEquation",
    "SubstitutedEquation",
    "UnsupportedAnsatz",
    "build_ansatz",
    "check_conditional_invariance",
    "check_conditional_invariance_alt",
    "factor_reduction",
    "invariant_surface_system",
    "restrict_to_manifold",
    "substitute_ansatz",
    "verify_first_integrals",
]

MAX_RANK_ASSUMPTION = "Lambda has maximal rank on L^M or vanishes identically (not verified)"


@dataclass(frozen=True)
class PDE:
    L: sp.Expr
    space: JetSpace
    name: str = "pde"

    def __post_init__(self):
        object.__setattr__(self, "L", sp.sympify(self.L))
        if self.space.order_of(self.L) < 1:
            raise DeclarationError("a PDE must depend on at least one derivative")

    @property
    def order(self) -> int:
        return self.space.order_of(self.L)


# ---------------------------------------------------------------------------
# invariant surface system and first integrals


@dataclass(frozen=True)
class InvariantSurfaceSystem:
    Y: tuple
    family: OperatorFamily


def invariant_surface_system(fam: OperatorFamily) -> InvariantSurfaceSystem:
    S = fam.space
    if S.order < 1:
        raise OrderError("need jet order >= 1")
    ys = []
    for q in fam:
        y = sum((c * S.coord((i,)) for i, c in enumerate(q.xi) if c != 0), sp.S.Zero) - q.eta
        ys.append(sp.expand(y))
    return InvariantSurfaceSystem(tuple(ys), fam)


@dataclass
class IntegralsReport:
    annihilated: dict  # (candidate index, op index) -> bool | None
    rank: int
    independent: bool
    complete: bool | None
    failures: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.failures and self.independent


def verify_first_integrals(fam: OperatorFamily, candidates, certify_complete: bool = False) -> IntegralsReport:
    S = fam.space
    ctx = S.ctx
    cands = [sp.sympify(c) for c in candidates]
    table, failures = {}, []
    for k, w in enumerate(cands):
        for a, q in enumerate(fam):
            zt = is_zero(q(w), ctx)
            table[(k, a)] = True if zt.zero else (False if zt.nonzero else None)
            if not zt.zero:
                failures.append({"candidate": str(w), "operator": fam.names[a],
                                 "value": str(zt.expr), "verdict": zt.verdict.value})
    rank = 0
    if cands:
        J = _jacobian(cands, S)
        rows, _ = sample_values(list(J), ctx, count=8)
        if rows:
            rank = min(_num_rank([vals[i * J.cols:(i + 1) * J.cols] for i in range(J.rows)]) for _, vals in rows)
    independent = rank == len(cands)
    complete = None
    if certify_complete:
        complete = independent and not failures and len(cands) == S.n + 1 - fam.m
    return IntegralsReport(table, rank, independent, complete, failures)


# ---------------------------------------------------------------------------
# ansatz


def _phi_space(names, phi, order):
    labels = tuple(str(j + 1) for j in range(len(names)))
    return JetSpace(names, phi, order, ctx=Context(variables=names), labels=labels)


@dataclass(frozen=True)
class Ansatz:
    """``omega(x, u) = phi(omega_1, ..., omega_k)`` with an optional solved form.

    ``explicit`` is ``f`` in ``u = f(x, phi(omega_1..omega_k))``, written with
    the opaque application of ``phi``.
    """

    space: JetSpace
    omega: sp.Expr
    omegas: tuple
    phi: str = "phi"
    explicit: sp.Expr | None = None
    reduced: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "omega", sp.sympify(self.omega))
        object.__setattr__(self, "omegas", tuple(sp.sympify(w) for w in self.omegas))
        if self.explicit is not None:
            object.__setattr__(self, "explicit", sp.sympify(self.explicit))
        if not self.reduced:
            object.__setattr__(self, "reduced", self._default_reduced())

    def _default_reduced(self):
        taken = set(self.space.variables) | {self.space.u}
        out = []
        k = len(self.omegas)
        for j, w in enumerate(self.omegas):
            if w.is_Symbol and w not in taken:
                out.append(w)
            elif k == 1 and sp.Symbol("w") not in taken and not _mentions(self.omegas, "w"):
                out.append(sp.Symbol("w"))
            else:
                out.append(sp.Symbol(f"z{j + 1}"))
        return tuple(out)

    @property
    def phi_func(self):
        return opaque(self.phi, len(self.omegas))

    def phi_application(self):
        return self.phi_func(*self.omegas)

    @classmethod
    def from_explicit(cls, space: JetSpace, rhs, omegas, phi="phi", reduced=()):
        """Ansatz from ``u = rhs`` where ``rhs`` contains ``phi(omegas)``."""
        omegas = tuple(sp.sympify(w) for w in omegas)
        rhs = sp.sympify(rhs)
        app = opaque(phi, len(omegas))(*omegas)
        if not rhs.has(app):
            raise UnsupportedAnsatz(f"right-hand side does not contain {app}")
        P = sp.Dummy("P")
        sols = sp.solve(sp.Eq(space.u, rhs.xreplace({app: P})), P)
        if len(sols) != 1:
            raise UnsupportedAnsatz("cannot solve the ansatz for phi")
        return cls(space, normalize(sols[0], space.ctx), omegas, phi, rhs, tuple(reduced))

    def check(self):
        """Raise unless d omega/du is nonzero and the integrals are independent."""
        S = self.space
        ctx = S.ctx
        if not is_zero(differentiate(self.omega, S.u, ctx), ctx).nonzero:
            raise UnsupportedAnsatz("d omega/du is not proved nonzero")
        J = _jacobian([self.omega, *self.omegas], S)
        rows, _ = sample_values(list(J), ctx, count=8)
        for _, vals in rows:
            if _num_rank([vals[i * J.cols:(i + 1) * J.cols] for i in range(J.rows)]) < J.rows:
                raise UnsupportedAnsatz("omega, omega_j are functionally dependent at a sampled point")
        return self

    def __str__(self):
        from .printing import to_text

        head = f"u = {to_text(self.explicit)}" if self.explicit is not None else \
            f"{to_text(self.omega)} = {self.phi}({', '.join(to_text(w) for w in self.omegas)})"
        return head


def _mentions(exprs, name):
    return any(s.name == name for e in exprs for s in e.free_symbols)


def build_ansatz(fam: OperatorFamily, integrals, phi="phi") -> Ansatz:
    S = fam.space
    ctx = S.ctx
    ints = [sp.sympify(w) for w in integrals]
    dep = [w for w in ints if is_zero(differentiate(w, S.u, ctx), ctx).nonzero]
    if not dep:
        raise UnsupportedAnsatz("no integral depends on u, the ansatz cannot be solved for u")
    omega = dep[0]
    rest = [w for w in ints if w is not omega]
    for w in rest:
        if w.has(S.u):
            raise UnsupportedAnsatz(f"integral {w} depends on u as well")
    app = opaque(phi, len(rest))(*rest)
    explicit = None
    alpha = normalize(differentiate(omega, S.u, ctx), ctx)
    if not alpha.has(S.u):
        beta = sp.expand(omega - alpha * S.u)
        if not beta.has(S.u):
            explicit = normalize((app - beta) / alpha, ctx)
    return Ansatz(S, omega, tuple(rest), phi, explicit)


# ---------------------------------------------------------------------------
# substitution


@dataclass
class SubstitutedEquation:
    """``W'``: the PDE after inserting the ansatz.

    ``expr`` is over x (and defined symbols), the phi-jet symbols of
    ``phi_space`` and constants.  ``chart`` holds, for each theta_a, the
    coefficients of d/dtheta_a in the chart (theta, omega_j) of x-space.
    """

    expr: sp.Expr
    ansatz: Ansatz
    theta: tuple
    chart: tuple
    phi_space: JetSpace
    pde: PDE | None = None


def _chart_fields(ansatz: Ansatz, theta):
    S = ansatz.space
    ctx = S.ctx
    funcs = list(theta) + list(ansatz.omegas)
    J = sp.Matrix([[differentiate(f, v, ctx) for v in S.variables] for f in funcs])
    out = []
    for a in range(len(theta)):
        rhs = sp.Matrix([1 if i == a else 0 for i in range(S.n)])
        out.append(tuple(normalize(v, ctx) for v in J.LUsolve(rhs)))
    return tuple(out)


def _default_theta_x(ansatz: Ansatz):
    S = ansatz.space
    m = S.n - len(ansatz.omegas)
    for cols in itertools.combinations(S.variables, m):
        J = sp.Matrix([[differentiate(f, v, S.ctx) for v in S.variables] for f in list(cols) + list(ansatz.omegas)])
        rows, _ = sample_values(list(J), S.ctx, count=6)
        if rows and all(_num_rank([vals[i * S.n:(i + 1) * S.n] for i in range(S.n)]) == S.n for _, vals in rows):
            return tuple(cols)
    raise UnsupportedAnsatz("no coordinate subset completes omega_j to a chart of x-space")


def substitute_ansatz(pde: PDE, ansatz: Ansatz, theta=None) -> SubstitutedEquation:
    if ansatz.explicit is None:
        raise UnsupportedAnsatz("substitution needs the explicit form u = f(x, phi(...))")
    S = pde.space
    ctx = S.ctx
    r = pde.order
    for w in ansatz.omegas:
        if differentiate(w, S.u, ctx) != 0:
            raise UnsupportedAnsatz("integrals omega_j must not depend on u")
    f = ansatz.explicit
    if f.has(S.u):
        raise UnsupportedAnsatz("explicit form must not contain u")
    # u_J by repeated differentiation of f
    vals = {(): f}
    for k in range(1, r + 1):
        for J in itertools.combinations_with_replacement(range(S.n), k):
            vals[J] = differentiate(vals[J[:-1]], S.variables[J[-1]], ctx)
    bind = {S.u: f}
    for J, v in vals.items():
        if J and S.coord(J) in pde.L.free_symbols:
            bind[S.coord(J)] = v
    W = pde.L.xreplace(bind)
    phs = _phi_space(ansatz.reduced, ansatz.phi, r)
    W = _phi_to_jets(W, ansatz, phs)
    W = normalize(W, ctx)
    theta = _default_theta_x(ansatz) if theta is None else tuple(sp.sympify(t) for t in theta)
    return SubstitutedEquation(W, ansatz, theta, _chart_fields(ansatz, theta), phs, pde)


def _phi_to_jets(e, ansatz, phs):
    name = ansatz.phi
    omegas = ansatz.omegas

    def repl(node):
        if tuple(node.args) != omegas:
            raise UnsupportedAnsatz(f"{name} applied to unexpected arguments {node.args}")
        J = tuple(j for j, o in enumerate(node.orders) for _ in range(o))
        return phs.coord(J)

    return e.replace(lambda n: isinstance(n, OpaqueFunction) and n.fname == name, repl)


# ---------------------------------------------------------------------------
# factorization test


@dataclass
class ReducedEquation:
    Ltilde: sp.Expr
    H: sp.Expr
    variables: tuple
    phi_space: JetSpace
    monomials: tuple = ()
    coefficients: tuple = ()
    degenerate: bool = False
    mixed: bool = False
    notes: tuple = ()

    reduces = True

    def __str__(self):
        from .printing import to_text

        return f"{to_text(self.Ltilde)} = 0"


@dataclass
class NotReduced:
    witness: dict
    monomials: tuple = ()
    coefficients: tuple = ()
    reason: str = ""

    reduces = False


def _split_term(t, jets):
    xpart, ppart = [], []
    for fac in sp.Mul.make_args(t):
        fs = fac.free_symbols
        has_phi = bool(fs & jets)
        if has_phi and fs - jets:
            return None
        (ppart if has_phi else xpart).append(fac)
    return sp.Mul(*xpart), sp.Mul(*ppart)


def _mono_key(mono, phs: JetSpace):
    jets = [phs.index_of(s) for s in mono.free_symbols if phs.index_of(s) is not None]
    orders = sorted(((len(J), J) for J in jets if len(J) > 0), reverse=True)
    from .printing import to_text

    # higher derivatives first; monomials with only phi itself last
    return (0 if orders else 1, [(-o, J) for o, J in orders], to_text(mono))


def _collect(W, phs: JetSpace):
    jets = {phs.u} | {s for _, s in phs.coordinates()}
    num, den = sp.fraction(sp.together(W))
    if den.free_symbols & jets:
        return None, {"reason": "denominator depends on phi", "term": str(den)}
    groups = {}
    for t in sp.Add.make_args(sp.expand(num)):
        split = _split_term(t, jets)
        if split is None:
            return None, {"reason": "term mixes phi-jets with x", "term": str(t)}
        c, mono = split
        groups[mono] = groups.get(mono, sp.S.Zero) + c
    return {m: c / den for m, c in groups.items()}, None


def _theta_derivative(g, field_, space):
    ctx = space.ctx
    return sum((c * differentiate(g, v, ctx) for c, v in zip(field_, space.variables) if c != 0), sp.S.Zero)


def factor_reduction(W, ansatz: Ansatz | None = None, theta=None):
    """Decide ``W' = H * Ltilde`` with ``Ltilde`` free of theta.

    ``W`` is a :class:`SubstitutedEquation` (or a bare expression together
    with ``ansatz``).  Returns :class:`ReducedEquation` or :class:`NotReduced`.
    """
    if not isinstance(W, SubstitutedEquation):
        if ansatz is None:
            raise DeclarationError("a bare expression needs its ansatz")
        th = _default_theta_x(ansatz) if theta is None else tuple(theta)
        W = SubstitutedEquation(sp.sympify(W), ansatz, th, _chart_fields(ansatz, th),
                                _phi_space(ansatz.reduced, ansatz.phi, 2))
    ans, phs = W.ansatz, W.phi_space
    S = ans.space
    ctx = S.ctx
    groups, err = _collect(normalize(W.expr, ctx), phs)
    if groups is None:
        return NotReduced(err, reason="W' is not polynomial in the phi-jets; supply a monomial basis")
    coeffs = {}
    for mono, c in groups.items():
        c = normalize(c, ctx)
        if c != 0:
            coeffs[mono] = c
    if not coeffs:
        return ReducedEquation(sp.S.Zero, sp.S.One, ans.reduced, phs, degenerate=True, notes=("W' vanishes identically",))
    order = sorted(coeffs, key=lambda m_: _mono_key(m_, phs))
    lead = None
    for mono in order:
        zt = is_zero(coeffs[mono], ctx)
        if zt.nonzero:
            lead = mono
            break
    if lead is None:
        return NotReduced({"reason": "no coefficient is proved nonzero"}, tuple(order), tuple(coeffs[m_] for m_ in order))
    H = coeffs[lead]
    undecided = None
    for mono in order:
        if mono == lead:
            continue
        c = coeffs[mono]
        for a, fld in enumerate(W.chart):
            test = _theta_derivative(c, fld, S) * H - c * _theta_derivative(H, fld, S)
            zt = is_zero(test, ctx)
            if zt.nonzero:
                return NotReduced({
                    "monomial": mono, "leading": lead, "ratio": normalize(c / H, ctx),
                    "theta": W.theta[a], "point": zt.witness,
                    "coefficients": {str(lead): H, str(mono): c},
                }, tuple(order), tuple(coeffs[m_] for m_ in order), reason="coefficient ratio depends on theta")
            if not zt.zero and undecided is None:
                undecided = {"monomial": mono, "theta": W.theta[a], "max_abs": zt.max_abs}
    if undecided is not None:
        return NotReduced(undecided, tuple(order), tuple(coeffs[m_] for m_ in order), reason="undecided")
    mixed, terms, notes = False, [], []
    for mono in order:
        ratio = normalize(coeffs[mono] / H, ctx)
        red = _in_reduced_vars(ratio, ans)
        if red is None:
            mixed = True
            red = ratio
        terms.append(red * mono)
    if mixed:
        notes.append("some coefficients kept in mixed form")
    Lt = sp.Add(*terms)
    return ReducedEquation(Lt, H, ans.reduced, phs, tuple(order),
                           tuple(coeffs[m_] for m_ in order), mixed=mixed, notes=tuple(notes))


def _in_reduced_vars(g, ans: Ansatz):
    """Rewrite a theta-free function of x as a function of the reduced variables."""
    S = ans.space
    ctx = S.ctx
    zs = ans.reduced
    xs = (set(S.variables) | set(ctx.definitions)) - set(zs)
    if not (g.free_symbols & xs):
        return g
    k = len(zs)
    if k == 0:
        return None
    rels = []
    for w, z in zip(ans.omegas, zs):
        d = ctx.definitions.get(w) if w.is_Symbol else None
        if d is not None:
            if d.poly_degree() is None:
                return None
            rels.append((w, d.relation, z))
        else:
            rels.append((None, w, z))
    tvars = sp.symbols(f"_t0:{k}")
    bases = [dict.fromkeys(S.variables, 0)]
    bases += [{v: sp.Integer(c) for v, c in zip(S.variables, combo)} for combo in ([1] * S.n, [0, 1] * S.n)]
    for axes in itertools.combinations(range(S.n), k):
        for base in bases:
            pt = dict(base)
            for ax, t in zip(axes, tvars):
                pt[S.variables[ax]] = t
            eqs = []
            for w, rel, z in rels:
                e = rel.xreplace(pt)
                eqs.append(e.xreplace({w: z}) if w is not None else e - z)
            try:
                sols = sp.solve(eqs, tvars, dict=True)
            except (NotImplementedError, sp.PolynomialError):
                continue
            for sol in sols:
                if len(sol) != k or any(v.has(sp.I) or _has_radical(v) for v in sol.values()):
                    continue
                full = {v: sp.sympify(pt[v]).xreplace(sol) for v in S.variables}
                sub = {w: z for w, _, z in rels if w is not None}
                val = g.xreplace(sub).xreplace(full)
                try:
                    val = sp.cancel(val)
                except sp.PolynomialError:
                    continue
                if val.has(sp.nan, sp.zoo) or val.free_symbols & xs:
                    continue
                back = {z: (w if w is not None else rel) for w, rel, z in rels}
                if is_zero(g - val.xreplace(back), ctx).vanishes(numeric_ok=True):
                    return val
    return None


def _has_radical(v):
    return any(p.exp.is_Rational and not p.exp.is_Integer for p in v.atoms(sp.Pow))


# ---------------------------------------------------------------------------
# restriction to the manifold M


@dataclass
class ManifoldRestriction:
    pde: PDE
    family: OperatorFamily  # canonical form
    pivots: tuple
    table: dict  # eliminated jet symbol -> expression in parametric jets
    Lam: sp.Expr
    flags: tuple = ()

    def restrict(self, e):
        """Replace every eliminated coordinate in ``e``."""
        e = sp.sympify(e)
        sub = {s: v for s, v in self.table.items() if s in e.free_symbols}
        return e.xreplace(sub) if sub else e

    @property
    def parametric(self):
        S = self.pde.space
        return [s for J, s in S.coordinates() if not set(J) & set(self.pivots)]


def restrict_to_manifold(pde: PDE, fam: OperatorFamily) -> ManifoldRestriction:
    S = pde.space
    ctx = S.ctx
    r = pde.order
    canon = canonicalize_family(fam)
    cf, piv = canon.family, canon.pivots
    first = {}
    for a, p in enumerate(piv):
        q = cf[a]
        rhs = q.eta - sum((q.xi[j] * S.coord((j,)) for j in range(S.n) if j not in piv), sp.S.Zero)
        first[p] = normalize(rhs, ctx)
    memo = {}

    def elim(J):
        if J in memo:
            return memo[J]
        pj = [i for i in J if i in piv]
        if not pj:
            return S.coord(J)
        p = pj[0]
        rest = list(J)
        rest.remove(p)
        e = first[p]
        for i in rest:
            e = total_derivative(e, S.variables[i], S)
            e = reduce_(e)
        memo[J] = normalize(e, ctx)
        return memo[J]

    def reduce_(e):
        sub = {}
        for s in S.jet_symbols(e):
            J = S.index_of(s)
            if set(J) & set(piv):
                sub[s] = elim(J)
        return e.xreplace(sub) if sub else e

    table = {}
    for J, s in S.coordinates(r):
        if set(J) & set(piv):
            table[s] = elim(J)
    Lam = normalize(pde.L.xreplace({s: v for s, v in table.items() if s in pde.L.free_symbols}), ctx)
    flags = []
    if not S.jet_symbols(Lam):
        flags.append("Lambda has no derivative coordinates; L^M may be empty")
    return ManifoldRestriction(pde, cf, tuple(piv), table, Lam, tuple(flags))


# ---------------------------------------------------------------------------
# conditional invariance


@dataclass
class InvarianceResult:
    verdict: str  # invariant | not_invariant | empty_intersection | unknown
    residuals: dict = field(default_factory=dict)
    witness: dict | None = None
    method: str = "symbolic"
    seed: int = 0
    leading: str | None = None
    assumptions: tuple = (MAX_RANK_ASSUMPTION,)
    reason: str = ""

    @property
    def invariant(self):
        return self.verdict in ("invariant", "empty_intersection")


def _leading(Lam, R: ManifoldRestriction):
    """Parametric jet to solve ``Lambda = 0`` for, with its coefficient."""
    S = R.pde.space
    ctx = S.ctx
    jets = [s for s in S.jet_symbols(Lam)]
    jets.sort(key=lambda s: (-len(S.index_of(s)), S.index_of(s)))
    best = None
    for s in jets:
        c = normalize(sp.diff(Lam, s), ctx)
        if c.has(s):
            continue
        if c.is_number and c != 0:
            return s, c
        if best is None and c != 0 and is_zero(c, ctx).nonzero:
            best = (s, c)
    return best if best else (None, None)


def _precheck(fam):
    inv = check_involutive(fam)
    if inv.verdict != "involutive":
        return f"family is not known to be involutive ({inv.verdict}{': ' + inv.reason if inv.reason else ''})"
    return None


def _decide(residuals, R: ManifoldRestriction, seed, samples):
    """Impose ``Lambda = 0`` on the restricted residuals and decide."""
    S = R.pde.space
    ctx = S.ctx
    Lam = R.Lam
    out = {}
    pending = {}
    for name, E in residuals.items():
        E = normalize(E, ctx)
        out[name] = E
        if E != 0:
            pending[name] = E
    if not pending:
        return InvarianceResult("invariant", out, seed=seed)
    if Lam == 0:
        for name, E in pending.items():
            zt = is_zero(E, ctx, seed=seed)
            if zt.nonzero:
                return InvarianceResult("not_invariant", out, {"operator": name, "residual": E, "point": zt.witness}, seed=seed)
        return InvarianceResult("unknown", out, seed=seed, reason="residual undecided on M")
    s, c = _leading(Lam, R)
    undecided = {}
    if s is not None:
        sol = normalize(s - Lam / c, ctx)
        for name, E in pending.items():
            E2 = normalize(E.xreplace({s: sol}), ctx)
            out[name] = E2
            zt = is_zero(E2, ctx, seed=seed)
            if zt.nonzero:
                return InvarianceResult("not_invariant", out, {"operator": name, "residual": E2, "point": zt.witness},
                                        seed=seed, leading=str(s))
            if not zt.zero:
                undecided[name] = E2
        if not undecided:
            return InvarianceResult("invariant", out, seed=seed, leading=str(s))
        pending = undecided
    return _numeric_on_surface(pending, Lam, R, out, seed, samples, str(s) if s is not None else None)


def _numeric_on_surface(pending, Lam, R, out, seed, samples, leading):
    S = R.pde.space
    ctx = S.ctx
    jets = S.jet_symbols(Lam)
    target = jets[-1] if jets else (S.u if Lam.has(S.u) else None)
    if target is None:
        zt = is_zero(Lam, ctx, seed=seed)
        if zt.nonzero:
            return InvarianceResult("empty_intersection", out, {"Lambda": Lam}, "numeric", seed, leading,
                                    reason="Lambda is a nonzero function of x only")
        return InvarianceResult("unknown", out, seed=seed, method="numeric", leading=leading)
    bundle = sp.Tuple(Lam, *pending.values())
    names = list(pending)
    grid = np.linspace(-3.0, 3.0, 61)
    hits, tries, worst = 0, 0, {}
    budget = samples * ctx.resample_factor
    tol = 1e-8
    for pt, env, impl in numeric_sampler(bundle, ctx, seed):
        tries += 1
        if tries > budget or hits >= samples:
            break
        if env is None:
            continue
        with mpmath.workdps(30):
            def lam_at(v):
                env[target] = mpmath.mpf(v)
                return float(_Evaluator(dict(env), impl)(Lam))
            try:
                vals = [lam_at(v) for v in grid]
            except (SingularEvaluation, ZeroDivisionError, ValueError):
                continue
            root = None
            for i in range(len(grid) - 1):
                if vals[i] == 0.0:
                    root = grid[i]
                    break
                if math.copysign(1, vals[i]) != math.copysign(1, vals[i + 1]):
                    try:
                        root = brentq(lam_at, grid[i], grid[i + 1], xtol=1e-14)
                    except (ValueError, SingularEvaluation):
                        root = None
                    break
            if root is None:
                continue
            env[target] = mpmath.mpf(root)
            ev = _Evaluator(dict(env), impl)
            try:
                for name in names:
                    E = pending[name]
                    num, den = sp.fraction(E)
                    terms = [ev(t) for t in sp.Add.make_args(num)]
                    scale = max([mpmath.mpf(1)] + [abs(t) for t in terms])
                    rel = float(abs(mpmath.fsum(terms)) / scale)
                    worst[name] = max(worst.get(name, 0.0), rel)
                    if rel > tol:
                        return InvarianceResult("not_invariant", out, {
                            "operator": name, "residual": E, "relative": rel,
                            "point": {str(k): str(v) for k, v in pt.items()}, str(target): repr(root)},
                            "numeric", seed, leading)
            except (SingularEvaluation, ZeroDivisionError, ValueError):
                continue
        hits += 1
    if hits == 0:
        return InvarianceResult("empty_intersection", out, {"tries": tries}, "numeric", seed, leading,
                                reason="no point of L^M found by sampling")
    return InvarianceResult("invariant", out, {"points": hits, "max_relative": worst}, "numeric", seed, leading)


def check_conditional_invariance(pde: PDE, fam: OperatorFamily, samples: int | None = None,
                                 seed: int | None = None) -> InvarianceResult:
    """``pr Q_a L`` restricted to ``M`` and ``L = 0``."""
    ctx = pde.space.ctx
    seed = ctx.seed if seed is None else seed
    samples = ctx.samples if samples is None else samples
    why = _precheck(fam)
    if why:
        return InvarianceResult("unknown", seed=seed, reason=why)
    R = restrict_to_manifold(pde, fam)
    res = {}
    for name, q in zip(fam.names, fam):
        res[name] = R.restrict(apply_op(prolong(q, pde.order), pde.L))
    return _decide(res, R, seed, samples)


def check_conditional_invariance_alt(pde: PDE, fam: OperatorFamily, samples: int | None = None,
                                     seed: int | None = None) -> InvarianceResult:
    """``pr Q_a Lambda`` restricted to ``L ^ M`` where ``Lambda = L|_M``."""
    ctx = pde.space.ctx
    seed = ctx.seed if seed is None else seed
    samples = ctx.samples if samples is None else samples
    why = _precheck(fam)
    if why:
        return InvarianceResult("unknown", seed=seed, reason=why)
    R = restrict_to_manifold(pde, fam)
    if R.Lam == 0:
        return InvarianceResult("invariant", {n: sp.S.Zero for n in fam.names}, seed=seed, reason="Lambda vanishes")
    res = {}
    for name, q in zip(fam.names, fam):
        res[name] = R.restrict(apply_op(prolong(q, pde.order), R.Lam))
    return _decide(res, R, seed, samples)
