"""Expression kernel.

Expressions are plain sympy trees.  This module adds the pieces the rest of
the package needs on top of sympy:

* opaque functions whose derivatives stay symbolic (``F``, ``d[F;1]``, ...),
* a :class:`Context` holding declarations, implicitly defined symbols
  (``w**2 - R(x) = 0``) and sampling settings,
* differentiation that follows implicit definitions,
* a normal form that reduces by polynomial definitions,
* a tri-state zero test (structural first, then random numeric sampling),
* a numeric evaluator with explicit singularity reporting.
"""
from __future__ import annotations

import enum
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import mpmath
import sympy as sp

__all__ = [
    "CyclicBindingError",
    "Context",
    "DeclarationError",
    "Definition",
    "OpaqueFunction",
    "SingularEvaluation",
    "ZeroTest",
    "ZeroVerdict",
    "differentiate",
    "eval_numeric",
    "is_opaque",
    "is_zero",
    "normalize",
    "opaque",
    "substitute",
]


class DeclarationError(ValueError):
    """Raised for undeclared symbols or misuse of declared ones."""


class CyclicBindingError(ValueError):
    pass


class SingularEvaluation(ArithmeticError):
    """Numeric evaluation hit a pole or a branch point."""

    def __init__(self, term, reason="singular"):
        super().__init__(f"{reason}: {term}")
        self.term = term
        self.reason = reason


# ---------------------------------------------------------------------------
# opaque functions


class OpaqueFunction(sp.Function):
    """Application of an arbitrary smooth function, possibly differentiated.

    ``orders`` holds the derivative multiplicity per argument slot; an
    all-zero vector is the plain application.
    """

    fname: str = ""
    orders: tuple = ()

    @classmethod
    def eval(cls, *args):
        return None

    def fdiff(self, argindex=1):
        orders = list(self.orders)
        orders[argindex - 1] += 1
        return opaque(self.fname, orders=tuple(orders))(*self.args)


_OPAQUE_CACHE: dict = {}


def opaque(name: str, arity: int = 1, orders: Sequence[int] | None = None):
    """Return the (cached) sympy function class for ``name`` at ``orders``."""
    orders = tuple(int(o) for o in orders) if orders is not None else (0,) * arity
    if len(orders) < 1:
        raise DeclarationError(f"opaque function {name!r} needs arity >= 1")
    if any(o < 0 for o in orders):
        raise DeclarationError("derivative multiplicities must be nonnegative")
    key = (name, orders)
    cls = _OPAQUE_CACHE.get(key)
    if cls is None:
        cname = name if not any(orders) else f"{name}_d{'_'.join(map(str, orders))}"
        cls = type(cname, (OpaqueFunction,), {"fname": name, "orders": orders, "nargs": len(orders)})
        _OPAQUE_CACHE[key] = cls
    return cls


def is_opaque(e) -> bool:
    return isinstance(e, OpaqueFunction)


# ---------------------------------------------------------------------------
# context


@dataclass(frozen=True)
class Definition:
    """A symbol defined implicitly by ``relation == 0``.

    ``solver`` maps a dict of already-known numeric values to the value of the
    symbol; when absent, monic quadratics ``s**2 + p*s + q`` take the larger
    root and linear relations are solved directly.
    """

    symbol: sp.Symbol
    relation: sp.Expr
    solver: Callable | None = None

    def poly_degree(self):
        try:
            p = sp.Poly(self.relation, self.symbol)
        except sp.PolynomialError:
            return None
        lc = p.LC()
        if lc.free_symbols or lc == 0:
            return None
        return p.degree()


@dataclass
class Context:
    """Declarations plus sampling policy for one working session."""

    variables: tuple = ()
    constants: frozenset = frozenset()
    symbols: set = field(default_factory=set)
    functions: dict = field(default_factory=dict)
    definitions: dict = field(default_factory=dict)
    region: dict = field(default_factory=dict)
    default_region: tuple = (Fraction(-2), Fraction(2))
    samples: int = 32
    tol: float = 1e-9
    seed: int = 0
    resample_factor: int = 10

    def __post_init__(self):
        self.variables = tuple(_sym(v) for v in self.variables)
        self.constants = frozenset(_sym(c) for c in self.constants)
        self._dcache = {}

    # declarations -------------------------------------------------------
    def declare(self, *names):
        out = [_sym(n) for n in names]
        self.symbols.update(out)
        return out[0] if len(out) == 1 else out

    def constant(self, *names):
        out = [_sym(n) for n in names]
        self.constants = self.constants | frozenset(out)
        return out[0] if len(out) == 1 else out

    def function(self, name: str, arity: int = 1, closed_form: sp.Lambda | None = None):
        if arity < 1:
            raise DeclarationError(f"opaque function {name!r} needs arity >= 1")
        self.functions[name] = (arity, closed_form)
        return opaque(name, arity)

    def pin(self, name: str, closed_form: sp.Lambda):
        arity, _ = self.functions.get(name, (len(closed_form.variables), None))
        self.functions[name] = (arity, closed_form)
        self._dcache.clear()

    def define(self, symbol, relation, solver=None, region=None):
        s = _sym(symbol)
        self.definitions[s] = Definition(s, sp.sympify(relation), solver)
        if region is not None:
            self.region[s] = region
        self._dcache.clear()
        return s

    def undefine(self, symbol):
        self.definitions.pop(_sym(symbol), None)
        self._dcache.clear()

    def is_declared(self, s) -> bool:
        return s in self.variables or s in self.symbols or s in self.constants or s in self.definitions

    def copy(self) -> "Context":
        c = Context(
            variables=self.variables,
            constants=self.constants,
            symbols=set(self.symbols),
            functions=dict(self.functions),
            definitions=dict(self.definitions),
            region=dict(self.region),
            default_region=self.default_region,
            samples=self.samples,
            tol=self.tol,
            seed=self.seed,
            resample_factor=self.resample_factor,
        )
        return c

    # helpers --------------------------------------------------------------
    def defined_order(self):
        """Defined symbols, dependencies first."""
        done, out = set(), []

        def visit(s, stack=()):
            if s in done:
                return
            if s in stack:
                raise DeclarationError(f"cyclic definition through {s}")
            rel = self.definitions[s].relation
            for t in sorted(rel.free_symbols - {s}, key=str):
                if t in self.definitions:
                    visit(t, stack + (s,))
            done.add(s)
            out.append(s)

        for s in sorted(self.definitions, key=str):
            visit(s)
        return out

    def closed_forms(self):
        return {n: cf for n, (_, cf) in self.functions.items() if cf is not None}


def _sym(s):
    if isinstance(s, sp.Symbol):
        return s
    if isinstance(s, str):
        return sp.Symbol(s)
    raise DeclarationError(f"not a symbol: {s!r}")


# ---------------------------------------------------------------------------
# differentiation / substitution


def differentiate(e, v, ctx: Context | None = None):
    """Derivative of ``e`` with respect to ``v``.

    Symbols defined implicitly in ``ctx`` are differentiated through their
    defining relation.
    """
    e = sp.sympify(e)
    v = _sym(v)
    if ctx is not None:
        if v in ctx.constants:
            raise DeclarationError(f"{v} is a constant, not a differentiation variable")
        if not ctx.is_declared(v):
            raise DeclarationError(f"undeclared symbol {v}")
        if ctx.definitions:
            return _total(e, v, ctx)
    return sp.diff(e, v)


def _total(e, v, ctx, exclude=None):
    out = sp.diff(e, v)
    for s in sorted(e.free_symbols, key=str):
        if s == v or s == exclude or s not in ctx.definitions:
            continue
        ds = _dsym(s, v, ctx)
        if ds != 0:
            out += sp.diff(e, s) * ds
    return out


def _dsym(s, v, ctx):
    key = (s, v)
    if key not in ctx._dcache:
        rel = ctx.definitions[s].relation
        if v not in rel.free_symbols and not any(
            t in ctx.definitions for t in rel.free_symbols - {s}
        ):
            ctx._dcache[key] = sp.S.Zero
        else:
            num = _total(rel, v, ctx, exclude=s)
            ctx._dcache[key] = sp.S.Zero if num == 0 else -num / sp.diff(rel, s)
    return ctx._dcache[key]


def substitute(e, bindings: Mapping, ctx: Context | None = None, normal: bool = True):
    """Simultaneous replacement of symbols / opaque applications.

    Keys may be symbols, opaque applications such as ``F(u)``, or opaque
    function classes mapped to a ``sympy.Lambda`` (pinning a closed form).
    Cycles between two or more bindings are rejected; a value may mention its
    own key (``x -> x + 1``), which is replaced once.
    """
    e = sp.sympify(e)
    plain, funcs = {}, {}
    for k, val in bindings.items():
        if isinstance(k, type) and issubclass(k, sp.Function):
            funcs[k] = val
        else:
            plain[sp.sympify(k)] = sp.sympify(val)
    _check_acyclic(plain)
    out = e.xreplace(plain) if plain else e
    for f, lam in funcs.items():
        out = _pin_function(out, f, lam)
    return normalize(out, ctx) if normal else out


def _check_acyclic(bindings):
    keys = set(bindings)
    graph = {k: {a for a in keys if a != k and bindings[k].has(a)} for k in keys}
    state = {}

    def dfs(k):
        state[k] = 1
        for nxt in graph[k]:
            if state.get(nxt) == 1:
                raise CyclicBindingError(f"cyclic bindings through {k} and {nxt}")
            if nxt not in state:
                dfs(nxt)
        state[k] = 2

    for k in sorted(keys, key=str):
        if k not in state:
            dfs(k)


def _pin_function(e, fcls, lam):
    name = getattr(fcls, "fname", fcls.__name__)

    def repl(node):
        orders = node.orders
        body = lam.expr
        for var, o in zip(lam.variables, orders):
            if o:
                body = sp.diff(body, var, o)
        return body.xreplace(dict(zip(lam.variables, node.args)))

    return e.replace(lambda n: isinstance(n, OpaqueFunction) and n.fname == name, repl)


def pin_all(e, ctx: Context):
    for name, lam in ctx.closed_forms().items():
        e = _pin_function(e, opaque(name, len(lam.variables)), lam)
    return e


# ---------------------------------------------------------------------------
# normal form


def normalize(e, ctx: Context | None = None):
    """Canonical rational form, reduced modulo polynomial definitions.

    For every defined symbol whose relation is a polynomial with constant
    leading coefficient: linear relations are substituted, quadratic ones
    reduce the numerator to degree one and rationalize the denominator,
    higher degrees only reduce the numerator.
    """
    e = sp.sympify(e)
    if e.is_Number:
        return e
    e = sp.cancel(e)
    if ctx is None or not ctx.definitions:
        return e
    for s in reversed(ctx.defined_order()):
        if not e.has(s):
            continue
        d = ctx.definitions[s]
        deg = d.poly_degree()
        if deg is None:
            continue
        p = sp.Poly(d.relation, s).monic()
        if deg == 1:
            e = sp.cancel(e.xreplace({s: -p.nth(0)}))
            continue
        num, den = sp.fraction(e)
        num = _reduce_mod(num, p, s)
        den = _reduce_mod(den, p, s)
        if deg == 2 and den.has(s):
            d1 = den.coeff(s, 1)
            d0 = sp.expand(den - d1 * s)
            pc, qc = p.nth(1), p.nth(0)
            conj = (d0 - pc * d1) - d1 * s
            num = _reduce_mod(sp.expand(num * conj), p, s)
            den = sp.expand(d0**2 - pc * d0 * d1 + qc * d1**2)
        e = sp.cancel(num / den)
        if deg == 2:
            num, den = sp.fraction(e)
            e = sp.cancel(_reduce_mod(num, p, s) / den) if sp.degree(num, s) > 1 else e
    return e


def _reduce_mod(expr, p, s):
    expr = sp.expand(expr)
    if not expr.has(s):
        return expr
    try:
        q = sp.Poly(expr, s)
    except sp.PolynomialError:
        return expr
    if q.degree() < p.degree():
        return expr
    return sp.expand(q.rem(p).as_expr())


# ---------------------------------------------------------------------------
# numeric evaluation

_MP_FUNCS = {
    "sin": mpmath.sin, "cos": mpmath.cos, "tan": mpmath.tan, "exp": mpmath.exp,
    "sinh": mpmath.sinh, "cosh": mpmath.cosh, "tanh": mpmath.tanh,
    "atan": mpmath.atan, "asinh": mpmath.asinh,
}


class _Evaluator:
    def __init__(self, env, impl):
        self.env = env
        self.impl = impl
        self.memo = {}

    def __call__(self, e):
        try:
            return self.memo[e]
        except KeyError:
            pass
        except TypeError:
            return self._eval(e)
        val = self._eval(e)
        self.memo[e] = val
        return val

    def _eval(self, e):
        if e.is_Integer:
            return mpmath.mpf(int(e))
        if e.is_Rational:
            return mpmath.mpf(int(e.p)) / int(e.q)
        if e.is_Float:
            return mpmath.mpf(str(e))
        if e is sp.pi:
            return +mpmath.pi
        if e is sp.E:
            return mpmath.e
        if e.is_Symbol:
            try:
                return self.env[e]
            except KeyError:
                raise DeclarationError(f"unbound symbol {e}") from None
        if e.is_Add:
            return mpmath.fsum(self(a) for a in e.args)
        if e.is_Mul:
            out = mpmath.mpf(1)
            for a in e.args:
                out *= self(a)
            return out
        if e.is_Pow:
            base, ex = self(e.base), e.exp
            if ex.is_Integer:
                if base == 0 and ex < 0:
                    raise SingularEvaluation(e, "division by zero")
                return base ** int(ex)
            xv = self(ex)
            if base < 0:
                raise SingularEvaluation(e, "fractional power of a negative base")
            if base == 0 and xv <= 0:
                raise SingularEvaluation(e, "division by zero")
            return base**xv
        if isinstance(e, OpaqueFunction):
            args = [self(a) for a in e.args]
            return self.impl(e.fname, e.orders, args)
        if isinstance(e, sp.log):
            a = self(e.args[0])
            if a <= 0:
                raise SingularEvaluation(e, "log of nonpositive value")
            return mpmath.log(a)
        if isinstance(e, sp.Abs):
            return abs(self(e.args[0]))
        if isinstance(e, sp.Function):
            fn = _MP_FUNCS.get(type(e).__name__)
            if fn is not None:
                return fn(*[self(a) for a in e.args])
        raise DeclarationError(f"cannot evaluate node {e!r}")


def _impl_from_user(opaque_impls, closed):
    """Build an ``impl(name, orders, args)`` dispatcher."""
    compiled = {}

    def impl(name, orders, args):
        if opaque_impls and name in opaque_impls:
            spec = opaque_impls[name]
            if isinstance(spec, Mapping):
                fn = spec.get(orders)
            elif callable(spec):
                fn = spec if not any(orders) else None
            else:
                k = sum(orders)
                fn = spec[k] if len(orders) == 1 and k < len(spec) else None
            if fn is None:
                raise DeclarationError(f"no implementation for derivative {orders} of {name}")
            return mpmath.mpf(fn(*args))
        if name in closed:
            key = (name, orders)
            if key not in compiled:
                compiled[key] = _compile_closed(closed[name], orders)
            return compiled[key](*args)
        raise DeclarationError(f"opaque function {name} has no implementation")

    return impl


def _compile_closed(lam, orders):
    body = lam.expr
    for var, o in zip(lam.variables, orders):
        if o:
            body = sp.diff(body, var, o)
    variables = list(lam.variables)

    def fn(*args):
        return _Evaluator(dict(zip(variables, args)), _no_impl)(body)

    return fn


def _no_impl(name, orders, args):
    raise DeclarationError(f"opaque function {name} has no implementation")


def resolve_definitions(env, ctx: Context | None, impl, needed=None):
    """Extend ``env`` with numeric values of the defined symbols in ``needed`` (default all)."""
    if ctx is None:
        return env
    for s in ctx.defined_order():
        if s in env or (needed is not None and s not in needed):
            continue
        d = ctx.definitions[s]
        if not all(t in env for t in d.relation.free_symbols - {s}):
            continue
        env[s] = _solve_definition(d, env, impl)
    return env


def _solve_definition(d, env, impl):
    s = d.symbol
    if d.solver is not None:
        val = d.solver(env)
        if val is None:
            raise SingularEvaluation(s, "implicit relation has no admissible root")
        return mpmath.mpf(val)
    deg = d.poly_degree()
    if deg in (1, 2):
        p = sp.Poly(d.relation, s).monic()
        ev = _Evaluator(env, impl)
        if deg == 1:
            return -ev(p.nth(0))
        pc, qc = ev(p.nth(1)), ev(p.nth(0))
        disc = pc * pc / 4 - qc
        if disc <= 0:
            raise SingularEvaluation(s, "defining quadratic has no positive root")
        return -pc / 2 + mpmath.sqrt(disc)
    raise SingularEvaluation(s, "no numeric solver for implicit definition")


def eval_numeric(e, point: Mapping, opaque_impls: Mapping | None = None, ctx: Context | None = None,
                 dps: int = 30) -> float:
    """Evaluate ``e`` at ``point`` in floating point.

    ``opaque_impls`` maps a function name to a callable (value only), a list
    ``[f, f', f'', ...]`` (arity one) or a dict ``{orders: callable}``.
    Functions with a closed form registered in ``ctx`` need no entry.
    """
    e = sp.sympify(e)
    with mpmath.workdps(dps):
        impl = _impl_from_user(opaque_impls, ctx.closed_forms() if ctx else {})
        env = {_sym(k): mpmath.mpf(v) if not isinstance(v, Fraction) else mpmath.mpf(v.numerator) / v.denominator
               for k, v in point.items()}
        resolve_definitions(env, ctx, impl)
        return float(_Evaluator(env, impl)(e))


# ---------------------------------------------------------------------------
# zero testing


class ZeroVerdict(enum.Enum):
    PROVED_ZERO = "ProvedZero"
    PROVED_NONZERO = "ProvedNonzero"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class ZeroTest:
    verdict: ZeroVerdict
    seed: int
    samples: int = 0
    max_abs: float | None = None
    witness: dict | None = None
    expr: sp.Expr | None = None

    @property
    def zero(self) -> bool:
        return self.verdict is ZeroVerdict.PROVED_ZERO

    @property
    def nonzero(self) -> bool:
        return self.verdict is ZeroVerdict.PROVED_NONZERO

    def vanishes(self, numeric_ok: bool = False, tol: float = 1e-8) -> bool:
        """True if proved zero, or (when allowed) numerically below ``tol``."""
        if self.zero:
            return True
        return (numeric_ok and self.verdict is ZeroVerdict.UNKNOWN
                and self.max_abs is not None and self.samples > 0 and self.max_abs < tol)


def random_pins(names_arities: Iterable, rng: random.Random):
    """Random low-degree polynomial closed forms for opaque functions."""
    pins = {}
    for name, arity in sorted(names_arities):
        slots = sp.symbols(f"_s0:{arity}")
        if arity == 1:
            t = slots[0]
            body = sum(_rand_rat(rng, -1, 1) * t**k for k in range(6))
        else:
            monos = sp.itermonomials(slots, 3)
            body = sum(_rand_rat(rng, -1, 1) * m for m in sorted(monos, key=sp.default_sort_key))
        pins[name] = sp.Lambda(slots, body)
    return pins


def _rand_rat(rng, lo, hi, q=97):
    lo, hi = Fraction(lo), Fraction(hi)
    return sp.Rational(rng.randint(int(lo * q), int(hi * q)), q)


def _opaque_names(e):
    return {(n.fname, len(n.args)) for n in e.atoms(OpaqueFunction)}


def sample_point(symbols, ctx: Context | None, rng: random.Random):
    region = ctx.region if ctx else {}
    default = ctx.default_region if ctx else (Fraction(-2), Fraction(2))
    pt = {}
    for s in symbols:
        lo, hi = region.get(s, default)
        r = _rand_rat(rng, lo, hi, 997)
        pt[s] = Fraction(int(r.p), int(r.q))
    return pt


def free_inputs(e, ctx: Context | None):
    """Free symbols that need sampled values (defined symbols excluded)."""
    syms = set(e.free_symbols)
    if ctx is not None:
        todo = [s for s in syms if s in ctx.definitions]
        seen = set()
        while todo:
            s = todo.pop()
            if s in seen:
                continue
            seen.add(s)
            for t in ctx.definitions[s].relation.free_symbols:
                syms.add(t)
                if t in ctx.definitions:
                    todo.append(t)
        syms -= set(ctx.definitions)
    return sorted(syms, key=str)


def _needed_definitions(e, ctx):
    if ctx is None:
        return set()
    todo = [s for s in e.free_symbols if s in ctx.definitions]
    seen = set()
    while todo:
        s = todo.pop()
        if s not in seen:
            seen.add(s)
            todo.extend(t for t in ctx.definitions[s].relation.free_symbols if t in ctx.definitions)
    return seen


def numeric_sampler(e, ctx: Context | None = None, seed: int | None = None, pins: Mapping | None = None):
    """Yield ``(point, env)`` at random points; ``env`` is None when singular.

    ``env`` maps every input and defined symbol to its mpmath value.  Opaque
    functions without a closed form get random polynomial pins, fixed for the
    whole run.  The caller evaluates inside ``mpmath.workdps(30)``.
    """
    seed = (ctx.seed if ctx else 0) if seed is None else seed
    rng = random.Random(seed)
    closed = dict(ctx.closed_forms()) if ctx else {}
    names = _opaque_names(e)
    if ctx:
        for d in ctx.definitions.values():
            names |= _opaque_names(d.relation)
    missing = {(n, a) for n, a in names if n not in closed}
    closed.update(random_pins(missing, rng))
    if pins:
        closed.update(pins)
    inputs = free_inputs(e, ctx)
    needed = _needed_definitions(e, ctx)
    impl = _impl_from_user(None, closed)
    while True:
        pt = sample_point(inputs, ctx, rng)
        with mpmath.workdps(30):
            env = {s: mpmath.mpf(v.numerator) / v.denominator for s, v in pt.items()}
            try:
                resolve_definitions(env, ctx, impl, needed)
            except (SingularEvaluation, ZeroDivisionError, ValueError):
                yield pt, None, impl
                continue
        yield pt, env, impl


def is_zero(e, ctx: Context | None = None, samples: int | None = None, seed: int | None = None,
            tol: float | None = None, exact: bool = True) -> ZeroTest:
    """Tri-state zero test.

    ProvedZero when the normal form is the zero constant.  Otherwise the
    numerator of the normal form is evaluated at random admissible points
    (30 significant digits); a value above ``tol`` times the largest
    numerator term gives ProvedNonzero, else Unknown with ``max_abs`` set.
    ``exact=False`` skips the normal form and samples ``e`` as given, for
    expressions too large to cancel.
    """
    seed = (ctx.seed if ctx else 0) if seed is None else seed
    samples = (ctx.samples if ctx else 32) if samples is None else samples
    tol = (ctx.tol if ctx else 1e-9) if tol is None else tol
    n = normalize(e, ctx) if exact else sp.sympify(e)
    if n == 0:
        return ZeroTest(ZeroVerdict.PROVED_ZERO, seed, 0, 0.0, None, n)
    budget = samples * (ctx.resample_factor if ctx else 10)
    num, den = sp.fraction(n) if exact else (n, sp.S.One)
    terms = sp.Add.make_args(num)
    done, tries, max_abs = 0, 0, 0.0
    for pt, env, impl in numeric_sampler(n, ctx, seed):
        tries += 1
        if env is not None:
            with mpmath.workdps(30):
                ev = _Evaluator(env, impl)
                try:
                    if ev(den) == 0:
                        raise SingularEvaluation(den, "division by zero")
                    vals = [ev(t) for t in terms]
                except (SingularEvaluation, ZeroDivisionError, ValueError):
                    vals = None
            if vals is not None:
                done += 1
                total = abs(mpmath.fsum(vals))
                scale = max([mpmath.mpf(1)] + [abs(v) for v in vals])
                max_abs = max(max_abs, float(total / scale))
                if total > tol * scale:
                    return ZeroTest(ZeroVerdict.PROVED_NONZERO, seed, done, max_abs,
                                    {str(k): str(v) for k, v in pt.items()}, n)
        if done >= samples or tries >= budget:
            break
    return ZeroTest(ZeroVerdict.UNKNOWN, seed, done, max_abs if done else None, None, n)


def sample_values(exprs, ctx: Context | None = None, seed: int | None = None, count: int | None = None,
                  pins: Mapping | None = None):
    """Evaluate several expressions together at ``count`` random admissible points.

    Returns ``(rows, skipped)`` where each row is ``(point, [float, ...])``.
    """
    exprs = [sp.sympify(e) for e in exprs]
    count = (ctx.samples if ctx else 32) if count is None else count
    budget = count * (ctx.resample_factor if ctx else 10)
    rows, skipped = [], 0
    for pt, env, impl in numeric_sampler(sp.Tuple(*exprs), ctx, seed, pins):
        if env is not None:
            with mpmath.workdps(30):
                ev = _Evaluator(env, impl)
                try:
                    vals = [float(ev(e)) for e in exprs]
                except (SingularEvaluation, ZeroDivisionError, ValueError):
                    vals = None
            if vals is not None:
                rows.append((pt, vals))
            else:
                skipped += 1
        else:
            skipped += 1
        if len(rows) >= count or len(rows) + skipped >= budget:
            break
    return rows, skipped
