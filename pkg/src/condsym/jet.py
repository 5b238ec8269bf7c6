"""Jet-space bookkeeping, total derivatives and prolongation."""
from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field

import sympy as sp

from .expr import Context, DeclarationError, differentiate, normalize

__all__ = [
    "JetSpace",
    "OrderError",
    "ProlongedOp",
    "VectorFieldOp",
    "apply_op",
    "prolong",
    "total_derivative",
]


class OrderError(ValueError):
    """An operation would leave the declared jet order."""


def _label(v: sp.Symbol, pos: int) -> str:
    m = re.search(r"(\d+)$", v.name)
    return m.group(1) if m else str(pos)


class JetSpace:
    """Coordinates ``x``, ``u`` and ``u_J`` for sorted multi-indices ``|J| <= r``.

    Multi-indices are tuples of axis positions (0-based into ``variables``),
    kept sorted.  Jet symbols are named ``u_[l1 l2 ...]`` where the ``l`` are
    axis labels, by default the numeric suffix of each variable name.
    """

    def __init__(self, variables, dependent="u", order=2, ctx: Context | None = None, labels=None):
        self.variables = tuple(sp.Symbol(v) if isinstance(v, str) else v for v in variables)
        self.n = len(self.variables)
        if self.n < 1:
            raise DeclarationError("need at least one independent variable")
        if order < 0:
            raise OrderError("order must be nonnegative")
        self.order = int(order)
        self.u = sp.Symbol(dependent) if isinstance(dependent, str) else dependent
        self.labels = tuple(labels) if labels else tuple(_label(v, i) for i, v in enumerate(self.variables))
        if len(set(self.labels)) != self.n:
            self.labels = tuple(str(i) for i in range(self.n))
        self._by_label = {lab: i for i, lab in enumerate(self.labels)}
        if ctx is None:
            ctx = Context(variables=self.variables)
        elif tuple(ctx.variables) != self.variables:
            extra = tuple(v for v in self.variables if v not in ctx.variables)
            ctx.variables = tuple(ctx.variables) + extra
        self.ctx = ctx
        self._coords = {}
        self._index = {}
        for k in range(1, self.order + 1):
            for J in itertools.combinations_with_replacement(range(self.n), k):
                self._make(J)
        ctx.declare(self.u)

    def _make(self, J):
        s = sp.Symbol(f"{self.u.name}_[{' '.join(self.labels[j] for j in J)}]")
        self._coords[J] = s
        self._index[s] = J
        self.ctx.declare(s)
        return s

    # ------------------------------------------------------------------
    def axis(self, i) -> int:
        """Axis position for a variable symbol, a label or a label-like int."""
        if isinstance(i, sp.Symbol):
            try:
                return self.variables.index(i)
            except ValueError:
                raise DeclarationError(f"{i} is not an independent variable") from None
        key = str(i)
        if key not in self._by_label:
            raise DeclarationError(f"unknown axis {i!r}; labels are {self.labels}")
        return self._by_label[key]

    def coord(self, J) -> sp.Symbol:
        """Jet symbol for a multi-index given as axis positions."""
        J = tuple(sorted(J))
        if not J:
            return self.u
        if len(J) > self.order:
            raise OrderError(f"multi-index {J} exceeds order {self.order}")
        return self._coords[J]

    def jet(self, *axes) -> sp.Symbol:
        """Jet symbol from labels / variables, e.g. ``space.jet(0, 1)``."""
        return self.coord(self.axis(a) for a in axes)

    def index_of(self, s):
        if s == self.u:
            return ()
        return self._index.get(s)

    def coordinates(self, order=None):
        """``(J, symbol)`` pairs ordered by (length, lexicographic)."""
        top = self.order if order is None else order
        return [(J, s) for J, s in sorted(self._coords.items(), key=lambda kv: (len(kv[0]), kv[0])) if len(J) <= top]

    def jet_symbols(self, e):
        return sorted((s for s in e.free_symbols if s in self._index), key=lambda s: (len(self._index[s]), self._index[s]))

    def order_of(self, e) -> int:
        return max((len(self._index[s]) for s in e.free_symbols if s in self._index), default=0)

    def extended(self, order: int) -> "JetSpace":
        if order <= self.order:
            return self
        cache = self.__dict__.setdefault("_ext", {})
        if order not in cache:
            cache[order] = JetSpace(self.variables, self.u, order, ctx=self.ctx, labels=self.labels)
        return cache[order]

    def __repr__(self):
        return f"JetSpace(vars={[str(v) for v in self.variables]}, u={self.u}, order={self.order})"


def total_derivative(e, i, space: JetSpace):
    """``D_i e``; raises :class:`OrderError` if the result would need order > r."""
    e = sp.sympify(e)
    a = space.axis(i)
    ctx = space.ctx
    out = differentiate(e, space.variables[a], ctx)
    if e.has(space.u):
        out += space.coord((a,)) * sp.diff(e, space.u)
    for s in space.jet_symbols(e):
        J = space.index_of(s)
        de = sp.diff(e, s)
        if de == 0:
            continue
        if len(J) + 1 > space.order:
            raise OrderError(f"D_{space.labels[a]} of {s} needs order {len(J) + 1} > {space.order}")
        out += space.coord(J + (a,)) * de
    return out


@dataclass(frozen=True)
class VectorFieldOp:
    """First-order operator ``sum xi_i d/dx_i + eta d/du`` with coefficients in (x, u)."""

    xi: tuple
    eta: sp.Expr
    space: JetSpace = field(compare=False, repr=False)

    def __post_init__(self):
        xi = tuple(sp.sympify(c) for c in self.xi)
        if len(xi) != self.space.n:
            raise DeclarationError(f"expected {self.space.n} xi coefficients, got {len(xi)}")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "eta", sp.sympify(self.eta))
        for c in xi + (self.eta,):
            if self.space.order_of(c) > 0:
                raise DeclarationError(f"coefficient {c} depends on derivative coordinates")

    @classmethod
    def from_dict(cls, space: JetSpace, coeffs: dict, eta=0):
        xi = [0] * space.n
        for k, c in coeffs.items():
            xi[space.axis(k)] = c
        return cls(tuple(xi), eta, space)

    @classmethod
    def partial(cls, space: JetSpace, i):
        return cls.from_dict(space, {i: 1})

    def __call__(self, f):
        """Apply as a derivation in (x, u)."""
        f = sp.sympify(f)
        ctx = self.space.ctx
        out = sp.S.Zero
        for c, v in zip(self.xi, self.space.variables):
            if c != 0:
                out += c * differentiate(f, v, ctx)
        if self.eta != 0 and f.has(self.space.u):
            out += self.eta * sp.diff(f, self.space.u)
        return out

    def coefficients(self):
        return self.xi + (self.eta,)

    def map(self, fn) -> "VectorFieldOp":
        return VectorFieldOp(tuple(fn(c) for c in self.xi), fn(self.eta), self.space)

    def scaled(self, factor) -> "VectorFieldOp":
        return self.map(lambda c: c * factor)

    def __add__(self, other: "VectorFieldOp") -> "VectorFieldOp":
        return VectorFieldOp(tuple(a + b for a, b in zip(self.xi, other.xi)), self.eta + other.eta, self.space)

    def __sub__(self, other):
        return self + other.scaled(-1)

    def normalized(self) -> "VectorFieldOp":
        return self.map(lambda c: normalize(c, self.space.ctx))

    def is_trivially_zero(self) -> bool:
        return all(c == 0 for c in self.coefficients())

    def __str__(self):
        from .printing import op_to_text

        return op_to_text(self)


@dataclass(frozen=True)
class ProlongedOp:
    base: VectorFieldOp
    order: int
    coeffs: dict  # multi-index -> eta_J

    def restricted(self, order: int) -> "ProlongedOp":
        return ProlongedOp(self.base, order, {J: c for J, c in self.coeffs.items() if len(J) <= order})


def prolong(Q: VectorFieldOp, s: int, space: JetSpace | None = None) -> ProlongedOp:
    """``s``-th prolongation via ``eta_J = D_J(eta - xi.u_x) + xi_i u_{J i}``."""
    space = space or Q.space
    if not 1 <= s <= space.order:
        raise OrderError(f"prolongation order {s} outside 1..{space.order}")
    big = space.extended(s + 1)
    n = space.n
    char = {(): Q.eta - sum(Q.xi[i] * big.coord((i,)) for i in range(n))}
    coeffs = {}
    for k in range(1, s + 1):
        for J in itertools.combinations_with_replacement(range(n), k):
            char[J] = total_derivative(char[J[:-1]], big.variables[J[-1]], big)
            eta_J = sp.expand(char[J] + sum(Q.xi[i] * big.coord(J + (i,)) for i in range(n) if Q.xi[i] != 0))
            if big.order_of(eta_J) > k:
                eta_J = normalize(eta_J, space.ctx)
                if big.order_of(eta_J) > k:
                    raise OrderError(f"prolongation coefficient for {J} kept order {k + 1} terms")
            coeffs[J] = eta_J
    return ProlongedOp(Q, s, coeffs)


def apply_op(P: ProlongedOp, e):
    """``pr Q e = xi_i de/dx_i + eta de/du + sum_J eta_J de/du_J``."""
    e = sp.sympify(e)
    space = P.base.space
    if space.order_of(e) > P.order:
        raise OrderError(f"expression has order {space.order_of(e)} > prolongation order {P.order}")
    out = P.base(e)
    for s in space.jet_symbols(e):
        J = space.index_of(s)
        c = P.coeffs[J]
        if c != 0:
            out += c * sp.diff(e, s)
    return out
