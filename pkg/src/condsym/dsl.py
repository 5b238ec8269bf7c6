"""Session DSL: declarations, expressions, operators, PDEs and ansaetze.

A session is a sequence of statements separated by newlines or ``;``::

    var x0, x1, x2, x3
    dep u
    func F/1, f1/2
    const C0
    set seed = 3
    region x1 = [1, 2]
    let r = x1^2 + x2^2
    w^2 = (x0+C0)^2 - x1^2 - x2^2 - x3^2
    Q1 = d/dx1 - f1(x0,x1)*d/dx0
    family Q = {Q1, Q2}
    pde wave: D2(u,x0,x0) - D2(u,x1,x1) - D2(u,x2,x2) - D2(u,x3,x3) - F(u) = 0
    ansatz A: u = phi(w), w = x0*x1
    run cond-invariance wave Q

Expressions use ``+ - * / ^`` (``**`` is accepted too), rationals, decimal
literals (read exactly), function application, ``D(e, x)`` and ``Dk(e, x, ..)``
total derivatives, jet coordinates ``u_[0 1]`` and opaque derivatives
``d[F;1,0](a, b)``.  Operators are linear combinations of ``d/dxi`` and
``d/du`` atoms.  :func:`print_statement` writes text that parses back to an
equal statement.
"""
from __future__ import annotations

import difflib
import re
import shlex
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import sympy as sp

from .expr import Context, DeclarationError, OpaqueFunction, opaque
from .families import OperatorFamily
from .jet import JetSpace, OrderError, VectorFieldOp, total_derivative
from .printing import op_to_text, to_text
from .reduction import PDE, Ansatz

__all__ = [
    "AnsatzDef",
    "Command",
    "Decl",
    "FamilyDef",
    "ImplicitDef",
    "Let",
    "OpDef",
    "ParseError",
    "PDEDef",
    "RegionDef",
    "Session",
    "Setting",
    "parse",
    "parse_expr",
    "print_statement",
    "print_statements",
]

KEYWORDS = {"var", "dep", "const", "func", "order", "set", "region", "let", "pde", "family", "ansatz", "run"}
BUILTINS = {
    "sin": sp.sin, "cos": sp.cos, "tan": sp.tan, "exp": sp.exp, "log": sp.log, "sinh": sp.sinh,
    "cosh": sp.cosh, "tanh": sp.tanh, "atan": sp.atan, "asinh": sp.asinh, "sqrt": sp.sqrt, "Abs": sp.Abs,
}
CONSTANTS = {"pi": sp.pi}
SETTINGS = {"seed": int, "samples": int, "residual_samples": int, "tol": float, "residual_tol": float}


class ParseError(ValueError):
    """Syntax or name error with a caret diagnostic."""

    def __init__(self, msg, line=1, col=1, source=""):
        self.msg, self.line, self.col, self.source = msg, line, col, source
        super().__init__(str(self))

    def __str__(self):
        head = f"line {self.line}, column {self.col}: {self.msg}"
        if not self.source:
            return head
        return f"{head}\n  {self.source}\n  {' ' * (self.col - 1)}^"


# ---------------------------------------------------------------------------
# tokens

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<comment>\#[^\n]*)
  | (?P<nl>\n)
  | (?P<dop>d/d[A-Za-z_][A-Za-z0-9_]*)
  | (?P<dfun>d\[)
  | (?P<jet>[A-Za-z][A-Za-z0-9]*_\[[A-Za-z0-9 ]*\])
  | (?P<str>"[^"\n]*"|'[^'\n]*')
  | (?P<num>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<pow>\*\*)
  | (?P<op>[-+*/^(),=:{}\[\];])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int
    depth: int = 0
    pos: int = 0


def tokenize(text: str):
    toks, depth, line, start = [], 0, 1, 0
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - start + 1, _line(text, line))
        kind = m.lastgroup
        s = m.group()
        col = pos - start + 1
        if kind == "nl":
            toks.append(Token("sep", "\n", line, col, 0, pos))
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            if kind == "pow":
                kind, s = "op", "^"
            if s == ";" and depth == 0:
                kind = "sep"
            if s in "([{" and kind == "op" or kind == "dfun":
                depth += 1
            elif s in ")]}" and kind == "op":
                depth = max(depth - 1, 0)
            toks.append(Token(kind, s, line, col, depth, pos))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - start + 1, 0, pos))
    return toks


def _line(text, n):
    lines = text.split("\n")
    return lines[n - 1] if 0 < n <= len(lines) else ""


# ---------------------------------------------------------------------------
# statements


@dataclass(frozen=True)
class Decl:
    kind: str  # var | dep | const | func | order
    names: tuple
    arities: tuple = ()


@dataclass(frozen=True)
class Setting:
    key: str
    value: object


@dataclass(frozen=True)
class RegionDef:
    name: str
    lo: Fraction
    hi: Fraction


@dataclass(frozen=True)
class Let:
    name: str
    expr: sp.Expr


@dataclass(frozen=True)
class ImplicitDef:
    """``name^power = rhs``, stored in the context as ``name^power - rhs = 0``."""

    name: str
    power: int
    rhs: sp.Expr


@dataclass(frozen=True)
class OpDef:
    name: str
    coefficients: tuple  # xi_1..xi_n, eta


@dataclass(frozen=True)
class FamilyDef:
    name: str
    members: tuple


@dataclass(frozen=True)
class PDEDef:
    name: str
    lhs: sp.Expr
    rhs: sp.Expr


@dataclass(frozen=True)
class AnsatzDef:
    """``bindings[0]`` is the ansatz proper (``u = ...`` or ``omega = phi(..)``),
    the rest bind the reduced variables."""

    name: str
    bindings: tuple
    phi: str = "phi"


@dataclass(frozen=True)
class Command:
    words: tuple


# ---------------------------------------------------------------------------
# session


@dataclass
class Session:
    variables: list = field(default_factory=list)
    dependent: str = "u"
    order: int = 2
    constants: list = field(default_factory=list)
    functions: dict = field(default_factory=dict)
    lets: dict = field(default_factory=dict)
    implicit: dict = field(default_factory=dict)
    operators: dict = field(default_factory=dict)
    families: dict = field(default_factory=dict)
    pdes: dict = field(default_factory=dict)
    ansaetze: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    regions: dict = field(default_factory=dict)
    commands: list = field(default_factory=list)
    statements: list = field(default_factory=list)
    _space: JetSpace | None = None

    @classmethod
    def default(cls) -> "Session":
        """Four Minkowski coordinates, ``u`` and an opaque ``F``."""
        s = cls()
        parse("var x0, x1, x2, x3; dep u; func F/1", s)
        return s

    @classmethod
    def load(cls, path, base: "Session | None" = None) -> "Session":
        s = base or cls()
        parse(Path(path).read_text(encoding="utf-8"), s)
        return s

    # -- derived objects ----------------------------------------------------
    @property
    def space(self) -> JetSpace:
        if self._space is None:
            if not self.variables:
                raise DeclarationError("no independent variables declared")
            ctx = Context(variables=tuple(self.variables))
            if self.constants:
                ctx.constant(*self.constants)
            for name, arity in self.functions.items():
                ctx.function(name, arity)
            self._space = JetSpace(self.variables, self.dependent, self.order, ctx=ctx)
            self._apply_settings()
        return self._space

    @property
    def ctx(self) -> Context:
        return self.space.ctx

    def _apply_settings(self):
        if self._space is None:
            return
        ctx = self._space.ctx
        ctx.seed = self.settings.get("seed", ctx.seed)
        ctx.samples = self.settings.get("samples", ctx.samples)
        ctx.tol = self.settings.get("tol", ctx.tol)
        for name, (lo, hi) in self.regions.items():
            ctx.region[sp.Symbol(name)] = (lo, hi)

    def known_names(self):
        names = set(self.variables) | {self.dependent} | set(self.constants) | set(self.functions)
        names |= set(self.lets) | set(self.implicit) | set(BUILTINS) | set(CONSTANTS)
        return names

    def family(self, name) -> OperatorFamily:
        if name in self.families:
            members = self.families[name]
            return OperatorFamily(tuple(self.operators[m] for m in members), tuple(members))
        if name in self.operators:
            return OperatorFamily((self.operators[name],), (name,))
        raise DeclarationError(f"unknown family {name!r}{_suggest(name, list(self.families) + list(self.operators))}")

    def pde(self, name) -> PDE:
        if name not in self.pdes:
            raise DeclarationError(f"unknown pde {name!r}{_suggest(name, self.pdes)}")
        return self.pdes[name]

    def ansatz(self, name) -> Ansatz:
        if name not in self.ansaetze:
            raise DeclarationError(f"unknown ansatz {name!r}{_suggest(name, self.ansaetze)}")
        return self.ansaetze[name]

    # -- applying statements --------------------------------------------------
    def apply(self, st):
        if isinstance(st, Decl):
            if st.kind in ("var", "dep", "order") and self._space is not None:
                raise DeclarationError(f"'{st.kind}' must come before the first use of the jet space")
            if st.kind == "var":
                self.variables.extend(n for n in st.names if n not in self.variables)
            elif st.kind == "dep":
                self.dependent = st.names[0]
            elif st.kind == "order":
                self.order = int(st.names[0])
            elif st.kind == "const":
                self.constants.extend(n for n in st.names if n not in self.constants)
                if self._space is not None:
                    self.ctx.constant(*st.names)
            elif st.kind == "func":
                for n, a in zip(st.names, st.arities):
                    self.functions[n] = a
                    if self._space is not None:
                        self.ctx.function(n, a)
        elif isinstance(st, Setting):
            self.settings[st.key] = st.value
            self._apply_settings()
        elif isinstance(st, RegionDef):
            self.regions[st.name] = (st.lo, st.hi)
            self._apply_settings()
        elif isinstance(st, Let):
            self.lets[st.name] = st.expr
        elif isinstance(st, ImplicitDef):
            s = sp.Symbol(st.name)
            self.implicit[st.name] = st
            self.ctx.define(s, s ** st.power - st.rhs)
        elif isinstance(st, OpDef):
            S = self.space
            self.operators[st.name] = VectorFieldOp(st.coefficients[:-1], st.coefficients[-1], S)
        elif isinstance(st, FamilyDef):
            for m in st.members:
                if m not in self.operators:
                    raise DeclarationError(f"unknown operator {m!r}{_suggest(m, self.operators)}")
            self.families[st.name] = st.members
        elif isinstance(st, PDEDef):
            self.pdes[st.name] = PDE(sp.expand(st.lhs - st.rhs), self.space, st.name)
        elif isinstance(st, AnsatzDef):
            self.ansaetze[st.name] = build_ansatz_def(st, self)
        elif isinstance(st, Command):
            self.commands.append(st.words)
        self.statements.append(st)


def _suggest(name, pool):
    close = difflib.get_close_matches(str(name), [str(p) for p in pool], n=1)
    return f" (did you mean {close[0]!r}?)" if close else ""


def build_ansatz_def(st: AnsatzDef, session: Session) -> Ansatz:
    S = session.space
    lhs, rhs = st.bindings[0]
    names = tuple(sp.Symbol(str(b[0])) for b in st.bindings[1:])
    omegas = tuple(b[1] for b in st.bindings[1:])
    if not names:
        # u = phi(w) with w a defined symbol or an expression: take phi's arguments as they stand
        apps = [a for a in (lhs.atoms(OpaqueFunction) | rhs.atoms(OpaqueFunction)) if a.fname == st.phi]
        if len(apps) != 1:
            raise DeclarationError(f"ansatz must apply {st.phi} exactly once")
        omegas = apps[0].args
        if lhs == S.u:
            return Ansatz.from_explicit(S, rhs, omegas, st.phi)
        return Ansatz(S, lhs, omegas, st.phi, None, ())
    sub = dict(zip(names, omegas))
    if lhs == S.u:
        return Ansatz.from_explicit(S, rhs.xreplace(sub), omegas, st.phi, reduced=names)
    app = opaque(st.phi, len(names))(*names)
    if rhs != app:
        raise DeclarationError(f"implicit ansatz needs the form omega = {to_text(app)}")
    return Ansatz(S, lhs, omegas, st.phi, None, names)


# ---------------------------------------------------------------------------
# parser


class _Parser:
    def __init__(self, text, session: Session):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.S = session
        self.locals = {}
        self.phi_names = None  # collects unknown function names inside an ansatz
        self.allow_ops = False

    # -- token helpers --------------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col, _line(self.text, tok.line))

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def accept(self, text, kind=None):
        t = self.tok
        if t.text == text and (kind is None or t.kind == kind) and t.kind != "eof":
            self.i += 1
            return t
        return None

    def expect(self, text):
        t = self.accept(text)
        if t is None:
            found = "end of statement" if self.tok.kind in ("sep", "eof") else repr(self.tok.text)
            raise self.error(f"expected {text!r}, found {found}")
        return t

    def ident(self, what="name") -> str:
        t = self.tok
        if t.kind != "name":
            raise self.error(f"expected {what}")
        self.i += 1
        return t.text

    def integer(self) -> int:
        t = self.tok
        if t.kind != "num" or "." in t.text:
            raise self.error("expected an integer")
        self.i += 1
        return int(t.text)

    def number(self) -> Fraction:
        neg = self.accept("-") is not None
        t = self.tok
        if t.kind != "num":
            raise self.error("expected a number")
        self.i += 1
        v = Fraction(t.text)
        if self.accept("/"):
            v /= Fraction(self.integer())
        return -v if neg else v

    def end_statement(self):
        if self.tok.kind not in ("sep", "eof"):
            raise self.error(f"unexpected {self.tok.text!r}")

    # -- statements -------------------------------------------------------------
    def statements(self):
        out = []
        while self.tok.kind != "eof":
            if self.tok.kind == "sep":
                self.i += 1
                continue
            start = self.tok
            st = self.statement()
            self.end_statement()
            try:
                self.S.apply(st)
            except (DeclarationError, OrderError, ValueError) as exc:
                raise self.error(str(exc), start) from None
            out.append(st)
        return out

    def statement(self):
        t = self.tok
        if t.kind == "name" and t.text in KEYWORDS:
            self.i += 1
            return getattr(self, "st_" + t.text)()
        if t.kind == "name":
            name = self.advance().text
            if self.accept("^"):
                power = self.integer()
                self.expect("=")
                return ImplicitDef(name, power, self.expr())
            if self.accept("="):
                return self.opdef(name)
            raise self.error("expected '=' or '^' after a name at the start of a statement")
        raise self.error("expected a statement")

    def _names(self):
        out = [self.ident()]
        while self.accept(","):
            out.append(self.ident())
        return tuple(out)

    def st_var(self):
        return Decl("var", self._names())

    def st_dep(self):
        return Decl("dep", (self.ident("dependent variable"),))

    def st_const(self):
        return Decl("const", self._names())

    def st_order(self):
        return Decl("order", (str(self.integer()),))

    def st_func(self):
        names, arities = [], []
        while True:
            names.append(self.ident("function name"))
            self.expect("/")
            a = self.integer()
            if a < 1:
                raise self.error("arity must be at least 1", self.toks[self.i - 1])
            arities.append(a)
            if not self.accept(","):
                break
        return Decl("func", tuple(names), tuple(arities))

    def st_set(self):
        t = self.tok
        key = self.ident("setting")
        if key not in SETTINGS:
            raise self.error(f"unknown setting {key!r}{_suggest(key, SETTINGS)}", t)
        self.expect("=")
        v = self.number()
        conv = SETTINGS[key]
        if conv is int and v.denominator != 1:
            raise self.error(f"{key} must be an integer")
        return Setting(key, conv(v))

    def st_region(self):
        t = self.tok
        name = self.ident()
        if name not in self.S.known_names():
            raise self.error(f"unknown identifier {name!r}{_suggest(name, self.S.known_names())}", t)
        self.expect("=")
        self.expect("[")
        lo = self.number()
        self.expect(",")
        hi = self.number()
        self.expect("]")
        if not lo < hi:
            raise self.error("region needs lo < hi")
        return RegionDef(name, lo, hi)

    def st_let(self):
        name = self._fresh()
        self.expect("=")
        return Let(name, self.expr())

    def st_pde(self):
        name = self._fresh()
        self.expect(":")
        lhs = self.expr()
        self.expect("=")
        return PDEDef(name, lhs, self.expr())

    def st_family(self):
        name = self._fresh()
        self.expect("=")
        self.expect("{")
        members = [self._operator_name()]
        while self.accept(","):
            members.append(self._operator_name())
        self.expect("}")
        return FamilyDef(name, tuple(members))

    def _operator_name(self):
        t = self.tok
        name = self.ident("operator name")
        if name not in self.S.operators:
            raise self.error(f"unknown operator {name!r}{_suggest(name, self.S.operators)}", t)
        return name

    def st_ansatz(self):
        name = self._fresh()
        self.expect(":")
        return self.ansatz_body(name)

    def ansatz_body(self, name):
        # reduced-variable names are bound after the first comma; scan them first
        j, depth, reduced = self.i, 0, []
        while self.toks[j].kind not in ("sep", "eof"):
            tk = self.toks[j]
            if tk.text in ("(", "[", "{") or tk.kind == "dfun":
                depth += 1
            elif tk.text in (")", "]", "}"):
                if depth == 0:
                    break
                depth -= 1
            elif tk.text == "," and depth == 0 and self.toks[j + 1].kind == "name" and self.toks[j + 2].text == "=":
                reduced.append(self.toks[j + 1].text)
            j += 1
        self.locals = {r: sp.Symbol(r) for r in reduced}
        self.phi_names = []
        try:
            lhs = self.expr()
            self.expect("=")
            rhs = self.expr()
            bindings = [(lhs, rhs)]
            while self.accept(","):
                r = self.ident("reduced variable")
                self.expect("=")
                saved, self.locals = self.locals, {}
                bindings.append((sp.Symbol(r), self.expr()))
                self.locals = saved
        finally:
            self.locals = {}
            phis, self.phi_names = self.phi_names, None
        phis = sorted(set(phis))
        if len(phis) != 1:
            raise self.error("an ansatz needs exactly one free function" if not phis else
                             f"several undeclared functions in ansatz: {', '.join(phis)}")
        return AnsatzDef(name, tuple(bindings), phis[0])

    def st_run(self):
        start = self.tok
        while self.tok.kind not in ("sep", "eof"):
            self.i += 1
        try:
            words = shlex.split(self.text[start.pos:self.tok.pos])
        except ValueError as exc:
            raise self.error(str(exc), start) from None
        if not words:
            raise self.error("run needs a command", start)
        return Command(tuple(words))

    def _fresh(self):
        t = self.tok
        name = self.ident()
        if name in KEYWORDS or name in BUILTINS or name in CONSTANTS:
            raise self.error(f"{name!r} is reserved", t)
        return name

    def opdef(self, name):
        e = self.expr(allow_ops=True)
        S = self.S.space
        atoms = {_op_symbol(v.name): k for k, v in enumerate(S.variables)}
        atoms[_op_symbol(S.u.name)] = S.n
        e = sp.expand(e)
        coeffs = [sp.S.Zero] * (S.n + 1)
        rest = e
        for a, k in atoms.items():
            c = e.coeff(a)
            if c.free_symbols & set(atoms):
                raise self.error("operator is not linear in the d/d atoms")
            coeffs[k] = c
            rest = rest - c * a
        if sp.expand(rest) != 0:
            raise self.error("operator definition has a term without a d/d atom")
        return OpDef(name, tuple(coeffs))

    # -- expressions -------------------------------------------------------------
    def expr(self, allow_ops=False):
        self.allow_ops = allow_ops
        e = self.sum_()
        return e

    def sum_(self):
        e = self.product()
        while True:
            if self.accept("+", "op"):
                e = e + self.product()
            elif self.accept("-", "op"):
                e = e - self.product()
            else:
                return e

    def product(self):
        e = self.unary()
        while True:
            if self.accept("*", "op"):
                e = e * self.unary()
            elif self.tok.text == "/" and self.tok.kind == "op":
                t = self.advance()
                d = self.unary()
                if d == 0:
                    raise self.error("division by zero", t)
                e = e / d
            else:
                return e

    def unary(self):
        if self.accept("-", "op"):
            return -self.unary()
        if self.accept("+", "op"):
            return self.unary()
        return self.power()

    def power(self):
        base = self.atom()
        if self.accept("^", "op"):
            return base ** self.unary()
        return base

    def args(self):
        self.expect("(")
        out = [self.sum_()]
        while self.accept(","):
            out.append(self.sum_())
        self.expect(")")
        return out

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return sp.Rational(Fraction(t.text))
        if t.kind == "op" and t.text == "(":
            self.i += 1
            e = self.sum_()
            self.expect(")")
            return e
        if t.kind == "dop":
            if not self.allow_ops:
                raise self.error("operator atom outside an operator definition")
            self.i += 1
            target = t.text[3:]
            S = self.S.space
            if target not in {v.name for v in S.variables} | {S.u.name}:
                raise self.error(f"unknown variable {target!r} in {t.text}"
                                 f"{_suggest(target, [v.name for v in S.variables] + [S.u.name])}", t)
            return _op_symbol(target)
        if t.kind == "dfun":
            return self.opaque_derivative()
        if t.kind == "jet":
            self.i += 1
            return self.jet_symbol(t)
        if t.kind == "name":
            return self.name_atom()
        raise self.error("expected an expression")

    def jet_symbol(self, t):
        S = self.S.space
        head, labels = t.text[:-1].split("_[", 1)
        if head != S.u.name:
            raise self.error(f"jet coordinate of unknown dependent variable {head!r}", t)
        try:
            return S.jet(*labels.split())
        except (DeclarationError, OrderError) as exc:
            raise self.error(str(exc), t) from None

    def opaque_derivative(self):
        start = self.advance()
        name = self.ident("function name")
        self.expect(";")
        orders = [self.integer()]
        while self.accept(","):
            orders.append(self.integer())
        self.expect("]")
        args = self.args()
        arity = self.S.functions.get(name)
        if arity is None:
            raise self.error(f"unknown function {name!r}{_suggest(name, self.S.functions)}", start)
        if len(args) != arity or len(orders) != arity:
            raise self.error(f"{name} takes {arity} argument(s)", start)
        return opaque(name, arity, orders)(*args)

    def name_atom(self):
        t = self.advance()
        name = t.text
        if self.tok.text == "(" and self.tok.kind == "op":
            return self.call(name, t)
        if name in self.locals:
            return self.locals[name]
        if name in self.S.lets:
            return self.S.lets[name]
        if name in CONSTANTS:
            return CONSTANTS[name]
        if name in self.S.variables or name in self.S.constants or name == self.S.dependent or name in self.S.implicit:
            return sp.Symbol(name)
        raise self.error(f"unknown identifier {name!r}{_suggest(name, self.S.known_names() | set(self.locals))}", t)

    def call(self, name, t):
        m = re.fullmatch(r"D(\d*)", name)
        if m:
            return self.total_derivative(int(m.group(1) or 1), t)
        args = self.args()
        if name in BUILTINS:
            if len(args) != 1:
                raise self.error(f"{name} takes one argument", t)
            return BUILTINS[name](args[0])
        if name in self.S.functions:
            arity = self.S.functions[name]
            if len(args) != arity:
                raise self.error(f"{name} takes {arity} argument(s), got {len(args)}", t)
            return opaque(name, arity)(*args)
        if self.phi_names is not None:
            self.phi_names.append(name)
            return opaque(name, len(args))(*args)
        raise self.error(f"unknown function {name!r}{_suggest(name, set(self.S.functions) | set(BUILTINS))}", t)

    def total_derivative(self, k, t):
        self.expect("(")
        e = self.sum_()
        S = self.S.space
        for _ in range(k):
            self.expect(",")
            vt = self.tok
            v = self.ident("variable")
            if v not in self.S.variables:
                raise self.error(f"unknown variable {v!r}{_suggest(v, self.S.variables)}", vt)
            try:
                e = total_derivative(e, sp.Symbol(v), S)
            except OrderError as exc:
                raise self.error(str(exc), vt) from None
        self.expect(")")
        return e


def _op_symbol(name):
    return sp.Symbol(f"d/d{name}")


def parse(text: str, session: Session | None = None):
    """Parse ``text``, applying each statement to ``session`` (a fresh one by default)."""
    session = session if session is not None else Session()
    return _Parser(text, session).statements()


def parse_expr(text: str, session: Session, allow_ops=False):
    p = _Parser(text, session)
    e = p.expr(allow_ops)
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return e


def parse_ansatz(text: str, session: Session) -> Ansatz:
    """Inline ansatz body, e.g. ``u = phi(w), w = x0*x1``."""
    p = _Parser(text, session)
    st = p.ansatz_body("_inline")
    p.end_statement()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    return build_ansatz_def(st, session)


def parse_operator(text: str, session: Session) -> VectorFieldOp:
    p = _Parser(text, session)
    st = p.opdef("_inline")
    if p.tok.kind != "eof":
        raise p.error(f"unexpected {p.tok.text!r}")
    S = session.space
    return VectorFieldOp(st.coefficients[:-1], st.coefficients[-1], S)


# ---------------------------------------------------------------------------
# printing


def _num(v):
    v = Fraction(v)
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def print_statement(st, session: Session | None = None) -> str:
    if isinstance(st, Decl):
        if st.kind == "func":
            return "func " + ", ".join(f"{n}/{a}" for n, a in zip(st.names, st.arities))
        return f"{st.kind} " + ", ".join(st.names)
    if isinstance(st, Setting):
        return f"set {st.key} = {st.value!r}"
    if isinstance(st, RegionDef):
        return f"region {st.name} = [{_num(st.lo)}, {_num(st.hi)}]"
    if isinstance(st, Let):
        return f"let {st.name} = {to_text(st.expr)}"
    if isinstance(st, ImplicitDef):
        return f"{st.name}^{st.power} = {to_text(st.rhs)}"
    if isinstance(st, OpDef):
        if session is None:
            raise ValueError("printing an operator needs the session")
        op = VectorFieldOp(st.coefficients[:-1], st.coefficients[-1], session.space)
        return f"{st.name} = {op_to_text(op)}"
    if isinstance(st, FamilyDef):
        return f"family {st.name} = {{{', '.join(st.members)}}}"
    if isinstance(st, PDEDef):
        return f"pde {st.name}: {to_text(st.lhs)} = {to_text(st.rhs)}"
    if isinstance(st, AnsatzDef):
        return f"ansatz {st.name}: " + ", ".join(f"{to_text(a)} = {to_text(b)}" for a, b in st.bindings)
    if isinstance(st, Command):
        return "run " + shlex.join(st.words)
    raise TypeError(f"not a statement: {st!r}")


def print_statements(statements, session: Session | None = None) -> str:
    return "".join(print_statement(s, session) + "\n" for s in statements)
