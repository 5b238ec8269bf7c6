"""The nonlinear wave equation: Minkowski helpers, the conditional-symmetry
family built from omega, the d'Alembert-Hamilton system and its solution
catalog, numeric verification of implicit families and the cubic equation."""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

import mpmath
import numpy as np
import sympy as sp
from scipy.optimize import brentq

from .expr import Context, DeclarationError, differentiate, is_zero, normalize, opaque
from .families import OperatorFamily
from .jet import JetSpace, VectorFieldOp
from .reduction import PDE, ReducedEquation, _mono_key, _phi_space

__all__ = [
    "CATALOG_IDS",
    "TAU",
    "W",
    "CatalogError",
    "DHFamily",
    "ImplicitTauEvaluator",
    "MinkowskiFrame",
    "Tetrad",
    "catalog_omega",
    "cubic_exact_solutions",
    "dalembertian",
    "default_params",
    "check_wave_family",
    "determining_residuals",
    "dh_residuals",
    "grad_square",
    "poincare_generators",
    "reduced_from_coefficients",
    "reduced_wave_ode",
    "verify_family_numeric",
    "wave_family_from_omega",
    "wave_pde",
]

CATALOG_IDS = ("n0", "n1a", "n1b", "n2a", "n2b", "n2c", "n3", "p0", "p1", "p2", "p3", "III")

TAU = sp.Symbol("tau")
W = sp.Symbol("w")


class CatalogError(ValueError):
    def __init__(self, msg, failed=()):
        super().__init__(msg)
        self.failed = list(failed)


# ---------------------------------------------------------------------------
# geometry


class MinkowskiFrame:
    """Coordinates x0..x3 with metric diag(1, -1, -1, -1)."""

    metric = (1, -1, -1, -1)

    def __init__(self, ctx: Context | None = None, order: int = 2):
        self.x = sp.symbols("x0:4")
        self.ctx = ctx if ctx is not None else Context(variables=self.x)
        self.space = JetSpace(self.x, "u", order, ctx=self.ctx)

    @staticmethod
    def dot(v, w):
        return sum((g * a * b for g, a, b in zip(MinkowskiFrame.metric, v, w)), sp.S.Zero)

    def raised(self, v):
        return tuple(g * a for g, a in zip(self.metric, v))

    def xsq(self, shift=(0, 0, 0, 0)):
        y = [xi + s for xi, s in zip(self.x, shift)]
        return self.dot(y, y)

    def contract(self, v):
        """``v_mu x^mu`` with the coordinates taken as components of x."""
        return self.dot(v, self.x)


def dalembertian(e, ctx: Context | None = None, x=None, exact=True):
    x = x or sp.symbols("x0:4")
    d2 = [differentiate(differentiate(e, v, ctx), v, ctx) for v in x]
    box = d2[0] - d2[1] - d2[2] - d2[3]
    return normalize(box, ctx) if exact else box


def grad_square(e, ctx: Context | None = None, x=None):
    x = x or sp.symbols("x0:4")
    g = [differentiate(e, v, ctx) for v in x]
    return normalize(g[0] ** 2 - g[1] ** 2 - g[2] ** 2 - g[3] ** 2, ctx)


@dataclass(frozen=True)
class Tetrad:
    a: tuple = (1, 0, 0, 0)
    b: tuple = (0, 1, 0, 0)
    c: tuple = (0, 0, 1, 0)
    d: tuple = (0, 0, 0, 1)

    def __post_init__(self):
        for nm in "abcd":
            v = tuple(sp.sympify(t) for t in getattr(self, nm))
            if len(v) != 4:
                raise DeclarationError(f"tetrad vector {nm} needs 4 components")
            object.__setattr__(self, nm, v)

    def violations(self, ctx: Context | None = None):
        dot = MinkowskiFrame.dot
        want = {("a", "a"): 1, ("b", "b"): -1, ("c", "c"): -1, ("d", "d"): -1}
        out = []
        for p, q in [("a", "a"), ("b", "b"), ("c", "c"), ("d", "d"), ("a", "b"), ("a", "c"),
                     ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")]:
            val = dot(getattr(self, p), getattr(self, q)) - want.get((p, q), 0)
            if not is_zero(val, ctx).zero:
                out.append(f"{p}.{q} = {want.get((p, q), 0)}")
        return out


# ---------------------------------------------------------------------------
# catalog


@dataclass
class DHFamily:
    id: str
    eps: int
    N: int
    omega: sp.Expr
    frame: MinkowskiFrame
    params: dict
    constraints: tuple = ()  # (label, expression) pairs, each must vanish
    omega_sq: sp.Expr | None = None
    tau_relation: sp.Expr | None = None
    implicit_relation: sp.Expr | None = None
    notes: tuple = ()

    @property
    def ctx(self):
        return self.frame.ctx

    @property
    def space(self):
        return self.frame.space

    @property
    def closed_form(self) -> bool:
        return self.tau_relation is None and self.implicit_relation is None

    def numeric_omega(self):
        """Numeric ``omega(x)``: returns a callable ``x -> float | None``."""
        return _NumericOmega(self)


def default_params(fid: str) -> dict:
    """Admissible parameter instances with zero constants and the standard tetrad.

    Implicit families get non-constant pinned functions of ``tau``.
    """
    t = TAU
    if fid == "n0":
        return {"A": (sp.sin(t), 0, 1, sp.sin(t)), "B": (1, 0, 0, 1), "R1": t**2 / 2, "R2": t + t**3 / 3}
    if fid == "n2a":
        return {"A": (t**2 / 2, t**2 / 2, 0, 0), "B": (t**2 / 2, t**2 / 2, 0, 1), "R": sp.S.One}
    if fid == "n2b":
        return {"A": (t, sp.sin(t), -sp.cos(t), 0), "b": (0, 0, 0, 1)}
    if fid == "n3":
        return {"A": (t, sp.sin(t), -sp.cos(t), 0), "B": (1, sp.cos(t), sp.sin(t), 0)}
    if fid == "III":
        return {"A": (1, sp.cos(W), sp.sin(W), 0), "B": W}
    if fid in CATALOG_IDS:
        return {}
    raise CatalogError(f"unknown family id {fid!r}; choose from {', '.join(CATALOG_IDS)}")


_REGIONS = {
    "p": {0: (3, 5), 1: (-1, 1), 2: (-1, 1), 3: (-1, 1)},
    "n1": {0: (-1, 1), 1: (-1, 1), 2: (-1, 1), 3: (2, 4)},
    "n2c": {0: (-2, 2), 1: (1, 2), 2: (1, 2), 3: (1, 2)},
    "n1b": {0: (-2, 2), 1: (1, 2), 2: (1, 2), 3: (-1, 1)},
    "n0": {0: (-1, 1), 1: (-1, 1), 2: (-1, 1), 3: (-1, 1)},
    "n2a": {0: (-1, 1), 1: (2, 3), 2: (1, 2), 3: (-1, 1)},
    "small": {0: (-1, 1), 1: (-0.4, 0.4), 2: (-0.4, 0.4), 3: (-1, 1)},
}


def _region_for(fid):
    key = {"n0": "n0", "n1a": "n1", "n1b": "n1b", "n2a": "n2a", "n2b": "small", "n2c": "n2c",
           "n3": "small", "III": "small"}.get(fid, "p")
    return _REGIONS[key]


def _vec(v, name):
    if v is None:
        raise CatalogError(f"missing parameter {name}")
    v = tuple(sp.sympify(c) for c in v)
    if len(v) != 4:
        raise CatalogError(f"parameter {name} needs 4 components")
    return v


def catalog_omega(fid: str, params: dict | None = None, check: bool = True) -> DHFamily:
    """Instantiate a catalog entry; constraints are checked unless ``check`` is False."""
    base = default_params(fid)
    params = {**base, **(params or {})}
    tet = Tetrad(**{k: params[k] for k in "abcd" if k in params})
    frame = MinkowskiFrame()
    ctx = frame.ctx
    x = frame.x
    dot = MinkowskiFrame.dot
    C = [sp.sympify(params.get(f"C{i}", 0)) for i in range(4)]
    if "C" in params:
        C = [sp.sympify(c) for c in params["C"]]
    for c in C:
        for s in c.free_symbols:
            ctx.constant(s)
    for k, v in _region_for(fid).items():
        ctx.region[x[k]] = (sp.Rational(v[0]).limit_denominator(100), sp.Rational(v[1]).limit_denominator(100))
    ax, bx, cx, dx = (dot(v, x) for v in (tet.a, tet.b, tet.c, tet.d))
    constraints, notes = [], []
    kw = {}
    if fid[0] == "p" or fid in ("n1a", "n1b", "n2c"):
        constraints += [(f"tetrad {s}", None) for s in tet.violations(ctx)]
    if fid == "p0":
        fam = DHFamily(fid, 1, 0, ax + C[1], frame, params)
    elif fid in ("p1", "p2", "p3", "n1a", "n1b", "n2c"):
        if fid == "p1":
            R, eps, N = (ax + C[1]) ** 2 - (dx + C[2]) ** 2, 1, 1
        elif fid == "p2":
            R, eps, N = (ax + C[1]) ** 2 - (cx + C[2]) ** 2 - (dx + C[3]) ** 2, 1, 2
        elif fid == "p3":
            R, eps, N = frame.xsq(C), 1, 3
        elif fid == "n1a":
            s = ax + dx
            g1 = _as_func(params.get("g1", 0), s)
            g2 = _as_func(params.get("g2", 0), s)
            R, eps, N = (dx + g2) ** 2 - (ax + g1) ** 2, -1, 1
            if g1.free_symbols & set(x) or g2.free_symbols & set(x):
                notes.append("g_i read as functions of the single argument a.x + d.x")
        elif fid == "n1b":
            R, eps, N = (bx + C[1]) ** 2 + (cx + C[2]) ** 2, -1, 1
        else:
            R, eps, N = (bx + C[1]) ** 2 + (cx + C[2]) ** 2 + (dx + C[3]) ** 2, -1, 2
        R = sp.expand(R)
        ctx.define(W, W**2 - R)
        fam = DHFamily(fid, eps, N, W, frame, params, omega_sq=R)
    elif fid in ("n0", "n2a", "n2b", "n3"):
        A = _vec(params.get("A"), "A")
        Ad = tuple(sp.diff(c, TAU) for c in A)
        if fid == "n0":
            B = _vec(params.get("B"), "B")
            R1, R2 = sp.sympify(params.get("R1", 0)), sp.sympify(params.get("R2", 0))
            G = dot(B, x) + R2
            omega = dot(A, x) + R1
            constraints += [("A.A = -1", dot(A, A) + 1), ("A.B = 0", dot(A, B)),
                            ("A'.B = 0", dot(Ad, B)), ("B.B = 0", dot(B, B))]
            eps, N, Rsq = -1, 0, None
        else:
            y = tuple(xi + ai for xi, ai in zip(x, A))
            if fid == "n2a":
                B = _vec(params.get("B"), "B")
                Bd = tuple(sp.diff(c, TAU) for c in B)
                Rf = sp.sympify(params.get("R", 1))
                G = dot(y, Bd)
                Rsq = -dot(y, y) - dot(B, y) ** 2
                constraints += [("B.B = -1", dot(B, B) + 1), ("B'.B' = 0", dot(Bd, Bd))]
                constraints += [(f"A'_{i} = R B'_{i}", Ad[i] - Rf * Bd[i]) for i in range(4)]
                eps, N = -1, 2
            elif fid == "n2b":
                b = _vec(params.get("b", tet.b), "b")
                G = dot(y, Ad) + dot(y, b) * dot(b, Ad)
                Rsq = -dot(y, y) - dot(b, y) ** 2
                constraints += [("A'.A' + (b.A')^2 = 0", dot(Ad, Ad) + dot(b, Ad) ** 2), ("b.b = -1", dot(b, b) + 1)]
                eps, N = -1, 2
            else:
                B = _vec(params.get("B"), "B")
                G = dot(y, B)
                Rsq = -dot(y, y)
                constraints += [("A'.B = 0", dot(Ad, B)), ("B.B = 0", dot(B, B))]
                eps, N = -1, 3
            omega = W
        G = sp.expand(G)
        ev = ImplicitTauEvaluator(G, x, TAU)
        ctx.define(TAU, G, solver=ev.solver_for_env)
        if Rsq is not None:
            Rsq = sp.expand(Rsq)
            ctx.define(W, W**2 - Rsq)
        kw = {"tau_relation": G, "omega_sq": Rsq}
        fam = DHFamily(fid, eps, N, omega, frame, params, **kw)
    elif fid == "III":
        A = _vec(params.get("A"), "A")
        B = sp.sympify(params.get("B", W))
        G = sp.expand(dot(A, x) + B)
        constraints += [("A.A = 0", dot(A, A))]
        if not G.has(W):
            raise CatalogError("case III relation must involve omega")
        if G.is_polynomial(W) and sp.degree(G, W) == 1:
            sol = sp.solve(G, W)[0]
            fam = DHFamily(fid, 0, 0, sp.expand(sol), frame, params, implicit_relation=G)
        else:
            ev = ImplicitTauEvaluator(G, x, W)
            ctx.define(W, G, solver=ev.solver_for_env)
            fam = DHFamily(fid, 0, 0, W, frame, params, implicit_relation=G)
    else:
        raise CatalogError(f"unknown family id {fid!r}")
    fam.constraints = tuple((lab, e) for lab, e in constraints)
    fam.notes = tuple(notes)
    if check:
        failed = constraint_failures(fam)
        if failed:
            raise CatalogError(f"{fid}: parameter constraints violated: {'; '.join(failed)}", failed)
    return fam


def _as_func(spec, arg):
    spec = sp.sympify(spec)
    if isinstance(spec, sp.Lambda):
        return spec(arg)
    if spec.free_symbols == {sp.Symbol("s")}:
        return spec.xreplace({sp.Symbol("s"): arg})
    return spec


def constraint_failures(fam: DHFamily, samples: int = 24, seed: int = 0):
    """Labels of constraints that fail (exactly, or numerically along sampled tau)."""
    out = []
    rng = random.Random(seed)
    for lab, e in fam.constraints:
        if e is None:
            out.append(lab)
            continue
        e = sp.sympify(e)
        if sp.expand(e) == 0:
            continue
        fs = e.free_symbols
        if fs <= {TAU, W}:
            f = sp.lambdify(sorted(fs, key=str), e, "math")
            bad = False
            for _ in range(samples):
                vals = [rng.uniform(-2, 2) for _ in fs]
                try:
                    if abs(f(*vals)) > 1e-9:
                        bad = True
                        break
                except (ValueError, ZeroDivisionError):
                    continue
            if bad:
                out.append(lab)
        elif not is_zero(e, fam.ctx).zero:
            out.append(lab)
    return out


# ---------------------------------------------------------------------------
# implicit relations


class ImplicitTauEvaluator:
    """Simple roots of ``G(x, t) = 0`` in ``t``.

    A coarse grid scan in double precision brackets the roots, bisection
    isolates one, and Newton's method polishes it at 30 digits.
    """

    def __init__(self, G, x, t, lo=-8.0, hi=8.0, grid=321):
        self.G = sp.sympify(G)
        self.x, self.t = tuple(x), t
        args = list(self.x) + [t]
        Gt = sp.diff(self.G, t)
        self._g = sp.lambdify(args, self.G, "math")
        self._g_mp = sp.lambdify(args, self.G, "mpmath")
        self._gt_mp = sp.lambdify(args, Gt, "mpmath")
        self.lo, self.hi, self.grid = lo, hi, grid

    def residual(self, xv, tv):
        with mpmath.workdps(30):
            return self._g_mp(*xv, tv)

    def slope(self, xv, tv):
        with mpmath.workdps(30):
            return self._gt_mp(*xv, tv)

    def solve(self, xv, near=None):
        """Root nearest ``near`` (or 0) as an mpf; None without a simple root."""
        with mpmath.workdps(30):
            xv = [mpmath.mpf(v) for v in xv]
            if near is not None:
                r = self._newton(xv, mpmath.mpf(near))
                if r is not None:
                    return r
            xf = [float(v) for v in xv]
            g = lambda tv: self._g(*xf, tv)  # noqa: E731
            ts = np.linspace(self.lo, self.hi, self.grid)
            try:
                vals = [g(tv) for tv in ts]
            except (ValueError, ZeroDivisionError):
                return None
            ref = 0.0 if near is None else float(near)
            best = None
            for i in range(len(ts) - 1):
                if vals[i] == 0.0 or vals[i] * vals[i + 1] < 0:
                    try:
                        r = ts[i] if vals[i] == 0.0 else brentq(g, ts[i], ts[i + 1], xtol=1e-14)
                    except ValueError:
                        continue
                    if best is None or abs(r - ref) < abs(best - ref):
                        best = r
            if best is None:
                return None
            return self._newton(xv, mpmath.mpf(best))

    def _newton(self, xv, t, steps=40):
        for _ in range(steps):
            d = self._gt_mp(*xv, t)
            if d == 0:
                return None
            step = self._g_mp(*xv, t) / d
            t -= step
            if abs(step) < mpmath.mpf(10) ** -27 * max(1, abs(t)):
                break
        if abs(self._g_mp(*xv, t)) > 1e-20 or abs(self._gt_mp(*xv, t)) < 1e-8:
            return None
        return t

    def solver_for_env(self, env):
        used = self.G.free_symbols
        return self.solve([env[s] if s in used else 0 for s in self.x])


class _NumericOmega:
    """``x -> (omega, tau)`` at 30 digits; omega is None off the admissible set."""

    def __init__(self, fam: DHFamily):
        x = fam.frame.x
        self.fam = fam
        self.tau_ev = None
        self.impl_ev = None
        body = sp.sqrt(fam.omega_sq) if fam.omega_sq is not None else fam.omega
        self._sq = sp.lambdify(list(x) + [TAU], fam.omega_sq, "mpmath") if fam.omega_sq is not None else None
        if fam.tau_relation is not None:
            self.tau_ev = ImplicitTauEvaluator(fam.tau_relation, x, TAU)
            self._w = sp.lambdify(list(x) + [TAU], body, "mpmath")
        elif fam.implicit_relation is not None and fam.omega == W:
            self.impl_ev = ImplicitTauEvaluator(fam.implicit_relation, x, W)
        else:
            self._w = sp.lambdify(list(x) + [TAU], body, "mpmath")

    def __call__(self, xv, near=None):
        with mpmath.workdps(30):
            xv = [mpmath.mpf(v) for v in xv]
            t = None
            if self.impl_ev is not None:
                t = self.impl_ev.solve(xv, near)
                return t, t
            if self.tau_ev is not None:
                t = self.tau_ev.solve(xv, near)
                if t is None:
                    return None, None
            tv = t if t is not None else mpmath.mpf(0)
            if self._sq is not None and self._sq(*xv, tv) <= 0:
                return None, t
            return self._w(*xv, tv), t


# ---------------------------------------------------------------------------
# residuals


def dh_residuals(fam: DHFamily):
    """``(grad_square(w) - eps, box(w) - eps*N/w)``, both normalized."""
    ctx = fam.ctx
    w = fam.omega
    r1 = normalize(grad_square(w, ctx) - fam.eps, ctx)
    r2 = normalize(dalembertian(w, ctx) - sp.Integer(fam.eps * fam.N) / w, ctx)
    return r1, r2


@dataclass
class NumericReport:
    family: str
    max_grad: float
    max_box: float
    points: int
    skipped: int
    seed: int
    h: float
    ok: bool
    reason: str = ""

    @property
    def max_residual(self):
        return max(self.max_grad, self.max_box)


def _deriv_stencil(f, xv, center, h, near):
    """First and second partials of ``f`` at ``xv`` by Richardson-extrapolated central differences."""
    grads, seconds = [], []
    h = mpmath.mpf(h)
    for i in range(4):
        vals = {}
        for k in (-2, -1, 1, 2):
            p = list(xv)
            p[i] += k * h / 2
            v, _ = f(p, near)
            if v is None:
                return None
            vals[k] = v
        d_h = (vals[2] - vals[-2]) / (2 * h)
        d_h2 = (vals[1] - vals[-1]) / h
        grads.append((4 * d_h2 - d_h) / 3)
        s_h = (vals[2] - 2 * center + vals[-2]) / h**2
        s_h2 = (vals[1] - 2 * center + vals[-1]) / (h / 2) ** 2
        seconds.append((4 * s_h2 - s_h) / 3)
    return grads, seconds


def verify_family_numeric(fam: DHFamily, samples: int = 100, seed: int = 0, h: float = 1e-4,
                          tol: float = 1e-6) -> NumericReport:
    """Finite-difference check of both residuals at ``samples`` admissible points.

    omega is evaluated at 30 digits (tau by root finding), so the error is
    dominated by the Richardson-extrapolated truncation term.
    """
    rng = random.Random(seed)
    f = fam.numeric_omega()
    region = [tuple(float(b) for b in fam.ctx.region.get(xi, (-2, 2))) for xi in fam.frame.x]
    mg = mb = 0.0
    pts = skipped = 0
    budget = samples * 5
    while pts < samples and pts + skipped < budget:
        xv = [rng.uniform(lo, hi) for lo, hi in region]
        w, t = f(xv)
        if w is None or abs(w) < 1e-6:
            skipped += 1
            continue
        if f.tau_ev is not None and abs(f.tau_ev.slope(xv, t)) < 1e-8:
            skipped += 1
            continue
        with mpmath.workdps(30):
            st = _deriv_stencil(f, xv, w, h, t)
            if st is None:
                skipped += 1
                continue
            g, s = st
            gs = g[0] ** 2 - g[1] ** 2 - g[2] ** 2 - g[3] ** 2
            box = s[0] - s[1] - s[2] - s[3]
            mg = max(mg, float(abs(gs - fam.eps)))
            mb = max(mb, float(abs(box - fam.eps * fam.N / w)))
        pts += 1
    total = pts + skipped
    frac = skipped / total if total else 1.0
    ok = pts >= samples and frac <= 0.2 and max(mg, mb) < tol
    reason = "" if ok else (f"skipped {skipped} of {total}" if frac > 0.2 or pts < samples else "residual above tolerance")
    return NumericReport(fam.id, mg, mb, pts, skipped, seed, h, ok, reason)


# ---------------------------------------------------------------------------
# the wave equation and its conditional symmetry family


def wave_pde(frame: MinkowskiFrame | None = None, F=None) -> PDE:
    frame = frame or MinkowskiFrame()
    S = frame.space
    F = F if F is not None else opaque("F")
    L = S.jet(0, 0) - S.jet(1, 1) - S.jet(2, 2) - S.jet(3, 3) - F(S.u)
    return PDE(L, S, "wave")


def poincare_generators(space: JetSpace | None = None):
    """``P_mu = d/dx_mu`` and ``J_{mu nu} = x^mu d_nu - x^nu d_mu`` (x^mu = (x0, -x1, -x2, -x3))."""
    space = space or MinkowskiFrame().space
    x = space.variables
    up = (x[0], -x[1], -x[2], -x[3])
    ops, names = [], []
    for mu in range(4):
        ops.append(VectorFieldOp.partial(space, mu))
        names.append(f"P{mu}")
    for mu in range(4):
        for nu in range(mu + 1, 4):
            xi = [0] * 4
            xi[nu] += up[mu]
            xi[mu] -= up[nu]
            ops.append(VectorFieldOp(tuple(xi), 0, space))
            names.append(f"J{mu}{nu}")
    return list(zip(names, ops))


def wave_family_from_omega(omega, space: JetSpace) -> OperatorFamily:
    """``Q_a = d/dx_a - (w_a / w_0) d/dx_0`` for a = 1, 2, 3."""
    ctx = space.ctx
    x = space.variables
    w0 = normalize(differentiate(omega, x[0], ctx), ctx)
    if w0 == 0:
        raise DeclarationError("omega does not depend on x0")
    ops = []
    for a in (1, 2, 3):
        fa = normalize(differentiate(omega, x[a], ctx) / w0, ctx)
        ops.append(VectorFieldOp.from_dict(space, {a: 1, 0: -fa}))
    return OperatorFamily(tuple(ops))


def determining_residuals(f, ctx: Context | None = None, x=None, exact=True):
    """The six residuals for ``Q_a = d_a - f_a d_0``: three wave-type, three transport-type.

    With ``exact=False`` the residuals are left unsimplified (for implicit
    families, where cancellation is too slow); test them with
    ``is_zero(..., exact=False)``.
    """
    x = x or sp.symbols("x0:4")
    norm = (lambda e: normalize(e, ctx)) if exact else (lambda e: e)  # noqa: E731
    f = [sp.sympify(fa) for fa in f]
    d = lambda e, v: differentiate(e, v, ctx)  # noqa: E731
    first, second = [], []
    for a in range(3):
        fa = f[a]
        box = dalembertian(fa, ctx, x, exact)
        first.append(norm(box - 2 * sum((d(fa, x[b + 1]) * d(f[b], x[0]) for b in range(3)), sp.S.Zero)))
        second.append(norm(d(fa, x[0]) - sum((f[b] * d(fa, x[b + 1]) for b in range(3)), sp.S.Zero)))
    return tuple(first + second)


@dataclass
class DeterminingReport:
    family: OperatorFamily
    involutive: str
    commuting: bool
    verdicts: list
    max_numeric: float
    tol: float

    @property
    def ok(self) -> bool:
        if self.involutive != "involutive" or not self.commuting:
            return False
        return all(v == "ProvedZero" for v in self.verdicts) or self.max_numeric < self.tol


def check_wave_family(fam: DHFamily, samples: int = 32, tol: float = 1e-8) -> DeterminingReport:
    """Build ``Q_a`` from the family's omega and test the six determining equations.

    Closed-form families are normalized exactly; implicit ones are sampled
    without cancellation.
    """
    from .families import check_involutive, commutator

    Q = wave_family_from_omega(fam.omega, fam.space)
    inv = check_involutive(Q, numeric_ok=True)
    exact = fam.closed_form
    commuting = True
    for i in range(Q.m):
        for j in range(i + 1, Q.m):
            c = commutator(Q.ops[i], Q.ops[j])
            for k in c.coefficients():
                z = is_zero(k, fam.ctx, samples=samples)
                commuting &= z.verdict.value == "ProvedZero" or (z.max_abs is not None and z.max_abs < tol)
    f = [-q.xi[0] for q in Q.ops]
    res = determining_residuals(f, fam.ctx, fam.frame.x, exact=exact)
    zs = [is_zero(r, fam.ctx, samples=samples, exact=exact) for r in res]
    worst = max([0.0] + [z.max_abs if z.max_abs is not None else math.inf for z in zs if z.verdict.value != "ProvedZero"])
    return DeterminingReport(Q, inv.verdict, commuting, [z.verdict.value for z in zs], worst, tol)


def reduced_from_coefficients(coeffs: dict, phs: JetSpace, variables) -> ReducedEquation:
    """Normalize ``sum c_k m_k`` so the first nonzero coefficient (monomial order) is 1."""
    coeffs = {m: sp.cancel(c) for m, c in coeffs.items() if sp.cancel(c) != 0}
    if not coeffs:
        return ReducedEquation(sp.S.Zero, sp.S.One, tuple(variables), phs, degenerate=True)
    order = sorted(coeffs, key=lambda m: _mono_key(m, phs))
    H = coeffs[order[0]]
    Lt = sp.Add(*[sp.cancel(coeffs[m] / H) * m for m in order])
    return ReducedEquation(Lt, H, tuple(variables), phs, tuple(order), tuple(coeffs[m] for m in order))


def reduced_wave_ode(f1, f2, F=None, omega=W, phi="phi") -> ReducedEquation:
    """``f1 phi'' + f2 phi' - F(phi)`` with the leading coefficient scaled to 1."""
    phs = _phi_space((omega,), phi, 2)
    F = F if F is not None else opaque("F")
    coeffs = {phs.jet(1, 1): sp.sympify(f1), phs.jet(1): sp.sympify(f2), F(phs.u): sp.S.NegativeOne}
    return reduced_from_coefficients(coeffs, phs, (omega,))


# ---------------------------------------------------------------------------
# cubic equation


@dataclass
class CubicReport:
    solutions: list
    ode_residuals: list
    ode_zero: list
    variant: str
    rejected_variant: str
    numeric_max: list = field(default_factory=list)
    numeric_points: int = 0


def cubic_exact_solutions(fam: DHFamily | None = None, lam=None, a=None, samples: int = 100,
                          seed: int = 0, numeric: bool = True) -> CubicReport:
    """The two solution families of the reduced cubic ODE and their checks.

    Returns ``phi(w)`` for ``phi = lam^(-1/2)/w`` and ``phi = a/(w^2 + lam a^2/8)``
    together with the ODE residuals and, for the given (n3) instance, the
    numeric residual of ``box u - lam u^3``.
    """
    lam = sp.Symbol("lambda", positive=True) if lam is None else sp.sympify(lam)
    a = sp.Symbol("a") if a is None else sp.sympify(a)
    w = W
    ode = lambda p: sp.diff(p, w, 2) + 3 * sp.diff(p, w) / w + lam * p**3  # noqa: E731
    sols = [lam ** sp.Rational(-1, 2) / w, a / (w**2 + lam * a**2 / 8)]
    res = [sp.cancel(sp.together(ode(p))) for p in sols]
    zero = [is_zero(r).zero for r in res]
    # the a-power is settled with symbolic a and lambda, never with numeric values
    la, aa = sp.Symbol("lambda", positive=True), sp.Symbol("a")
    ode_s = lambda p: sp.diff(p, w, 2) + 3 * sp.diff(p, w) / w + la * p**3  # noqa: E731
    lit_zero = is_zero(sp.cancel(sp.together(ode_s(aa / (w**2 + la * aa / 8))))).zero
    rep = CubicReport(sols, res, zero, "a*(w^2 + lambda*a^2/8)^(-1)",
                      "a*(w^2 + lambda*a/8)^(-1)" + (" (also valid)" if lit_zero else " (ODE residual nonzero)"))
    if numeric:
        fam = fam or catalog_omega("n3")
        if fam.id != "n3":
            raise CatalogError("cubic solutions need an (n3) instance")
        lam_v = float(lam) if lam.is_number else 1.0
        a_v = float(a) if a.is_number else 1.0
        for p in sols:
            g = sp.lambdify(w, p.subs({lam: lam_v, a: a_v}), "mpmath")
            rep.numeric_max.append(_cubic_numeric(fam, g, lam_v, samples, seed))
        rep.numeric_points = samples
    return rep


def _cubic_numeric(fam, g, lam_v, samples, seed, h=1e-4):
    rng = random.Random(seed)
    f = fam.numeric_omega()
    region = [tuple(float(b) for b in fam.ctx.region.get(xi, (-2, 2))) for xi in fam.frame.x]
    worst, pts, tries = 0.0, 0, 0
    while pts < samples and tries < samples * 5:
        tries += 1
        xv = [rng.uniform(lo, hi) for lo, hi in region]
        wv, t = f(xv)
        if wv is None or abs(wv) < 1e-6:
            continue

        def uf(p, near):
            v, tt = f(p, near)
            return (g(v) if v is not None else None), tt

        with mpmath.workdps(30):
            st = _deriv_stencil(uf, xv, g(wv), h, t)
            if st is None:
                continue
            _, s = st
            box = s[0] - s[1] - s[2] - s[3]
            u = g(wv)
            worst = max(worst, float(abs(box - lam_v * u**3) / max(1, abs(lam_v * u**3))))
        pts += 1
    return worst
