"""Command line front end.

Every command prints a plain-text report on stdout, ending in a trailer of
``key: value`` lines after a ``--`` separator.  Exit codes: 0 positive
verdict, 1 negative verdict, 2 unknown or inconclusive, 3 usage error.
"""
from __future__ import annotations

import argparse
import difflib
import os
import re
import sys

import sympy as sp

from . import __version__
from .dsl import ParseError, Session, parse_ansatz, parse_expr, parse_operator
from .expr import DeclarationError, opaque
from .families import (
    DependentCoordinates,
    NoPivotError,
    OperatorFamily,
    SingularTransformError,
    UnsupportedAnsatz,
    canonicalize_family,
    check_involutive,
    check_rank,
    family_from_ansatz,
)
from .jet import OrderError
from .printing import op_to_text, to_text
from .reduction import (
    PDE,
    build_ansatz,
    check_conditional_invariance,
    check_conditional_invariance_alt,
    factor_reduction,
    substitute_ansatz,
    verify_first_integrals,
)
from .wave import (
    CATALOG_IDS,
    CatalogError,
    W,
    catalog_omega,
    check_wave_family,
    dh_residuals,
    poincare_generators,
    verify_family_numeric,
    wave_family_from_omega,
)

OK, NEGATIVE, UNKNOWN, USAGE = 0, 1, 2, 3
SEED_ENV = "CONDSYM_SEED"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE)


class Report:
    def __init__(self, command):
        self.command = command
        self.lines = []
        self.trailer = {"command": command}

    def add(self, line=""):
        self.lines.append(str(line))

    def kv(self, key, value):
        self.trailer[key] = value

    def render(self) -> str:
        body = "\n".join(self.lines)
        tail = "\n".join(f"{k}: {v}" for k, v in self.trailer.items())
        return f"== {self.command} ==\n{body}\n--\n{tail}\n" if body else f"== {self.command} ==\n--\n{tail}\n"


# ---------------------------------------------------------------------------
# resolving arguments


def wave_on(space, F=None) -> PDE:
    """``u_00 - u_11 - u_22 - u_33 - F(u)`` on a four-variable space."""
    if space.n != 4:
        raise UsageError("the built-in wave equation needs four independent variables")
    F = F or opaque("F")
    L = space.jet(space.variables[0], space.variables[0]) - sum(
        (space.jet(v, v) for v in space.variables[1:]), sp.S.Zero) - F(space.u)
    return PDE(L, space, "wave")


def _split_top(text):
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def resolve_family(spec: str, session: Session) -> OperatorFamily:
    if spec.startswith("POINCARE:"):
        space = session.space
        if space.n != 4:
            raise UsageError("POINCARE generators need four independent variables")
        gens = dict(poincare_generators(space))
        names = [n.strip() for n in spec.split(":", 1)[1].split(",")]
        for n in names:
            if n not in gens:
                raise UsageError(f"unknown generator {n!r}; choose from {', '.join(gens)}")
        return OperatorFamily(tuple(gens[n] for n in names), tuple(names))
    if spec.startswith("WAVE:"):
        fid = spec.split(":", 1)[1]
        fam = catalog_omega(fid)
        Q = wave_family_from_omega(fam.omega, fam.space)
        return OperatorFamily(Q.ops, tuple(f"Q{a}" for a in (1, 2, 3)))
    if spec.startswith("{") and spec.endswith("}"):
        ops = [parse_operator(t, session) for t in _split_top(spec[1:-1])]
        return OperatorFamily(tuple(ops))
    return session.family(spec)


def resolve_pde(spec: str, session: Session, space=None) -> PDE:
    if spec in session.pdes:
        pde = session.pdes[spec]
        if space is not None and pde.space is not space:
            raise UsageError(f"pde {spec!r} and the family live on different spaces")
        return pde
    if spec == "wave":
        return wave_on(space or session.space)
    m = re.fullmatch(r"PDE\((.*)\)", spec, re.S)
    if m:
        body = m.group(1)
        lhs, _, rhs = body.partition("=")
        e = parse_expr(lhs, session) - (parse_expr(rhs, session) if rhs.strip() else 0)
        return PDE(sp.expand(e), session.space, "inline")
    return session.pde(spec)


def resolve_ansatz(spec: str, session: Session):
    m = re.fullmatch(r"ANSATZ\((.*)\)", spec, re.S)
    if m:
        return parse_ansatz(m.group(1), session)
    return session.ansatz(spec)


# ---------------------------------------------------------------------------
# commands


def _family_lines(rep, fam):
    for nm, q in zip(fam.names, fam.ops):
        rep.add(f"  {nm} = {op_to_text(q)}")


def cmd_check_involutive(args, session):
    fam = resolve_family(args.family, session)
    rep = Report("check-involutive")
    rep.add(f"family {args.family}:")
    _family_lines(rep, fam)
    res = check_involutive(fam, numeric_ok=args.numeric)
    if res.mu is not None:
        for (a, b, c), v in sorted(res.mu.table.items()):
            if v != 0:
                rep.add(f"mu[{a + 1},{b + 1};{c + 1}] = {to_text(v)}")
    if res.witness:
        rep.add(f"witness: {_fmt(res.witness)}")
    if res.reason:
        rep.add(f"reason: {res.reason}")
    rep.kv("verdict", res.verdict)
    return rep, {"involutive": OK, "not_involutive": NEGATIVE}.get(res.verdict, UNKNOWN)


def cmd_check_rank(args, session):
    fam = resolve_family(args.family, session)
    res = check_rank(fam, samples=args.samples, seed=args.seed)
    rep = Report("check-rank")
    rep.add(f"family {args.family}:")
    _family_lines(rep, fam)
    for w in res.witnesses or ():
        rep.add(f"witness: {_fmt(w)}")
    rep.kv("verdict", res.verdict)
    rep.kv("samples", res.samples)
    rep.kv("skipped", res.skipped)
    return rep, {"holds": OK, "fails": NEGATIVE}.get(res.verdict, UNKNOWN)


def cmd_canonicalize(args, session):
    fam = resolve_family(args.family, session)
    rep = Report("canonicalize")
    try:
        cf = canonicalize_family(fam)
    except NoPivotError as exc:
        rep.add(str(exc))
        rep.kv("verdict", "no_pivot")
        return rep, UNKNOWN
    rep.add("canonical family:")
    _family_lines(rep, cf.family)
    rep.add("lambda:")
    for i in range(cf.transform.matrix.rows):
        rep.add("  [" + ", ".join(to_text(v) for v in cf.transform.matrix.row(i)) + "]")
    rep.kv("verdict", "canonical")
    rep.kv("pivots", ",".join(str(fam.space.variables[p]) for p in cf.pivots))
    rep.kv("commutes", {True: "yes", False: "no", None: "unknown"}[cf.commutes])
    return rep, OK


def cmd_cond_invariance(args, session):
    fam = resolve_family(args.family, session)
    pde = resolve_pde(args.pde, session, fam.space)
    check = check_conditional_invariance_alt if args.alt else check_conditional_invariance
    res = check(pde, fam, samples=args.samples, seed=args.seed)
    rep = Report("cond-invariance")
    rep.add(f"pde {args.pde}: {to_text(pde.L)} = 0")
    rep.add(f"family {args.family}:")
    _family_lines(rep, fam)
    for name, e in res.residuals.items():
        rep.add(f"residual[{name}] = {to_text(e)}")
    if res.witness:
        rep.add(f"witness: {_fmt(res.witness)}")
    if res.reason:
        rep.add(f"reason: {res.reason}")
    for a in res.assumptions:
        rep.add(f"assumes: {a}")
    rep.kv("verdict", res.verdict)
    rep.kv("check", "alt" if args.alt else "standard")
    rep.kv("method", res.method)
    if res.leading:
        rep.kv("leading", res.leading)
    return rep, OK if res.invariant else (NEGATIVE if res.verdict == "not_invariant" else UNKNOWN)


def cmd_reduce(args, session):
    ans = resolve_ansatz(args.ansatz, session)
    pde = resolve_pde(args.pde, session, ans.space)
    theta = [parse_expr(t, session) for t in args.theta] if args.theta else None
    W_ = substitute_ansatz(pde, ans, theta)
    res = factor_reduction(W_)
    rep = Report("reduce")
    rep.add(f"pde {args.pde}: {to_text(pde.L)} = 0")
    rep.add(f"ansatz: {ans}")
    rep.add("theta: " + ", ".join(to_text(t) for t in W_.theta))
    if res.reduces:
        rep.add(f"reduced: {res}")
        rep.add(f"H = {to_text(res.H)}")
        for m, c in zip(res.monomials, res.coefficients):
            rep.add(f"coefficient[{to_text(m)}] = {to_text(c)}")
        for n in res.notes:
            rep.add(f"note: {n}")
        rep.kv("verdict", "reduces")
        rep.kv("degenerate", "yes" if res.degenerate else "no")
        rep.kv("mixed", "yes" if res.mixed else "no")
        return rep, OK
    rep.add(f"reason: {res.reason}")
    rep.add(f"witness: {_fmt(res.witness)}")
    rep.kv("verdict", "not_reduced")
    return rep, NEGATIVE


def cmd_ansatz_from_family(args, session):
    fam = resolve_family(args.family, session)
    ints = [parse_expr(t, session) for t in args.integrals]
    res = verify_first_integrals(fam, ints, certify_complete=True)
    rep = Report("ansatz-from-family")
    rep.add(f"family {args.family}:")
    _family_lines(rep, fam)
    for f in res.failures:
        rep.add(f"not annihilated: {f['candidate']} by {f['operator']} ({f['verdict']})")
    rep.kv("rank", res.rank)
    rep.kv("independent", "yes" if res.independent else "no")
    if not res.ok:
        rep.kv("verdict", "invalid_integrals")
        undecided = all(f["verdict"] == "Unknown" for f in res.failures) and res.failures
        return rep, UNKNOWN if undecided else NEGATIVE
    ans = build_ansatz(fam, ints)
    rep.add(f"ansatz: {ans}")
    rep.kv("complete", "yes" if res.complete else "no")
    rep.kv("verdict", "ansatz")
    return rep, OK if res.complete else UNKNOWN


def cmd_family_from_ansatz(args, session):
    ans = resolve_ansatz(args.ansatz, session)
    theta = [parse_expr(t, session) for t in args.theta] if args.theta else None
    fam = family_from_ansatz(ans, theta)
    rep = Report("family-from-ansatz")
    rep.add(f"ansatz: {ans}")
    rep.add("family:")
    _family_lines(rep, fam)
    rep.kv("verdict", "family")
    rep.kv("m", fam.m)
    return rep, OK


_VECTOR_PARAMS = {"a", "b", "c", "d", "A", "C"}
_PARAMS = _VECTOR_PARAMS | {"B", "R", "R1", "R2", "g1", "g2", "C0", "C1", "C2", "C3"}


def parse_catalog_params(pairs) -> dict:
    """``[("a", "1,0,0,0"), ("g1", "s^2")]`` -> catalog parameters.

    Parameter functions are written in ``tau``, ``w`` or ``s``.
    """
    ps = Session()
    from .dsl import parse

    parse("var tau, w, s", ps)
    out = {}
    for key, text in pairs:
        if key not in _PARAMS:
            close = difflib.get_close_matches(key, sorted(_PARAMS), n=1)
            hint = f" (did you mean --{close[0]}?)" if close else f"; known: {', '.join(sorted(_PARAMS))}"
            raise UsageError(f"unknown parameter --{key}{hint}")
        parts = _split_top(text)
        vals = [parse_expr(p, ps) for p in parts]
        if key in _VECTOR_PARAMS or (key == "B" and len(vals) == 4):
            if len(vals) != 4:
                raise UsageError(f"--{key} needs four comma-separated components")
            out[key] = tuple(vals)
        else:
            if len(vals) != 1:
                raise UsageError(f"--{key} takes a single value")
            out[key] = vals[0]
    return out


def cmd_dh_verify(args, session):
    params = parse_catalog_params(args.params)
    fam = catalog_omega(args.family, params)
    rep = Report("dh-verify")
    rep.add(f"family {fam.id}: eps = {fam.eps}, N = {fam.N}")
    rep.add(f"omega = {to_text(fam.omega)}")
    if fam.omega_sq is not None:
        rep.add(f"omega^2 = {to_text(fam.omega_sq)}")
    if fam.tau_relation is not None:
        rep.add(f"tau: {to_text(fam.tau_relation)} = 0")
    if fam.implicit_relation is not None:
        rep.add(f"implicit: {to_text(fam.implicit_relation)} = 0")
    for n in fam.notes:
        rep.add(f"note: {n}")
    rep.kv("family", fam.id)
    code = OK
    if fam.closed_form:
        from .expr import is_zero

        r1, r2 = dh_residuals(fam)
        z = [is_zero(r, fam.ctx, seed=args.seed) for r in (r1, r2)]
        rep.add(f"residual[grad] = {to_text(r1)}")
        rep.add(f"residual[box] = {to_text(r2)}")
        rep.kv("symbolic", ",".join(v.verdict.value for v in z))
        if any(v.nonzero for v in z):
            code = NEGATIVE
        elif not all(v.zero for v in z):
            code = UNKNOWN
    samples = args.samples if args.samples is not None else session.settings.get("residual_samples", 100)
    tol = session.settings.get("residual_tol", 1e-6)
    num = verify_family_numeric(fam, samples=samples, seed=args.seed, tol=tol)
    rep.kv("numeric_max_residual", f"{num.max_residual:.3e}")
    rep.kv("points", num.points)
    rep.kv("skipped", num.skipped)
    rep.kv("h", num.h)
    if num.reason:
        rep.add(f"numeric: {num.reason}")
    if code == OK and not num.ok:
        code = NEGATIVE if num.points and num.max_residual >= tol else UNKNOWN
    rep.kv("verdict", {OK: "verified", NEGATIVE: "failed", UNKNOWN: "unknown"}[code])
    return rep, code


def cmd_wave_demo(args, session):
    """catalog -> d'Alembert-Hamilton check -> operator family -> invariance -> ansatz -> reduced ODE."""
    from .expr import is_zero
    from .reduction import Ansatz
    from .wave import reduced_wave_ode

    fam = catalog_omega(args.family)
    rep = Report("wave-demo")
    rep.add(f"family {fam.id}: omega = {to_text(fam.omega)}, eps = {fam.eps}, N = {fam.N}")
    steps = {}
    if fam.closed_form:
        z = [is_zero(r, fam.ctx, seed=args.seed) for r in dh_residuals(fam)]
        steps["dh"] = all(v.zero for v in z)
    else:
        steps["dh"] = verify_family_numeric(fam, samples=args.samples or 100, seed=args.seed).ok
    rep.add(f"step dh-system: {'ok' if steps['dh'] else 'failed'}")
    det = check_wave_family(fam)
    Q = det.family
    rep.add("operators:")
    _family_lines(rep, Q)
    steps["determining"] = det.ok
    rep.add(f"step determining-equations: {'ok' if det.ok else 'failed'} ({det.involutive})")
    pde = wave_on(fam.space)
    inv = check_conditional_invariance(pde, Q, samples=args.samples, seed=args.seed)
    steps["invariance"] = inv.invariant
    rep.add(f"step conditional-invariance: {inv.verdict}")
    phi = opaque("phi")
    ans = Ansatz.from_explicit(fam.space, phi(fam.omega), (fam.omega,), reduced=(W,))
    red = factor_reduction(substitute_ansatz(pde, ans))
    if red.reduces:
        want = reduced_wave_ode(fam.eps, sp.Integer(fam.eps * fam.N) / W)
        match = sp.simplify(red.Ltilde - want.Ltilde) == 0
        rep.add(f"step reduction: {red}")
        rep.add(f"expected: {want}")
    else:
        match = False
        rep.add(f"step reduction: not reduced ({red.reason})")
    steps["reduction"] = match
    rep.kv("verdict", "ok" if all(steps.values()) else "failed")
    for k, v in steps.items():
        rep.kv(k, "ok" if v else "failed")
    return rep, OK if all(steps.values()) else NEGATIVE


def cmd_session(args, session):
    """Run the ``run`` statements of the loaded session files in order."""
    rep = Report("session")
    worst = OK
    for words in session.commands:
        sub = parse_args(list(words))
        if sub.command == "session":
            raise UsageError("nested session commands are not allowed")
        _apply_globals(sub, args)
        r, code = COMMANDS[sub.command](sub, session)
        rep.add(r.render().rstrip("\n"))
        rep.add()
        worst = max(worst, code)
    rep.kv("commands", len(session.commands))
    rep.kv("verdict", {OK: "ok", NEGATIVE: "negative", UNKNOWN: "unknown"}.get(worst, "error"))
    return rep, worst


COMMANDS = {
    "check-involutive": cmd_check_involutive,
    "check-rank": cmd_check_rank,
    "canonicalize": cmd_canonicalize,
    "cond-invariance": cmd_cond_invariance,
    "reduce": cmd_reduce,
    "ansatz-from-family": cmd_ansatz_from_family,
    "family-from-ansatz": cmd_family_from_ansatz,
    "dh-verify": cmd_dh_verify,
    "wave-demo": cmd_wave_demo,
    "session": cmd_session,
}


def _fmt(d):
    if isinstance(d, dict):
        return ", ".join(f"{k}={_fmt_val(v)}" for k, v in sorted(d.items(), key=lambda kv: str(kv[0])))
    return _fmt_val(d)


def _fmt_val(v):
    if isinstance(v, dict):
        return "{" + _fmt(v) + "}"
    if isinstance(v, sp.Basic):
        return to_text(v)
    return str(v)


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="condsym", description="Conditional symmetry checks and reductions.")
    p.add_argument("--version", action="version", version=f"condsym {__version__}")
    p.add_argument("--session", action="append", default=[], metavar="FILE",
                   help="session file (*.sym) with declarations; repeatable")
    p.add_argument("--seed", type=int, default=None, help=f"sampling seed (default ${SEED_ENV} or 0)")
    p.add_argument("--samples", type=int, default=None, help="sample count for numeric checks")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("check-involutive", help="pairwise commutators in the span of the family")
    s.add_argument("family")
    s.add_argument("--numeric", action="store_true", help="accept numerically vanishing residuals")
    s = sub.add_parser("check-rank", help="rank of the xi matrix at sampled points")
    s.add_argument("family")
    s = sub.add_parser("canonicalize", help="identity block on pivot columns")
    s.add_argument("family")
    s = sub.add_parser("cond-invariance", help="conditional invariance of a PDE under a family")
    s.add_argument("pde")
    s.add_argument("family")
    s.add_argument("--alt", action="store_true", help="use the invariant-surface formulation")
    s = sub.add_parser("reduce", help="substitute an ansatz and factor the result")
    s.add_argument("pde")
    s.add_argument("ansatz")
    s.add_argument("--theta", nargs="+", default=None)
    s = sub.add_parser("ansatz-from-family", help="ansatz from first integrals of a family")
    s.add_argument("family")
    s.add_argument("--integrals", nargs="+", required=True)
    s = sub.add_parser("family-from-ansatz", help="operator family leaving an ansatz invariant")
    s.add_argument("ansatz")
    s.add_argument("--theta", nargs="+", default=None)
    s = sub.add_parser("dh-verify", help="verify a catalog solution of the d'Alembert-Hamilton system")
    s.add_argument("family", choices=CATALOG_IDS)
    s = sub.add_parser("wave-demo", help="full pipeline for one catalog family")
    s.add_argument("--family", default="p3", choices=CATALOG_IDS)
    sub.add_parser("session", help="run the 'run' statements of the session files")
    for name, sp_ in sub.choices.items():
        sp_.add_argument("--seed", type=int, default=argparse.SUPPRESS, dest="seed")
        sp_.add_argument("--samples", type=int, default=argparse.SUPPRESS, dest="samples")
    return p


def _extra_params(rest):
    """``--key value`` pairs left over for dh-verify."""
    pairs, i = [], 0
    while i < len(rest):
        tok = rest[i]
        if not tok.startswith("--") or "=" in tok and len(tok) < 4:
            raise UsageError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(rest):
                raise UsageError(f"--{key} needs a value")
            val = rest[i + 1]
            i += 2
        pairs.append((key, val))
    return pairs


def _apply_globals(args, parent):
    if getattr(args, "seed", None) is None:
        args.seed = parent.seed
    if getattr(args, "samples", None) is None:
        args.samples = parent.samples


def _default_seed(session):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return session.settings.get("seed", 0)


def parse_args(argv):
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    if rest and args.command != "dh-verify":
        parser.error(f"unrecognized arguments: {' '.join(rest)}")
    args.params = _extra_params(rest) if args.command == "dh-verify" else []
    return args


def load_session(paths) -> Session:
    """The built-in session (x0..x3, u, F) unless session files are given."""
    if not paths:
        return Session.default()
    session = Session()
    for path in paths:
        Session.load(path, session)
    return session


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parse_args(argv)
        session = load_session(args.session)
        if args.seed is None:
            args.seed = _default_seed(session)
        if session.variables:
            session.ctx.seed = args.seed
        rep, code = COMMANDS[args.command](args, session)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE
    except ParseError as exc:
        print(f"condsym: parse error, {exc}", file=sys.stderr)
        return USAGE
    except (UsageError, DeclarationError, CatalogError, OrderError, FileNotFoundError) as exc:
        print(f"condsym: error: {exc}", file=sys.stderr)
        return USAGE
    except (UnsupportedAnsatz, NoPivotError, DependentCoordinates, SingularTransformError) as exc:
        print(f"condsym: inconclusive: {exc}", file=sys.stderr)
        return UNKNOWN
    rep.kv("seed", args.seed)
    rep.kv("exit", code)
    sys.stdout.write(rep.render())
    return code


__all__ = ["main", "build_parser", "parse_args", "load_session", "Report", "resolve_family", "resolve_pde",
           "resolve_ansatz", "wave_on"]
