"""Acceptance suite: ten criteria, one PASS/FAIL line each.

Run through pytest (the lines are repeated in the terminal summary) or
directly with ``python3 tests/test_acceptance.py``.
"""
import os
import random
import subprocess
import sys
import time

import sympy as sp

from condsym.expr import is_zero, opaque
from condsym.families import (
    OperatorFamily,
    commutator,
    family_from_ansatz,
    resolve_in_span,
    transform_family,
)
from condsym.jet import JetSpace, VectorFieldOp, apply_op, prolong
from condsym.reduction import (
    PDE,
    Ansatz,
    NotReduced,
    check_conditional_invariance,
    check_conditional_invariance_alt,
    factor_reduction,
    substitute_ansatz,
)
from condsym.wave import (
    W,
    MinkowskiFrame,
    catalog_omega,
    check_wave_family,
    cubic_exact_solutions,
    dh_residuals,
    poincare_generators,
    reduced_wave_ode,
    verify_family_numeric,
    wave_family_from_omega,
    wave_pde,
)

sys.path.insert(0, os.path.dirname(__file__))
from oracles import jet_values_at, prolongation_fd, random_jet_expr, random_operator, sample_function, sample_points  # noqa: E402

RESULTS = {}
CLOSED = ["p0", "p1", "p2", "p3", "n1a", "n1b", "n2c"]
IMPLICIT = ["n0", "n2a", "n2b", "n3", "III"]
phi = opaque("phi")


def report(k, ok, detail, t0):
    line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail.strip()}  ({time.time() - t0:.1f}s)"
    RESULTS[k] = line
    print(line)
    assert ok, line


# 1 --------------------------------------------------------------------------------


def test_c01_prolongation_oracle():
    t0 = time.time()
    rng = random.Random(2024)
    worst = 0.0
    for _ in range(25):
        Q = random_operator(rng, rng.randint(1, 4), degree=2)
        S = Q.space
        e = random_jet_expr(rng, S)
        g = sample_function(rng, S)
        pts = sample_points(rng, S.n, k=20)
        got = jet_values_at(apply_op(prolong(Q, 2), e), S, g, pts)
        want = prolongation_fd(Q, e, g, pts)
        for a, b in zip(got, want):
            worst = max(worst, abs(a - b) / max(abs(b), 1e-12) if b != a else 0.0)
    report(1, worst < 1e-5, f"25 operators x 20 points, worst relative error {worst:.2e}", t0)


# 2 --------------------------------------------------------------------------------


def test_c02_poincare_suite():
    t0 = time.time()
    fr = MinkowskiFrame()
    pde = wave_pde(fr)
    gens = poincare_generators(fr.space)
    bad = []
    for name, q in gens:
        fam = OperatorFamily((q,), (name,))
        a = check_conditional_invariance(pde, fam).verdict
        b = check_conditional_invariance_alt(pde, fam).verdict
        if a != "invariant" or b != a:
            bad.append(f"{name}:{a}/{b}")
    ops = [q for _, q in gens]
    unresolved = sum(
        resolve_in_span(commutator(ops[i], ops[j]), ops) is None for i in range(10) for j in range(i + 1, 10)
    )
    ok = len(gens) == 10 and not bad and unresolved == 0
    report(2, ok, f"10 generators invariant under both checks, 45 commutators, {unresolved} unresolved {bad}", t0)


# 3 --------------------------------------------------------------------------------


def test_c03_catalog_symbolic():
    t0 = time.time()
    bad = []
    for fid in CLOSED:
        fam = catalog_omega(fid)
        for r in dh_residuals(fam):
            if is_zero(r, fam.ctx).verdict.value != "ProvedZero":
                bad.append(fid)
    report(3, not bad, f"{len(CLOSED)} closed-form families, both residuals ProvedZero {bad or ''}", t0)


# 4 --------------------------------------------------------------------------------


def test_c04_catalog_numeric():
    t0 = time.time()
    parts, ok = [], True
    for fid in IMPLICIT:
        rep = verify_family_numeric(catalog_omega(fid), samples=100, seed=0)
        frac = rep.skipped / max(1, rep.points + rep.skipped)
        ok &= rep.points >= 100 and frac <= 0.2 and rep.max_residual < 1e-6
        parts.append(f"{fid}={rep.max_residual:.1e}")
    report(4, ok, "max residual over 100 points: " + ", ".join(parts), t0)


# 5 --------------------------------------------------------------------------------


def _depends_on_x0(fam):
    from condsym.expr import differentiate

    return is_zero(differentiate(fam.omega, fam.frame.x[0], fam.ctx), fam.ctx).nonzero


def test_c05_determining_system():
    t0 = time.time()
    used, skipped, bad = [], [], []
    for fid in CLOSED + IMPLICIT:
        fam = catalog_omega(fid)
        if not _depends_on_x0(fam):
            skipped.append(fid)
            continue
        rep = check_wave_family(fam, tol=1e-8)
        used.append(fid)
        if not rep.ok:
            bad.append(f"{fid}:{rep.involutive},{rep.commuting},{rep.max_numeric:.1e}")
    report(5, not bad and len(used) >= 10,
           f"{len(used)} families involutive, commuting, six residuals zero; omega free of x0: {','.join(skipped)} {bad or ''}", t0)


# 6 --------------------------------------------------------------------------------


def test_c06_end_to_end_reduction():
    t0 = time.time()
    bad = []
    for fid in CLOSED:
        fam = catalog_omega(fid)
        pde = wave_pde(fam.frame)
        r = factor_reduction(substitute_ansatz(pde, Ansatz.from_explicit(fam.space, phi(fam.omega), (fam.omega,))))
        want = reduced_wave_ode(fam.eps, sp.Integer(fam.eps * fam.N) / W)
        if not r.reduces:
            bad.append(fid)
            continue
        got = r.Ltilde.xreplace({r.variables[0]: W}) if r.variables[0] != W else r.Ltilde
        if sp.cancel(got - want.Ltilde) != 0:
            bad.append(fid)
    fr = MinkowskiFrame()
    w = fr.x[0] * fr.x[1]
    nr = factor_reduction(substitute_ansatz(wave_pde(fr), Ansatz.from_explicit(fr.space, phi(w), (w,))))
    ok = not bad and isinstance(nr, NotReduced) and "ratio" in nr.witness
    report(6, ok, f"reduced ODE matches for {len(CLOSED) - len(bad)}/{len(CLOSED)} families; x0*x1 NotReduced with ratio witness", t0)


# 7 --------------------------------------------------------------------------------


def test_c07_cubic():
    t0 = time.time()
    rep = cubic_exact_solutions(samples=100)
    ok = all(rep.ode_zero) and all(m < 1e-6 for m in rep.numeric_max) and "^2" in rep.variant
    nums = ", ".join(f"{m:.1e}" for m in rep.numeric_max)
    report(7, ok, f"both solutions satisfy the ODE, box u - lambda u^3 max {nums}; a-power: {rep.variant}", t0)


# 8 --------------------------------------------------------------------------------


def test_c08_round_trip():
    t0 = time.time()
    x = sp.symbols("x0:4")
    reducing = []
    for fid, theta in [("p0", 0), ("p1", 0), ("p3", 0), ("n2c", 3)]:
        fam = catalog_omega(fid)
        reducing.append((fam.frame, fam.omega, [v for v in x if v != x[theta]]))
    reducing.append((MinkowskiFrame(), x[0] + x[1], [x[1], x[2], x[3]]))
    non = [(MinkowskiFrame(), w, [x[1], x[2], x[3]]) for w in (x[0] * x[1], x[0] ** 2 + x[1], x[0] * x[2] + x[3])]
    good = bad = 0
    for cases, want_red, want_v in ((reducing, True, "invariant"), (non, False, "not_invariant")):
        for fr, w, theta in cases:
            pde = wave_pde(fr)
            ans = Ansatz.from_explicit(fr.space, phi(w), (w,))
            r = factor_reduction(substitute_ansatz(pde, ans))
            v = check_conditional_invariance(pde, family_from_ansatz(ans, theta=theta)).verdict
            if r.reduces == want_red and v == want_v:
                good += 1
            else:
                bad += 1
    report(8, bad == 0 and good == 8, f"5 reducing ansaetze invariant, 3 non-reducing not_invariant ({good}/8)", t0)


# 9 --------------------------------------------------------------------------------


def _cases():
    fr = MinkowskiFrame()
    S = fr.space
    x = S.variables
    wave = wave_pde(fr)
    g = dict(poincare_generators(S))
    shifted = lambda f: OperatorFamily(tuple(VectorFieldOp.from_dict(S, {a: 1, 0: -fa}) for a, fa in zip((1, 2, 3), f)))  # noqa: E731
    L2 = JetSpace(["y", "z"], order=2)
    y, z = L2.variables
    T = OperatorFamily((VectorFieldOp.from_dict(L2, {y: 1}),))
    p3 = catalog_omega("p3")
    return [
        (wave, OperatorFamily((g["P1"],))),
        (wave, OperatorFamily((g["J01"],))),
        (wave, OperatorFamily((g["P2"], g["J23"]))),
        (wave, shifted((1, 0, 0))),
        (wave, shifted((x[0], 0, 0))),
        (wave, wave_family_from_omega(x[0] + x[1], S)),
        (wave_pde(p3.frame), wave_family_from_omega(p3.omega, p3.space)),
        (PDE(L2.jet(z, z) - L2.u * z, L2), T),
        (PDE(L2.jet(z, z) - L2.u * y, L2), T),
        (PDE(L2.jet(y, y) + L2.jet(z, z), L2), OperatorFamily((VectorFieldOp.from_dict(L2, {y: z, z: -y}),))),
    ]


def _random_lambda(rng, m, gens):
    while True:
        L = sp.Matrix(m, m, lambda i, j: rng.randint(-3, 3))
        i, j = rng.randrange(m), rng.randrange(m)
        L[i, j] += rng.choice(gens)
        if is_zero(L.det()).nonzero:
            return L


def test_c09_lambda_robustness():
    t0 = time.time()
    rng = random.Random(9)
    changed, verdicts = [], []
    for k, (pde, fam) in enumerate(_cases()):
        base = check_conditional_invariance(pde, fam).verdict
        verdicts.append(base)
        for _ in range(5):
            L = _random_lambda(rng, fam.m, list(pde.space.variables))
            v = check_conditional_invariance(pde, transform_family(fam, L)).verdict
            if v != base:
                changed.append(f"case{k}:{base}->{v}")
    counts = {v: verdicts.count(v) for v in sorted(set(verdicts))}
    report(9, not changed, f"10 cases x 5 random lambda, verdicts unchanged {counts} {changed or ''}", t0)


# 10 -------------------------------------------------------------------------------

CLI_RUNS = [
    ["check-involutive", "POINCARE:P0,J01"],
    ["check-involutive", "{d/dx1, x1*d/dx2 + d/dx3}"],
    ["check-rank", "{d/dx1, u*d/dx1}"],
    ["canonicalize", "{d/dx1 + d/dx2, d/dx2}"],
    ["cond-invariance", "wave", "POINCARE:J01"],
    ["cond-invariance", "wave", "WAVE:p3", "--alt"],
    ["reduce", "wave", "ANSATZ(u=phi(w), w=x0*x1)"],
    ["reduce", "wave", "ANSATZ(u=phi(w), w=x0+x1)"],
    ["ansatz-from-family", "{d/dx1, d/dx2}", "--integrals", "x0", "x3", "u"],
    ["family-from-ansatz", "ANSATZ(u=phi(w), w=x0+x1)", "--theta", "x1", "x2", "x3"],
    *[["dh-verify", fid] for fid in CLOSED + IMPLICIT],
    ["wave-demo"],
]

_SCRIPT = """
import contextlib, io, json, sys
from condsym.cli import main
out = []
for argv in json.loads(sys.argv[1]):
    buf, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(buf), contextlib.redirect_stderr(err):
        code = main(["--seed", "17", "--samples", "40"] + argv)
    out.append(f"{code}\\n{buf.getvalue()}{err.getvalue()}")
sys.stdout.write("\\n".join(out))
"""


def _run_suite(hashseed):
    import json

    env = dict(os.environ, PYTHONHASHSEED=str(hashseed))
    env.pop("CONDSYM_SEED", None)
    p = subprocess.run([sys.executable, "-c", _SCRIPT, json.dumps(CLI_RUNS)], capture_output=True, env=env, timeout=600)
    return p.stdout


def test_c10_determinism():
    t0 = time.time()
    a = _run_suite(1)
    b = _run_suite(2)
    ok = a == b and len(a) > 1000 and b"seed: 17" in a
    report(10, ok, f"{len(CLI_RUNS)} CLI reports byte-identical across two processes ({len(a)} bytes)", t0)


if __name__ == "__main__":
    fails = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_c"):
            try:
                fn()
            except AssertionError:
                fails += 1
    sys.exit(1 if fails else 0)
