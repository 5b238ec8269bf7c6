import pytest

from condsym.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def trailer(text):
    body = text.rsplit("\n--\n", 1)[1]
    return dict(line.split(": ", 1) for line in body.strip().splitlines())


def test_cond_invariance_j01(capsys):
    code, out, _ = run(capsys, "cond-invariance", "wave", "POINCARE:J01")
    assert code == 0
    assert out.startswith("== cond-invariance ==")
    assert trailer(out)["verdict"] == "invariant"


def test_reduce_product_not_reduced(capsys):
    code, out, _ = run(capsys, "reduce", "wave", "ANSATZ(u=phi(w), w=x0*x1)")
    assert code == 1
    assert trailer(out)["verdict"] == "not_reduced"
    assert "witness" in out


def test_reduce_with_inline_pde(capsys):
    code, out, _ = run(capsys, "reduce", "PDE(D2(u,x0,x0) - D2(u,x1,x1) = 0)", "ANSATZ(u=phi(w), w=x0)")
    assert code == 0
    assert "reduced: phi_[1 1] = 0" in out


def test_check_involutive_and_not(capsys):
    assert run(capsys, "check-involutive", "{d/dx1, d/dx2}")[0] == 0
    code, out, _ = run(capsys, "check-involutive", "{d/dx1, x1*d/dx2 + d/dx3}")
    assert code == 1 and trailer(out)["verdict"] == "not_involutive"


def test_check_rank_fails(capsys):
    code, out, _ = run(capsys, "check-rank", "{d/dx1, u*d/dx1}")
    assert code == 1
    assert "witness" in out


def test_canonicalize(capsys):
    code, out, _ = run(capsys, "canonicalize", "{2*d/dx1}")
    assert code == 0 and "[1/2]" in out


def test_ansatz_and_family_commands(capsys):
    code, out, _ = run(capsys, "ansatz-from-family", "{d/dx1, d/dx2}", "--integrals", "x0", "x3", "u")
    assert code == 0 and "u = phi(x0, x3)" in out
    code, out, _ = run(capsys, "family-from-ansatz", "ANSATZ(u=phi(w), w=x0+x1)", "--theta", "x1", "x2", "x3")
    assert code == 0 and "Q3 = d/dx3" in out


def test_dh_verify_closed_and_params(capsys):
    code, out, _ = run(capsys, "dh-verify", "p0", "--a", "1,0,0,0", "--C1", "0")
    assert code == 0 and trailer(out)["verdict"] == "verified"
    # rejected parameters are a usage error listing the failed constraints
    code, _, err = run(capsys, "dh-verify", "p0", "--a", "1,1,0,0")
    assert code == 3 and "a.a = 1" in err


def test_dh_verify_implicit(capsys):
    code, out, _ = run(capsys, "--samples", "20", "dh-verify", "III")
    t = trailer(out)
    assert code == 0 and t["points"] == "20"


def test_usage_errors(capsys):
    assert run(capsys, "bogus")[0] == 3
    assert run(capsys, "dh-verify", "p0", "--zz", "1")[0] == 3
    assert run(capsys, "dh-verify", "q7")[0] == 3
    code, _, err = run(capsys, "cond-invariance", "wave", "{d/dx1 +* 2}")
    assert code == 3 and "^" in err


def test_missing_session_file(capsys, tmp_path):
    assert run(capsys, "--session", str(tmp_path / "nope.cs"), "check-rank", "{d/dx1}")[0] == 3


def test_seed_sources(capsys, monkeypatch):
    _, out, _ = run(capsys, "check-rank", "{d/dx1}")
    assert trailer(out)["seed"] == "0"
    monkeypatch.setenv("CONDSYM_SEED", "11")
    _, out, _ = run(capsys, "check-rank", "{d/dx1}")
    assert trailer(out)["seed"] == "11"
    _, out, _ = run(capsys, "--seed", "5", "check-rank", "{d/dx1}")
    assert trailer(out)["seed"] == "5"


def test_session_file(capsys, tmp_path):
    f = tmp_path / "s.cs"
    f.write_text(
        "var x0, x1, x2, x3\ndep u\nfunc F/1\nset seed = 4\n"
        "pde w: D2(u,x0,x0) - D2(u,x1,x1) - D2(u,x2,x2) - D2(u,x3,x3) - F(u) = 0\n"
        "Q1 = d/dx1 - d/dx0\nQ2 = d/dx2\nQ3 = d/dx3\nfamily T = {Q1, Q2, Q3}\n"
        "run cond-invariance w T\n"
    )
    code, out, _ = run(capsys, "--session", str(f), "session")
    assert code == 0
    assert trailer(out)["seed"] == "4"
    code, out, _ = run(capsys, "--session", str(f), "cond-invariance", "w", "T", "--alt")
    assert code == 0


@pytest.mark.parametrize("argv", [
    ("check-rank", "{d/dx1, u*d/dx1}"),
    ("dh-verify", "n3"),
    ("reduce", "wave", "ANSATZ(u=phi(w), w=x0*x1)"),
])
def test_byte_identical_reports(capsys, argv):
    a = run(capsys, "--seed", "9", *argv)
    b = run(capsys, "--seed", "9", *argv)
    assert a == b
