import shutil
import subprocess
import sys

import pytest

from omqkit import cli

HERED = "schema HD/1 parent/2\naxiom exists parent.HD sub HD\nquery aq HD\n"
INFECTION = "schema L/1 Li/1 parent/2\naxiom L or Li sub B\nquery aq B\n"
DATA = "HD(a) parent(b,a)\n"


@pytest.fixture
def files(tmp_path):
    def put(name, text):
        p = tmp_path / name
        p.write_text(text)
        return str(p)
    return put


def run(capsys, *argv):
    code = cli.run(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_reports_kind_and_errors(files, capsys):
    code, out, _ = run(capsys, "check", files("q.omq", HERED))
    assert code == 0 and out
    code, _, err = run(capsys, "check", files("bad.dl", "goal(X) :- A(X)\nbot :- .\n"))
    assert code == 2 and "line" in err


@pytest.mark.parametrize("engine", ["template", "ddlog", "msnp"])
def test_eval_engines_agree(files, capsys, engine):
    code, out, _ = run(capsys, "eval", "--engine", engine, files("h.omq", HERED), files("d.facts", DATA))
    assert code == 0 and out == "a\nb\n"


def test_eval_boolean(files, capsys):
    query = files("b.omq", "schema A/1 R/2\nquery baq A\n")
    assert run(capsys, "eval", query, files("d1.facts", "A(a)"))[1] == "true\n"
    assert run(capsys, "eval", query, files("d2.facts", "R(a,b)"))[1] == "false\n"


def test_compile_chain_preserves_answers(files, capsys, tmp_path):
    query = files("h.omq", HERED)
    d = files("d.facts", DATA)
    prog = str(tmp_path / "h.dl")
    assert run(capsys, "compile", "--from", "alc-aq", "--to", "mddlog", query, prog)[0] == 0
    formula = str(tmp_path / "h.msnp")
    assert run(capsys, "compile", "--from", "mddlog", "--to", "commsnp", prog, formula)[0] == 0
    fam = str(tmp_path / "h.tpl")
    assert run(capsys, "template", query, fam)[0] == 0
    for path in (prog, formula, fam):
        code, out, _ = run(capsys, "eval", path, d)
        assert code == 0 and out == "a\nb\n", path
    assert run(capsys, "eval", "--engine", "msnp", fam, d)[1] == "a\nb\n"
    back = str(tmp_path / "back.omq")
    assert run(capsys, "template", "--invert", fam, back)[0] == 0
    assert run(capsys, "eval", back, d)[1] == "a\nb\n"


def test_compile_to_ucq(files, capsys):
    code, out, _ = run(capsys, "compile", "--from", "mddlog", "--to", "alc-ucq",
                       files("p.dl", "P(X) :- A(X).\ngoal(X) :- P(X).\n"))
    assert code == 0 and "query ucq" in out


def test_contain(files, capsys):
    query = files("h.omq", HERED)
    assert run(capsys, "contain", query, query)[1].startswith("contained")
    empty = files("e.omq", "schema HD/1 parent/2\nquery aq HD\n")
    assert run(capsys, "contain", empty, query)[1].startswith("contained")
    code, out, _ = run(capsys, "contain", query, empty)
    assert code == 0 and out.startswith("not-contained")


def test_fodef_and_datalogdef(files, capsys):
    assert run(capsys, "fodef", files("h.omq", HERED))[1] == "not-fo-rewritable\n"
    assert run(capsys, "fodef", files("i.omq", INFECTION))[1] == "fo-rewritable\n"
    code, out, _ = run(capsys, "datalogdef", files("h2.omq", HERED))
    assert code == 3 and "unsupported" in out


def test_error_exit_codes(files, capsys, tmp_path):
    assert run(capsys, "check", str(tmp_path / "missing.omq"))[0] == 4
    big = files("big.facts", " ".join(f"parent(p{i},p{i + 1})" for i in range(12)))
    code = run(capsys, "fodef", "--max-product", "1", files("h.omq", HERED))[0]
    assert code == 3
    assert run(capsys, "eval", "--engine", "msnp", files("h3.omq", HERED), big)[0] == 0


def test_output_is_byte_stable(files, capsys):
    query = files("i.omq", INFECTION)
    first = run(capsys, "template", query)[1]
    assert first == run(capsys, "template", query)[1]


@pytest.mark.skipif(shutil.which("omqkit") is None, reason="console script not installed")
def test_console_script():
    res = subprocess.run(["omqkit", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip().startswith("omqkit")


def test_module_entry_point(files):
    res = subprocess.run([sys.executable, "-m", "omqkit", "check", files("h.omq", HERED)],
                         capture_output=True, text=True)
    assert res.returncode == 0
