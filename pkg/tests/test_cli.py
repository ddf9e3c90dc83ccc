import io

import pytest

from aic import cli
from aic.properties import Failure, PropertyResult

from conftest import PROGRAMS


def aic(*argv):
    out = io.StringIO()
    code = cli.main([str(a) for a in argv], out)
    return code, out.getvalue()


def test_check_report():
    code, out = aic("check", PROGRAMS / "read_write.aic", "--report")
    assert code == 0
    assert out.splitlines() == ["type: !Reg r 1 -o B", "effect: {}", "usage r = <1,1> aff"]


def test_check_short():
    code, out = aic("check", PROGRAMS / "unit.aic", "--stratified")
    assert code == 0 and out == "ok (effects+stratified): 1\n"


def test_type_error(capsys):
    code, _ = aic("check", PROGRAMS / "race_values.aic", "--confluent")
    assert code == 1
    assert "usage-clash" in capsys.readouterr().err


def test_formation_error(capsys):
    code, _ = aic("check", PROGRAMS / "divergent.aic", "--stratified")
    assert code == 1
    assert "self-reference" in capsys.readouterr().err


def test_parse_error(tmp_path, capsys):
    bad = tmp_path / "bad.aic"
    bad.write_text("program (\\x:1. x\n")
    code, _ = aic("fmt", bad)
    assert code == 2
    assert capsys.readouterr().err.startswith(f"{bad}:")


def test_missing_file():
    assert aic("fmt", "/nonexistent/file.aic")[0] == 2


def test_run_trace():
    code, out = aic("run", PROGRAMS / "read_write_app.aic", "--trace")
    lines = out.splitlines()
    assert code == 0
    assert lines[0].startswith("step 1: beta@thread 0")
    assert lines[4] == "NormalForm after 4 step(s)"
    assert lines[5] == "* | *"
    assert lines[6] == "quiescent: 2 value thread(s), 0 store(s)"


def test_run_budget():
    code, out = aic("run", PROGRAMS / "divergent.aic", "--max-steps", 50, "--scheduler", "seeded")
    assert code == 4 and "StepLimit after 50 step(s)" in out


def test_explore():
    code, out = aic("explore", PROGRAMS / "race_volatile.aic")
    assert code == 0
    assert "normal forms: 2" in out and "diamond violations: 0" not in out


def test_explore_budget():
    code, out = aic("explore", PROGRAMS / "divergent.aic", "--max-states", 3)
    assert code == 4 and "state budget exceeded" in out


def test_translate():
    code, out = aic("translate", PROGRAMS / "read_write_app.aic")
    assert code == 0 and "pset(r, *)" in out and "!" not in out


def test_simulate():
    code, out = aic("simulate", PROGRAMS / "read_write_app.aic", "--scheduler", "leftmost")
    assert code == 0
    assert out.splitlines()[-1] == "Simulated(4 steps)"
    assert "residual [r <= *]" in out


def test_prop_ok():
    code, out = aic("prop", "roundtrip", "--n", 5, "--seed", 3)
    assert code == 0 and out.startswith("roundtrip: 5 cases, 0 failure(s)")


def test_prop_failure_exit_code(monkeypatch):
    def broken(n, cfg):
        return PropertyResult("broken", n, [Failure(0, "program *\n", "always fails")])

    monkeypatch.setitem(cli.PROPERTIES, "roundtrip", broken)
    code, out = aic("prop", "roundtrip", "--n", 2)
    assert code == 3 and "always fails" in out


def test_fmt_is_idempotent(tmp_path):
    code, first = aic("fmt", PROGRAMS / "caller_app.aic")
    again = tmp_path / "again.aic"
    again.write_text(first)
    assert code == 0 and aic("fmt", again)[1] == first


def test_unknown_command():
    with pytest.raises(SystemExit):
        aic("frobnicate")
