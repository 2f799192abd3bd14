import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from conftest import write_diamond
from ebgkit.cli import main

FIXTURES = Path(__file__).parent / "fixtures"
GOLDEN = Path(__file__).parent / "golden"


def cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_run_prints_the_integer(capsys):
    assert cli(capsys, "run", FIXTURES / "lazy.ebg") == (0, "1\n", "")


def test_run_closure_result(capsys):
    code, out, _ = cli(capsys, "run", FIXTURES / "m1.ebg")
    assert (code, out) == (0, "<closure>\n")


def test_divergence_exits_5(capsys):
    code, _, err = cli(capsys, "run", FIXTURES / "diverge.ebg", "--fuel", 1000)
    assert code == 5 and "fuel" in err


def test_dump_ebgvm_prints_the_golden_listing(capsys):
    code, out, _ = cli(capsys, "dump-ir", FIXTURES / "m1.ebg", "--stage=ebgvm")
    expected = (GOLDEN / "m1_ebgvm.txt").read_text()
    assert code == 0
    assert "".join(out.split()) == "".join(expected.split())


@pytest.mark.parametrize("stage,marker", [
    ("ast", 'Lam "x"'),
    ("mujava", "ClassDef"),
    ("lifted", "closure $4 apply(z)"),
    ("target", "VMThunk 5"),
])
def test_dump_other_stages(capsys, stage, marker):
    code, out, _ = cli(capsys, "dump-ir", FIXTURES / "m1.ebg", f"--stage={stage}")
    assert code == 0 and marker in out


def test_check_all_stages_agree(capsys):
    code, out, _ = cli(capsys, "check", FIXTURES / "m1.ebg", "--stage=all")
    assert code == 0
    assert out.splitlines() == ["main mujava agree <closure>", "main vm agree <closure>"]


def test_check_divergent_program(capsys):
    code, out, _ = cli(capsys, "check", FIXTURES / "diverge.ebg", "--fuel", 5000)
    assert code == 0 and out.count("both diverge") == 2


def test_check_reports_disagreement(capsys, monkeypatch):
    import ebgkit.cli as cli_module
    from ebgkit.translate import Disagree

    monkeypatch.setattr(cli_module, "check_consistency", lambda *a, **k: Disagree("forced"))
    code, out, _ = cli(capsys, "check", FIXTURES / "lazy.ebg", "--stage=mujava")
    assert code == 1 and "DISAGREE" in out


def test_compile_then_exec_matches_run(capsys, tmp_path):
    app = write_diamond(tmp_path)
    for name in ("Base", "Lib"):
        assert cli(capsys, "compile", tmp_path / f"{name}.ebg")[0] == 0
    image = tmp_path / "App.ebgp"
    assert cli(capsys, "compile", app, "-o", image)[0] == 0
    executed = cli(capsys, "exec", image)
    ran = cli(capsys, "run", app)
    assert executed == ran == (0, "7\n", "")


def test_exec_other_definition_and_trace(capsys, tmp_path):
    write_diamond(tmp_path)
    for name in ("Base", "Lib", "App"):
        cli(capsys, "compile", tmp_path / f"{name}.ebg")
    code, out, err = cli(capsys, "exec", tmp_path / "App.ebgp", "--def", "direct", "--trace")
    assert (code, out) == (0, "4\n")
    assert len(err.splitlines()) > 5


def test_check_multi_package(capsys, tmp_path):
    app = write_diamond(tmp_path)
    code, out, _ = cli(capsys, "check", app)
    assert code == 0
    assert "main vm agree 7" in out and "main mujava agree 7" in out


def test_path_flag_locates_imports(capsys, tmp_path):
    lib = tmp_path / "lib"
    lib.mkdir()
    write_diamond(lib)
    shutil.move(str(lib / "App.ebg"), tmp_path / "App.ebg")
    assert cli(capsys, "run", tmp_path / "App.ebg")[0] == 4
    assert cli(capsys, "run", tmp_path / "App.ebg", "--path", tmp_path / "lib") == (0, "7\n", "")


def test_usage_errors_exit_2(capsys):
    assert cli(capsys, "frobnicate")[0] == 2
    assert cli(capsys)[0] == 2
    assert cli(capsys, "dump-ir", FIXTURES / "m1.ebg")[0] == 2


def test_parse_errors_exit_3(capsys, tmp_path):
    bad = tmp_path / "bad.ebg"
    bad.write_text("def main = (\\x. x")
    code, _, err = cli(capsys, "run", bad)
    assert code == 3 and "1:" in err


def test_runtime_errors_exit_4(capsys, tmp_path):
    bad = tmp_path / "stuck.ebg"
    bad.write_text("def main = 0 1")
    assert cli(capsys, "run", bad)[0] == 4
    assert cli(capsys, "run", tmp_path / "missing.ebg")[0] == 4
    assert cli(capsys, "exec", FIXTURES / "m1.ebg")[0] == 4


def test_module_entry_point():
    result = subprocess.run(
        [sys.executable, "-m", "ebgkit", "run", str(FIXTURES / "lazy.ebg")],
        capture_output=True, text=True, check=False,
    )
    assert (result.returncode, result.stdout) == (0, "1\n")
