import json
import subprocess
import sys

import pytest

from secondlaw.cli import EXIT_ERROR, EXIT_OK, EXIT_VIOLATION, main


def test_list_builtins(capsys):
    assert main(["list-builtins"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "swap-thermalization" in out and "lazy-demon-sweep" in out


def test_run_table(capsys):
    assert main(["run", "swap-thermalization"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split("\t")[1] == "entropic_form"
    assert "holds" in lines[1]


def test_run_records(capsys):
    assert main(["run", "two-bath-heat-flow", "--format", "records"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["scenario"] == "two-bath-heat-flow"
    clausius = next(r for r in doc["records"] if r["name"] == "clausius")
    assert clausius["slack"] == pytest.approx(0.1937533100820209, abs=1e-12)


def test_run_file_with_out(tmp_path, capsys):
    from secondlaw.scenarios import builtin_text

    src = tmp_path / "scn.yaml"
    src.write_text(builtin_text("swap-thermalization"))
    assert main(["run", str(src), "--out", str(tmp_path / "out")]) == EXIT_OK
    written = capsys.readouterr().out.split()
    assert any(p.endswith(".records.json") for p in written)
    assert (tmp_path / "out" / "swap-thermalization.clausius.tsv").is_file()


def test_sweep(capsys):
    code = main(["sweep", "swap-thermalization", "--param", "layout.1.beta", "--grid", "0.5,1.0,2.0"])
    assert code == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("layout.1.beta\t")
    assert [ln.split("\t")[0] for ln in lines[1:4]] == ["0.5", "1.0", "2.0"]


def test_violation_exit(capsys):
    assert main(["run", "lazy-demon-sweep"]) == EXIT_VIOLATION
    assert "ci_violation" in capsys.readouterr().out


def test_errors(capsys, tmp_path):
    assert main(["run", "no-such-builtin"]) == EXIT_ERROR
    assert main(["run", "swap-thermalization", "--tol", "tol_bogus=1"]) == EXIT_ERROR
    assert main(["sweep", "swap-thermalization", "--param", "layout.9.beta", "--grid", "1"]) == EXIT_ERROR
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: x\nseed: 0\nlayout: 3\n")
    assert main(["run", str(bad)]) == EXIT_ERROR
    err = capsys.readouterr().err
    assert err.count("error:") == 4


def test_tol_override_changes_verdict(capsys):
    # a huge slack tolerance turns the demon's violations into holds
    assert main(["run", "lazy-demon-sweep", "--tol", "tol_slack=10"]) == EXIT_OK


def test_seed_override(capsys):
    main(["run", "xmachine-qutrit", "--seed", "3", "--format", "records"])
    assert json.loads(capsys.readouterr().out)["seed"] == 3


def test_verify_subset(capsys):
    assert main(["verify", "--only", "2,10"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("[PASS]") == 2 and "2/2 checks passed" in out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "secondlaw", "list-builtins"], capture_output=True, text=True)
    assert res.returncode == 0 and "landauer-erasure" in res.stdout
