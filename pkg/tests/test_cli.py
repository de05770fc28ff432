"""End-to-end CLI behavior: exit codes, JSON reports, and the SDP export."""

import json

import pytest

from pistab.cli import main
from pistab.sdpsolve import read_standard, solve

HEAT_1D = """\
dim 1
n 1
box 0 1
delta 2
term 2 : [1]
bc 1 0 0 a : [1]
bc 1 1 0 b : [1]
"""

from pistab import models

INCONSISTENT = models.inconsistent_example()


@pytest.fixture()
def heat_path(tmp_path):
    p = tmp_path / "heat.pde"
    p.write_text(HEAT_1D)
    return str(p)


def test_check_ok(heat_path, capsys):
    assert main(["check", heat_path]) == 0
    assert "admissible" in capsys.readouterr().out


def test_check_inconsistent(tmp_path, capsys):
    p = tmp_path / "bad.pde"
    p.write_text(INCONSISTENT)
    assert main(["check", str(p), "--json"]) == 1
    report = json.loads(capsys.readouterr().out)
    assert report["consistent"] is False
    assert "witness" in report


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "broken.pde"
    p.write_text("dim nope\n")
    assert main(["check", str(p)]) == 2
    assert "error" in capsys.readouterr().err


def test_missing_file_exit_code(capsys):
    assert main(["check", "/nonexistent/spec.pde"]) == 2


def test_convert_json(heat_path, capsys):
    assert main(["convert", heat_path, "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["summary"]["T"]["shape"] == [1, 1]
    assert "cells" in report["T"] or "cells" in report["summary"]["T"]


def test_stability_feasible(heat_path, capsys):
    code = main(["stability", heat_path, "--k", "5.0", "--json"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["feasible"] is True
    assert report["replay"]["ok"] is True
    assert report["gain"] > 0.0


def test_stability_infeasible(heat_path, capsys):
    code = main(["stability", heat_path, "--k", "11.0", "--json"])
    assert code == 1
    report = json.loads(capsys.readouterr().out)
    assert report["status"] == "Infeasible"


def test_bisect(heat_path, capsys, tmp_path):
    out = tmp_path / "report.json"
    code = main([
        "bisect", heat_path, "--k-range", "8", "12", "--tol", "0.01",
        "--json", "--out", str(out),
    ])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert abs(report["k_max"] - 9.8696) < 0.05
    saved = json.loads(out.read_text())
    assert saved["k_max"] == report["k_max"]


def test_verify_subcommand(heat_path, capsys):
    assert main(["verify", heat_path, "--trials", "5", "--json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["failures"] == []


def test_export_sdp_round_trip(heat_path, tmp_path, capsys):
    out = tmp_path / "prob.dat-s"
    assert main([
        "export-sdp", heat_path, "--k", "5.0", "--out", str(out),
    ]) == 0
    prob = read_standard(out.read_text())
    sol = solve(prob)
    assert sol.status == "Feasible"


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
