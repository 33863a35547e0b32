"""Command-line front end: exit codes, report schema and determinism."""

import io
import json
import subprocess
import sys
from importlib import resources

import jsonschema
import pytest

from anisocancel.cli import run

SCHEMA = json.loads(resources.files("anisocancel").joinpath("report.schema.json").read_text())

CONSTANT_LINE = "dim 2\npattern 1 1\nspaces 2 1\nconstant : 1 ; 0\n"


def call(*argv):
    buf = io.StringIO()
    code = run(list(argv), stdout=buf)
    return code, buf.getvalue()


def call_json(*argv):
    code, text = call(*argv, "--format", "json")
    report = json.loads(text)
    jsonschema.validate(report, SCHEMA)
    assert report["exit_code"] == code
    return code, report


@pytest.fixture
def constant_line(tmp_path):
    p = tmp_path / "constant-line.ops"
    p.write_text(CONSTANT_LINE)
    return str(p)


def test_check_gn3_is_canceling():
    code, rep = call_json("check", "--builtin", "gn3")
    assert code == 0 and rep["result"]["is_canceling"] is True
    assert rep["status"] == "passed" and rep["reason"] is None


def test_check_kms():
    code, rep = call_json("check", "--builtin", "kms kappa=1 lambda=1 N=1")
    assert code == 0 and rep["result"]["v_dim"] == 0


def test_check_constant_line_first_coord_fails(constant_line):
    code, rep = call_json("check", "--spec", constant_line, "--functional", "first-coord")
    assert code == 1 and rep["result"]["is_weakly_canceling"] is False
    assert "weak cancellation" in rep["reason"]


def test_check_constant_line_odd_functional_passes(constant_line):
    code, rep = call_json("check", "--spec", constant_line, "--functional", "zeta:0")
    assert code == 0 and rep["result"]["is_weakly_canceling"] is True


def test_check_constant_line_bundle_only(constant_line):
    code, rep = call_json("check", "--spec", constant_line)
    assert code == 1 and rep["result"]["v_dim"] == 1


def test_extend_gn3():
    code, rep = call_json("extend", "--builtin", "gn3", "--functional", "coord:1")
    assert code == 0
    assert rep["result"]["total_cancellation_residual"] < 1e-8
    assert rep["result"]["restriction_error"] < 1e-12


def test_extend_refuses_non_weakly_canceling(constant_line):
    code, rep = call_json("extend", "--spec", constant_line, "--functional", "first-coord")
    assert code == 1 and "not weakly canceling" in rep["reason"]


def test_bilinear_residue_example():
    code, rep = call_json("bilinear", "--kappa", "1", "--lambda", "1", "--tau1", "0+1i", "--sigma1", "0+1i",
                          "--alpha", "0", "--beta", "0")
    assert code == 0
    re, im = rep["result"]["reduced_integral"]
    assert abs(complex(re, im)) < 1e-10
    assert rep["result"]["vanishes"] is True and rep["result"]["predicted_vanishing"] is True


def test_bilinear_real_parameter_is_usage_error():
    code, rep = call_json("bilinear", "--kappa", "1", "--lambda", "1", "--tau1", "2", "--sigma1", "1i",
                          "--alpha", "0")
    assert code == 2 and rep["status"] == "error" and "non-elliptic" in rep["reason"]


def test_mikhlin_kernels():
    code, rep = call_json("mikhlin", "--kernel", "zeta1", "--pattern", "3/2 1/2")
    assert code == 0 and rep["result"]["passes"] is True
    code, rep = call_json("mikhlin", "--kernel", "one")
    assert code == 1


def test_mikhlin_experiment_small_grid():
    code, rep = call_json("mikhlin", "--kernel", "one", "--experiment", "--grid", "128x128", "--ratios", "3,10")
    assert code == 1 and len(rep["records"]) == 2
    assert rep["records"][1]["value"] > rep["records"][0]["value"]


def test_embed_small_grids(constant_line):
    code, rep = call_json("embed-l2", "--builtin", "gn3", "--grid", "64x16x16", "--family-size", "4",
                          "--ratios", "2,4")
    assert code == 0 and len(rep["records"]) == 2
    code, rep = call_json("embed-linf", "--spec", constant_line, "--input", "near-delta", "--grid", "128x128",
                          "--ratios", "3,10")
    assert code == 0 and rep["result"]["max_ratios"][1] > rep["result"]["max_ratios"][0]


def test_unresolved_window_is_flagged():
    code, rep = call_json("embed-l2", "--builtin", "gn3", "--grid", "64x16x16", "--family-size", "2",
                          "--ratios", "1000")
    assert code == 3 and "unresolved-window" in rep["records"][0]["flags"]


def test_usage_errors(tmp_path):
    code, rep = call_json("check", "--spec", str(tmp_path / "missing.ops"))
    assert code == 2 and rep["reason"]
    code, rep = call_json("check", "--builtin", "nosuch")
    assert code == 2
    bad = tmp_path / "bad.ops"
    bad.write_text("dim 2\npattern 1 1\nspaces 2 1\nterm 1 : 1 ; 0\n")
    code, rep = call_json("check", "--spec", str(bad))
    assert code == 2 and "line 4" in rep["reason"]
    code, rep = call_json("check", "--builtin", "gn3", "--functional", "coord:7")
    assert code == 2


def test_text_report_rounds_to_six_digits():
    code, text = call("mikhlin", "--kernel", "one")
    assert code == 1
    assert "6.28319" in text and "6.283185" not in text


def test_output_file(tmp_path):
    out = tmp_path / "r.json"
    code, text = call("check", "--builtin", "gn3", "--format", "json", "--output", str(out))
    assert code == 0 and text == ""
    jsonschema.validate(json.loads(out.read_text()), SCHEMA)


def test_json_reports_are_byte_identical():
    argv = ("embed-linf", "--builtin", "gn3", "--grid", "64x16x16", "--family-size", "3", "--ratios", "2,4",
            "--seed", "7", "--functional", "coord:1")
    first = call(*argv, "--format", "json")
    second = call(*argv, "--format", "json")
    assert first == second


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "anisocancel", "check", "--builtin", "gn3", "--format", "json"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["is_canceling"] is True
