from __future__ import annotations

import json
import math
import subprocess
import sys

import pytest

from coolwalk import __version__
from coolwalk.cli import main, spec_hash

MINIMAL = {
    "env": {"s": 1.5, "b": 1.0},
    "cooling": {"kind": "constant", "T": 1},
    "budget": {"replicas": 10, "n": 100, "master_seed": 5},
}


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def data_rows(text):
    return [l for l in text.splitlines() if not l.startswith("#")]


def test_simulate_minimal(tmp_path):
    spec = write(tmp_path / "spec.json", MINIMAL)
    assert main(["simulate", "--spec", spec, "--out", str(tmp_path / "o")]) == 0
    text = (tmp_path / "o" / "samples.csv").read_text()
    lines = text.splitlines()
    assert lines[:3] == [f"# coolwalk {__version__}", f"# spec_sha256 {spec_hash(MINIMAL)}", "# seed 5"]
    rows = data_rows(text)
    assert rows[0] == "replica,x" and len(rows) == 11
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["replicas"] == 10 and summary["_meta"]["spec_sha256"] == spec_hash(MINIMAL)
    assert set(summary["quantiles"]) >= {"0.5"}


def test_simulate_byte_identical(tmp_path):
    spec = write(tmp_path / "spec.json", MINIMAL)
    for d in ("a", "b"):
        assert main(["simulate", "--spec", spec, "--seed", "77", "--out", str(tmp_path / d)]) == 0
    for name in ("samples.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert main(["simulate", "--spec", spec, "--seed", "78", "--out", str(tmp_path / "c")]) == 0
    assert (tmp_path / "a" / "samples.csv").read_bytes() != (tmp_path / "c" / "samples.csv").read_bytes()


def test_spec_not_mutated(tmp_path):
    spec = {**MINIMAL, "analysis": {"centering": {"kind": "linear_speed"}, "scaling": {"kind": "n_pow_inv_s"},
                                    "tests": [{"kind": "ks", "threshold": 1.0}]}}
    path = write(tmp_path / "spec.json", spec)
    before = (tmp_path / "spec.json").read_bytes()
    assert main(["verify", "--spec", path, "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "spec.json").read_bytes() == before
    # plot-ready tables
    assert data_rows((tmp_path / "o" / "ks0_overlay.csv").read_text())[0] == "x,empirical_cdf,law_cdf"
    hist = data_rows((tmp_path / "o" / "histogram.csv").read_text())
    assert hist[0] == "bin_lo,bin_hi,count,density" and sum(int(r.split(",")[2]) for r in hist[1:]) == 10


def test_unknown_cooling_kind(tmp_path, capsys):
    spec = write(tmp_path / "spec.json", {**MINIMAL, "cooling": {"kind": "zigzag"}})
    assert main(["simulate", "--spec", spec, "--out", str(tmp_path)]) == 2
    assert "cooling.kind" in capsys.readouterr().err


@pytest.mark.parametrize("content", ["{not json", "[1, 2]"])
def test_invalid_spec_text(tmp_path, content):
    (tmp_path / "spec.json").write_text(content)
    assert main(["simulate", "--spec", str(tmp_path / "spec.json"), "--out", str(tmp_path)]) == 2


def test_missing_fields(tmp_path, capsys):
    spec = write(tmp_path / "spec.json", {"env": {"s": 1.5, "b": 1.0}, "cooling": {"kind": "constant"}})
    assert main(["simulate", "--spec", spec, "--out", str(tmp_path)]) == 2
    assert "budget" in capsys.readouterr().err
    spec = write(tmp_path / "spec.json", {**MINIMAL, "env": {"s": 2.5, "b": 1.0}})
    assert main(["simulate", "--spec", spec, "--out", str(tmp_path)]) == 2
    assert main(["simulate", "--out", str(tmp_path)]) == 2


def test_budget_exceeded(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("COOLWALK_STEP_BUDGET", "500")
    spec = write(tmp_path / "spec.json", MINIMAL)
    assert main(["simulate", "--spec", spec, "--out", str(tmp_path)]) == 3
    assert "COOLWALK_STEP_BUDGET" in capsys.readouterr().err


def test_verify_failed_verdict_still_writes_report(tmp_path):
    spec = {**MINIMAL, "budget": {"replicas": 200, "n": 400, "master_seed": 1},
            "analysis": {"tests": [{"kind": "ks", "target": {"kind": "gaussian", "sigma": 3.0}, "threshold": 0.05}]}}
    path = write(tmp_path / "spec.json", spec)
    assert main(["verify", "--spec", path, "--out", str(tmp_path / "o")]) == 4
    report = json.loads((tmp_path / "o" / "verify_report.json").read_text())
    assert report["passed"] is False and report["results"][0]["test"] == "experiment/ks"


def test_verify_conditions_only_preset(tmp_path):
    assert main(["verify", "--preset", "conditions-only", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "verify_report.json").read_text())
    assert len(report["results"]) == 6 and all(r["passed"] for r in report["results"])
    assert (tmp_path / "verdicts_conditions.json").exists()


def test_unknown_preset(tmp_path):
    assert main(["verify", "--preset", "nope", "--out", str(tmp_path)]) == 2


def test_dist_gaussian_cdf(tmp_path):
    law = write(tmp_path / "law.json", {"kind": "gaussian", "sigma": 1.0})
    out = tmp_path / "cdf.csv"
    assert main(["dist", "--spec", law, "--what", "cdf", "--grid=-1:1:3", "--out", str(out)]) == 0
    rows = data_rows(out.read_text())
    assert rows[0] == "x,cdf"
    assert float(rows[2].split(",")[1]) == pytest.approx(0.5, abs=1e-9)


def test_dist_stable_cf_modulus(tmp_path):
    law = write(tmp_path / "law.json", {"kind": "stable", "s": 1.5, "b": 1.0})
    out = tmp_path / "cf.csv"
    assert main(["dist", "--spec", law, "--what", "cf", "--grid=-3:3:13", "--out", str(out)]) == 0
    for row in data_rows(out.read_text())[1:]:
        u, re, im = map(float, row.split(","))
        assert math.hypot(re, im) == pytest.approx(math.exp(-abs(u) ** 1.5), abs=1e-15)


def test_dist_tempered_sample_deterministic(tmp_path):
    law = write(tmp_path / "law.json", {"kind": "tempered", "lambda": {"c": 1.0, "s": 1.5,
                                                                         "a": {"kind": "linear_ramp", "r": 1.0}}})
    for name in ("a.csv", "b.csv"):
        assert main(["dist", "--spec", law, "--what", "sample", "--count", "100000", "--seed", "9",
                     "--out", str(tmp_path / name)]) == 0
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    assert len(data_rows((tmp_path / "a.csv").read_text())) == 100001


def test_dist_invalid_law(tmp_path, capsys):
    law = write(tmp_path / "law.json", {"kind": "cauchy"})
    assert main(["dist", "--spec", law, "--out", str(tmp_path / "x.csv")]) == 2
    assert "law.kind" in capsys.readouterr().err


def test_console_script(tmp_path):
    spec = write(tmp_path / "spec.json", {**MINIMAL, "cooling": {"kind": "warp"}})
    proc = subprocess.run([sys.executable, "-m", "coolwalk.cli", "simulate", "--spec", spec, "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 2 and "cooling.kind" in proc.stderr
