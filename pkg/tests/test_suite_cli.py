import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from fba import __version__
from fba.cli import main
from fba.hilbert import load_coefficients
from fba.suite import SUMMARY_FIELDS, SuiteError, default_suite_path, load_suite, run_suite
from fba.wavegen import GroundTruthSpec, read_waveform_json, synthesize, write_waveform

SMALL = """\
seed: 3
defaults: {duration: 0.5, snr_db: 60}
tests:
  - {name: ss, group: SS, a0: 0.9, f0: 50}
  - {name: am, group: AM, a0: 0.6, f0: 50, dynamics: [{kind: AM, a: 0.1, f: 2}]}
  - {name: step, group: AS, a0: 0.6, f0: 50, duration: 0.4, srs: true,
     dynamics: [{kind: AS, a: 0.1, t: 0.2}]}
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "suite.yaml"
    p.write_text(SMALL)
    return p


def tree(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


# ------------------------------------------------------------------ config

def test_empty_suite(tmp_path):
    p = tmp_path / "e.yaml"
    p.write_text("tests: []\n")
    res = run_suite(load_suite(p), tmp_path / "out")
    assert res == []
    rows = list(csv.reader(line for line in (tmp_path / "out" / "summary.csv").read_text()
                           .splitlines() if not line.startswith("#")))
    assert rows == [SUMMARY_FIELDS]
    assert json.loads((tmp_path / "out" / "summary.json").read_text())["tests"] == []


def test_blank_file_is_empty_suite(tmp_path):
    p = tmp_path / "e.yaml"
    p.write_text("")
    assert load_suite(p).tests == ()


@pytest.mark.parametrize("body, needle", [
    ("tests:\n  - {name: bad, a0: 0.6, f0: 50, dynamics: [{kind: AM, a: 0.9, f: 2}]}\n", "'bad'"),
    ("tests:\n  - {name: odd, a0: 0.6, f0: 50, colour: red}\n", "'odd'"),
    ("tests:\n  - {name: nostep, a0: 0.6, f0: 50, srs: true}\n", "'nostep'"),
    ("tests:\n  - {name: short, a0: 0.6, f0: 50, duration: 0.01}\n", "'short'"),
    ("tests:\n  - {name: cfg, a0: 0.6, f0: 50, pipeline: {L_FR: 900}}\n", "'cfg'"),
    ("tests:\n  - {name: a, a0: 0.6, f0: 50}\n  - {name: a, a0: 0.6, f0: 51}\n", "duplicate"),
    ("tests:\n  - {name: a, a0: 0.6, f0: 50, output: x}\n"
     "  - {name: b, a0: 0.6, f0: 51, output: x}\n", "duplicate test outputs"),
    ("tests: [\n", "suite.yaml"),
    ("extra: 1\n", "unknown keys"),
])
def test_config_errors_name_the_test(tmp_path, body, needle):
    p = tmp_path / "suite.yaml"
    p.write_text(body)
    with pytest.raises(SuiteError, match=needle):
        load_suite(p)


def test_default_suite_covers_all_families():
    suite = load_suite(default_suite_path())
    groups = {t.group for t in suite.tests}
    assert {"SS", "AM(0.1)", "AM(0.5)", "PM(0.1)", "PM(0.5)", "FR(1)", "FR(5)", "FR(10)",
            "AS", "PS", "AM/PM", "AS/PS+FR"} <= groups
    ss = sorted(t.spec.f0 for t in suite.tests if t.group == "SS")
    assert ss == [float(f) for f in range(45, 56)]
    assert len({t.output for t in suite.tests}) == len(suite.tests)
    assert all(t.srs for t in suite.tests if t.group in ("AS", "PS"))


def test_with_seed(small):
    s = load_suite(small)
    assert {t.seed for t in s.tests} == {3}
    assert {t.seed for t in s.with_seed(11).tests} == {11}


# ------------------------------------------------------------------ running

@pytest.fixture(scope="module")
def small_out(tmp_path_factory):
    base = tmp_path_factory.mktemp("suite")
    p = base / "suite.yaml"
    p.write_text(SMALL)
    res = run_suite(load_suite(p), base / "a")
    return base, p, res


def test_suite_artifacts(small_out):
    base, _, res = small_out
    assert all(r.ok for r in res)
    names = set(tree(base / "a"))
    assert {"ss_reports.csv", "ss_metrics.csv", "am_reports.csv", "step_srs.csv",
            "summary.csv", "summary.json"} <= names
    head = json.loads((base / "a" / "ss_reports.csv").read_text().splitlines()[0][2:])
    assert head["seed"] == 3 and head["version"] == __version__ and head["test"] == "ss"
    doc = json.loads((base / "a" / "summary.json").read_text())
    assert [g["group"] for g in doc["groups"]] == ["SS", "AM", "AS"]
    step = next(g for g in doc["groups"] if g["group"] == "AS")
    assert step["srs_D_T_ms"] < 2.0


def test_suite_rerun_byte_identical(small_out):
    base, p, _ = small_out
    assert main(["suite", str(p), "-o", str(base / "b"), "-j", "2"]) == 0
    assert tree(base / "a") == tree(base / "b")


def test_suite_seed_override_changes_outputs(small_out):
    base, p, _ = small_out
    assert main(["suite", str(p), "-o", str(base / "c"), "--seed", "4"]) == 0
    a, c = tree(base / "a"), tree(base / "c")
    assert a["ss_reports.csv"] != c["ss_reports.csv"]


def test_suite_failure_exit_status(tmp_path, monkeypatch):
    p = tmp_path / "s.yaml"
    p.write_text("tests:\n  - {name: ok, a0: 0.6, f0: 50, duration: 0.2}\n")
    import fba.suite as suite_mod

    def boom(*a, **k):
        raise RuntimeError("disk full")

    monkeypatch.setattr(suite_mod, "write_reports_csv", boom)
    assert main(["suite", str(p), "-o", str(tmp_path / "o")]) == 1
    doc = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert doc["tests"][0]["ok"] is False and "disk full" in doc["tests"][0]["error"]


def test_suite_config_error_exit_status(tmp_path, capsys):
    p = tmp_path / "s.yaml"
    p.write_text("tests:\n  - {name: broken, a0: -1, f0: 50}\n")
    assert main(["suite", str(p), "-o", str(tmp_path / "o")]) == 2
    assert "broken" in capsys.readouterr().err


# --------------------------------------------------------------- single file

def test_analyze_recording(tmp_path):
    w = synthesize(GroundTruthSpec(0.9, 50.0), 10_000, 1.0, 60, 0)
    src = tmp_path / "rec.txt"
    write_waveform(w, src)
    out = tmp_path / "rep.csv"
    assert main(["analyze", str(src), "-o", str(out)]) == 0
    rows = list(csv.DictReader(out.read_text().splitlines()[1:]))
    assert rows and {r["classification"] for r in rows} == {"SS"}


def test_analyze_json_with_config(tmp_path):
    w = synthesize(GroundTruthSpec(0.9, 50.0), 10_000, 0.5)
    src = tmp_path / "rec.txt"
    write_waveform(w, src)
    cfg = tmp_path / "p.yaml"
    cfg.write_text("pipeline: {L_FR: 256}\n")
    out = tmp_path / "rep.json"
    assert main(["analyze", str(src), "-o", str(out), "-c", str(cfg)]) == 0
    doc = json.loads(out.read_text())
    assert doc["meta"]["pipeline"]["L_FR"] == 256 and doc["reports"]


def test_analyze_truncated_file(tmp_path, capsys):
    w = synthesize(GroundTruthSpec(0.9, 50.0), 10_000, 0.2)
    src = tmp_path / "rec.txt"
    write_waveform(w, src)
    lines = src.read_text().splitlines()
    src.write_text("\n".join(lines[:-5]) + "\n")
    assert main(["analyze", str(src), "-o", str(tmp_path / "r.csv")]) == 2
    assert "error" in capsys.readouterr().err


def test_analyze_missing_file(tmp_path):
    assert main(["analyze", str(tmp_path / "none.txt"), "-o", str(tmp_path / "r.csv")]) == 2


def test_synthesize_command(tmp_path):
    out = tmp_path / "w.json"
    spec = '{"a0": 0.6, "f0": 50, "dynamics": [{"kind": "PS", "a": 0.1, "t": 0.05}]}'
    assert main(["synthesize", spec, "-o", str(out), "--duration", "0.1", "--snr-db", "40",
                 "--seed", "2"]) == 0
    w = read_waveform_json(out)
    ref = synthesize(GroundTruthSpec.from_dict(json.loads(spec)), 10_000, 0.1, 40, 2)
    assert np.array_equal(w.samples, ref.samples)


def test_synthesize_bad_spec(tmp_path):
    assert main(["synthesize", '{"a0": 0.6, "f0": 50, "dynamics": [{"kind": "AM", "a": 2, "f": 1}]}',
                 "-o", str(tmp_path / "w.txt")]) == 2


# ------------------------------------------------------------------- filters

def test_design_filter(tmp_path, capsys):
    out = tmp_path / "h.coef"
    assert main(["design-filter", "--length", "31", "--band", "0.1pi", "-o", str(out)]) == 0
    f = load_coefficients(out)
    assert len(f.coefficients) == 31
    assert "ripple" in capsys.readouterr().out


def test_design_cascade(tmp_path):
    stem = tmp_path / "h1"
    assert main(["design-filter", "--prototype-length", "16", "--length", "27",
                 "--ripple", "0.004", "-o", str(stem)]) == 0
    assert (tmp_path / "h1_prototype.coef").exists() and (tmp_path / "h1_subfilter.coef").exists()


def test_design_ripple_target_missed(tmp_path):
    assert main(["design-filter", "--length", "27", "--ripple", "0.004",
                 "-o", str(tmp_path / "h.coef")]) == 1


def test_design_bad_band(tmp_path):
    assert main(["design-filter", "--length", "27", "--band", "2pi",
                 "-o", str(tmp_path / "h.coef")]) == 2


def test_version():
    r = subprocess.run([sys.executable, "-m", "fba.cli", "--version"], capture_output=True,
                       text=True)
    assert r.returncode == 0 and r.stdout.strip() == f"fba {__version__}"
