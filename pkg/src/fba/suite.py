"""Test-suite configuration and batch runner.

A suite is a YAML document::

    seed: 0
    workers: 1
    defaults: {duration: 2.0, snr_db: 60, srs: false, pipeline: {}}
    tests:
      - {name: ss_50, group: SS, a0: 0.6, f0: 50}
      - {name: am_0.1_2.6, group: AM(0.1), a0: 0.6, f0: 50,
         dynamics: [{kind: AM, a: 0.1, f: 2.6}]}

Each test writes ``<output>_reports.csv`` and ``<output>_metrics.csv`` (and
``<output>_srs.csv`` for step-response runs) into the output directory.
``summary.csv`` and ``summary.json`` hold the per-group maxima.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from importlib import resources
from pathlib import Path
from typing import List, Optional

import yaml

from . import __version__
from .metrics import evaluate, srs_run, step_summary, write_metrics_csv, write_srs_csv, summarize
from .pipeline import Pipeline, PipelineConfig, write_reports_csv, write_reports_json
from .wavegen import (RNG_NAME, GroundTruthSpec, SpecError, read_waveform, read_waveform_json,
                      synthesize)

__all__ = ["SuiteError", "TestConfig", "TestSuiteConfig", "TestResult", "load_suite",
           "default_suite_path", "run_suite", "analyze_file", "write_summary", "SUMMARY_FIELDS"]

_SPEC_KEYS = {"a0", "f0", "phi0", "dynamics", "full_scale"}
_TEST_KEYS = _SPEC_KEYS | {"name", "group", "duration", "snr_db", "seed", "srs", "pipeline",
                           "output"}
_SUITE_KEYS = {"seed", "workers", "defaults", "tests"}


class SuiteError(ValueError):
    """Suite configuration problem; the message names the offending test."""


@dataclasses.dataclass(frozen=True)
class TestConfig:
    name: str
    group: str
    spec: GroundTruthSpec
    duration: float
    snr_db: Optional[float]
    seed: int
    srs: bool
    pipeline: PipelineConfig
    output: str


@dataclasses.dataclass(frozen=True)
class TestSuiteConfig:
    tests: tuple
    workers: int = 1
    seed: int = 0

    def with_seed(self, seed: int) -> "TestSuiteConfig":
        """Every test reseeded to ``seed``."""
        tests = tuple(dataclasses.replace(t, seed=int(seed)) for t in self.tests)
        return dataclasses.replace(self, tests=tests, seed=int(seed))


def default_suite_path() -> Path:
    return Path(str(resources.files("fba") / "data" / "default_suite.yaml"))


def _parse_test(item, defaults: dict, seed: int, index: int) -> TestConfig:
    if not isinstance(item, dict):
        raise SuiteError(f"test #{index}: expected a mapping")
    name = item.get("name")
    if not name or not isinstance(name, str):
        raise SuiteError(f"test #{index}: missing name")
    unknown = set(item) - _TEST_KEYS
    if unknown:
        raise SuiteError(f"test {name!r}: unknown keys {sorted(unknown)}")
    merged = {**defaults, **item}
    pipe = {**defaults.get("pipeline", {}), **item.get("pipeline", {})}
    try:
        spec = GroundTruthSpec.from_dict({k: merged[k] for k in _SPEC_KEYS if k in merged})
        if "full_scale" not in pipe:
            pipe["full_scale"] = spec.full_scale
        cfg = PipelineConfig.from_dict(pipe)
        duration = float(merged.get("duration", 2.0))
        snr = merged.get("snr_db")
        t = TestConfig(name, str(merged.get("group", spec.label)), spec, duration,
                       None if snr is None else float(snr), int(merged.get("seed", seed)),
                       bool(merged.get("srs", False)), cfg, str(merged.get("output", name)))
    except (SpecError, ValueError, TypeError) as exc:
        raise SuiteError(f"test {name!r}: {exc}") from None
    if t.srs and not spec.steps:
        raise SuiteError(f"test {name!r}: srs requested without a step")
    if t.duration * cfg.fs < cfg.L:
        raise SuiteError(f"test {name!r}: duration shorter than one window")
    return t


def load_suite(path) -> TestSuiteConfig:
    """Parse and validate a suite file."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise SuiteError(f"{path}: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise SuiteError(f"{path}: top level must be a mapping")
    unknown = set(doc) - _SUITE_KEYS
    if unknown:
        raise SuiteError(f"{path}: unknown keys {sorted(unknown)}")
    seed = int(doc.get("seed", 0))
    defaults = doc.get("defaults") or {}
    tests = [_parse_test(item, defaults, seed, k) for k, item in enumerate(doc.get("tests") or [])]
    names = [t.name for t in tests]
    outs = [t.output for t in tests]
    for label, vals in (("name", names), ("output", outs)):
        dup = sorted({v for v in vals if vals.count(v) > 1})
        if dup:
            raise SuiteError(f"duplicate test {label}s: {dup}")
    return TestSuiteConfig(tuple(tests), max(1, int(doc.get("workers", 1))), seed)


# --------------------------------------------------------------------------
# running

@dataclasses.dataclass
class TestResult:
    name: str
    group: str
    ok: bool
    summary: dict
    files: List[str]
    error: str = ""


def _meta(t: TestConfig) -> dict:
    return {"test": t.name, "seed": t.seed, "snr_db": t.snr_db, "rng": RNG_NAME,
            "duration": t.duration, "spec": t.spec.to_dict(), "pipeline": t.pipeline.to_dict()}


def _run_one(args) -> TestResult:
    t, outdir = args
    out = Path(outdir)
    files = []
    try:
        meta = _meta(t)
        w = synthesize(t.spec, t.pipeline.fs, t.duration, t.snr_db, t.seed)
        reps = Pipeline(t.pipeline, t0=w.t0).run(w.samples)
        recs = evaluate(reps, w)
        p = out / f"{t.output}_reports.csv"
        write_reports_csv(reps, p, meta)
        files.append(p.name)
        p = out / f"{t.output}_metrics.csv"
        write_metrics_csv(recs, p, meta)
        files.append(p.name)
        summ = summarize(recs)["max"]
        if t.srs:
            curve = srs_run(t.spec, t.duration, t.pipeline, t.snr_db, t.seed)
            p = out / f"{t.output}_srs.csv"
            write_srs_csv(curve, p, meta)
            files.append(p.name)
            summ.update({f"srs_{k}": v for k, v in step_summary(curve).items()})
        return TestResult(t.name, t.group, True, summ, files)
    except Exception as exc:  # reported per test; the suite carries on
        return TestResult(t.name, t.group, False, {}, files, f"{type(exc).__name__}: {exc}")


SUMMARY_FIELDS = ["group", "tests", "max_FE_mHz", "max_RFE_Hz_s", "max_TVE_pct", "max_IRFE_Hz_s",
                  "max_TDE", "srs_FE_mHz", "srs_TVE_pct", "srs_D_T_ms", "srs_OS_pct",
                  "srs_step_error"]


def _group_rows(results: List[TestResult]) -> List[dict]:
    groups: dict = {}
    for res in results:
        if res.ok:
            groups.setdefault(res.group, []).append(res.summary)

    def worst(rows, key, scale=1.0):
        vals = [r[key] for r in rows if key in r and math.isfinite(r[key])]
        return max(vals) * scale if vals else math.nan

    out = []
    for g, rows in groups.items():
        out.append({
            "group": g, "tests": len(rows),
            "max_FE_mHz": worst(rows, "FE", 1e3), "max_RFE_Hz_s": worst(rows, "RFE"),
            "max_TVE_pct": worst(rows, "TVE"), "max_IRFE_Hz_s": worst(rows, "IRFE"),
            "max_TDE": worst(rows, "TDE"),
            "srs_FE_mHz": worst(rows, "srs_FE", 1e3), "srs_TVE_pct": worst(rows, "srs_TVE"),
            "srs_D_T_ms": worst(rows, "srs_D_T", 1e3), "srs_OS_pct": worst(rows, "srs_OS"),
            "srs_step_error": worst(rows, "srs_step_error"),
        })
    return out


def _num(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, int):
        return str(v)
    return "" if not math.isfinite(v) else f"{v:.6g}"


def write_summary(results: List[TestResult], outdir, meta: Optional[dict] = None) -> None:
    """``summary.csv`` (one row per group) and ``summary.json`` (groups and tests)."""
    out = Path(outdir)
    rows = _group_rows(results)
    head = {"generator": "fba", "version": __version__, **(meta or {})}
    buf = io.StringIO()
    buf.write("# " + json.dumps(head, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_FIELDS)
    for row in rows:
        w.writerow([_num(row[k]) for k in SUMMARY_FIELDS])
    (out / "summary.csv").write_text(buf.getvalue(), encoding="ascii")

    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v

    doc = {"meta": head,
           "groups": [{k: clean(v) for k, v in row.items()} for row in rows],
           "tests": [{"name": r.name, "group": r.group, "ok": r.ok, "error": r.error,
                      "files": r.files, "max": {k: clean(v) for k, v in r.summary.items()}}
                     for r in results]}
    (out / "summary.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n",
                                      encoding="ascii")


def run_suite(suite: TestSuiteConfig, outdir, workers: Optional[int] = None) -> List[TestResult]:
    """Run every test and write all artifacts; results keep the suite order."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    n = workers or suite.workers
    jobs = [(t, str(out)) for t in suite.tests]
    if n > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(n) as ex:
            results = list(ex.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    write_summary(results, out, {"tests": len(results), "seed": suite.seed})
    return results


def _read_any(path: Path):
    if path.suffix.lower() == ".json":
        return read_waveform_json(path)
    return read_waveform(path)


def analyze_file(path, output, config: Optional[PipelineConfig] = None) -> int:
    """Analyse a recorded waveform file and write its reports; returns the count.

    The output format follows the suffix of ``output`` (``.json`` or CSV).
    """
    path = Path(path)
    w = _read_any(path)
    cfg = config or PipelineConfig(fs=w.fs, full_scale=w.full_scale)
    if abs(cfg.fs - w.fs) > 1e-9 * w.fs:
        cfg = dataclasses.replace(cfg, fs=w.fs)
        cfg.validate()
    reps = Pipeline(cfg, t0=w.t0).run(w.samples)
    meta = {"input": path.name, "pipeline": cfg.to_dict()}
    if Path(output).suffix.lower() == ".json":
        write_reports_json(reps, output, meta)
    else:
        write_reports_csv(reps, output, meta)
    return len(reps)
