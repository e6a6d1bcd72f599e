"""Command-line driver.

Subcommands: ``suite`` (run a test suite), ``analyze`` (reports for a
recorded waveform), ``synthesize`` (write a test waveform) and
``design-filter`` (equiripple Hilbert coefficients).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import yaml

from . import __version__
from .hilbert import DesignError, design_equiripple, design_ft, save_coefficients
from .pipeline import PipelineConfig, StreamIntegrityError
from .suite import SuiteError, analyze_file, default_suite_path, load_suite, run_suite
from .wavegen import GroundTruthSpec, SpecError, synthesize, write_waveform, write_waveform_json

__all__ = ["main", "build_parser"]


def _band(text: str) -> float:
    """Band edge in rad/sample; a trailing ``pi`` multiplies by pi (``0.01pi``)."""
    t = text.strip().lower()
    if t.endswith("pi"):
        return float(t[:-2] or 1.0) * math.pi
    return float(t)


def _load_pipeline(path: Optional[str]) -> Optional[dict]:
    if path is None:
        return None
    doc = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    if not isinstance(doc, dict):
        raise SuiteError(f"{path}: pipeline config must be a mapping")
    return doc.get("pipeline", doc)


def cmd_suite(args) -> int:
    suite = load_suite(args.config or default_suite_path())
    if args.seed is not None:
        suite = suite.with_seed(args.seed)
    results = run_suite(suite, args.output, args.workers)
    bad = [r for r in results if not r.ok]
    for r in bad:
        print(f"FAILED {r.name}: {r.error}", file=sys.stderr)
    print(f"{len(results) - len(bad)}/{len(results)} tests written to {args.output}")
    return 1 if bad else 0


def cmd_analyze(args) -> int:
    over = _load_pipeline(args.config)
    cfg = PipelineConfig.from_dict(over) if over is not None else None
    n = analyze_file(args.input, args.output, cfg)
    print(f"{n} reports written to {args.output}")
    return 0


def cmd_synthesize(args) -> int:
    spec = GroundTruthSpec.from_dict(json.loads(args.spec))
    w = synthesize(spec, args.fs, args.duration, args.snr_db, args.seed)
    if Path(args.output).suffix.lower() == ".json":
        write_waveform_json(w, args.output)
    else:
        write_waveform(w, args.output)
    print(f"{len(w)} samples written to {args.output}")
    return 0


def cmd_design(args) -> int:
    lo = _band(args.band)
    out = Path(args.output)
    if args.prototype_length:
        casc = design_ft(args.prototype_length, args.length, lo)
        save_coefficients(casc.prototype, out.with_name(out.name + "_prototype.coef"))
        save_coefficients(casc.subfilter, out.with_name(out.name + "_subfilter.coef"))
        grid = np.linspace(lo, math.pi - lo, 8192)
        ripple = float(np.max(np.abs(casc.amplitude(grid) - 1.0)))
        print(f"cascade delay {casc.group_delay} samples, ripple {ripple:.3g}")
    else:
        filt = design_equiripple(args.length, lo)
        save_coefficients(filt, out)
        ripple = filt.ripple
        print(f"type {filt.parity}, {args.length} taps, ripple {ripple:.3g}")
    if args.ripple is not None and ripple > args.ripple:
        print(f"ripple {ripple:.3g} exceeds the target {args.ripple:.3g}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fba", description="Functional basis analysis of signal dynamics")
    p.add_argument("--version", action="version", version=f"fba {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("suite", help="run a test suite")
    s.add_argument("config", nargs="?", help="suite YAML (default: bundled suite)")
    s.add_argument("-o", "--output", required=True, help="output directory")
    s.add_argument("--seed", type=int, help="seed for every test")
    s.add_argument("-j", "--workers", type=int, help="worker processes")
    s.set_defaults(func=cmd_suite)

    a = sub.add_parser("analyze", help="reports for a waveform file")
    a.add_argument("input", help="waveform file (.json or text)")
    a.add_argument("-o", "--output", required=True, help="report file (.json or .csv)")
    a.add_argument("-c", "--config", help="pipeline YAML overrides")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("synthesize", help="write a test waveform")
    w.add_argument("spec", help='signal spec as JSON, e.g. \'{"a0": 0.9, "f0": 50}\'')
    w.add_argument("-o", "--output", required=True, help="waveform file (.json or text)")
    w.add_argument("--fs", type=float, default=10_000.0)
    w.add_argument("--duration", type=float, default=1.0)
    w.add_argument("--snr-db", type=float)
    w.add_argument("--seed", type=int, default=0)
    w.set_defaults(func=cmd_synthesize)

    d = sub.add_parser("design-filter", help="equiripple Hilbert filter coefficients")
    d.add_argument("--length", type=int, required=True, help="taps (subfilter taps for a cascade)")
    d.add_argument("--prototype-length", type=int, help="design a cascade with this prototype")
    d.add_argument("--band", default="0.01pi", help="lower band edge, rad/sample or '<x>pi'")
    d.add_argument("--ripple", type=float, help="target ripple; exceeding it exits with 1")
    d.add_argument("-o", "--output", required=True, help="coefficient file (stem for a cascade)")
    d.set_defaults(func=cmd_design)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SuiteError, SpecError, StreamIntegrityError, DesignError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
