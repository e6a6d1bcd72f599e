"""Accuracy metrics against ground truth and step-response measurement.

Per report: TVE from the centre-time phasor, FE, differential RFE, the
instantaneous ROCOF error of the argument model (IRFE), and the
time-domain error over the non-overlapping central segment (TDE).

Step tests use the shifted repeated signal method: the step is moved by
``b / (10 F_RR)`` for ``b = 0..9``, and the per-report values of all ten
runs are interleaved on the axis ``t_report - t_step``.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .pipeline import Pipeline, PipelineConfig, ReportedModel, metadata_header, reconstruct
from .wavegen import GroundTruthSpec, Waveform, srs_shift, synthesize, truth_at

__all__ = ["tve", "fe_rfe", "irfe", "tde", "central_segment", "MetricsRecord", "evaluate",
           "summarize", "write_metrics_csv", "StepResponseCurve", "srs_run", "run_test",
           "STEP_THRESHOLDS", "UndefinedMetric", "METRIC_FIELDS", "write_srs_csv", "step_summary"]

#: Step-test thresholds for response time: metric -> {class: limit}.
STEP_THRESHOLDS = {
    "TVE": {"P": 1.0, "M": 1.0},       # %
    "FE": {"P": 0.005, "M": 0.005},    # Hz
    "RFE": {"P": 0.4, "M": 0.1},       # Hz/s
}


class UndefinedMetric(ValueError):
    """A metric requested where it is not defined (e.g. ROCOF at a step)."""


def tve(est_amp, est_phase, ref_amp, ref_phase):
    """Total vector error in %: ``|X_est - X_ref| / |X_ref| * 100``."""
    ref_amp = np.asarray(ref_amp, dtype=float)
    if np.any(ref_amp <= 0):
        raise ValueError("reference amplitude must be positive")
    x = np.asarray(est_amp) * np.exp(1j * np.asarray(est_phase, dtype=float))
    r = ref_amp * np.exp(1j * np.asarray(ref_phase, dtype=float))
    out = 100.0 * np.abs(x - r) / ref_amp
    return float(out) if out.ndim == 0 else out


def fe_rfe(freq_est, freq_ref, frr: float):
    """Per-report ``(FE, RFE)``.

    ``RFE[r] = |(f[r] - f[r-1]) F_RR - (f_ref[r] - f_ref[r-1]) F_RR|``, i.e.
    the differential estimate compared with the same difference of the
    reference track (the mean reference ROCOF over the interval).  The
    first entry of RFE is NaN.
    """
    f = np.asarray(freq_est, dtype=float)
    g = np.asarray(freq_ref, dtype=float)
    fe = np.abs(f - g)
    rfe = np.full(len(f), np.nan)
    if len(f) >= 2:
        rfe[1:] = np.abs(np.diff(f) * frr - np.diff(g) * frr)
    return fe, rfe


def irfe(model: ReportedModel, rocof_ref: float, index: Optional[float] = None) -> float:
    """``|d^2 argument / dt^2 / 2 pi - rocof_ref|`` at ``index`` (default: centre).

    Raises
    ------
    UndefinedMetric
        At the boundary sample of a piecewise argument model.
    """
    i = model.i_center if index is None else float(index)
    edge = getattr(model.argument, "i_PS", None)
    if edge is not None and i == edge:
        raise UndefinedMetric(f"ROCOF undefined at the step sample {edge}")
    return abs(float(model.argument.rocof(i)) - rocof_ref)


def central_segment(L: int, decimation: int) -> slice:
    """The non-overlapping central part of a window (``200..L-201`` at defaults)."""
    if decimation <= 0 or decimation > L:
        raise ValueError(f"no central segment for L={L}, hop={decimation}")
    lo = (L - decimation) // 2
    return slice(lo, lo + decimation)


def tde(x_window, xhat_window, L: int, decimation: int) -> float:
    """Time-domain error: summed ``|x - xhat|`` over the central segment."""
    x = np.asarray(x_window, dtype=float)
    y = np.asarray(xhat_window, dtype=float)
    if len(x) != L or len(y) != L:
        raise ValueError(f"windows must have L={L} samples")
    seg = central_segment(L, decimation)
    return float(np.sum(np.abs(x[seg] - y[seg])))


@dataclasses.dataclass(frozen=True)
class MetricsRecord:
    r: int
    timestamp: float
    classification: str
    TVE: float
    FE: float
    RFE: float
    IRFE: float
    TDE: float


METRIC_FIELDS = ["r", "timestamp", "classification", "TVE", "FE", "RFE", "IRFE", "TDE"]
_NUMERIC = ["TVE", "FE", "RFE", "IRFE", "TDE"]


def evaluate(reports: Sequence[ReportedModel], waveform: Waveform,
             spec: Optional[GroundTruthSpec] = None) -> List[MetricsRecord]:
    """Metrics of each report against ``spec`` (default: the waveform's)."""
    spec = spec or waveform.spec
    if spec is None:
        raise ValueError("ground truth needed for metrics")
    if not reports:
        return []
    ts = np.array([r.timestamp for r in reports])
    tr = truth_at(spec, ts)
    amp = np.array([r.amplitude for r in reports])
    ph = np.array([r.phase for r in reports])
    fr = np.array([r.frequency for r in reports])
    hop = reports[0].hop
    fe, rfe = fe_rfe(fr, tr.frequency, 1.0 / (hop * reports[0].Ts))
    v = tve(amp, ph, tr.amplitude, tr.phase)
    x = waveform.samples
    out = []
    for k, rep in enumerate(reports):
        try:
            ir = irfe(rep, float(tr.rocof[k]))
        except UndefinedMetric:
            ir = math.nan
        lo = rep.i_start
        if 0 <= lo and lo + rep.L <= len(x):
            e = tde(x[lo:lo + rep.L], reconstruct(rep), rep.L, hop)
        else:
            e = math.nan
        out.append(MetricsRecord(rep.r, rep.timestamp, rep.classification,
                                 float(v[k]), float(fe[k]), float(rfe[k]), ir, e))
    return out


def summarize(records: Sequence[MetricsRecord]) -> Dict[str, Dict[str, float]]:
    """``{"max": {...}, "mean": {...}}`` over the finite values of each metric."""
    out = {"max": {}, "mean": {}}
    for name in _NUMERIC:
        vals = np.array([getattr(r, name) for r in records], dtype=float)
        vals = vals[np.isfinite(vals)]
        out["max"][name] = float(vals.max()) if len(vals) else math.nan
        out["mean"][name] = float(vals.mean()) if len(vals) else math.nan
    return out


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    return "" if math.isnan(v) else f"{v:.12g}"


def write_metrics_csv(records: Sequence[MetricsRecord], path, meta: Optional[dict] = None) -> None:
    """One row per report, then ``max`` and ``mean`` summary rows."""
    buf = io.StringIO()
    buf.write(metadata_header(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_FIELDS)
    for rec in records:
        w.writerow([_fmt(rec.r), f"{rec.timestamp:.9f}", rec.classification]
                   + [_fmt(getattr(rec, k)) for k in _NUMERIC])
    summ = summarize(records)
    for row in ("max", "mean"):
        w.writerow([row, "", ""] + [_fmt(summ[row][k]) for k in _NUMERIC])
    Path(path).write_text(buf.getvalue(), encoding="ascii")


def run_test(spec: GroundTruthSpec, duration: float, config: Optional[PipelineConfig] = None,
             snr_db: Optional[float] = None, seed: int = 0):
    """Synthesize, analyse and score one waveform; returns ``(waveform, reports, records)``."""
    cfg = config or PipelineConfig(full_scale=spec.full_scale)
    w = synthesize(spec, cfg.fs, duration, snr_db, seed)
    reps = Pipeline(cfg, t0=w.t0).run(w.samples)
    return w, reps, evaluate(reps, w)


# --------------------------------------------------------------------------
# step response

@dataclasses.dataclass
class StepResponseCurve:
    """Interleaved step response of ten shifted runs.

    ``tau`` is report time minus true step time; ``value`` the stepped
    quantity at the window centre (amplitude for AS, phase deviation from
    the step-free trajectory for PS).  ``max_certificate`` is the largest
    least-squares optimality certificate over all runs.
    """

    kind: str
    pre: float
    post: float
    tau: np.ndarray
    shift: np.ndarray
    TVE: np.ndarray
    FE: np.ndarray
    RFE: np.ndarray
    value: np.ndarray
    step_error: List[Optional[int]]
    resolution: float
    max_certificate: float = 0.0

    def max_errors(self) -> Dict[str, float]:
        return {k: float(np.nanmax(getattr(self, k))) for k in ("TVE", "FE", "RFE")}

    def response_time(self, metric: str, cls: str = "M") -> dict:
        """First-to-last exceedance span of a threshold and the time spent above it.

        ``comparable`` is False when the threshold is never crossed or the
        time above it is under half of the span.
        """
        lim = STEP_THRESHOLDS[metric][cls]
        err = getattr(self, metric)
        over = np.isfinite(err) & (err > lim)
        if not over.any():
            return {"R_T": 0.0, "dwell": 0.0, "comparable": False}
        t = self.tau[over]
        span = float(t.max() - t.min() + self.resolution)
        dwell = float(over.sum() * self.resolution)
        return {"R_T": span, "dwell": dwell, "comparable": dwell >= 0.5 * span}

    @property
    def delay_time(self) -> float:
        """``|tau|`` where the stepped quantity first reaches 50 % of the step."""
        frac = (self.value - self.pre) / (self.post - self.pre)
        hit = np.nonzero(np.isfinite(frac) & (frac >= 0.5))[0]
        if not len(hit):
            return math.inf
        return abs(float(self.tau[hit[0]]))

    @property
    def overshoot(self) -> float:
        """Largest excursion past the post-step value, in % of the step."""
        step = self.post - self.pre
        after = self.tau >= 0
        if not after.any():
            return math.nan
        ex = (self.value[after] - self.post) / step
        return 100.0 * float(np.nanmax(ex))


def _step_term(spec: GroundTruthSpec):
    steps = spec.steps
    if not steps:
        raise ValueError("step-response runs need a spec with a step")
    return steps[0]


def _srs_one(args):
    spec, b, duration, cfg, snr_db, seed = args
    sp = srs_shift(spec, b, cfg.frr)
    st = _step_term(sp)
    w, reps, recs = run_test(sp, duration, cfg, snr_db, seed)
    ts = np.array([r.timestamp for r in reps])
    if st.kind == "AS":
        value = np.array([r.amplitude for r in reps])
    else:
        no_ps = dataclasses.replace(sp, dynamics=tuple(d for d in sp.dynamics if d.kind != "PS"))
        base = truth_at(no_ps, ts).phase
        value = np.remainder(np.array([r.phase for r in reps]) - base + math.pi, 2 * math.pi) - math.pi
    i_true = st.t * cfg.fs
    key = "i_AS" if st.kind == "AS" else "i_PS"
    err = None
    for r in reps:
        if r.diag.get("i_ub") is not None and key in r.diag:
            err = int(round(r.diag[key] - i_true))
            break
    cert = max((r.diag.get("cert_max", 0.0) for r in reps), default=0.0)
    return (ts - st.t, np.array([m.TVE for m in recs]), np.array([m.FE for m in recs]),
            np.array([m.RFE for m in recs]), value, err, cert)


def srs_run(spec: GroundTruthSpec, duration: float, config: Optional[PipelineConfig] = None,
            snr_db: Optional[float] = None, seed: int = 0, workers: int = 1) -> StepResponseCurve:
    """Run the ten shifted copies of a step test and interleave them.

    Every shift uses the same noise seed.  Results do not depend on
    ``workers``.
    """
    cfg = config or PipelineConfig(full_scale=spec.full_scale)
    st = _step_term(spec)
    jobs = [(spec, b, duration, cfg, snr_db, seed) for b in range(10)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_srs_one, jobs))
    else:
        parts = [_srs_one(j) for j in jobs]
    cols = [np.concatenate([p[k] for p in parts]) for k in range(5)]
    shift = np.concatenate([np.full(len(p[0]), b) for b, p in enumerate(parts)])
    order = np.lexsort((shift, np.round(cols[0], 9)))
    if st.kind == "AS":
        pre, post = spec.a0, spec.a0 * (1 + st.a)
    else:
        pre, post = 0.0, st.a
    return StepResponseCurve(st.kind, pre, post, cols[0][order], shift[order],
                             cols[1][order], cols[2][order], cols[3][order], cols[4][order],
                             [p[5] for p in parts], 1.0 / (10 * cfg.frr),
                             max(p[6] for p in parts))


SRS_FIELDS = ["tau", "shift", "TVE", "FE", "RFE", "value"]


def write_srs_csv(curve: StepResponseCurve, path, meta: Optional[dict] = None) -> None:
    """Interleaved curve, one point per row, then a ``max`` row."""
    buf = io.StringIO()
    buf.write(metadata_header(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SRS_FIELDS)
    for k in range(len(curve.tau)):
        w.writerow([f"{curve.tau[k]:.9f}", int(curve.shift[k]), _fmt(curve.TVE[k]),
                    _fmt(curve.FE[k]), _fmt(curve.RFE[k]), _fmt(curve.value[k])])
    m = curve.max_errors()
    w.writerow(["max", "", _fmt(m["TVE"]), _fmt(m["FE"]), _fmt(m["RFE"]), ""])
    Path(path).write_text(buf.getvalue(), encoding="ascii")


def step_summary(curve: StepResponseCurve, cls: str = "M") -> dict:
    """Max errors, response times, delay time, overshoot and step-location errors."""
    out = dict(curve.max_errors())
    for k in ("TVE", "FE", "RFE"):
        rt = curve.response_time(k, cls)
        out[f"R_T_{k}"] = rt["R_T"] if rt["comparable"] else math.nan
        out[f"dwell_{k}"] = rt["dwell"]
    out["D_T"] = curve.delay_time
    out["OS"] = curve.overshoot
    errs = [e for e in curve.step_error if e is not None]
    out["step_error"] = max((abs(e) for e in errs), default=math.nan)
    return out
