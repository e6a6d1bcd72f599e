import csv
import dataclasses
import json
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from fba.metrics import (METRIC_FIELDS, SRS_FIELDS, StepResponseCurve, UndefinedMetric,
                         central_segment, evaluate, fe_rfe, irfe, run_test, srs_run,
                         step_summary, summarize, tde, tve, write_metrics_csv, write_srs_csv)
from fba.models import AmModel, FrModel, PiecewisePhase, PmModel
from fba.pipeline import ReportedModel
from fba.wavegen import AS, FR, GroundTruthSpec, srs_shift

TS = 1e-4


def report(argument, envelope=None, i_start=0):
    env = envelope or AmModel((1.0, 0.0, 0.0), None, 0.0, TS)
    return ReportedModel(0, i_start, 600, 200, 0.0, TS, env, argument, "SS", {})


# --------------------------------------------------------------------- TVE

def test_tve_zero():
    assert tve(0.7, 1.2, 0.7, 1.2) == 0.0


def test_tve_radial():
    assert tve(1.01, 0.3, 1.0, 0.3) == pytest.approx(1.0, rel=1e-12)


def test_tve_phase_only():
    # 100 |e^{0.01 j} - 1| = 200 sin(0.005)
    assert tve(1.0, 0.01, 1.0, 0.0) == pytest.approx(0.99999583334, rel=1e-10)


def test_tve_rejects_zero_reference():
    with pytest.raises(ValueError):
        tve(1.0, 0.0, 0.0, 0.0)


@given(st.floats(0.1, 2), st.floats(-4, 4), st.floats(0.1, 2), st.floats(-4, 4), st.floats(-10, 10))
def test_tve_rotation_invariant(a, p, b, q, rot):
    assert tve(a, p + rot, b, q + rot) == pytest.approx(tve(a, p, b, q), rel=1e-9, abs=1e-9)


# ---------------------------------------------------------------- FE / RFE

def test_fe_rfe_perfect_ramp():
    t = np.arange(20) / 50
    f = 45 + 5 * t
    fe, rfe = fe_rfe(f, f, 50.0)
    assert np.all(fe == 0) and math.isnan(rfe[0]) and np.allclose(rfe[1:], 0, atol=1e-10)


@given(st.floats(-0.1, 0.1))
def test_fe_bias_cancels_in_rfe(b):
    f = np.full(10, 50.0)
    fe, rfe = fe_rfe(f + b, f, 50.0)
    assert np.allclose(fe, abs(b), atol=1e-12)
    assert np.allclose(rfe[1:], 0, atol=1e-9)


def test_rfe_of_perfect_track_is_mean_rocof():
    # differential of the true track over one interval equals R exactly for a ramp
    R, frr = 3.0, 50.0
    tr = 45 + R * np.arange(5) / frr
    est = tr.copy()
    assert np.allclose(np.diff(est) * frr, R, atol=1e-10)
    assert np.allclose(fe_rfe(est, tr, frr)[1][1:], 0, atol=1e-10)


def test_fe_rfe_single_report():
    fe, rfe = fe_rfe([50.1], [50.0], 50.0)
    assert fe[0] == pytest.approx(0.1) and math.isnan(rfe[0])


# -------------------------------------------------------------------- IRFE

def test_irfe_ramp_model():
    arg = FrModel((0.0, 2 * math.pi * 45, math.pi * 2.5), 0.0, TS)      # R = 2.5
    assert irfe(report(arg), 2.0) == pytest.approx(0.5, abs=1e-12)


def test_irfe_pm_model_against_symbolic_derivative():
    nu, f, origin = (0.3, 2 * math.pi * 50, 0.07, -0.04), 3.3, 100.0
    arg = PmModel(nu, f, origin, TS)
    i = 417.0
    tau = mpmath.mpf((i - origin) * TS)

    def phase(t):
        w = 2 * mpmath.pi * f
        return nu[0] + nu[1] * t + nu[2] * mpmath.sin(w * t) + nu[3] * mpmath.cos(w * t)

    ref = float(mpmath.diff(phase, tau, 2) / (2 * mpmath.pi))
    assert irfe(report(arg), 0.0, index=i) == pytest.approx(abs(ref), rel=1e-9)


def test_irfe_steady_state_zero():
    arg = FrModel((0.1, 2 * math.pi * 50, 0.0), 0.0, TS)
    assert irfe(report(arg), 0.0) == 0.0


def test_irfe_undefined_at_step():
    pre = FrModel((0.0, 2 * math.pi * 50, 0.0), 0.0, TS)
    post = FrModel((0.2, 2 * math.pi * 50, 1.0), 300.0, TS)
    rep = report(PiecewisePhase(pre, 300, post))
    with pytest.raises(UndefinedMetric):
        irfe(rep, 0.0, index=300)
    assert irfe(rep, 0.0, index=301) == pytest.approx(1 / math.pi)


# --------------------------------------------------------------------- TDE

def test_central_segment_defaults():
    s = central_segment(600, 200)
    assert (s.start, s.stop) == (200, 400)


def test_central_segment_empty():
    with pytest.raises(ValueError):
        central_segment(600, 0)
    with pytest.raises(ValueError):
        central_segment(100, 200)


def test_tde_zero_and_offset():
    x = np.sin(np.arange(600) * 0.01)
    assert tde(x, x, 600, 200) == 0.0
    assert tde(x, x + 0.003, 600, 200) == pytest.approx(0.6, rel=1e-10)


def test_tde_only_central_samples():
    x = np.zeros(600)
    y = x.copy()
    y[:200] = 5.0
    y[400:] = 5.0
    assert tde(x, y, 600, 200) == 0.0


def test_tde_length_check():
    with pytest.raises(ValueError):
        tde(np.zeros(599), np.zeros(599), 600, 200)


@given(st.lists(st.floats(-1, 1), min_size=200, max_size=200), st.integers(1, 199))
def test_tde_additive(err, k):
    e = np.array(err)
    x = np.zeros(600)
    a, b = x.copy(), x.copy()
    a[200:200 + k] = e[:k]
    b[200 + k:400] = e[k:]
    full = x.copy()
    full[200:400] = e
    assert tde(x, full, 600, 200) == pytest.approx(tde(x, a, 600, 200) + tde(x, b, 600, 200),
                                                   rel=1e-12, abs=1e-12)
    assert tde(x, full, 600, 200) >= 0


# ---------------------------------------------------------------- records

@pytest.fixture(scope="module")
def fr_run():
    return run_test(GroundTruthSpec(0.9, 45.0, dynamics=(FR(10.0),)), 1.0)


def test_evaluate_ramp(fr_run):
    w, reps, recs = fr_run
    assert len(recs) == len(reps)
    m = summarize(recs)["max"]
    assert m["FE"] < 1.2e-3                    # twice the published FR bound
    for k in ("TVE", "FE", "RFE", "IRFE", "TDE"):
        assert all(getattr(r, k) >= 0 for r in recs if math.isfinite(getattr(r, k)))


def test_evaluate_needs_truth(fr_run):
    w, reps, _ = fr_run
    with pytest.raises(ValueError):
        evaluate(reps, dataclasses.replace(w, spec=None))


def test_metrics_csv(tmp_path, fr_run):
    _, _, recs = fr_run
    p = tmp_path / "m.csv"
    write_metrics_csv(recs, p, {"test": "fr"})
    lines = p.read_text().splitlines()
    assert json.loads(lines[0][2:])["test"] == "fr"
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == METRIC_FIELDS
    assert len(rows) == len(recs) + 3
    assert rows[-2][0] == "max" and rows[-1][0] == "mean"
    assert float(rows[-2][4]) == pytest.approx(summarize(recs)["max"]["FE"], rel=1e-11)


# -------------------------------------------------------------------- SRS

@pytest.fixture(scope="module")
def as_spec():
    return GroundTruthSpec(0.6, 50.0, dynamics=(AS(0.1, 0.5),))


@pytest.fixture(scope="module")
def as_curve(as_spec):
    return srs_run(as_spec, 1.0)


def test_srs_shape(as_curve):
    c = as_curve
    assert set(np.unique(c.shift)) == set(range(10))
    assert c.resolution == pytest.approx(2e-3)
    assert np.all(np.diff(c.tau) >= -1e-12)
    assert c.pre == pytest.approx(0.6) and c.post == pytest.approx(0.66)
    assert all(e is not None and abs(e) <= 2 for e in c.step_error)


def test_srs_interleaving_recovers_single_shifts(as_spec, as_curve):
    for b in (0, 7):
        sp = srs_shift(as_spec, b, 50.0)
        _, reps, recs = run_test(sp, 1.0)
        sel = as_curve.shift == b
        tau = np.array([r.timestamp for r in reps]) - sp.steps[0].t
        assert np.allclose(as_curve.tau[sel], tau, atol=1e-12)
        assert np.array_equal(as_curve.FE[sel], [m.FE for m in recs])
        assert np.array_equal(as_curve.value[sel], [r.amplitude for r in reps])


def test_srs_noiseless_as_bounds(as_curve):
    s = step_summary(as_curve)
    assert s["FE"] <= 15e-3 and s["TVE"] <= 0.30
    assert s["D_T"] < 2e-3 and s["step_error"] <= 2


def test_ideal_tracker_delay():
    tau = np.round(np.arange(-50, 50) * 2e-3 + 1e-3, 12)
    value = np.where(tau >= 0, 1.1, 1.0)
    zero = np.zeros_like(tau)
    c = StepResponseCurve("AS", 1.0, 1.1, tau, np.arange(100) % 10, zero, zero, zero, value,
                          [0] * 10, 2e-3)
    assert c.delay_time <= 2e-3
    assert c.overshoot == pytest.approx(0.0, abs=1e-9)
    assert c.response_time("TVE")["comparable"] is False


def test_response_time_span_and_dwell():
    tau = np.arange(10) * 1e-3
    fe = np.array([0, 0.006, 0.0, 0.0, 0.007, 0, 0, 0, 0, 0])
    z = np.zeros(10)
    c = StepResponseCurve("AS", 0.0, 1.0, tau, z, z, fe, z, z, [0], 1e-3)
    rt = c.response_time("FE")
    assert rt["R_T"] == pytest.approx(4e-3)
    assert rt["dwell"] == pytest.approx(2e-3)
    assert rt["comparable"] is True
    assert math.isfinite(step_summary(c)["R_T_FE"])


def test_srs_requires_step():
    with pytest.raises(ValueError):
        srs_run(GroundTruthSpec(0.6, 50.0), 1.0)


def test_srs_csv(tmp_path, as_curve):
    p = tmp_path / "s.csv"
    write_srs_csv(as_curve, p, {"test": "as"})
    lines = p.read_text().splitlines()
    rows = list(csv.reader(lines[1:]))
    assert rows[0] == SRS_FIELDS
    assert len(rows) == len(as_curve.tau) + 2 and rows[-1][0] == "max"
    assert len(rows[1][0].split(".")[1]) == 9
