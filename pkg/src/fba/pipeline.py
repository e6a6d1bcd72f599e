"""Streaming functional basis analysis.

Each input sample goes through the Hilbert filter, the analytic split,
the unwrapper, the ramp accumulator and the differential step statistics.
Every ``fs / frr`` samples a report is formed for the newest window of
``L`` analytic samples:

* without a flagged step, the envelope gets an AM fit and the argument the
  better of a PM fit and a ramp fit;
* with a step in the window, the last pre-step models are carried forward
  and patched with the step depths and, once enough post-step samples
  exist, a post-step ramp.

Thresholds have a noise-adaptive floor: each one is the larger of its
configured value and ``noise_k`` robust standard deviations of its
differential statistic.
"""

from __future__ import annotations

import collections
import csv
import dataclasses
import io
import json
import math
import queue
import threading
from pathlib import Path
from typing import Iterator, List, Optional

import numpy as np

from . import __version__
from .analytic import PhaseUnwrapper
from .estimators.fr import FrAccumulator, fr_fit, fr_fit_direct
from .estimators.gss import NoFeasibleFit, gss, reachable_frequencies
from .estimators.lsfit import BasisCache, am_ls_fit, modulation_wald, pm_ls_fit
from .estimators.steps import NoiseFloor, StepDetector, StepEvent
from .hilbert import StreamingHilbert, load_coefficients, table2_filter
from .models import (AmModel, FrModel, PiecewiseAmplitude, PiecewisePhase, PmModel,
                     PsPatched, ShiftedPrev, wrap_angle)

__all__ = ["PipelineConfig", "Pipeline", "ReportedModel", "StreamIntegrityError",
           "select_phase_model", "reconstruct", "write_reports_csv", "write_reports_json",
           "REPORT_FIELDS", "analyze"]

TWO_PI = 2.0 * math.pi


class StreamIntegrityError(ValueError):
    """A non-finite or out-of-range input sample."""


@dataclasses.dataclass
class PipelineConfig:
    """Analysis parameters.

    Thresholds: ``eps_A`` is a fraction of ``full_scale``; ``eps_phi`` is in
    rad.  ``eps_FR=None`` derives the PM/FR tie tolerance as
    ``eps_FR_k sigma^2 + eps_FR_floor`` (``2 L sigma^2`` when ``eps_FR_k`` is
    None), with ``sigma^2`` the better fit's residual per degree of freedom,
    or its median over recent windows when that is larger.  ``noise_k=0``
    disables the adaptive threshold floor.  ``settle`` delays post-step
    estimates to at least that many samples after the step location, past
    the filter's step transient.  ``fr_resync`` recomputes the ramp-fit sums
    directly every that many samples, bounding recursive rounding drift.

    ``residual_jump`` flags a window whose best argument residual, scaled by
    the squared mean envelope, exceeds that many times the median of recent
    windows and its RMS exceeds ``residual_floor`` rad; such a window holds
    a disturbance the flags have not caught yet, so the previous clean model
    is carried forward.  ``None`` disables the check.

    A modulation class (AM, PM) needs both its depth threshold and a Wald
    statistic of at least ``class_wald`` for the sin/cos pair, so noise
    fitted by the nearly collinear low-frequency bases is not labelled as
    modulation.
    """

    fs: float = 10_000.0
    L: int = 600
    frr: float = 50.0
    f_lb: float = 1.0
    f_ub: float = 5.0
    iterations: int = 5
    eps_A: float = 0.00035
    eps_phi: float = 0.0002 * math.pi
    eps_FR: Optional[float] = None
    eps_FR_floor: float = 1e-12
    eps_FR_k: Optional[float] = 32.0
    L_dA: int = 32
    L_dphi: int = 32
    L_A: int = 64
    L_FR: int = 300
    settle: int = 200
    dwell: Optional[int] = None
    filter: str = "H2"
    full_scale: float = 1.0
    clip: Optional[float] = None
    noise_k: float = 7.0
    noise_history: int = 5
    fr_resync: Optional[int] = 10_000
    residual_jump: Optional[float] = 10.0
    residual_floor: float = 1.5e-4
    am_max_depth: float = 0.5
    pm_max_depth: float = math.pi / 2
    am_class_depth: float = 0.005
    class_wald: float = 40.0
    pm_class_depth: float = 0.005
    fr_class_rate: float = 0.25
    as_class_depth: float = 0.01
    ps_class_depth: float = 0.01

    def __post_init__(self):
        self.validate()

    @property
    def decimation(self) -> int:
        return int(round(self.fs / self.frr))

    @property
    def Ts(self) -> float:
        return 1.0 / self.fs

    def validate(self):
        if not self.fs > 0 or not self.frr > 0:
            raise ValueError("fs and frr must be positive")
        if abs(self.fs / self.frr - self.decimation) > 1e-9:
            raise ValueError("fs / frr must be an integer number of samples")
        if self.decimation > self.L:
            raise ValueError("reporting interval longer than the window leaves gaps")
        if not 4 <= self.L_FR <= self.L:
            raise ValueError("need 4 <= L_FR <= L")
        if not 0 < self.f_lb < self.f_ub:
            raise ValueError("need 0 < f_lb < f_ub")
        for name in ("L_dA", "L_dphi"):
            v = getattr(self, name)
            if v < 2 or v & (v - 1):
                raise ValueError(f"{name} must be a power of two")
        if self.L_A < 1 or self.L_A > self.L:
            raise ValueError("need 1 <= L_A <= L")
        if self.fr_resync is not None and self.fr_resync < 1:
            raise ValueError("fr_resync must be positive or None")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown pipeline settings: {sorted(unknown)}")
        return cls(**data)


def select_phase_model(rho_pm: float, rho_fr: float, eps_fr: float) -> str:
    """``"FR"`` when the residuals tie within ``eps_fr``, else the smaller one."""
    if rho_pm is None or not math.isfinite(rho_pm):
        return "FR"
    if abs(rho_fr - rho_pm) < eps_fr:
        return "FR"
    return "PM" if rho_pm < rho_fr else "FR"


@dataclasses.dataclass
class ReportedModel:
    """One report: envelope and argument models over a window.

    Indices are absolute analytic-sample indices; ``t0`` and ``Ts`` map
    them to seconds.
    """

    r: int
    i_start: int
    L: int
    hop: int
    t0: float
    Ts: float
    envelope: object
    argument: object
    classification: str
    diag: dict

    @property
    def i_center(self) -> float:
        return self.i_start + (self.L - 1) / 2

    @property
    def timestamp(self) -> float:
        return self.t0 + self.i_center * self.Ts

    def index_of(self, t):
        return np.round((np.asarray(t, dtype=float) - self.t0) / self.Ts, 6)

    @property
    def amplitude(self) -> float:
        return float(self.envelope.value(self.i_center))

    @property
    def phase(self) -> float:
        return float(self.argument.phase(self.i_center))

    @property
    def frequency(self) -> float:
        return float(self.argument.frequency(self.i_center))

    @property
    def rocof(self) -> float:
        return float(self.argument.rocof(self.i_center))

    def window_indices(self) -> np.ndarray:
        return np.arange(self.i_start, self.i_start + self.L)

    def record(self) -> dict:
        """Flat report record in :data:`REPORT_FIELDS` order."""
        rec = {k: math.nan for k in REPORT_FIELDS}
        rec.update(self.envelope.params())
        rec.update(self.argument.params())
        rec.update({k: v for k, v in self.diag.items() if k in rec})
        rec.update(r=self.r, timestamp=self.timestamp, classification=self.classification,
                   t_start=self.t0 + self.i_start * self.Ts, amplitude=self.amplitude,
                   phase=wrap_angle(self.phase), frequency=self.frequency, rocof=self.rocof)
        return rec


def reconstruct(model: ReportedModel, t=None, index=None) -> np.ndarray:
    """``envelope * cos(argument)`` at times ``t`` (s) or sample indices.

    With neither given, the model's own window is used.
    """
    if index is None:
        index = model.window_indices() if t is None else model.index_of(t)
    index = np.asarray(index, dtype=float)
    return model.envelope.value(index) * np.cos(model.argument.phase(index))


class _Ring:
    """Fixed-capacity float history addressed by absolute index."""

    __slots__ = ("buf", "cap")

    def __init__(self, cap: int):
        self.cap = cap
        self.buf = np.full(cap, np.nan)

    def take(self, start: int, stop: int) -> np.ndarray:
        return self.buf[np.arange(start, stop) % self.cap]


def _resolve_filter(name: str):
    if name.upper() in ("H1", "H2"):
        return table2_filter(name.upper())
    return load_coefficients(name)


class Pipeline:
    """Single-channel streaming analyser.

    Parameters
    ----------
    config : PipelineConfig
    t0 : float
        Time of the first input sample.
    """

    def __init__(self, config: Optional[PipelineConfig] = None, t0: float = 0.0):
        cfg = self.cfg = config or PipelineConfig()
        self.t0 = float(t0)
        self.Ts = cfg.Ts
        self.filter = _resolve_filter(cfg.filter)
        self._hilbert = StreamingHilbert(self.filter)
        self.D = self._hilbert.group_delay
        self._n_taps = len(self.filter.coefficients)
        cands = list(reachable_frequencies(cfg.f_lb, cfg.f_ub, cfg.iterations)) + [cfg.f_lb, cfg.f_ub]
        self.am_cache = BasisCache("AM", cfg.L, self.Ts, cands)
        self.pm_cache = BasisCache("PM", cfg.L, self.Ts, cands)
        self._unwrap = PhaseUnwrapper(cfg.L)
        self._acc = FrAccumulator(cfg.L, self.Ts)
        cap = 2 * cfg.L + 4 * cfg.decimation
        self._env = _Ring(cap)
        self._g = _Ring(cap)
        self._devA = _Ring(cap)
        self._devP = _Ring(cap)
        self._cap = cap
        self._inputs = 0
        self._i0 = self.D                      # first valid analytic index
        self._arg_prev = None
        self._g_prev = 0.0
        dmax = max(cfg.L_dA, cfg.L_dphi)
        dec = cfg.decimation
        first_start = -(-(self._i0 + dmax) // dec) * dec
        self._next_end = first_start + cfg.L - 1
        self._det_next = self._i0 + dmax
        eps_A = cfg.eps_A * cfg.full_scale
        self._eps_default = (eps_A, cfg.eps_phi)
        self.detector = StepDetector(eps_A, cfg.eps_phi, cfg.dwell or cfg.L_dA)
        self._noise_A = NoiseFloor(cfg.noise_history)
        self._noise_P = NoiseFloor(cfg.noise_history)
        self._arg_var = collections.deque(maxlen=cfg.noise_history)
        self._r = 0
        self._last: Optional[ReportedModel] = None
        self._normals = collections.deque(maxlen=8)
        self._rho_hist = collections.deque(maxlen=cfg.noise_history)
        self._frozen = None
        self._post: dict = {}
        self.max_certificate = 0.0
        self.detections = 0

    # ------------------------------------------------------------------ input
    def _check(self, x: float):
        if not math.isfinite(x):
            raise StreamIntegrityError(f"non-finite sample at input index {self._inputs}")
        if self.cfg.clip is not None and abs(x) > self.cfg.clip:
            raise StreamIntegrityError(f"sample {x!r} beyond clip level at input index {self._inputs}")

    def ingest(self, x: float) -> Optional[ReportedModel]:
        """Push one raw sample; returns a report when one is due."""
        x = float(x)
        self._check(x)
        re, im, valid = self._hilbert.push(x)
        self._inputs += 1
        if not valid:
            return None
        return self._analytic(self._inputs - 1 - self.D, re, im)

    def run(self, samples) -> List[ReportedModel]:
        """Process a block of samples; the filter runs vectorised."""
        xs = np.asarray(samples, dtype=float)
        bad = ~np.isfinite(xs)
        if self.cfg.clip is not None:
            bad |= np.abs(xs) > self.cfg.clip
        if bad.any():
            k = int(np.argmax(bad))
            raise StreamIntegrityError(f"invalid sample {xs[k]!r} at input index {self._inputs + k}")
        re, im, valid = self._hilbert.push_block(xs)
        base = self._inputs - self.D
        self._inputs += len(xs)
        out = []
        for k in np.nonzero(valid)[0]:
            rep = self._analytic(base + int(k), float(re[k]), float(im[k]))
            if rep is not None:
                out.append(rep)
        return out

    def iter_reports(self, samples, maxsize: int = 16) -> Iterator[ReportedModel]:
        """Run on a worker thread, handing reports over a bounded queue.

        The producer blocks while the queue is full.
        """
        q: queue.Queue = queue.Queue(maxsize=maxsize)
        done = object()
        err = []

        def work():
            try:
                for x in samples:
                    rep = self.ingest(x)
                    if rep is not None:
                        q.put(rep)
            except BaseException as exc:     # re-raised on the consumer side
                err.append(exc)
            finally:
                q.put(done)

        th = threading.Thread(target=work, daemon=True)
        th.start()
        while True:
            item = q.get()
            if item is done:
                break
            yield item
        th.join()
        if err:
            raise err[0]

    # -------------------------------------------------------------- per sample
    def _analytic(self, i: int, re: float, im: float) -> Optional[ReportedModel]:
        cfg = self.cfg
        env = math.hypot(re, im)
        arg = math.atan2(im, re)
        u, out, cleared = self._unwrap.push(arg)
        self._acc.push(u, out)
        if cleared is not None:
            self._acc.wrap_correct(cleared.sign)
        if cfg.fr_resync and self._acc.ready and (i - self._i0) % cfg.fr_resync == 0:
            self._acc.resync(self._unwrap.window())
        if self._arg_prev is None:
            g = arg
        else:
            g = self._g_prev + math.remainder(arg - self._arg_prev, TWO_PI)
        self._arg_prev, self._g_prev = arg, g
        cap = self._cap
        j = i % cap
        self._env.buf[j] = env
        self._g.buf[j] = g
        if i - cfg.L_dA >= self._i0:
            e = self._env.buf
            self._devA.buf[j] = (env - e[(i - 1) % cap]) - (env - e[(i - cfg.L_dA) % cap]) / cfg.L_dA
        if i - cfg.L_dphi >= self._i0:
            gb = self._g.buf
            self._devP.buf[j] = (g - gb[(i - 1) % cap]) - (g - gb[(i - cfg.L_dphi) % cap]) / cfg.L_dphi
        if i == self._next_end:
            self._next_end += cfg.decimation
            return self._report(i)
        return None

    # ------------------------------------------------------------------ report
    def _thresholds(self, dev_A, dev_P):
        cfg = self.cfg
        sa = self._noise_A.update(dev_A)
        sp = self._noise_P.update(dev_P)
        eps_A = max(self._eps_default[0], cfg.noise_k * sa)
        eps_P = max(self._eps_default[1], cfg.noise_k * sp)
        return eps_A, eps_P, sa, sp

    def _tie_tolerance(self, rho_pm: float, rho_fr: float) -> float:
        """``eps_FR``: configured, or scaled from recent best-fit residuals."""
        cfg = self.cfg
        if cfg.eps_FR is not None:
            return cfg.eps_FR
        v = min(rho_pm / (cfg.L - 4), rho_fr / (cfg.L - 3))
        self._arg_var.append(v)
        k = 2 * cfg.L if cfg.eps_FR_k is None else cfg.eps_FR_k
        return k * max(v, float(np.median(self._arg_var))) + cfg.eps_FR_floor

    def _report(self, i_end: int) -> ReportedModel:
        cfg = self.cfg
        s = i_end - cfg.L + 1
        env_w = self._env.take(s, i_end + 1)
        dev_A = self._devA.take(s, i_end + 1)
        dev_P = self._devP.take(s, i_end + 1)
        u_w = self._unwrap.window()
        eps_A, eps_P, sa, sp = self._thresholds(dev_A, dev_P)
        det = self.detector
        det.eps_A, det.eps_phi = eps_A, eps_P
        before = len(det.events)
        dA, dP = self._devA.buf, self._devP.buf
        for j in range(self._det_next, i_end + 1):
            det.push(j, dA[j % self._cap], dP[j % self._cap])
        self._det_next = i_end + 1
        self.detections += len(det.events) - before
        det.events = [e for e in det.events if e.i_ub is None or e.i_ub > s - cfg.L - cfg.settle]
        # the filter transient extends an event by about `settle` samples
        events = [e for e in det.events if e.overlaps(s - cfg.settle, i_end + 1 + cfg.settle)]
        diag = {"eps_A": eps_A, "eps_phi": eps_P,
                "sigma_dA": sa, "sigma_dphi": sp, "step_flag": bool(events)}
        if events and (self._frozen is not None or self._normals):
            env_m, arg_m, cls = self._step_branch(s, i_end, env_w, u_w, events, diag)
        else:
            self._frozen = None
            env_m, arg_m, cls = self._normal_branch(s, env_w, u_w, diag)
            if events:
                diag["no_pre_model"] = True
                cls = "transitional"
            elif self._jump(env_w, diag):
                prev = self._normals[-1]
                env_m, arg_m = prev.envelope, ShiftedPrev(prev.argument, s - prev.i_start)
                cls = "transitional"
        rep = ReportedModel(self._r, s, cfg.L, cfg.decimation, self.t0, self.Ts, env_m, arg_m, cls, diag)
        self._r += 1
        self._last = rep
        if not events and not diag.get("residual_jump"):
            self._normals.append(rep)
        return rep

    def _jump(self, env_w, diag) -> bool:
        """Residual-jump test; records the window's scaled residual."""
        cfg = self.cfg
        k = cfg.residual_jump
        raw = min(diag["rho_PM"], diag["rho_FR"])
        rho = raw * float(np.mean(env_w)) ** 2
        hist = self._rho_hist
        jump = (k is not None and len(hist) >= 3 and bool(self._normals)
                and raw > cfg.L * cfg.residual_floor ** 2
                and rho > k * float(np.median(hist)))
        hist.append(rho)
        diag["residual_jump"] = jump
        return jump

    def _normal_branch(self, s, env_w, u_w, diag):
        cfg = self.cfg
        certs = []

        def am_obj(f):
            fit = am_ls_fit(env_w, f, self.am_cache, cfg.am_max_depth)
            certs.append(fit.cert)
            return fit, fit.residual, fit.feasible

        def pm_obj(f):
            fit = pm_ls_fit(u_w, f, self.pm_cache, cfg.pm_max_depth)
            certs.append(fit.cert)
            return fit, fit.residual, fit.feasible

        try:
            am = gss(am_obj, cfg.f_lb, cfg.f_ub, cfg.iterations)
            env_m = AmModel(am.fit.gamma, am.fit.f, float(s), self.Ts)
            diag["rho_AM"] = am.residual
            diag["wald_AM"] = modulation_wald(am.fit, self.am_cache)
        except NoFeasibleFit:
            env_m = AmModel((float(np.mean(env_w)), 0.0, 0.0), None, float(s), self.Ts)
            diag["am_fallback"] = True
        try:
            pm = gss(pm_obj, cfg.f_lb, cfg.f_ub, cfg.iterations)
            rho_pm = pm.residual
            diag["wald_PM"] = modulation_wald(pm.fit, self.pm_cache)
        except NoFeasibleFit:
            pm, rho_pm = None, math.inf
            diag["pm_fallback"] = True
        fr = fr_fit(self._acc, u_w)
        certs.append(fr.cert)
        eps_fr = self._tie_tolerance(rho_pm, fr.residual)
        choice = select_phase_model(rho_pm, fr.residual, eps_fr)
        if choice == "PM":
            arg_m = PmModel(pm.fit.nu, pm.fit.f, float(s), self.Ts)
        else:
            arg_m = FrModel(fr.beta, float(s), self.Ts)
        diag.update(rho_PM=rho_pm, rho_FR=fr.residual, phase_choice=choice, eps_FR=eps_fr,
                    cert_max=max(certs))
        self.max_certificate = max(self.max_certificate, max(certs))
        parts = []
        if (env_m.f is not None and env_m.depth >= cfg.am_class_depth
                and diag["wald_AM"] >= cfg.class_wald):
            parts.append("AM")
        if (choice == "PM" and arg_m.depth >= cfg.pm_class_depth
                and diag["wald_PM"] >= cfg.class_wald):
            parts.append("PM")
        elif choice == "FR" and abs(arg_m.R) >= cfg.fr_class_rate:
            parts.append("FR")
        return env_m, arg_m, "+".join(parts) if parts else "SS"

    def _merge(self, events: List[StepEvent]) -> StepEvent:
        ev = StepEvent(min(e.i_lb for e in events))
        ev.i_ub = None if any(e.i_ub is None for e in events) else max(e.i_ub for e in events)
        for e in events:
            if e.dev_A > ev.dev_A:
                ev.dev_A, ev.i_step_A = e.dev_A, e.i_step_A
            if e.dev_phi > ev.dev_phi:
                ev.dev_phi, ev.i_step_phi = e.dev_phi, e.i_step_phi
            if e.score > ev.score:
                ev.score, ev.i_joint = e.score, e.i_joint
            ev.flag_A |= e.flag_A
            ev.flag_phi |= e.flag_phi
        ev.merged = len(events)
        return ev

    def _step_branch(self, s, i_end, env_w, u_w, events, diag):
        cfg = self.cfg
        ev = self._merge(events)
        i_step = ev.i_step
        if self._frozen is None:
            # newest clean report ending before the filter's pre-step transient
            pick = self._normals[0]
            for rep in self._normals:
                if rep.i_start + rep.L - 1 < i_step - cfg.settle:
                    pick = rep
            self._frozen = (pick.envelope, pick.argument, pick.i_start)
            self._post = {}
            diag["pre_report"] = pick.r
        pre_env, pre_arg, pre_start = self._frozen
        post = self._post
        if post.get("key") != (ev.i_lb, ev.i_ub):
            post.clear()
            post["key"] = (ev.i_lb, ev.i_ub)
        diag.update(event_kind=ev.kind, t_lb=self.t0 + ev.i_lb * self.Ts,
                    t_ub=self.t0 + ev.i_ub * self.Ts if ev.i_ub is not None else math.nan,
                    t_AS=self.t0 + i_step * self.Ts, t_PS=self.t0 + i_step * self.Ts,
                    i_AS=i_step, i_PS=i_step, i_lb=ev.i_lb, i_ub=ev.i_ub,
                    multiple_events=ev.merged > 1)
        env_m, arg_m = pre_env, ShiftedPrev(pre_arg, s - pre_start)
        a_AS = a_PS = None
        post_R = None
        if ev.i_ub is not None:
            # post-step data start once the flags clear and the filter settles
            i_post = max(ev.i_ub, i_step + cfg.settle)
            settled = i_end - i_post + 1 >= cfg.L_A
            if settled and "A0" not in post:
                k = max(i_post, s) - s
                seg = slice(k, k + cfg.L_A)
                post["A0"] = float(np.mean(env_w[seg]))
                idx = np.arange(s + k, s + k + cfg.L_A)
                dphi = np.angle(np.exp(1j * (u_w[seg] - pre_arg.phase(idx))))
                post["a_PS"] = wrap_angle(float(np.mean(dphi)))
            if "a_PS0" not in post and ev.i_ub >= s:
                post["a_PS0"] = wrap_angle(float(u_w[ev.i_ub - s] - pre_arg.phase(ev.i_ub)))
            if "A0" in post:
                env_m = PiecewiseAmplitude(pre_env, i_step, post["A0"])
                a_AS = env_m.depth
                diag["A0_post"] = post["A0"]
            if i_end - i_post + 1 < cfg.L_FR:
                a_PS = post.get("a_PS", post.get("a_PS0"))
                if a_PS is not None:
                    arg_m = PsPatched(pre_arg, a_PS, i_step)
            else:
                j = max(i_post, s)
                fit = fr_fit_direct(u_w[j - s:], self.Ts)
                self.max_certificate = max(self.max_certificate, fit.cert)
                diag["cert_max"] = fit.cert
                arg_m = PiecewisePhase(pre_arg, i_step, FrModel(fit.beta, float(j), self.Ts))
                a_PS = arg_m.a_PS
                post_R = fit.R
                diag["post_fit"] = True
        diag["a_AS"] = a_AS if a_AS is not None else math.nan
        diag["a_PS"] = a_PS if a_PS is not None else math.nan
        parts = []
        if a_AS is not None and abs(a_AS) >= cfg.as_class_depth:
            parts.append("AS")
        if a_PS is not None and abs(a_PS) >= cfg.ps_class_depth:
            parts.append("PS")
        if parts and post_R is not None and abs(post_R) >= cfg.fr_class_rate:
            parts.append("FR")
        return env_m, arg_m, "+".join(parts) if parts else "transitional"


# --------------------------------------------------------------------------
# output

REPORT_FIELDS = [
    "r", "timestamp", "t_start", "classification", "amplitude", "phase", "frequency", "rocof",
    "env_model", "gamma0", "gamma1", "gamma2", "f_AM", "a_AM", "phi_AM", "A0_post", "a_AS", "t_AS",
    "arg_model", "nu0", "nu1", "nu2", "nu3", "f_PM", "a_PM", "phi_PM",
    "beta0", "beta1", "beta2", "R", "post_beta0", "post_beta1", "post_beta2", "post_R",
    "a_PS", "t_PS", "rho_AM", "rho_PM", "rho_FR", "eps_FR", "eps_A", "eps_phi",
    "step_flag", "event_kind", "t_lb", "t_ub", "multiple_events",
]

_TIME_FIELDS = {"timestamp", "t_start", "t_AS", "t_PS", "t_lb", "t_ub"}


def _fmt(key, v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return ""
    if key in _TIME_FIELDS:
        return f"{v:.9f}"
    return f"{v:.12g}"


def metadata_header(extra: Optional[dict] = None) -> str:
    meta = {"generator": "fba", "version": __version__}
    meta.update(extra or {})
    return "# " + json.dumps(meta, sort_keys=True)


def write_reports_csv(reports, path, meta: Optional[dict] = None) -> None:
    """One row per report in :data:`REPORT_FIELDS` order; times in s (9 decimals)."""
    buf = io.StringIO()
    buf.write(metadata_header(meta) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for rep in reports:
        rec = rep.record()
        w.writerow([_fmt(k, rec.get(k)) for k in REPORT_FIELDS])
    Path(path).write_text(buf.getvalue(), encoding="ascii")


def write_reports_json(reports, path, meta: Optional[dict] = None) -> None:
    def clean(v):
        if isinstance(v, float) and math.isnan(v):
            return None
        if isinstance(v, np.generic):
            return v.item()
        return v

    doc = {"meta": {"generator": "fba", "version": __version__, **(meta or {})},
           "fields": REPORT_FIELDS,
           "reports": [{k: clean(rep.record().get(k)) for k in REPORT_FIELDS} for rep in reports]}
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="ascii")


def analyze(waveform, config: Optional[PipelineConfig] = None) -> List[ReportedModel]:
    """Run a fresh pipeline over a :class:`~fba.wavegen.Waveform`."""
    cfg = config or PipelineConfig(fs=waveform.fs, full_scale=waveform.full_scale)
    if abs(cfg.fs - waveform.fs) > 1e-9 * waveform.fs:
        cfg = dataclasses.replace(cfg, fs=waveform.fs)
    return Pipeline(cfg, t0=waveform.t0).run(waveform.samples)
