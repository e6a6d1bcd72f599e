"""Test-waveform synthesis with closed-form ground truth.

A signal is ``A0 (1 + gA(t)) cos(2 pi f0 t + gphi(t) + phi0)`` where the
dynamic terms contribute to ``gA`` (AM, AS) or ``gphi`` (PM, PS, FR).
Steps are right-continuous.  Noise is white Gaussian with power set
relative to ``A0 / sqrt(2)`` and drawn from numpy's PCG64 generator.
"""

from __future__ import annotations

import dataclasses
import json
import math
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np

__all__ = [
    "AM", "PM", "AS", "PS", "FR",
    "GroundTruthSpec", "Waveform", "Truth", "SpecError",
    "synthesize", "truth_at", "srs_shift",
    "write_waveform", "read_waveform", "write_waveform_json", "read_waveform_json",
    "RNG_NAME",
]

RNG_NAME = "numpy.random.PCG64"
TWO_PI = 2.0 * math.pi


class SpecError(ValueError):
    """A signal specification violates one of its constraints."""


@dataclasses.dataclass(frozen=True)
class AM:
    """Amplitude modulation ``a sin(2 pi f t + phi)``; ``phi=None`` picks a default."""

    a: float
    f: float
    phi: Optional[float] = None
    kind = "AM"

    def check(self):
        if not 0 <= self.a <= 0.5:
            raise SpecError(f"AM depth a_AM={self.a} outside [0, 0.5]")
        if not self.f > 0:
            raise SpecError(f"AM frequency f_AM={self.f} must be positive")


@dataclasses.dataclass(frozen=True)
class PM:
    """Phase modulation ``a sin(2 pi f t + phi)`` in rad."""

    a: float
    f: float
    phi: Optional[float] = None
    kind = "PM"

    def check(self):
        if not abs(self.a) <= math.pi / 2:
            raise SpecError(f"PM depth |a_PM|={abs(self.a)} exceeds pi/2")
        if not self.f > 0:
            raise SpecError(f"PM frequency f_PM={self.f} must be positive")


@dataclasses.dataclass(frozen=True)
class AS:
    """Amplitude step of relative depth ``a`` at time ``t``."""

    a: float
    t: float
    kind = "AS"

    def check(self):
        if not self.a > -1:
            raise SpecError(f"AS depth a_AS={self.a} would make the amplitude non-positive")


@dataclasses.dataclass(frozen=True)
class PS:
    """Phase step of ``a`` rad at time ``t``."""

    a: float
    t: float
    kind = "PS"

    def check(self):
        if not math.isfinite(self.a):
            raise SpecError("PS depth must be finite")


@dataclasses.dataclass(frozen=True)
class FR:
    """Frequency ramp of ``R`` Hz/s, ``R pi (t - t_start)^2`` after ``t_start``.

    ``t_start=None`` applies ``R pi t^2`` at every instant.
    """

    R: float
    t_start: Optional[float] = None
    kind = "FR"

    def check(self):
        if not math.isfinite(self.R):
            raise SpecError("FR rate must be finite")


DynamicTerm = Union[AM, PM, AS, PS, FR]
_TERMS = {"AM": AM, "PM": PM, "AS": AS, "PS": PS, "FR": FR}
_AMPLITUDE = {"AM", "AS"}


class Truth(NamedTuple):
    amplitude: np.ndarray
    phase: np.ndarray
    frequency: np.ndarray
    rocof: np.ndarray


@dataclasses.dataclass(frozen=True)
class GroundTruthSpec:
    """Parameterised dynamic signal model.

    Parameters
    ----------
    a0 : float
        Base amplitude in units of ``full_scale``.
    f0 : float
        Fundamental frequency in Hz.
    phi0 : float
        Initial phase in rad.
    dynamics : sequence of AM, PM, AS, PS, FR
    full_scale : float
        Declared full-scale value that relative thresholds refer to.
    """

    a0: float = 1.0
    f0: float = 50.0
    phi0: float = 0.0
    dynamics: tuple = ()
    full_scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "dynamics", tuple(self.dynamics))
        self.validate()

    def validate(self):
        if not self.a0 > 0:
            raise SpecError(f"a0={self.a0} must be positive")
        if not self.f0 > 0:
            raise SpecError(f"f0={self.f0} must be positive")
        if not self.full_scale > 0:
            raise SpecError("full_scale must be positive")
        kinds = []
        for term in self.dynamics:
            if type(term) not in _TERMS.values():
                raise SpecError(f"unknown dynamic term {term!r}")
            term.check()
            kinds.append(term.kind)
        amp = [k for k in kinds if k in _AMPLITUDE]
        phase = [k for k in kinds if k not in _AMPLITUDE]
        if len(amp) > 1:
            raise SpecError(f"more than one amplitude-class term: {amp}")
        if len(phase) > 1:
            if sorted(phase) != ["FR", "PS"]:
                raise SpecError(f"more than one phase-class term: {phase}")
            ps = self.term("PS")
            fr = self.term("FR")
            if fr.t_start is None or fr.t_start < ps.t:
                raise SpecError("a ramp combined with a phase step must start at or after the step")

    def term(self, kind: str):
        for d in self.dynamics:
            if d.kind == kind:
                return d
        return None

    @property
    def steps(self) -> list:
        return [d for d in self.dynamics if d.kind in ("AS", "PS")]

    @property
    def label(self) -> str:
        kinds = [d.kind for d in self.dynamics]
        return "+".join(kinds) if kinds else "SS"

    def _phases(self):
        am, pm = self.term("AM"), self.term("PM")
        both = am is not None and pm is not None
        phi_am = am.phi if am is not None and am.phi is not None else 0.0
        if pm is not None and pm.phi is not None:
            phi_pm = pm.phi
        else:
            phi_pm = math.pi if both and (am.phi is None) else 0.0
        return phi_am, phi_pm

    def to_dict(self) -> dict:
        return {
            "a0": self.a0, "f0": self.f0, "phi0": self.phi0, "full_scale": self.full_scale,
            "dynamics": [{"kind": d.kind, **dataclasses.asdict(d)} for d in self.dynamics],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GroundTruthSpec":
        dyn = []
        for item in data.get("dynamics", ()):
            item = dict(item)
            kind = item.pop("kind", None)
            if kind not in _TERMS:
                raise SpecError(f"unknown dynamic kind {kind!r}")
            try:
                dyn.append(_TERMS[kind](**item))
            except TypeError as exc:
                raise SpecError(f"{kind}: {exc}") from None
        return cls(a0=float(data.get("a0", 1.0)), f0=float(data.get("f0", 50.0)),
                   phi0=float(data.get("phi0", 0.0)), dynamics=tuple(dyn),
                   full_scale=float(data.get("full_scale", 1.0)))


def truth_at(spec: GroundTruthSpec, t) -> Truth:
    """Instantaneous amplitude, total phase, frequency and ROCOF at ``t``.

    Step terms are right-continuous, so at a step instant the post-step
    value is returned.  Scalars in, scalars out.
    """
    scalar = np.ndim(t) == 0
    t = np.asarray(t, dtype=float)
    phi_am, phi_pm = spec._phases()
    gain = np.ones_like(t)
    phase = TWO_PI * spec.f0 * t + spec.phi0
    dphase = np.full_like(t, TWO_PI * spec.f0)
    ddphase = np.zeros_like(t)
    for d in spec.dynamics:
        if d.kind == "AM":
            gain = gain + d.a * np.sin(TWO_PI * d.f * t + phi_am)
        elif d.kind == "AS":
            gain = gain + d.a * (t >= d.t)
        elif d.kind == "PM":
            w = TWO_PI * d.f
            arg = w * t + phi_pm
            phase = phase + d.a * np.sin(arg)
            dphase = dphase + d.a * w * np.cos(arg)
            ddphase = ddphase - d.a * w * w * np.sin(arg)
        elif d.kind == "PS":
            phase = phase + d.a * (t >= d.t)
        elif d.kind == "FR":
            if d.t_start is None:
                tau, on = t, np.ones_like(t)
            else:
                tau = t - d.t_start
                on = (tau >= 0).astype(float)
            phase = phase + on * d.R * math.pi * tau * tau
            dphase = dphase + on * TWO_PI * d.R * tau
            ddphase = ddphase + on * TWO_PI * d.R
    out = Truth(spec.a0 * gain, phase, dphase / TWO_PI, ddphase / TWO_PI)
    if scalar:
        return Truth(*(float(v) for v in out))
    return out


@dataclasses.dataclass
class Waveform:
    """Uniformly sampled real signal.

    Attributes
    ----------
    fs : float
        Sampling rate in Hz.
    t0 : float
        Time of the first sample in s.
    samples : ndarray
    full_scale : float
    spec : GroundTruthSpec or None
        Ground truth, when known.
    meta : dict
        Free-form metadata (seed, SNR, generator name).
    """

    fs: float
    t0: float
    samples: np.ndarray
    full_scale: float = 1.0
    spec: Optional[GroundTruthSpec] = None
    meta: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if not self.fs > 0:
            raise ValueError("fs must be positive")
        if self.samples.ndim != 1 or len(self.samples) < 1:
            raise ValueError("a waveform needs at least one sample")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.fs

    def __len__(self):
        return len(self.samples)


def synthesize(spec: GroundTruthSpec, fs: float, duration: float,
               snr_db: Optional[float] = None, seed: int = 0, t0: float = 0.0) -> Waveform:
    """Sample ``spec`` at ``fs`` for ``duration`` seconds.

    Parameters
    ----------
    snr_db : float, optional
        Ratio of ``(a0 / sqrt 2)^2`` to the noise power.  ``None`` gives a
        noiseless waveform.
    seed : int
        Seed for the PCG64 generator; fully determines the noise.
    """
    n = int(round(duration * fs))
    if n < 1:
        raise SpecError("duration * fs must be at least one sample")
    spec.validate()
    t_end = t0 + (n - 1) / fs
    for st in spec.steps:
        if not t0 <= st.t <= t_end:
            raise SpecError(f"{st.kind} time {st.t} outside the synthesized span [{t0}, {t_end}]")
    t = t0 + np.arange(n) / fs
    tr = truth_at(spec, t)
    x = tr.amplitude * np.cos(tr.phase)
    meta = {"rng": RNG_NAME, "seed": int(seed), "snr_db": snr_db}
    if snr_db is not None:
        sigma = spec.a0 / math.sqrt(2) * 10 ** (-snr_db / 20)
        rng = np.random.Generator(np.random.PCG64(seed))
        x = x + sigma * rng.standard_normal(n)
        meta["noise_sigma"] = sigma
    return Waveform(fs, t0, x, spec.full_scale, spec, meta)


def srs_shift(spec: GroundTruthSpec, b: int, frr: float) -> GroundTruthSpec:
    """Delay every step of ``spec`` by ``b / (10 frr)`` seconds.

    A ramp with an explicit start moves with the steps.
    """
    if not spec.steps:
        raise SpecError("shifting needs a spec with at least one step")
    if int(b) != b or not 0 <= b <= 9:
        raise SpecError(f"shift index b={b} outside 0..9")
    dt = b / (10.0 * frr)
    def move(d):
        if d.kind in ("AS", "PS"):
            return dataclasses.replace(d, t=d.t + dt)
        if d.kind == "FR" and d.t_start is not None:
            return dataclasses.replace(d, t_start=d.t_start + dt)
        return d

    dyn = tuple(move(d) for d in spec.dynamics)
    return dataclasses.replace(spec, dynamics=dyn)


# ---------------------------------------------------------------------------
# file formats

def _header(w: Waveform) -> dict:
    return {
        "fs": repr(float(w.fs)),
        "t0": repr(float(w.t0)),
        "count": str(len(w.samples)),
        "full_scale": repr(float(w.full_scale)),
        "spec": json.dumps(w.spec.to_dict(), sort_keys=True) if w.spec else "",
        "meta": json.dumps(w.meta, sort_keys=True),
    }


def write_waveform(w: Waveform, path) -> None:
    """Text format: ``key=value`` header lines, ``---``, then one sample per line.

    Samples are written with 17 significant digits, which round-trips
    IEEE doubles exactly.
    """
    lines = ["# fba waveform v1"] + [f"{k}={v}" for k, v in _header(w).items()] + ["---"]
    lines += [f"{v:.17g}" for v in w.samples]
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_waveform(path) -> Waveform:
    """Parse a text waveform file; errors name the offending line."""
    path = Path(path)
    header, samples, in_body = {}, [], False
    with path.open(encoding="ascii") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not in_body:
                if not line or line.startswith("#"):
                    continue
                if line == "---":
                    in_body = True
                    continue
                key, sep, val = line.partition("=")
                if not sep:
                    raise ValueError(f"{path}:{lineno}: expected key=value header line")
                header[key.strip()] = val.strip()
            elif line:
                try:
                    samples.append(float(line))
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: bad sample {line!r}") from None
    for key in ("fs", "t0", "count"):
        if key not in header:
            raise ValueError(f"{path}: missing header field {key!r}")
    return _build(header, samples, str(path))


def _build(header: dict, samples, name: str) -> Waveform:
    count = int(header["count"])
    if count != len(samples):
        raise ValueError(f"{name}: header count={count} but {len(samples)} samples present")
    spec = header.get("spec") or None
    if isinstance(spec, str):
        spec = json.loads(spec)
    meta = header.get("meta") or {}
    if isinstance(meta, str):
        meta = json.loads(meta)
    return Waveform(float(header["fs"]), float(header["t0"]), np.array(samples, dtype=float),
                    float(header.get("full_scale", 1.0)),
                    GroundTruthSpec.from_dict(spec) if spec else None, meta)


def write_waveform_json(w: Waveform, path) -> None:
    """Structured form of :func:`write_waveform`; numbers keep full precision."""
    doc = {
        "format": "fba-waveform-v1",
        "fs": float(w.fs), "t0": float(w.t0), "count": len(w.samples),
        "full_scale": float(w.full_scale),
        "spec": w.spec.to_dict() if w.spec else None,
        "meta": w.meta,
        "samples": [float(f"{v:.17g}") for v in w.samples],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True), encoding="ascii")


def read_waveform_json(path) -> Waveform:
    doc = json.loads(Path(path).read_text(encoding="ascii"))
    for key in ("fs", "t0", "count", "samples"):
        if key not in doc:
            raise ValueError(f"{path}: missing field {key!r}")
    return _build(doc, doc["samples"], str(path))
