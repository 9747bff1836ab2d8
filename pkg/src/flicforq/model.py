"""System parameters, pulse sequences, and the lab-frame Hamiltonian.

Units: angular frequencies in units of the mean Larmor frequency w0
(w0 = 1 by convention), time in units of 1/w0.

The instantaneous Hamiltonian assembled here is

    H(t) = (1/2) [ w1z*Z1 + 2*(ax1(t)*cos(w1z*t) + ay1(t)*sin(w1z*t))*X1
                 + w2z*Z2 + 2*(ax2(t)*cos(w2z*t) + ay2(t)*sin(w2z*t))*X2
                 + wxx*X1X2 ]

where the drive carriers are fixed at the qubits' own Larmor frequencies
and are phase-coherent functions of absolute lab time (they are never
reset per segment).  Each qubit's drive is modulated by its own quadrature
amplitudes; envelope scaling and refocusing sign flips apply to the
amplitudes before the carrier is mixed in.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .pauli import TWO_QUBIT_LABELS

__all__ = [
    "SystemParams",
    "Envelope",
    "PulseSegment",
    "PulseSequence",
    "Diagnostic",
    "hamiltonian_at",
    "drive_amplitudes_at",
    "sync_time",
    "validate_sequence",
    "sequence_to_json",
    "sequence_from_json",
    "DEFAULT_PARAMS",
]

IDX = {lab: i for i, lab in enumerate(TWO_QUBIT_LABELS)}
GRID_RTOL = 1e-9


@dataclass(frozen=True)
class SystemParams:
    """Fixed circuit frequencies; qubit 1 is the higher-frequency qubit."""

    w1z: float
    w2z: float
    wxx: float

    def __post_init__(self):
        if self.delta <= 0:
            raise ValueError("require w1z > w2z (delta > 0)")
        if self.wxx < 0:
            raise ValueError("wxx must be non-negative")
        if self.wxx > 0.5 * self.delta:
            raise ValueError(
                f"wxx={self.wxx} exceeds 0.5*delta={0.5 * self.delta}; "
                "the coupling must stay well below the detuning"
            )
        if self.wxx > 0.2 * self.delta:
            warnings.warn(
                f"wxx/delta = {self.wxx / self.delta:.3f} > 0.2; residual "
                "entanglement at rest may be significant",
                stacklevel=2,
            )

    @property
    def delta(self) -> float:
        return self.w1z - self.w2z

    @property
    def w0(self) -> float:
        return 0.5 * (self.w1z + self.w2z)

    @property
    def t_swap(self) -> float:
        return 2.0 * math.pi / self.wxx

    @property
    def t0_sync(self) -> float:
        return 2.0 * math.pi / self.delta


DEFAULT_PARAMS = SystemParams(w1z=1.05, w2z=0.95, wxx=0.01)


@dataclass(frozen=True)
class Envelope:
    """Amplitude scale factor in [0, 1]; equals 1 on the flat top."""

    kind: str = "square"
    rise: float = 0.0

    def __post_init__(self):
        if self.kind not in ("square", "raised-cosine-ramp"):
            raise ValueError(f"unknown envelope kind {self.kind!r}")
        if self.kind == "square" and self.rise != 0.0:
            raise ValueError("square envelope must have rise = 0")
        if self.rise < 0:
            raise ValueError("rise must be non-negative")

    def scale(self, tau, duration):
        """Scale factor at time tau after segment start (vectorized)."""
        tau = np.asarray(tau, dtype=float)
        if self.kind == "square" or self.rise == 0.0:
            return np.where((tau >= 0) & (tau <= duration), 1.0, 0.0)
        rise = min(self.rise, 0.5 * duration)
        up = 0.5 * (1.0 - np.cos(np.pi * np.clip(tau / rise, 0.0, 1.0)))
        down = 0.5 * (1.0 - np.cos(np.pi * np.clip((duration - tau) / rise, 0.0, 1.0)))
        return np.where((tau >= 0) & (tau <= duration), np.minimum(up, down), 0.0)


@dataclass(frozen=True)
class PulseSegment:
    """Piecewise-constant drive amplitudes on both qubits over a time window.

    ``flip_at``/``flip_qubit`` describe the refocusing flip: from flip_at
    onwards the designated qubit's drive amplitudes are negated (after
    envelope scaling).  Carrier frequencies are implicit: the drive on
    qubit q oscillates at that qubit's own Larmor frequency.
    """

    start: float
    duration: float
    amp_x_1: float = 0.0
    amp_y_1: float = 0.0
    amp_x_2: float = 0.0
    amp_y_2: float = 0.0
    envelope: Envelope = field(default_factory=Envelope)
    flip_at: float | None = None
    flip_qubit: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")
        if self.flip_at is not None:
            if not (self.start < self.flip_at < self.start + self.duration):
                raise ValueError("flip_at must lie strictly inside the segment")
            if self.flip_qubit not in (1, 2):
                raise ValueError("flip_qubit must be 1 or 2 when flip_at is set")

    @property
    def end(self) -> float:
        return self.start + self.duration

    def drives_qubit(self, q: int) -> bool:
        if q == 1:
            return self.amp_x_1 != 0.0 or self.amp_y_1 != 0.0
        return self.amp_x_2 != 0.0 or self.amp_y_2 != 0.0

    @property
    def is_two_qubit(self) -> bool:
        return self.drives_qubit(1) and self.drives_qubit(2)


@dataclass(frozen=True)
class PulseSequence:
    """Time-ordered segments plus a ledger of virtual z-frame rotations.

    virtual_z entries are (qubit, angle, t) triples; they add no physical
    drive and are composed into ideal-frame comparisons downstream.
    """

    params: SystemParams
    segments: tuple[PulseSegment, ...] = ()
    virtual_z: tuple[tuple[int, float, float], ...] = ()
    total_time: float = 0.0

    def __post_init__(self):
        starts = [seg.start for seg in self.segments]
        if starts != sorted(starts):
            raise ValueError("segments must be sorted by start time")
        end = max([seg.end for seg in self.segments], default=0.0)
        if self.total_time < end - 1e-12:
            object.__setattr__(self, "total_time", end)

    def with_virtual_z(self, qubit: int, angle: float, t: float) -> "PulseSequence":
        if qubit not in (1, 2):
            raise ValueError("qubit must be 1 or 2")
        return replace(self, virtual_z=self.virtual_z + ((qubit, float(angle), float(t)),))


def sync_time(p: SystemParams, m: int) -> float:
    """m-th synchrony time m * 2*pi/delta at which the interqubit phase vanishes."""
    if m < 0:
        raise ValueError("m must be non-negative")
    return m * p.t0_sync


def on_sync_grid(p: SystemParams, t: float) -> bool:
    if t == 0.0:
        return True
    m = round(t / p.t0_sync)
    return abs(t - m * p.t0_sync) <= GRID_RTOL * max(abs(t), p.t0_sync)


def drive_amplitudes_at(seq: PulseSequence, t):
    """Envelope-scaled, flip-signed amplitudes (ax1, ay1, ax2, ay2) at time t.

    Vectorized over t.  Segments never overlap per channel, so summing the
    per-segment contributions is exact.
    """
    t = np.asarray(t, dtype=float)
    amps = [np.zeros_like(t) for _ in range(4)]
    for seg in seq.segments:
        tau = t - seg.start
        env = seg.envelope.scale(tau, seg.duration)
        flip1 = flip2 = 1.0
        if seg.flip_at is not None:
            post = np.where(t >= seg.flip_at, -1.0, 1.0)
            if seg.flip_qubit == 1:
                flip1 = post
            else:
                flip2 = post
        amps[0] = amps[0] + env * flip1 * seg.amp_x_1
        amps[1] = amps[1] + env * flip1 * seg.amp_y_1
        amps[2] = amps[2] + env * flip2 * seg.amp_x_2
        amps[3] = amps[3] + env * flip2 * seg.amp_y_2
    return amps


def hamiltonian_at(p: SystemParams, seq: PulseSequence, t: float) -> np.ndarray:
    """Pauli coefficients h of H(t) = sum_a h[a] P_a, in TWO_QUBIT_LABELS order.

    All coefficients are real, so H is Hermitian by construction.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    ax1, ay1, ax2, ay2 = drive_amplitudes_at(seq, t)
    h = np.zeros(15)
    h[IDX["ZI"]] = 0.5 * p.w1z
    h[IDX["IZ"]] = 0.5 * p.w2z
    h[IDX["XX"]] = 0.5 * p.wxx
    h[IDX["XI"]] = float(ax1) * math.cos(p.w1z * t) + float(ay1) * math.sin(p.w1z * t)
    h[IDX["IX"]] = float(ax2) * math.cos(p.w2z * t) + float(ay2) * math.sin(p.w2z * t)
    return h


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    message: str


def validate_sequence(p: SystemParams, seq: PulseSequence) -> list[Diagnostic]:
    """Structural checks: sync-grid starts for two-qubit pulses, per-channel
    overlaps, and coupling-to-detuning ratio warnings.  Returns diagnostics
    instead of raising."""
    out: list[Diagnostic] = []
    for i, seg in enumerate(seq.segments):
        if seg.is_two_qubit and not on_sync_grid(p, seg.start):
            out.append(Diagnostic(
                "error",
                f"segment {i}: two-qubit pulse starts at {seg.start:.6f}, "
                f"not on the t0_sync = {p.t0_sync:.6f} grid",
            ))
    for q in (1, 2):
        active = [(s.start, s.end, i) for i, s in enumerate(seq.segments) if s.drives_qubit(q)]
        for (s0, e0, i0), (s1, e1, i1) in zip(active, active[1:]):
            if s1 < e0 - 1e-12:
                out.append(Diagnostic(
                    "error",
                    f"segments {i0} and {i1} overlap on qubit {q}",
                ))
    if p.wxx > 0.2 * p.delta:
        out.append(Diagnostic(
            "warning",
            f"wxx/delta = {p.wxx / p.delta:.3f} exceeds 0.2",
        ))
    return out


# ---------------------------------------------------------------------------
# JSON schema.  Field names and units are part of the external interface:
#
# {"w1z": 1.05, "w2z": 0.95, "wxx": 0.01,
#  "segments": [{"start": 0, "duration": 125.6637,
#                "q1": {"x": 0, "y": 0.0125}, "q2": {"x": 0, "y": 0},
#                "envelope": {"kind": "square"}, "flip": null}],
#  "virtual_z": [{"qubit": 1, "angle": 1.5707963, "t": 1633.6281}]}


def _segment_to_dict(seg: PulseSegment) -> dict:
    env: dict = {"kind": seg.envelope.kind}
    if seg.envelope.kind != "square":
        env["rise"] = seg.envelope.rise
    flip = None
    if seg.flip_at is not None:
        flip = {"t": seg.flip_at, "qubit": seg.flip_qubit}
    d = {
        "start": seg.start,
        "duration": seg.duration,
        "q1": {"x": seg.amp_x_1, "y": seg.amp_y_1},
        "q2": {"x": seg.amp_x_2, "y": seg.amp_y_2},
        "envelope": env,
        "flip": flip,
    }
    if seg.label:
        d["label"] = seg.label
    return d


def _segment_from_dict(d: dict) -> PulseSegment:
    env_d = d.get("envelope", {"kind": "square"})
    env = Envelope(kind=env_d["kind"], rise=env_d.get("rise", 0.0))
    flip = d.get("flip")
    return PulseSegment(
        start=d["start"],
        duration=d["duration"],
        amp_x_1=d["q1"]["x"],
        amp_y_1=d["q1"]["y"],
        amp_x_2=d["q2"]["x"],
        amp_y_2=d["q2"]["y"],
        envelope=env,
        flip_at=None if flip is None else flip["t"],
        flip_qubit=None if flip is None else flip["qubit"],
        label=d.get("label", ""),
    )


def sequence_to_json(seq: PulseSequence) -> str:
    doc = {
        "w1z": seq.params.w1z,
        "w2z": seq.params.w2z,
        "wxx": seq.params.wxx,
        "segments": [_segment_to_dict(s) for s in seq.segments],
        "virtual_z": [
            {"qubit": q, "angle": a, "t": t} for q, a, t in seq.virtual_z
        ],
        "total_time": seq.total_time,
    }
    return json.dumps(doc, indent=2)


def sequence_from_json(text: str) -> PulseSequence:
    doc = json.loads(text)
    params = SystemParams(w1z=doc["w1z"], w2z=doc["w2z"], wxx=doc["wxx"])
    segments = tuple(_segment_from_dict(d) for d in doc.get("segments", []))
    vz = tuple(
        (e["qubit"], e["angle"], e["t"]) for e in doc.get("virtual_z", [])
    )
    return PulseSequence(
        params=params,
        segments=segments,
        virtual_z=vz,
        total_time=doc.get("total_time", 0.0),
    )


def params_from_json(text: str) -> SystemParams:
    doc = json.loads(text)
    return SystemParams(w1z=doc["w1z"], w2z=doc["w2z"], wxx=doc["wxx"])
