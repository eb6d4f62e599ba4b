"""Time-bin pair states and per-pulse emission sampling.

Pair states live in the two-qubit basis (EE, EL, LE, LL); the first qubit is
the biexciton photon, the second the exciton photon.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import rng as _rng
from .qcore import KET_E, KET_L, check_density_matrix, normalize, projector, tensor

DIRECT = "direct"
METASTABLE = "metastable"


@dataclass(frozen=True)
class SourceConfig:
    excitation_prob: float = 0.06
    pump_phase: float = 0.0
    scheme: str = METASTABLE
    coherence_factor: float = 1.0
    early_late_imbalance: float = 0.0
    incoherent_pump: bool = False

    def __post_init__(self):
        if not 0.0 <= self.excitation_prob <= 1.0:
            raise ValueError("excitation_prob must lie in [0, 1]")
        if not 0.0 <= self.coherence_factor <= 1.0:
            raise ValueError("coherence_factor must lie in [0, 1]")
        if not abs(self.early_late_imbalance) < 1.0:
            raise ValueError("early_late_imbalance must satisfy |eps| < 1")
        if self.scheme not in (DIRECT, METASTABLE):
            raise ValueError(f"scheme must be {DIRECT!r} or {METASTABLE!r}")


def ideal_state(phase: float = 0.0) -> np.ndarray:
    """Projector onto (|EE> + e^{i phase}|LL>)/sqrt(2)."""
    ket = np.zeros(4, dtype=complex)
    ket[0] = 1.0
    ket[3] = np.exp(1j * phase)
    return projector(ket)


def ideal_ket(phase: float = 0.0) -> np.ndarray:
    ket = np.zeros(4, dtype=complex)
    ket[0] = 1.0
    ket[3] = np.exp(1j * phase)
    return normalize(ket)


def realistic_state(cfg: SourceConfig, phase: float | None = None) -> np.ndarray:
    """X-shaped pair state with imbalance and reduced coherence.

    Populations (1 + eps)/2 on EE and (1 - eps)/2 on LL; the EE-LL coherence is
    ``V_coh * sqrt(a d) * exp(i phase)``, or zero for incoherent pumping.
    ``phase`` overrides ``cfg.pump_phase`` (used per emission event).
    """
    eps = cfg.early_late_imbalance
    a = 0.5 * (1 + eps)
    d = 0.5 * (1 - eps)
    phase = cfg.pump_phase if phase is None else phase
    c = 0.0 if cfg.incoherent_pump else cfg.coherence_factor * math.sqrt(a * d) * np.exp(1j * phase)
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0] = a
    rho[3, 3] = d
    rho[3, 0] = c
    rho[0, 3] = np.conj(c)
    return check_density_matrix(rho, 4)


def hyper_state(pol_phase: float = 0.0, time_phase: float = 0.0) -> np.ndarray:
    """16-dim projector of (|HH> + e^{i a}|VV>) x (|EE> + e^{i b}|LL>), polarization major."""
    ket_h, ket_v = KET_E, KET_L  # same two-level encoding, H -> 0 and V -> 1
    pol = normalize(tensor(ket_h, ket_h) + np.exp(1j * pol_phase) * tensor(ket_v, ket_v))
    return projector(tensor(pol, ideal_ket(time_phase)))


@dataclass(frozen=True)
class EmissionEvent:
    pulse_index: int
    early_emitted: bool
    late_emitted: bool
    pair_phase: float

    @property
    def is_double(self) -> bool:
        return self.early_emitted and self.late_emitted


@dataclass
class EmissionBatch:
    """Columnar emission events (only pulses that emitted at least one pair)."""

    pulse_index: np.ndarray
    early: np.ndarray
    late: np.ndarray
    phase: np.ndarray
    n_pulses: int
    start: int = 0

    def __len__(self):
        return len(self.pulse_index)

    def __iter__(self) -> Iterator[EmissionEvent]:
        for i, e, l, ph in zip(self.pulse_index, self.early, self.late, self.phase):
            yield EmissionEvent(int(i), bool(e), bool(l), float(ph))

    @property
    def n_double(self) -> int:
        return int(np.count_nonzero(self.early & self.late))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pulse_index", "early", "late", "phase"])
            for i, e, l, ph in zip(self.pulse_index, self.early, self.late, self.phase):
                w.writerow([int(i), int(e), int(l), repr(float(ph))])

    @classmethod
    def read_csv(cls, path, n_pulses: int, start: int = 0) -> "EmissionBatch":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.size == 0:
            data = np.empty((0, 4))
        return cls(data[:, 0].astype(np.int64), data[:, 1].astype(bool),
                   data[:, 2].astype(bool), data[:, 3], n_pulses, start)


def sample_emissions(cfg: SourceConfig, n_pulses: int, seed: int, start: int = 0) -> EmissionBatch:
    """Emission events for pump pulses ``start .. start + n_pulses - 1``.

    Direct scheme: early and late excitations are independent Bernoulli(p)
    trials, so double pairs occur. Metastable scheme: one pair with probability
    p, placed in the early bin with probability (1 + eps)/2, never doubled.
    Draws for pulse i depend only on (seed, i), so any sharding over pulse
    ranges reproduces the same events.
    """
    if n_pulses < 0:
        raise ValueError("n_pulses must be non-negative")
    stop = start + n_pulses
    u = _rng.uniforms(seed, _rng.STREAM_EMISSION, start, stop, 3)
    p = cfg.excitation_prob
    if cfg.scheme == DIRECT:
        early = u[:, 0] < p
        late = u[:, 1] < p
    else:
        emitted = u[:, 0] < p
        to_early = u[:, 1] < 0.5 * (1 + cfg.early_late_imbalance)
        early = emitted & to_early
        late = emitted & ~to_early
    if cfg.incoherent_pump:
        phase = 2 * math.pi * u[:, 2]
    else:
        phase = np.full(n_pulses, float(cfg.pump_phase))
    keep = np.flatnonzero(early | late)
    return EmissionBatch(
        pulse_index=np.arange(start, stop, dtype=np.int64)[keep],
        early=early[keep],
        late=late[keep],
        phase=phase[keep],
        n_pulses=n_pulses,
        start=start,
    )
