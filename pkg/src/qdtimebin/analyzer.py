"""Imbalanced-interferometer time-bin analysis.

Each analyzer maps a photon onto six outcomes: detector A or B, in the early,
middle or late output slot. Outcome index is ``3 * detector + slot`` with
A = 0, B = 1 and early, middle, late = 0, 1, 2.

Beamsplitter convention (amplitudes): the first splitter sends sqrt(1 - r1)
into the short arm and sqrt(r1) into the long arm, which adds one delay and the
phase phi. The second splitter maps short -> (A: sqrt(1 - r2), B: sqrt(r2))
and long -> (A: sqrt(r2), B: -sqrt(1 - r2)). For symmetric splitters the
middle slot of A projects onto |E> + e^{i phi}|L>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from . import rng as _rng
from .qcore import DimensionError, check_density_matrix, partial_trace
from .source import EmissionBatch, SourceConfig, realistic_state
from .timetags import CH_1A, CH_2A, CH_SYNC, N_CHANNELS, TimeTagStream

BEAMSPLITTER = "beamsplitter"
SWITCH = "switch"

DETECTORS = ("A", "B")
SLOTS = ("early", "middle", "late")
OUTCOME_LABELS = tuple(f"{d}-{s}" for d in DETECTORS for s in SLOTS)
N_OUTCOMES = 6
MIDDLE = (1, 4)
TIME_SLOTS = (0, 2, 3, 5)


def outcome_index(detector: str, slot: str) -> int:
    return 3 * DETECTORS.index(detector) + SLOTS.index(slot)


@dataclass(frozen=True)
class AnalyzerConfig:
    phase: float = 0.0
    delay: float = 3336.0
    r1: float = 0.5
    r2: float = 0.5
    mode: str = BEAMSPLITTER
    arm_transmission_short: float = 1.0
    arm_transmission_long: float = 1.0

    def __post_init__(self):
        for name in ("r1", "r2", "arm_transmission_short", "arm_transmission_long"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.delay <= 0:
            raise ValueError("interferometer delay must be positive")
        if self.mode not in (BEAMSPLITTER, SWITCH):
            raise ValueError(f"mode must be {BEAMSPLITTER!r} or {SWITCH!r}")

    @property
    def lossless(self) -> bool:
        return self.arm_transmission_short == 1.0 and self.arm_transmission_long == 1.0


def _amplitudes(cfg: AnalyzerConfig) -> np.ndarray:
    """Row vectors K[o] with P(o | psi) = |K[o] . psi|^2, shape (6, 2)."""
    ts = math.sqrt(cfg.arm_transmission_short)
    tl = math.sqrt(cfg.arm_transmission_long) * np.exp(1j * cfg.phase)
    if cfg.mode == SWITCH:
        # E is routed into the long arm, L into the short arm
        into_short = np.array([0.0, 1.0])
        into_long = np.array([1.0, 0.0])
    else:
        into_short = np.full(2, math.sqrt(1 - cfg.r1))
        into_long = np.full(2, math.sqrt(cfg.r1))
    out_short = (math.sqrt(1 - cfg.r2), math.sqrt(cfg.r2))
    out_long = (math.sqrt(cfg.r2), -math.sqrt(1 - cfg.r2))
    k = np.zeros((N_OUTCOMES, 2), dtype=complex)
    for det in range(2):
        for bin_ in range(2):  # 0 = E, 1 = L
            # short arm keeps the time bin, long arm delays it by one slot
            k[3 * det + bin_, bin_] += into_short[bin_] * ts * out_short[det]
            k[3 * det + bin_ + 1, bin_] += into_long[bin_] * tl * out_long[det]
    return k


def povm(cfg: AnalyzerConfig) -> np.ndarray:
    """The six measurement operators on the {E, L} qubit, shape (6, 2, 2)."""
    k = _amplitudes(cfg)
    return np.einsum("oi,oj->oij", k.conj(), k)


def joint_probabilities(rho, cfg1: AnalyzerConfig, cfg2: AnalyzerConfig) -> np.ndarray:
    """P(o1, o2) = tr[(M1(o1) x M2(o2)) rho] as a 6 x 6 array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise DimensionError(f"pair state must be 4 x 4, got {rho.shape}")
    m1, m2 = povm(cfg1), povm(cfg2)
    r = rho.reshape(2, 2, 2, 2)
    p = np.einsum("aji,blk,ikjl->ab", m1, m2, r)
    return np.real(p)


def singles_probabilities(rho, cfg: AnalyzerConfig, side: int) -> np.ndarray:
    """Single-photon outcome distribution on ``side`` (1 or 2)."""
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    reduced = partial_trace(rho, (2, 2), "A" if side == 1 else "B")
    return np.real(np.einsum("oji,ij->o", povm(cfg), reduced))


def fringe_scan(
    rho,
    phi1_values,
    phi2: float,
    pairing: tuple[str, str] = ("A", "A"),
    cfg1: AnalyzerConfig | None = None,
    cfg2: AnalyzerConfig | None = None,
) -> np.ndarray:
    """Middle-middle coincidence probability versus the first analyzer phase.

    Returns rows (phi1, probability).
    """
    cfg1 = cfg1 or AnalyzerConfig()
    cfg2 = cfg2 or AnalyzerConfig()
    i = outcome_index(pairing[0], "middle")
    j = outcome_index(pairing[1], "middle")
    c2 = _replace_phase(cfg2, phi2)
    phi1_values = np.asarray(phi1_values, dtype=float)
    probs = [joint_probabilities(rho, _replace_phase(cfg1, p), c2)[i, j] for p in phi1_values]
    return np.column_stack([phi1_values, probs])


def _replace_phase(cfg: AnalyzerConfig, phase: float) -> AnalyzerConfig:
    from dataclasses import replace

    return replace(cfg, phase=float(phase))


# --- Monte-Carlo time tags --------------------------------------------------------------


@dataclass(frozen=True)
class Timing:
    rep_period: int = 12500
    delay: int = 3336
    jitter_std: float = 0.0
    detector_efficiency: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.detector_efficiency <= 1.0:
            raise ValueError("detector_efficiency must lie in [0, 1]")
        if self.jitter_std < 0:
            raise ValueError("jitter_std must be non-negative")
        if self.delay <= 0 or self.rep_period <= 0:
            raise ValueError("delay and rep_period must be positive")

    @property
    def sync_offset(self) -> float:
        """Offset of the sync tag (and of the nominal early slot) after the pump pulse."""
        return 3.0 * self.jitter_std

    @property
    def span(self) -> int:
        """Latest possible tag after the pump pulse start, in whole picoseconds."""
        return int(math.floor(2 * self.delay + 6 * self.jitter_std))


# jitter is a normal distribution truncated at +-3 sigma
_JITTER_CLIP = 3.0
_PHI_LO = 0.5 * math.erfc(_JITTER_CLIP / math.sqrt(2))


def _truncated_normal(u: np.ndarray) -> np.ndarray:
    return ndtri(_PHI_LO + u * (1 - 2 * _PHI_LO))


def _sample_categorical(cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF draws; ``cdf`` has shape (n, k) or (k,)."""
    if cdf.ndim == 1:
        idx = np.searchsorted(cdf, u * cdf[-1], side="right")
    else:
        idx = (cdf < (u * cdf[:, -1])[:, None]).sum(axis=1)
    return np.minimum(idx, cdf.shape[-1] - 1)


def _phase_decomposition(source: SourceConfig, cfg1, cfg2):
    """Joint table as P0 + cos(phase) Pc + sin(phase) Ps (linear in the coherence)."""
    p_cos = joint_probabilities(realistic_state(source, 0.0), cfg1, cfg2).ravel()
    p_sin = joint_probabilities(realistic_state(source, math.pi / 2), cfg1, cfg2).ravel()
    p_neg = joint_probabilities(realistic_state(source, math.pi), cfg1, cfg2).ravel()
    p0 = 0.5 * (p_cos + p_neg)
    return p0, p_cos - p0, p_sin - p0


def sample_outcomes(
    events: EmissionBatch,
    cfg1: AnalyzerConfig,
    cfg2: AnalyzerConfig,
    seed: int,
    source: SourceConfig | None = None,
    efficiency: float = 1.0,
):
    """Per-event analyzer outcomes and detection flags.

    Returns ``(outcomes, detected)`` of shape (n_events, 4) with columns
    (side-1 photon a, side-2 photon a, side-1 photon b, side-2 photon b);
    photon b exists only for double-pair events (outcome -1 otherwise).
    """
    source = source or SourceConfig()
    idx = np.asarray(events.pulse_index, dtype=np.int64)
    u = _rng.uniforms_at(seed, _rng.STREAM_DETECTION, idx, 12)
    double = events.early & events.late
    single = ~double

    n = idx.size
    outcomes = np.full((n, 4), -1, dtype=np.int64)

    s = np.flatnonzero(single)
    if s.size:
        p0, pc, ps = _phase_decomposition(source, cfg1, cfg2)
        ph = np.asarray(events.phase, dtype=float)[s]
        if np.all(ph == ph[0]):
            table = p0 + math.cos(ph[0]) * pc + math.sin(ph[0]) * ps
            joint = _sample_categorical(np.cumsum(np.clip(table, 0, None)), u[s, 0])
        else:
            tables = p0 + np.cos(ph)[:, None] * pc + np.sin(ph)[:, None] * ps
            joint = _sample_categorical(np.cumsum(np.clip(tables, 0, None), axis=1), u[s, 0])
        outcomes[s, 0] = joint // N_OUTCOMES
        outcomes[s, 1] = joint % N_OUTCOMES

    d = np.flatnonzero(double)
    if d.size:
        m1, m2 = povm(cfg1), povm(cfg2)
        # photon a from the early cascade, photon b from the late one
        for col, m, bin_, ucol in ((0, m1, 0, 0), (1, m2, 0, 1), (2, m1, 1, 2), (3, m2, 1, 3)):
            probs = np.real(m[:, bin_, bin_])
            outcomes[d, col] = _sample_categorical(np.cumsum(probs), u[d, ucol])

    detected = (outcomes >= 0) & (u[:, 4:8] < efficiency)
    return outcomes, detected


def sample_timetags(
    events: EmissionBatch,
    cfg1: AnalyzerConfig,
    cfg2: AnalyzerConfig,
    timing: Timing,
    seed: int,
    source: SourceConfig | None = None,
) -> tuple[TimeTagStream, TimeTagStream, TimeTagStream]:
    """Detection time tags for both analyzers plus the sync stream.

    A single-pair event is drawn from ``joint_probabilities`` of the pair state
    with the event's phase. A double-pair event is two independent cascades,
    one per time bin, with every photon routed independently. Each photon is
    detected with probability ``timing.detector_efficiency``. Photon tags land
    at ``pulse_start + sync_offset + slot * delay + jitter`` with the jitter
    truncated at three standard deviations; the sync tag sits at
    ``pulse_start + sync_offset``.
    """
    if timing.delay >= timing.rep_period / 3:
        raise ValueError("analyzer slots overlap the next pump period (need delay < rep_period/3)")
    source = source or SourceConfig()
    n_pulses = events.n_pulses
    starts = (events.start + np.arange(n_pulses, dtype=np.int64)) * timing.rep_period
    sync = TimeTagStream(np.rint(starts + timing.sync_offset).astype(np.int64),
                         np.full(n_pulses, CH_SYNC, np.uint8))

    idx = np.asarray(events.pulse_index, dtype=np.int64)
    outcomes, detected = sample_outcomes(events, cfg1, cfg2, seed, source, timing.detector_efficiency)
    u = _rng.uniforms_at(seed, _rng.STREAM_DETECTION, idx, 12)
    jitter = timing.jitter_std * _truncated_normal(u[:, 8:12])
    base = idx[:, None] * timing.rep_period + timing.sync_offset
    slot = np.where(outcomes >= 0, outcomes % 3, 0)
    t = np.rint(base + slot * timing.delay + jitter).astype(np.int64)
    lo = idx[:, None] * timing.rep_period
    t = np.clip(t, lo, lo + timing.span)

    streams = []
    for side, cols, ch0 in ((1, (0, 2), CH_1A), (2, (1, 3), CH_2A)):
        cols = list(cols)
        mask = detected[:, cols]
        ts = t[:, cols][mask]
        ch = (ch0 + outcomes[:, cols][mask] // 3).astype(np.uint8)
        order = np.lexsort((ch, ts))
        streams.append(TimeTagStream(ts[order], ch[order], N_CHANNELS))
    return streams[0], streams[1], sync


# --- Coincidence engine -----------------------------------------------------------------


@dataclass
class CoincidenceHistogram:
    counts: np.ndarray = field(default_factory=lambda: np.zeros((6, 6), dtype=np.int64))
    singles: np.ndarray = field(default_factory=lambda: np.zeros((2, 6), dtype=np.int64))
    n_pulses: int = 0
    unassigned: int = 0
    multi_periods: int = 0  # sync periods with more than one tag on either side

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        return CoincidenceHistogram(
            self.counts + other.counts,
            self.singles + other.singles,
            self.n_pulses + other.n_pulses,
            self.unassigned + other.unassigned,
            self.multi_periods + other.multi_periods,
        )

    def to_json(self) -> dict:
        return {
            "outcome_labels": list(OUTCOME_LABELS),
            "counts": self.counts.tolist(),
            "singles": {"side1": self.singles[0].tolist(), "side2": self.singles[1].tolist()},
            "n_pulses": int(self.n_pulses),
            "unassigned": int(self.unassigned),
            "multi_periods": int(self.multi_periods),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CoincidenceHistogram":
        return cls(
            np.asarray(obj["counts"], dtype=np.int64),
            np.asarray([obj["singles"]["side1"], obj["singles"]["side2"]], dtype=np.int64),
            int(obj["n_pulses"]),
            int(obj["unassigned"]),
            int(obj.get("multi_periods", 0)),
        )


class UnsortedStreamError(ValueError):
    pass


def _assign(stream: TimeTagStream, sync_t: np.ndarray, ch_base: int, delay: float, window: float):
    """Sync period and outcome index for each tag; period -1 marks unassigned."""
    ts = stream.timestamps
    # a tag may precede its sync tag by less than the window
    period = np.searchsorted(sync_t, ts + window, side="right") - 1
    ok = period >= 0
    offset = ts - sync_t[np.clip(period, 0, None)]
    k = np.rint(offset / delay).astype(np.int64)
    ok &= (k >= 0) & (k <= 2) & (np.abs(offset - k * delay) < window)
    det = stream.channels.astype(np.int64) - ch_base
    ok &= (det == 0) | (det == 1)
    outcome = 3 * det + k
    period = np.where(ok, period, -1)
    return period, outcome


def coincidences(
    s1: TimeTagStream,
    s2: TimeTagStream,
    sync: TimeTagStream,
    delay: float,
    window: float,
    chunk: int = 1 << 16,
) -> CoincidenceHistogram:
    """Fold three sorted streams into a 6 x 6 coincidence histogram.

    A tag belongs to the most recent sync tag and to slot k in {0, 1, 2} if
    |t - t_sync - k delay| < window. Tags of both sides in the same sync period
    are paired. Sync periods are processed in chunks, so memory is bounded by
    the chunk size; chunk histograms add up to the full result.
    """
    if not window < delay / 2:
        raise ValueError("window must be smaller than delay/2 for unambiguous slots")
    for name, s in (("side-1", s1), ("side-2", s2), ("sync", sync)):
        if s.timestamps.size and np.any(np.diff(s.timestamps) < 0):
            raise UnsortedStreamError(f"{name} stream is not sorted")
    sync_t = sync.timestamps
    hist = CoincidenceHistogram(n_pulses=int(sync_t.size))
    if not sync_t.size:
        hist.unassigned = len(s1) + len(s2)
        return hist
    # tags are handed to the chunk whose first sync tag lies at most `window` later
    edge = lambda t: np.ceil(t - window).astype(np.int64)  # noqa: E731
    first = np.searchsorted(s1.timestamps, edge(sync_t[0])), np.searchsorted(s2.timestamps, edge(sync_t[0]))
    hist.unassigned += int(first[0] + first[1])
    for c0 in range(0, sync_t.size, chunk):
        c1 = min(c0 + chunk, sync_t.size)
        t_lo = edge(sync_t[c0])
        t_hi = edge(sync_t[c1]) if c1 < sync_t.size else np.iinfo(np.int64).max
        parts = []
        for side, s, ch_base in ((0, s1, CH_1A), (1, s2, CH_2A)):
            a, b = np.searchsorted(s.timestamps, [t_lo, t_hi], side="left")
            sub = TimeTagStream(s.timestamps[a:b], s.channels[a:b], s.n_channels)
            period, outcome = _assign(sub, sync_t[c0:c1], ch_base, delay, window)
            ok = period >= 0
            hist.unassigned += int(np.count_nonzero(~ok))
            np.add.at(hist.singles[side], outcome[ok], 1)
            parts.append((period[ok], outcome[ok]))
        per_side = [np.bincount(p, minlength=c1 - c0) for p, _ in parts]
        hist.multi_periods += int(np.count_nonzero((per_side[0] > 1) | (per_side[1] > 1)))
        _pair_counts(hist.counts, *parts[0], *parts[1])
    return hist


def _pair_counts(counts, p1, o1, p2, o2) -> None:
    """Add every (tag1, tag2) pair sharing a sync period; periods are sorted."""
    if not p1.size or not p2.size:
        return
    lo = np.searchsorted(p2, p1, side="left")
    hi = np.searchsorted(p2, p1, side="right")
    n = hi - lo
    has = n > 0
    if not np.any(has):
        return
    rep1 = np.repeat(np.flatnonzero(has), n[has])
    starts = np.repeat(lo[has], n[has])
    within = np.arange(rep1.size) - np.repeat(np.cumsum(n[has]) - n[has], n[has])
    idx2 = starts + within
    np.add.at(counts, (o1[rep1], o2[idx2]), 1)
