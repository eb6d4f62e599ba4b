"""Pulsed two-photon excitation of the biexciton-exciton cascade.

Four-level system with basis order (g, xH, xV, b). Times are in picoseconds and
energies in angular frequency units (rad/ps, hbar = 1). In the frame rotating
at the laser frequency the drive couples g and b directly; the exciton levels
are populated only through the radiative cascade.

Integration is a fixed-step classical Runge-Kutta scheme on the vectorized
Lindblad equation while any pulse is on. Between pulses the generator is
constant and is propagated exactly with a matrix exponential.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.linalg import expm

from . import rng as _rng
from .qcore import check_density_matrix

G, XH, XV, B = range(4)
LEVELS = ("g", "xH", "xV", "b")
DIM = 4

# Gaussian pulses are treated as switched off beyond this many RMS widths
GAUSS_CUTOFF = 8.0
AREA_TOL = 1e-9


@dataclass(frozen=True)
class LevelSystem:
    """Quantum-dot level structure and radiative rates.

    ``exciton_energy`` and ``binding_energy`` only enter as validation: the
    rotating-frame model keeps the exciton levels out of the drive.
    """

    exciton_energy: float = 2.0 * math.pi * 350.0
    binding_energy: float = 0.005
    fss: float = 0.0
    gamma_b: float = 0.0
    gamma_x: float = 0.0

    def __post_init__(self):
        if self.gamma_b < 0 or self.gamma_x < 0:
            raise ValueError("decay rates must be non-negative")
        if self.fss < 0:
            raise ValueError("fine structure splitting must be non-negative")
        if self.binding_energy <= 0:
            raise ValueError("biexciton binding energy must be positive (bound biexciton)")

    def without_decay(self) -> "LevelSystem":
        return replace(self, gamma_b=0.0, gamma_x=0.0)


@dataclass(frozen=True)
class Pulse:
    """A two-photon drive pulse.

    area      -- integral of the two-photon Rabi frequency (rad)
    duration  -- RMS width for ``shape='gaussian'``, full width for ``'square'`` (ps)
    phase     -- laser phase (rad)
    center    -- pulse center (ps)
    detuning  -- transition frequency minus twice the laser frequency (rad/ps)
    """

    area: float
    duration: float
    phase: float = 0.0
    center: float = 0.0
    detuning: float = 0.0
    shape: str = "gaussian"

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("pulse duration must be positive")
        if self.area < 0:
            raise ValueError("pulse area must be non-negative")
        if self.shape not in ("gaussian", "square"):
            raise ValueError(f"unknown pulse shape {self.shape!r}")

    @property
    def window(self) -> tuple[float, float]:
        if self.shape == "gaussian":
            half = GAUSS_CUTOFF * self.duration
        else:
            half = 0.5 * self.duration
        return self.center - half, self.center + half

    def unit_envelope(self, t):
        """Envelope normalized to unit area."""
        t = np.asarray(t, dtype=float)
        if self.shape == "gaussian":
            s = self.duration
            return np.exp(-0.5 * ((t - self.center) / s) ** 2) / (s * math.sqrt(2 * math.pi))
        lo, hi = self.window
        return np.where((t >= lo) & (t < hi), 1.0 / self.duration, 0.0)

    def rabi(self, t):
        """Two-photon Rabi frequency at time ``t``."""
        return self.area * self.unit_envelope(t)


@dataclass(frozen=True)
class DephasingModel:
    """Pure dephasing of the g-b coherence.

    The coherence decays at ``constant_rate + intensity_coefficient * |Omega2(t)|``.
    """

    constant_rate: float = 0.0
    intensity_coefficient: float = 0.0

    def __post_init__(self):
        if self.constant_rate < 0 or self.intensity_coefficient < 0:
            raise ValueError("dephasing parameters must be non-negative")


@dataclass(frozen=True)
class PulseSequence:
    pulses: tuple[Pulse, ...]
    allow_overlap: bool = False

    def __post_init__(self):
        object.__setattr__(self, "pulses", tuple(self.pulses))
        if not self.pulses:
            raise ValueError("a pulse sequence needs at least one pulse")
        for a, b in zip(self.pulses, self.pulses[1:]):
            if b.center <= a.center:
                raise ValueError("pulse centers must be strictly increasing")
            if not self.allow_overlap and b.center - a.center <= 4 * max(a.duration, b.duration):
                raise ValueError(
                    f"pulses at {a.center} and {b.center} ps overlap (separation must exceed 4 sigma)"
                )
        if len({p.detuning for p in self.pulses}) > 1:
            raise ValueError("all pulses of a sequence share one laser detuning")

    @property
    def min_duration(self) -> float:
        return min(p.duration for p in self.pulses)


@dataclass
class EvolutionResult:
    times: np.ndarray
    populations: np.ndarray  # (n_times, 4) in level order g, xH, xV, b
    final_state: np.ndarray
    trace_error: float = 0.0
    min_eigenvalue: float = 0.0

    @property
    def P_g(self):
        return self.populations[:, G]

    @property
    def P_xH(self):
        return self.populations[:, XH]

    @property
    def P_xV(self):
        return self.populations[:, XV]

    @property
    def P_b(self):
        return self.populations[:, B]

    @property
    def P_x(self):
        return self.populations[:, XH] + self.populations[:, XV]


# --- Hamiltonian and Liouvillian ----------------------------------------------------------


def effective_hamiltonian(sys: LevelSystem, pulse: Pulse, t: float) -> np.ndarray:
    """Rotating-frame Hamiltonian at time ``t`` for a single pulse."""
    if not np.isfinite(t):
        raise ValueError("time must be finite")
    h = np.diag([0.0, -0.5 * sys.fss, 0.5 * sys.fss, pulse.detuning]).astype(complex)
    drive = 0.5 * float(pulse.rabi(t)) * np.exp(1j * pulse.phase)
    h[B, G] = drive
    h[G, B] = np.conj(drive)
    return h


def _ket_bra(i: int, j: int) -> np.ndarray:
    m = np.zeros((DIM, DIM), dtype=complex)
    m[i, j] = 1.0
    return m


def _commutator_super(h: np.ndarray) -> np.ndarray:
    eye = np.eye(DIM)
    return -1j * (np.kron(h, eye) - np.kron(eye, h.T))


def _dissipator_super(c: np.ndarray) -> np.ndarray:
    eye = np.eye(DIM)
    cdc = c.conj().T @ c
    return np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)


_L_DETUNING = _commutator_super(_ket_bra(B, B))
_L_DRIVE_RE = _commutator_super(0.5 * (_ket_bra(B, G) + _ket_bra(G, B)))
_L_DRIVE_IM = _commutator_super(0.5j * (_ket_bra(B, G) - _ket_bra(G, B)))
# unit-rate pure dephasing of the g-b coherence
_L_DEPHASE = _dissipator_super(math.sqrt(2.0) * _ket_bra(B, B))
# both superoperators above are diagonal in the vectorized basis
_DIAG_DETUNING = np.diag(_L_DETUNING).copy()
_DIAG_DEPHASE = np.diag(_L_DEPHASE).copy()


def _base_liouvillian(sys: LevelSystem, deph: DephasingModel, detuning: float) -> np.ndarray:
    h0 = np.diag([0.0, -0.5 * sys.fss, 0.5 * sys.fss, detuning]).astype(complex)
    lv = _commutator_super(h0)
    if sys.gamma_b:
        lv = lv + 0.5 * sys.gamma_b * (
            _dissipator_super(_ket_bra(XH, B)) + _dissipator_super(_ket_bra(XV, B))
        )
    if sys.gamma_x:
        lv = lv + sys.gamma_x * (
            _dissipator_super(_ket_bra(G, XH)) + _dissipator_super(_ket_bra(G, XV))
        )
    if deph.constant_rate:
        lv = lv + deph.constant_rate * _L_DEPHASE
    return lv


class _Model:
    """Batched Lindblad generator sharing pulse timing across the batch.

    Each batch member may carry its own static detuning offset, pulse areas and
    pulse phases.
    """

    def __init__(self, sys, deph, pulses: Sequence[Pulse], areas, phases, det_offsets):
        self.pulses = list(pulses)
        n_batch = np.shape(areas)[0]
        self.base = _base_liouvillian(sys, deph, self.pulses[0].detuning if self.pulses else 0.0)
        self.gamma_i = deph.intensity_coefficient
        self.amps = np.asarray(areas, dtype=float) * np.exp(1j * np.asarray(phases, dtype=float))
        self.det = np.broadcast_to(np.asarray(det_offsets, dtype=float), (n_batch,))
        self.any_det = bool(np.any(self.det))
        self.windows = [p.window for p in self.pulses]
        self.edges = sorted(
            {x for p in self.pulses if p.shape == "square" for x in p.window}
        )
        self._expm_cache: dict[float, np.ndarray] = {}

    def driven(self, a: float, b: float) -> bool:
        return any(lo < b and hi > a for lo, hi in self.windows)

    def drive(self, t: float, t_square: float) -> np.ndarray:
        # square pulses are piecewise constant; evaluate them inside the current sub-interval
        d = np.zeros(self.amps.shape[0], dtype=complex)
        for k, p in enumerate(self.pulses):
            lo, hi = self.windows[k]
            if p.shape == "square":
                if lo <= t_square < hi:
                    d += self.amps[:, k] / p.duration
            elif lo <= t <= hi:
                d += self.amps[:, k] * float(p.unit_envelope(t))
        return d

    def rhs(self, t: float, v: np.ndarray, t_square: float) -> np.ndarray:
        # v has shape (16, n_batch); element (i, j) of rho sits at row 4*i + j
        out = self.base @ v
        if self.any_det:
            out += _DIAG_DETUNING[:, None] * v * self.det
        d = self.drive(t, t_square)
        if np.any(d):
            r = v.reshape(DIM, DIM, -1)
            o = out.reshape(DIM, DIM, -1)
            half = 0.5 * d
            # -i [H_d, rho] with H_d = (d/2)|b><g| + (d*/2)|g><b|
            o[G, :] += -1j * np.conj(half) * r[B, :]
            o[B, :] += -1j * half * r[G, :]
            o[:, G] += 1j * r[:, B] * half
            o[:, B] += 1j * r[:, G] * np.conj(half)
            if self.gamma_i:
                out += _DIAG_DEPHASE[:, None] * v * (self.gamma_i * np.abs(d))
        return out

    def free_step(self, v: np.ndarray, span: float) -> np.ndarray:
        key = round(span, 12)
        prop = self._expm_cache.get(key)
        if prop is None:
            prop = expm(self.base * span)
            self._expm_cache[key] = prop
        v = prop @ v
        if self.any_det:
            # the detuning superoperator is diagonal and commutes with the free generator
            v = v * np.exp(np.outer(_DIAG_DETUNING, self.det) * span)
        return v

    def rk4(self, v: np.ndarray, a: float, b: float, dt: float) -> np.ndarray:
        cuts = [a] + [e for e in self.edges if a < e < b] + [b]
        for lo, hi in zip(cuts, cuts[1:]):
            n = max(1, math.ceil((hi - lo) / dt - 1e-9))
            h = (hi - lo) / n
            t = lo
            for _ in range(n):
                ts = 0.5 * (lo + hi)
                k1 = self.rhs(t, v, ts)
                k2 = self.rhs(t + 0.5 * h, v + 0.5 * h * k1, ts)
                k3 = self.rhs(t + 0.5 * h, v + 0.5 * h * k2, ts)
                k4 = self.rhs(t + h, v + h * k3, ts)
                v = v + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
                t += h
        return v

    def advance(self, v: np.ndarray, a: float, b: float, dt: float) -> np.ndarray:
        if b <= a:
            return v
        if self.driven(a, b):
            return self.rk4(v, a, b, dt)
        return self.free_step(v, b - a)


def _vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho, dtype=complex).reshape(DIM * DIM)


def _check_dt(dt: float, sigma_min: float) -> None:
    if dt <= 0:
        raise ValueError("dt must be positive")
    if dt > sigma_min / 10:
        raise ValueError(f"dt={dt} ps is too coarse for sigma={sigma_min} ps (limit sigma/10)")
    if dt > sigma_min / 20:
        warnings.warn(f"dt={dt} ps exceeds sigma/20; accuracy contract not guaranteed", stacklevel=3)


def evolve(
    sys: LevelSystem,
    seq: PulseSequence | Sequence[Pulse],
    deph: DephasingModel,
    rho0,
    t_span: tuple[float, float],
    dt: float | None = None,
    sample_every: int = 1,
) -> EvolutionResult:
    """Integrate the Lindblad master equation over ``t_span``.

    Collapse channels are b -> xH and b -> xV (rate gamma_b/2 each), xH -> g and
    xV -> g (rate gamma_x each), plus pure dephasing of the g-b coherence.
    Populations are recorded every ``sample_every`` steps of the uniform grid
    ``t_span[0] + k*dt``.
    """
    if not isinstance(seq, PulseSequence):
        seq = PulseSequence(tuple(seq))
    rho0 = check_density_matrix(rho0, DIM)
    t0, t1 = map(float, t_span)
    if not t1 > t0:
        raise ValueError("t_span must be increasing")
    if dt is None:
        dt = seq.min_duration / 40
    _check_dt(dt, seq.min_duration)

    n_steps = max(1, math.ceil((t1 - t0) / dt - 1e-9))
    grid = t0 + dt * np.arange(n_steps + 1)
    grid[-1] = t1
    model = _Model(sys, deph, seq.pulses, [[p.area for p in seq.pulses]],
                   [[p.phase for p in seq.pulses]], [0.0])

    v = _vec(rho0)[:, None]
    keep = list(range(0, n_steps + 1, sample_every))
    if keep[-1] != n_steps:
        keep.append(n_steps)
    keep_set = set(keep)
    pops = []
    trace_err = 0.0
    min_eig = 1.0
    for k in range(n_steps + 1):
        if k:
            v = model.advance(v, grid[k - 1], grid[k], dt)
        if k in keep_set:
            rho = v[:, 0].reshape(DIM, DIM)
            pops.append(np.real(np.diag(rho)))
            trace_err = max(trace_err, abs(np.trace(rho) - 1))
            min_eig = min(min_eig, float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]))
    rho_final = v[:, 0].reshape(DIM, DIM)
    return EvolutionResult(
        times=grid[keep],
        populations=np.array(pops),
        final_state=rho_final,
        trace_error=trace_err,
        min_eigenvalue=min_eig,
    )


def _propagate(model: _Model, v: np.ndarray, t0: float, t1: float, dt: float) -> np.ndarray:
    """Advance batch vectors from t0 to t1, jumping exactly across free intervals."""
    cuts = {t0, t1}
    for lo, hi in model.windows:
        cuts.update(x for x in (lo, hi) if t0 < x < t1)
    cuts = sorted(cuts)
    for a, b in zip(cuts, cuts[1:]):
        v = model.advance(v, a, b, dt)
    return v


def _final_states(sys, deph, pulses, areas, phases, det_offsets, rho0, t0, t1, dt) -> np.ndarray:
    """Final density matrices, shape (batch, 4, 4)."""
    model = _Model(sys, deph, pulses, areas, phases, det_offsets)
    n_batch = np.shape(areas)[0]
    v = np.repeat(_vec(rho0)[:, None], n_batch, axis=1)
    v = _propagate(model, v, t0, t1, dt)
    return v.T.reshape(n_batch, DIM, DIM)


def ground_state() -> np.ndarray:
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[G, G] = 1.0
    return rho


def _readout(states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Biexciton and exciton emission probabilities from final states.

    Every biexciton population still emits an exciton photon in the cascade, so
    the exciton emission probability is P_b + P_xH + P_xV.
    """
    diag = np.real(np.einsum("bii->bi", states))
    p_b = diag[:, B]
    p_x = diag[:, B] + diag[:, XH] + diag[:, XV]
    return p_b, p_x


# --- Rabi -------------------------------------------------------------------------------


def rabi_scan(
    sys: LevelSystem,
    sigma: float,
    areas,
    deph: DephasingModel,
    dt: float | None = None,
    detuning: float = 0.0,
) -> np.ndarray:
    """Excitation probabilities after a single Gaussian pulse versus pulse area.

    Decay is switched off for the scan and populations are read at the end of
    the pulse window (8 sigma after the center). Returns rows (area, P_b, P_x).
    """
    areas = np.asarray(areas, dtype=float)
    if areas.ndim != 1 or np.any(np.diff(areas) < 0):
        raise ValueError("areas must be a 1-D ascending array")
    dt = sigma / 40 if dt is None else dt
    _check_dt(dt, sigma)
    pulse = Pulse(area=1.0, duration=sigma, detuning=detuning)
    lo, hi = pulse.window
    states = _final_states(
        sys.without_decay(), deph, [pulse], areas[:, None], np.zeros((areas.size, 1)),
        0.0, ground_state(), lo, hi, dt,
    )
    p_b, p_x = _readout(states)
    return np.column_stack([areas, p_b, p_x])


def oscillation_envelope(areas, p_b, at: float) -> float:
    """Upper envelope of a damped Rabi curve, interpolated between local maxima."""
    areas = np.asarray(areas, dtype=float)
    p_b = np.asarray(p_b, dtype=float)
    idx = [i for i in range(1, len(p_b) - 1) if p_b[i] >= p_b[i - 1] and p_b[i] >= p_b[i + 1]]
    if not idx:
        raise ValueError("no local maxima in the scan")
    return float(np.interp(at, areas[idx], p_b[idx]))


# --- Fringes ----------------------------------------------------------------------------


def visibility(fringe, period: float = 2 * math.pi) -> float:
    """Visibility (max - min)/(max + min) of a least-squares sinusoid fit.

    ``fringe`` is an (n, 2) array of (x, y) with at least 8 points covering one
    full period (uniform samples spaced period/n count as covering it).
    """
    fringe = np.asarray(fringe, dtype=float)
    if fringe.ndim != 2 or fringe.shape[1] != 2 or fringe.shape[0] < 8:
        raise ValueError("need at least 8 (x, y) points")
    x, y = fringe[:, 0], fringe[:, 1]
    xs = np.unique(x)
    span = xs[-1] - xs[0] + (xs[-1] - xs[0]) / max(len(xs) - 1, 1)
    if span < period * (1 - 1e-9):
        raise ValueError("fringe must span at least one full period")
    w = 2 * math.pi / period
    design = np.column_stack([np.ones_like(x), np.cos(w * x), np.sin(w * x)])
    (offset, c, s), *_ = np.linalg.lstsq(design, y, rcond=None)
    amp = math.hypot(c, s)
    hi, lo = offset + amp, offset - amp
    if abs(hi + lo) < 1e-15:
        raise ValueError("degenerate fringe: max + min = 0")
    return float(np.clip((hi - lo) / (hi + lo), 0.0, 1.0))


@dataclass
class FringeResult:
    delays: np.ndarray
    p_b: np.ndarray
    p_x: np.ndarray
    visibility: np.ndarray
    phases: np.ndarray = field(repr=False, default=None)
    p_b_vs_phase: np.ndarray = field(repr=False, default=None)  # (n_delays, n_phase)


def _check_area(p: Pulse, target: float, name: str) -> None:
    if abs(p.area - target) > AREA_TOL:
        raise ValueError(f"{name} must have area {target:.12g}, got {p.area:.12g}")


def _detuning_ensemble(mean: float, std: float, n_samples: int, seed: int) -> np.ndarray:
    if std == 0:
        return np.full(1, float(mean))
    z = _rng.normals(seed, _rng.STREAM_DETUNING, 0, n_samples, 1)[:, 0]
    return mean + std * z


def _fringe_scan(sys, deph, pulses, last_phases, detunings, dt):
    """Ensemble-averaged readout with the phase of the last pulse scanned.

    The ensemble is propagated once up to the last pulse and only then
    branched over phases. Returns P_b and P_x arrays of shape (n_phase,).
    """
    n_phase = len(last_phases)
    n_det = len(detunings)
    head, last = list(pulses[:-1]), pulses[-1]
    t0 = pulses[0].window[0]
    t_split = last.window[0]
    t1 = last.window[1]
    v = np.repeat(_vec(ground_state())[:, None], n_det, axis=1)
    if head:
        model = _Model(sys, deph, head,
                       np.tile([p.area for p in head], (n_det, 1)),
                       np.tile([p.phase for p in head], (n_det, 1)), detunings)
        v = _propagate(model, v, t0, t_split, dt)
    v = np.tile(v, (1, n_phase))
    # earlier pulses stay in the model: their windows may reach past t_split
    n_b = n_phase * n_det
    areas = np.tile([p.area for p in pulses], (n_b, 1))
    phases = np.tile([p.phase for p in pulses], (n_b, 1))
    phases[:, -1] = np.repeat(last_phases, n_det)
    model = _Model(sys, deph, list(pulses), areas, phases, np.tile(detunings, n_phase))
    v = _propagate(model, v, t_split, t1, dt)
    p_b, p_x = _readout(v.T.reshape(-1, DIM, DIM))
    return p_b.reshape(n_phase, n_det).mean(axis=1), p_x.reshape(n_phase, n_det).mean(axis=1)


def ramsey(
    sys: LevelSystem,
    pulse_pair: tuple[Pulse, Pulse],
    delays,
    deph: DephasingModel,
    laser_phase: float = 0.0,
    n_phase: int = 8,
    detuning_mean: float = 0.0,
    detuning_std: float = 0.0,
    n_samples: int = 200,
    seed: int = 0,
    dt: float | None = None,
) -> FringeResult:
    """Two pi/2 pulses separated by each center-to-center delay.

    ``laser_phase`` is added to the second pulse. P_b and P_x are read at the
    end of the second pulse. Visibility at each delay comes from a sinusoid fit
    over ``n_phase`` values of the second-pulse phase. A non-zero
    ``detuning_std`` averages over a static Gaussian detuning distribution.
    """
    p1, p2 = pulse_pair
    _check_area(p1, math.pi / 2, "first Ramsey pulse")
    _check_area(p2, math.pi / 2, "second Ramsey pulse")
    delays = np.asarray(delays, dtype=float)
    sigma = min(p1.duration, p2.duration)
    dt = sigma / 40 if dt is None else dt
    _check_dt(dt, sigma)
    detunings = _detuning_ensemble(detuning_mean, detuning_std, n_samples, seed) - detuning_mean
    scan = laser_phase + 2 * math.pi * np.arange(n_phase) / n_phase
    p_b, p_x, vis, table = [], [], [], []
    for tau in delays:
        seq = PulseSequence(
            (replace(p1, center=0.0, detuning=p1.detuning + detuning_mean),
             replace(p2, center=float(tau), detuning=p1.detuning + detuning_mean)),
        )
        pb, px = _fringe_scan(sys, deph, seq.pulses, p2.phase + scan, detunings, dt)
        p_b.append(pb[0])
        p_x.append(px[0])
        table.append(pb)
        vis.append(visibility(np.column_stack([scan, pb])))
    return FringeResult(delays, np.array(p_b), np.array(p_x), np.array(vis), scan, np.array(table))


def echo_template(pulse: Pulse, total_delay: float) -> PulseSequence:
    """pi/2 - pi - pi/2 sequence with the refocusing pulse at the midpoint."""
    half = replace(pulse, area=math.pi / 2)
    full = replace(pulse, area=math.pi)
    return PulseSequence(
        (replace(half, center=0.0), replace(full, center=total_delay / 2), replace(half, center=total_delay))
    )


def echo(
    sys: LevelSystem,
    seq: PulseSequence,
    total_delays,
    deph: DephasingModel,
    detuning_mean: float = 0.0,
    detuning_std: float = 0.0,
    n_samples: int = 100,
    seed: int = 0,
    n_phase: int = 8,
    dt: float | None = None,
) -> FringeResult:
    """Hahn echo visibility versus total delay for a static detuning ensemble.

    ``seq`` is a (pi/2, pi, pi/2) template whose middle pulse must sit at the
    temporal midpoint; it is rescaled to each total delay. Detuning samples are
    keyed on (seed, sample index).
    """
    if len(seq.pulses) != 3:
        raise ValueError("echo needs exactly three pulses")
    for p, target, name in zip(seq.pulses, (math.pi / 2, math.pi, math.pi / 2), ("first", "middle", "last")):
        _check_area(p, target, f"{name} echo pulse")
    c0, c1, c2 = (p.center for p in seq.pulses)
    if abs((c1 - c0) - (c2 - c1)) > 1e-9 * max(1.0, c2 - c0):
        raise ValueError("asymmetric echo sequence: middle pulse is not at the temporal midpoint")
    if n_samples < 100 and detuning_std > 0:
        raise ValueError("echo ensemble needs n_samples >= 100")
    sigma = seq.min_duration
    dt = sigma / 40 if dt is None else dt
    _check_dt(dt, sigma)
    detunings = _detuning_ensemble(detuning_mean, detuning_std, n_samples, seed) - detuning_mean
    scan = 2 * math.pi * np.arange(n_phase) / n_phase
    last_phase = seq.pulses[2].phase
    p_b, p_x, vis, table = [], [], [], []
    for total in np.asarray(total_delays, dtype=float):
        pulses = PulseSequence(
            tuple(replace(p, center=c, detuning=p.detuning + detuning_mean)
                  for p, c in zip(seq.pulses, (0.0, total / 2, float(total))))
        ).pulses
        pb, px = _fringe_scan(sys, deph, pulses, last_phase + scan, detunings, dt)
        p_b.append(pb[0])
        p_x.append(px[0])
        table.append(pb)
        vis.append(visibility(np.column_stack([scan, pb])))
    return FringeResult(np.asarray(total_delays, dtype=float), np.array(p_b), np.array(p_x),
                        np.array(vis), scan, np.array(table))
