"""Two-qubit tomography from analyzer count data, plus fidelity and concurrence."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .analyzer import MIDDLE, N_OUTCOMES, AnalyzerConfig, joint_probabilities, povm
from .qcore import (
    ATOL_STATE,
    NOISE_FLOOR,
    SIGMA_YY,
    DimensionError,
    check_density_matrix,
    herm_eigs,
    psd_sqrt,
)
from .qcore import purity as _purity

TWO_PI = 2 * math.pi


class IncompleteSettingsError(ValueError):
    def __init__(self, rank: int):
        self.rank = rank
        super().__init__(f"measurement settings are not tomographically complete (rank {rank} of 16)")


@dataclass(frozen=True)
class MeasurementSetting:
    phi1: float
    phi2: float
    includes_time_basis: bool = True

    def __post_init__(self):
        object.__setattr__(self, "phi1", float(self.phi1) % TWO_PI)
        object.__setattr__(self, "phi2", float(self.phi2) % TWO_PI)

    def outcome_mask(self) -> np.ndarray:
        """Which of the 36 outcome pairs are recorded (row-major)."""
        if self.includes_time_basis:
            return np.ones(N_OUTCOMES * N_OUTCOMES, dtype=bool)
        m = np.zeros((N_OUTCOMES, N_OUTCOMES), dtype=bool)
        m[np.ix_(MIDDLE, MIDDLE)] = True
        return m.ravel()

    def effects(self) -> np.ndarray:
        """The 36 two-photon POVM elements, shape (36, 4, 4), row-major in (o1, o2)."""
        m1 = povm(AnalyzerConfig(phase=self.phi1))
        m2 = povm(AnalyzerConfig(phase=self.phi2))
        return np.einsum("aij,bkl->abikjl", m1, m2).reshape(36, 4, 4)


def default_settings() -> list[MeasurementSetting]:
    """Phases {0, pi/2, pi, 3 pi/2} on both sides, time basis included (16 settings)."""
    grid = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]
    return [MeasurementSetting(a, b) for a in grid for b in grid]


@dataclass
class CountRecord:
    setting: MeasurementSetting
    counts: np.ndarray  # 36 non-negative integers, row-major in (o1, o2)
    n_total: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64).reshape(36)
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if self.counts.sum() > self.n_total:
            raise ValueError("counts exceed n_total")

    def to_json(self) -> dict:
        return {
            "phi1": self.setting.phi1,
            "phi2": self.setting.phi2,
            "includes_time_basis": self.setting.includes_time_basis,
            "counts": self.counts.tolist(),
            "n_total": int(self.n_total),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "CountRecord":
        setting = MeasurementSetting(obj["phi1"], obj["phi2"], obj.get("includes_time_basis", True))
        return cls(setting, obj["counts"], obj["n_total"])


def simulate_counts(rho, settings, n_per_setting: int, seed: int) -> list[CountRecord]:
    """Multinomial count data for each setting, keyed on (seed, setting index).

    Outcomes a setting does not record are dropped after sampling, so their
    events count as lost.
    """
    if n_per_setting < 1:
        raise ValueError("n_per_setting must be >= 1")
    rho = check_density_matrix(rho, 4)
    records = []
    for k, s in enumerate(settings):
        p = joint_probabilities(rho, AnalyzerConfig(phase=s.phi1), AnalyzerConfig(phase=s.phi2)).ravel()
        p = np.clip(p, 0, None)
        gen = _rng.keyed_generator(seed, _rng.STREAM_COUNTS, k)
        counts = gen.multinomial(n_per_setting, p / p.sum())
        counts = np.where(s.outcome_mask(), counts, 0)
        records.append(CountRecord(s, counts, n_per_setting))
    return records


def _stack(records):
    effects, counts, group = [], [], []
    for g, r in enumerate(records):
        mask = r.setting.outcome_mask()
        effects.append(r.setting.effects()[mask])
        counts.append(r.counts[mask])
        group.append(np.full(mask.sum(), g))
    return np.concatenate(effects), np.concatenate(counts).astype(float), np.concatenate(group)


def measurement_rank(records_or_settings) -> int:
    """Rank of the map rho -> outcome probabilities over all recorded effects."""
    settings = [getattr(r, "setting", r) for r in records_or_settings]
    rows = [s.effects()[s.outcome_mask()].reshape(-1, 16) for s in settings]
    if not rows:
        return 0
    return int(np.linalg.matrix_rank(np.concatenate(rows), tol=1e-10))


@dataclass
class ReconstructionResult:
    rho_hat: np.ndarray
    log_likelihood: float
    iterations: int
    converged: bool
    history: np.ndarray = field(repr=False, default=None)


def _log_likelihood(rho, effects, counts, group, n_groups) -> float:
    p = np.real(np.einsum("kij,ji->k", effects, rho))
    p = np.clip(p, 1e-300, None)
    q = np.bincount(group, weights=p, minlength=n_groups)
    n_g = np.bincount(group, weights=counts, minlength=n_groups)
    with np.errstate(divide="ignore"):
        ll = np.sum(counts[counts > 0] * np.log(p[counts > 0]))
        ll -= np.sum(n_g[n_g > 0] * np.log(q[n_g > 0]))
    return float(ll)


def reconstruct_mle(
    records,
    dilution: float = 0.5,
    tol: float = 1e-10,
    max_iter: int = 10_000,
    rho_init=None,
) -> ReconstructionResult:
    """Maximum-likelihood state by the diluted R rho R iteration.

    The likelihood is multinomial within each setting, conditioned on the
    recorded outcomes. Each iteration applies rho -> (1 + eR) rho (1 + eR),
    renormalized, with e the dilution; if a step would lower the likelihood
    the dilution is halved for that step, so the likelihood never decreases.
    Stops when the gain drops below ``tol`` or after ``max_iter`` iterations.
    """
    rank = measurement_rank(records)
    if rank < 16:
        raise IncompleteSettingsError(rank)
    effects, counts, group = _stack(records)
    if counts.sum() == 0:
        raise ValueError("all counts are zero")
    n_groups = len(records)
    n_tot = counts.sum()
    n_g = np.bincount(group, weights=counts, minlength=n_groups)
    # effect sum per setting, for the conditional normalization term of the gradient
    e_sum = np.zeros((n_groups, 4, 4), dtype=complex)
    np.add.at(e_sum, group, effects)
    eye = np.eye(4)

    rho = np.eye(4, dtype=complex) / 4 if rho_init is None else np.array(rho_init, dtype=complex)
    ll = _log_likelihood(rho, effects, counts, group, n_groups)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        p = np.clip(np.real(np.einsum("kij,ji->k", effects, rho)), 1e-300, None)
        q = np.real(np.einsum("gij,ji->g", e_sum, rho))
        grad = np.einsum("k,kij->ij", counts / p, effects) - np.einsum("g,gij->ij", n_g / q, e_sum)
        r_op = eye + grad / n_tot
        eps = dilution
        while True:
            step = eye + eps * r_op
            new = step @ rho @ step.conj().T
            new = 0.5 * (new + new.conj().T)
            new /= np.real(np.trace(new))
            new_ll = _log_likelihood(new, effects, counts, group, n_groups)
            if new_ll >= ll - 1e-12 * abs(ll) or eps < 1e-8:
                break
            eps *= 0.5
        gain = new_ll - ll
        if new_ll < ll:
            # no ascending step found; keep the current estimate
            converged = True
            break
        rho, ll = new, new_ll
        history.append(ll)
        if gain < tol:
            converged = True
            break
    rho = _project_psd(rho)
    return ReconstructionResult(rho, ll, it, converged, np.asarray(history))


def _project_psd(rho) -> np.ndarray:
    vals, vecs = herm_eigs(0.5 * (rho + rho.conj().T), return_vectors=True)
    vals = np.clip(vals, 0, None)
    rho = (vecs * vals) @ vecs.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    return rho / np.real(np.trace(rho))


# --- entanglement measures --------------------------------------------------------------


def fidelity(rho, target) -> float:
    """<psi|rho|psi> for a normalized pure target."""
    rho = np.asarray(rho, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if rho.shape != (target.size, target.size):
        raise DimensionError(f"state of shape {rho.shape} vs target of length {target.size}")
    if abs(np.linalg.norm(target) - 1) > ATOL_STATE:
        raise ValueError("fidelity target must be normalized")
    return float(np.clip(np.real(target.conj() @ rho @ target), 0.0, 1.0))


def state_fidelity(rho, sigma) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(rho) sigma sqrt(rho)))^2 between two mixed states."""
    s = psd_sqrt(rho)
    inner = psd_sqrt(s @ np.asarray(sigma, dtype=complex) @ s)
    return float(np.clip(np.real(np.trace(inner)) ** 2, 0.0, 1.0))


def spin_flip(rho) -> np.ndarray:
    return SIGMA_YY @ np.conj(rho) @ SIGMA_YY


def concurrence(rho) -> float:
    """max(0, l1 - l2 - l3 - l4), l_i the descending eigenvalues of sqrt(sqrt(rho) rho~ sqrt(rho))."""
    rho = check_density_matrix(rho, 4)
    s = psd_sqrt(rho)
    r = psd_sqrt(s @ spin_flip(rho) @ s)
    lam = herm_eigs(r)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def concurrence_from_product(rho) -> float:
    """Same measure from the square roots of the eigenvalues of rho rho~."""
    rho = check_density_matrix(rho, 4)
    ev = np.real(np.linalg.eigvals(rho @ spin_flip(rho)))
    ev = np.where(ev < NOISE_FLOOR, 0.0, ev)
    lam = np.sort(np.sqrt(ev))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def purity(rho) -> float:
    return _purity(rho)


def trace_distance(rho, sigma) -> float:
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(np.asarray(rho) - np.asarray(sigma)))))


# --- reporting --------------------------------------------------------------------------


@dataclass
class EntanglementReport:
    fidelity_target: np.ndarray
    fidelity: float
    concurrence: float
    purity: float
    fidelity_interval: tuple[float, float] | None = None
    concurrence_interval: tuple[float, float] | None = None
    fidelity_std: float | None = None
    concurrence_std: float | None = None
    extra_fidelities: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "fidelity_target": {"real": np.real(self.fidelity_target).tolist(),
                                "imag": np.imag(self.fidelity_target).tolist()},
            "fidelity": self.fidelity,
            "concurrence": self.concurrence,
            "purity": self.purity,
            "fidelity_interval": list(self.fidelity_interval) if self.fidelity_interval else None,
            "concurrence_interval": list(self.concurrence_interval) if self.concurrence_interval else None,
            "fidelity_std": self.fidelity_std,
            "concurrence_std": self.concurrence_std,
            "fidelities": dict(self.extra_fidelities),
        }


def entanglement_report(rho, target) -> EntanglementReport:
    return EntanglementReport(np.asarray(target), fidelity(rho, target), concurrence(rho), purity(rho))


def bootstrap(
    records,
    rho_hat,
    target,
    n_resamples: int = 200,
    seed: int = 0,
    threads: int = 1,
    max_iter: int = 2000,
    method: str = "basic",
) -> dict:
    """Parametric bootstrap of fidelity and concurrence.

    Count data are redrawn from the probabilities predicted by ``rho_hat`` with
    the same number of events per setting and reconstructed again (warm-started
    at ``rho_hat``). Resample i uses a generator keyed on (seed, i), so the
    result does not depend on ``threads``.

    ``method='basic'`` returns 95% intervals reflected about the point
    estimate (2 est - q97.5, 2 est - q2.5), which corrects for the upward bias
    of concurrence near zero; ``'percentile'`` returns (q2.5, q97.5). Both are
    clipped to [0, 1].
    """
    if method not in ("basic", "percentile"):
        raise ValueError("method must be 'basic' or 'percentile'")
    rho_hat = np.asarray(rho_hat, dtype=complex)

    def one(i: int):
        resampled = []
        for k, r in enumerate(records):
            s = r.setting
            p = joint_probabilities(rho_hat, AnalyzerConfig(phase=s.phi1), AnalyzerConfig(phase=s.phi2)).ravel()
            p = np.clip(p, 0, None)
            mask = s.outcome_mask()
            gen = _rng.keyed_generator(seed, _rng.STREAM_BOOTSTRAP, i, k)
            n_rec = int(r.counts.sum())
            sub = np.where(mask, p, 0.0)
            counts = gen.multinomial(n_rec, sub / sub.sum())
            resampled.append(CountRecord(s, counts, r.n_total))
        est = reconstruct_mle(resampled, rho_init=rho_hat, max_iter=max_iter).rho_hat
        return fidelity(est, target), concurrence(est)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, range(n_resamples)))
    else:
        results = [one(i) for i in range(n_resamples)]
    f = np.array([x[0] for x in results])
    c = np.array([x[1] for x in results])
    f_hat, c_hat = fidelity(rho_hat, target), concurrence(rho_hat)
    return {
        "fidelity_interval": _interval(f, f_hat, method),
        "concurrence_interval": _interval(c, c_hat, method),
        "fidelity_std": float(f.std(ddof=1)) if f.size > 1 else 0.0,
        "concurrence_std": float(c.std(ddof=1)) if c.size > 1 else 0.0,
    }


def _interval(samples: np.ndarray, estimate: float, method: str) -> tuple[float, float]:
    lo, hi = np.percentile(samples, [2.5, 97.5])
    if method == "basic":
        lo, hi = 2 * estimate - hi, 2 * estimate - lo
    return float(np.clip(lo, 0.0, 1.0)), float(np.clip(hi, 0.0, 1.0))
