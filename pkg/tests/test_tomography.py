import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdtimebin import source as S
from qdtimebin import tomography as T
from qdtimebin.analyzer import MIDDLE, AnalyzerConfig, joint_probabilities
from qdtimebin.qcore import (
    DimensionError,
    bell_state,
    check_density_matrix,
    projector,
    random_density_matrix,
    random_unitary,
)

PHI_P = projector(bell_state("phi+"))
seeds = st.integers(0, 2**32 - 1)


def werner(v):
    return v * PHI_P + (1 - v) * np.eye(4) / 4


# --- measures ----------------------------------------------------------------------------


def test_fidelity_examples(rng):
    assert T.fidelity(PHI_P, bell_state("phi+")) == pytest.approx(1)
    ket = np.linalg.qr(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))[0][:, 0]
    assert T.fidelity(np.eye(4) / 4, ket) == pytest.approx(0.25)
    rho = S.realistic_state(S.SourceConfig(coherence_factor=0.78, pump_phase=math.pi))
    assert T.fidelity(rho, bell_state("phi-")) == pytest.approx(0.89, abs=1e-12)


def test_fidelity_refusals():
    with pytest.raises(DimensionError):
        T.fidelity(PHI_P, np.array([1, 0]))
    with pytest.raises(ValueError):
        T.fidelity(PHI_P, np.array([1, 1, 0, 0]))


@given(seeds, st.floats(0, 1))
def test_fidelity_is_linear(seed, lam):
    g = np.random.default_rng(seed)
    r1, r2 = random_density_matrix(4, g), random_density_matrix(4, g)
    psi = bell_state("psi+")
    mixed = T.fidelity(lam * r1 + (1 - lam) * r2, psi)
    assert mixed == pytest.approx(lam * T.fidelity(r1, psi) + (1 - lam) * T.fidelity(r2, psi), abs=1e-12)


def test_concurrence_examples():
    for name in ("phi+", "phi-"):
        assert T.concurrence(projector(bell_state(name))) == pytest.approx(1, abs=1e-10)
    assert T.concurrence(np.eye(4) / 4) == pytest.approx(0, abs=1e-10)
    assert T.concurrence(werner(0.8)) == pytest.approx(0.7, abs=1e-9)
    x = np.diag([0.5, 0, 0, 0.5]).astype(complex)
    x[0, 3] = x[3, 0] = 0.39
    assert T.concurrence(x) == pytest.approx(0.78, abs=1e-10)


def test_werner_curve():
    for v in np.linspace(0, 1, 50):
        assert T.concurrence(werner(v)) == pytest.approx(max(0, (3 * v - 1) / 2), abs=1e-9)


@given(seeds, st.integers(1, 4))
def test_two_concurrence_routes_agree(seed, rank):
    rho = random_density_matrix(4, np.random.default_rng(seed), rank=rank)
    assert T.concurrence(rho) == pytest.approx(T.concurrence_from_product(rho), abs=1e-9)


@given(seeds)
def test_pure_state_closed_form(seed):
    g = np.random.default_rng(seed)
    a = g.normal(size=4) + 1j * g.normal(size=4)
    a /= np.linalg.norm(a)
    c = T.concurrence(projector(a))
    assert 0 <= c <= 1
    assert c == pytest.approx(2 * abs(a[0] * a[3] - a[1] * a[2]), abs=1e-7)


def test_concurrence_local_unitary_invariance(rng):
    rho = random_density_matrix(4, rng, rank=2)
    rho = 0.5 * rho + 0.5 * PHI_P
    c0 = T.concurrence(rho)
    for _ in range(100):
        u = np.kron(random_unitary(2, rng), random_unitary(2, rng))
        assert T.concurrence(u @ rho @ u.conj().T) == pytest.approx(c0, abs=1e-8)


@given(st.floats(0, 1), st.floats(-7, 7))
def test_x_state_identity(v, phase):
    rho = S.realistic_state(S.SourceConfig(coherence_factor=v, pump_phase=phase))
    f = T.fidelity(rho, S.ideal_ket(phase))
    assert T.concurrence(rho) == pytest.approx(2 * f - 1, abs=1e-10)


def test_purity_examples():
    assert T.purity(PHI_P) == pytest.approx(1)
    assert T.purity(np.eye(4) / 4) == pytest.approx(0.25)
    assert T.purity(S.realistic_state(S.SourceConfig(coherence_factor=0.6))) == pytest.approx(0.5 * 1.36)


def test_state_fidelity_reduces_to_overlap_for_pure_targets(rng):
    rho = random_density_matrix(4, rng)
    assert T.state_fidelity(rho, PHI_P) == pytest.approx(T.fidelity(rho, bell_state("phi+")), abs=1e-10)
    assert T.state_fidelity(rho, rho) == pytest.approx(1, abs=1e-10)


# --- count simulation --------------------------------------------------------------------


def test_simulated_middle_coincidence_rate():
    n = 10**6
    rec = T.simulate_counts(PHI_P, [T.MeasurementSetting(0, 0)], n, seed=1)[0]
    q = rec.counts.reshape(6, 6)[MIDDLE[0], MIDDLE[0]] / n
    assert abs(q - 1 / 8) < 3 * math.sqrt(1 / 8 * 7 / 8 / n)
    assert rec.counts.sum() == n


def test_early_early_state_has_no_late_counts():
    ee = np.zeros((4, 4), dtype=complex)
    ee[0, 0] = 1
    rec = T.simulate_counts(ee, T.default_settings()[:3], 10_000, seed=2)
    for r in rec:
        c = r.counts.reshape(6, 6)
        assert c[[2, 5], :].sum() == 0 and c[:, [2, 5]].sum() == 0


def test_simulation_reproducible_per_setting():
    st_ = T.default_settings()
    a = T.simulate_counts(PHI_P, st_, 1000, seed=3)
    b = T.simulate_counts(PHI_P, st_[:2], 1000, seed=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.counts, y.counts)
    with pytest.raises(ValueError):
        T.simulate_counts(PHI_P, st_, 0, seed=3)


def test_equator_only_counts_drop_time_outcomes():
    s = T.MeasurementSetting(0.3, 1.0, includes_time_basis=False)
    rec = T.simulate_counts(PHI_P, [s], 10_000, seed=4)[0]
    c = rec.counts.reshape(6, 6)
    mask = np.zeros((6, 6), bool)
    mask[np.ix_(MIDDLE, MIDDLE)] = True
    assert c[~mask].sum() == 0
    assert c.sum() < rec.n_total


def test_setting_phases_wrap():
    s = T.MeasurementSetting(-math.pi / 2, 5 * math.pi)
    assert 0 <= s.phi1 < 2 * math.pi and s.phi1 == pytest.approx(1.5 * math.pi)
    assert s.phi2 == pytest.approx(math.pi)


def test_setting_effects_match_joint_probabilities(rng):
    rho = random_density_matrix(4, rng)
    s = T.MeasurementSetting(0.4, 2.2)
    direct = joint_probabilities(rho, AnalyzerConfig(phase=0.4), AnalyzerConfig(phase=2.2)).ravel()
    via = np.real(np.einsum("kij,ji->k", s.effects(), rho))
    np.testing.assert_allclose(via, direct, atol=1e-14)


def test_count_record_validation_and_json():
    s = T.MeasurementSetting(1.0, 2.0)
    with pytest.raises(ValueError):
        T.CountRecord(s, np.full(36, -1), 10)
    with pytest.raises(ValueError):
        T.CountRecord(s, np.ones(36), 10)
    r = T.CountRecord(s, np.arange(36), 1000)
    back = T.CountRecord.from_json(r.to_json())
    np.testing.assert_array_equal(back.counts, r.counts)
    assert back.setting == r.setting and back.n_total == 1000


# --- reconstruction ----------------------------------------------------------------------


def test_rank_of_setting_sets():
    assert T.measurement_rank(T.default_settings()) == 16
    eq = [T.MeasurementSetting(s.phi1, s.phi2, False) for s in T.default_settings()]
    assert T.measurement_rank(eq) < 16


def test_incomplete_settings_refused_with_rank():
    eq = [T.MeasurementSetting(s.phi1, s.phi2, False) for s in T.default_settings()]
    rec = T.simulate_counts(PHI_P, eq, 1000, seed=1)
    with pytest.raises(T.IncompleteSettingsError) as err:
        T.reconstruct_mle(rec)
    assert err.value.rank == T.measurement_rank(eq)
    assert "rank" in str(err.value)


def test_all_zero_counts_refused():
    rec = [T.CountRecord(s, np.zeros(36), 100) for s in T.default_settings()]
    with pytest.raises(ValueError, match="zero"):
        T.reconstruct_mle(rec)


def test_phi_plus_round_trip():
    rec = T.simulate_counts(PHI_P, T.default_settings(), 10**6, seed=5)
    res = T.reconstruct_mle(rec)
    assert T.fidelity(res.rho_hat, bell_state("phi+")) >= 0.999
    assert res.converged
    check_density_matrix(res.rho_hat, 4)


def test_maximally_mixed_round_trip():
    n = 10**5
    rec = T.simulate_counts(np.eye(4) / 4, T.default_settings(), n, seed=6)
    res = T.reconstruct_mle(rec)
    # entries of the estimate scatter like 1/sqrt(total events)
    sigma = 1 / math.sqrt(16 * n)
    assert np.max(np.abs(res.rho_hat - np.eye(4) / 4)) < 3 * 4 * sigma


def test_realistic_state_round_trip():
    rho = S.realistic_state(S.SourceConfig(coherence_factor=0.78))
    res = T.reconstruct_mle(T.simulate_counts(rho, T.default_settings(), 10**5, seed=7))
    assert T.concurrence(res.rho_hat) == pytest.approx(0.78, abs=0.02)


@given(seeds)
def test_likelihood_never_decreases(seed):
    g = np.random.default_rng(seed)
    rho = random_density_matrix(4, g, rank=int(g.integers(1, 5)))
    res = T.reconstruct_mle(T.simulate_counts(rho, T.default_settings(), 2000, seed=seed), max_iter=300)
    assert np.all(np.diff(res.history) >= 0)
    check_density_matrix(res.rho_hat, 4)


def test_error_shrinks_with_more_counts():
    rho = S.realistic_state(S.SourceConfig(coherence_factor=0.6, early_late_imbalance=0.1))
    errs = []
    for n in (10**3, 10**4, 10**5):
        res = T.reconstruct_mle(T.simulate_counts(rho, T.default_settings(), n, seed=8))
        errs.append(T.trace_distance(res.rho_hat, rho))
    assert errs[0] > errs[1] > errs[2]


def test_bootstrap_intervals():
    rho = S.realistic_state(S.SourceConfig(coherence_factor=0.78, pump_phase=math.pi))
    rec = T.simulate_counts(rho, T.default_settings(), 10**4, seed=9)
    est = T.reconstruct_mle(rec).rho_hat
    target = bell_state("phi-")
    b1 = T.bootstrap(rec, est, target, n_resamples=20, seed=1)
    b2 = T.bootstrap(rec, est, target, n_resamples=20, seed=1, threads=3)
    assert b1 == b2
    lo, hi = b1["fidelity_interval"]
    assert lo <= T.fidelity(est, target) <= hi
    assert b1["fidelity_std"] > 0
    pct = T.bootstrap(rec, est, target, n_resamples=20, seed=1, method="percentile")
    assert pct["fidelity_std"] == b1["fidelity_std"]
    with pytest.raises(ValueError):
        T.bootstrap(rec, est, target, n_resamples=2, method="bca")


def test_incoherent_pump_concurrence_interval_contains_zero():
    rho = S.realistic_state(S.SourceConfig(incoherent_pump=True))
    rec = T.simulate_counts(rho, T.default_settings(), 10**4, seed=10)
    est = T.reconstruct_mle(rec).rho_hat
    b = T.bootstrap(rec, est, bell_state("phi+"), n_resamples=20, seed=2)
    assert b["concurrence_interval"][0] == 0.0


def test_report_json():
    rep = T.entanglement_report(PHI_P, bell_state("phi+"))
    obj = rep.to_json()
    assert obj["fidelity"] == pytest.approx(1) and obj["concurrence"] == pytest.approx(1)
    assert obj["fidelity_interval"] is None
