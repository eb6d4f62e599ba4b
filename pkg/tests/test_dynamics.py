import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qdtimebin import dynamics as D
from qdtimebin.qcore import is_hermitian

NO_DEPH = D.DephasingModel()


def excited_state():
    rho = np.zeros((4, 4), dtype=complex)
    rho[D.B, D.B] = 1
    return rho


# --- Hamiltonian -----------------------------------------------------------------------


def test_zero_area_pulse_gives_diagonal_hamiltonian():
    h = D.effective_hamiltonian(D.LevelSystem(fss=0.02), D.Pulse(0.0, 5.0, detuning=0.1), 0.0)
    np.testing.assert_array_equal(h, np.diag(np.diag(h)))
    np.testing.assert_allclose(np.diag(h).real, [0, -0.01, 0.01, 0.1])


def test_envelope_peak_matches_gaussian_normalization():
    p = D.Pulse(area=2.0, duration=3.0, center=7.0)
    assert p.rabi(7.0) == pytest.approx(2.0 / (3.0 * math.sqrt(2 * math.pi)), rel=1e-14)
    h = D.effective_hamiltonian(D.LevelSystem(), replace_phase(p, 0.3), 7.0)
    assert h[D.B, D.G] == pytest.approx(0.5 * p.rabi(7.0) * np.exp(0.3j), rel=1e-14)
    # only g and b are coupled
    off = h - np.diag(np.diag(h))
    off[D.B, D.G] = off[D.G, D.B] = 0
    assert not np.any(off)


def replace_phase(p, phase):
    from dataclasses import replace

    return replace(p, phase=phase)


def test_envelope_integrates_to_area():
    p = D.Pulse(area=1.7, duration=4.0)
    t = np.linspace(-40, 40, 20001)
    assert np.trapezoid(p.rabi(t), t) == pytest.approx(1.7, rel=1e-10)


@given(
    st.floats(0, 0.1), st.floats(0, 10), st.floats(0.5, 20), st.floats(-np.pi, np.pi),
    st.floats(-0.5, 0.5), st.floats(-50, 50),
)
def test_hamiltonian_is_hermitian(fss, area, sigma, phase, det, t):
    h = D.effective_hamiltonian(D.LevelSystem(fss=fss), D.Pulse(area, sigma, phase, 0.0, det), t)
    assert is_hermitian(h)


def test_parameter_validation():
    with pytest.raises(ValueError):
        D.LevelSystem(gamma_b=-1)
    with pytest.raises(ValueError):
        D.LevelSystem(binding_energy=0)
    with pytest.raises(ValueError):
        D.Pulse(area=1, duration=0)
    with pytest.raises(ValueError):
        D.Pulse(area=-1, duration=1)
    with pytest.raises(ValueError):
        D.DephasingModel(-0.1)
    with pytest.raises(ValueError):
        D.PulseSequence((D.Pulse(1, 2, center=10), D.Pulse(1, 2, center=0)))
    with pytest.raises(ValueError):
        D.PulseSequence((D.Pulse(1, 2, center=0), D.Pulse(1, 2, center=5)))


# --- evolve ------------------------------------------------------------------------------


def test_free_decay_is_exponential():
    sys = D.LevelSystem(gamma_b=1 / 400)
    res = D.evolve(sys, [D.Pulse(0.0, 10.0)], NO_DEPH, excited_state(), (0.0, 1200.0), dt=0.5)
    np.testing.assert_allclose(res.P_b, np.exp(-res.times / 400), atol=1e-6)
    # with gamma_x = 0 the excitons absorb everything, split equally
    np.testing.assert_allclose(res.P_xH, res.P_xV, atol=1e-12)


def test_constant_drive_follows_sin_squared():
    omega_area, width = 6 * math.pi, 200.0
    p = D.Pulse(omega_area, width, center=width / 2, shape="square")
    res = D.evolve(D.LevelSystem(), [p], NO_DEPH, D.ground_state(), (0.0, width), dt=0.5)
    rabi = omega_area / width
    assert np.max(np.abs(res.P_b - np.sin(rabi * res.times / 2) ** 2)) < 1e-6


def test_pi_pulse_inverts():
    res = D.evolve(D.LevelSystem(), [D.Pulse(math.pi, 5.0)], NO_DEPH, D.ground_state(), (-40, 40))
    assert res.P_b[-1] == pytest.approx(1.0, abs=1e-4)


def test_evolve_refuses_coarse_steps_and_invalid_state():
    p = [D.Pulse(math.pi, 4.0)]
    with pytest.raises(ValueError):
        D.evolve(D.LevelSystem(), p, NO_DEPH, D.ground_state(), (-32, 32), dt=0.5)
    with pytest.warns(UserWarning):
        D.evolve(D.LevelSystem(), p, NO_DEPH, D.ground_state(), (-32, 32), dt=0.3)
    with pytest.raises(ValueError):
        D.evolve(D.LevelSystem(), p, NO_DEPH, np.eye(4), (-32, 32))


@given(
    st.floats(0, 3 * math.pi), st.floats(0, 0.02), st.floats(0, 0.2),
    st.floats(0, 1 / 100), st.floats(0, 1 / 100), st.floats(0, 0.05),
)
def test_trace_and_positivity_are_preserved(area, gc, gi, gb, gx, fss):
    sys = D.LevelSystem(fss=fss, gamma_b=gb, gamma_x=gx)
    res = D.evolve(sys, [D.Pulse(area, 3.0)], D.DephasingModel(gc, gi), D.ground_state(), (-24, 60))
    assert res.trace_error < 1e-8
    assert res.min_eigenvalue > -1e-7
    assert np.all(res.populations > -1e-9) and np.all(res.populations < 1 + 1e-9)
    np.testing.assert_allclose(res.populations.sum(axis=1), 1, atol=1e-8)


def test_fourth_order_convergence():
    sys = D.LevelSystem(gamma_b=1 / 400, gamma_x=1 / 600)
    deph = D.DephasingModel(0.01, 0.05)
    p = [D.Pulse(math.pi, 4.0)]

    def final(dt):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return D.evolve(sys, p, deph, D.ground_state(), (-32, 32), dt=dt).final_state

    ref = final(0.4 / 16)
    e1 = np.abs(final(0.4) - ref).max()
    e2 = np.abs(final(0.2) - ref).max()
    assert e1 / e2 >= 8


def test_exciton_emission_equals_biexciton_without_decay():
    tab = D.rabi_scan(D.LevelSystem(gamma_b=0.01, gamma_x=0.01), 5.0, np.linspace(0, 3 * np.pi, 13), NO_DEPH)
    np.testing.assert_allclose(tab[:, 1], tab[:, 2], atol=1e-12)


# --- Rabi --------------------------------------------------------------------------------


def test_rabi_scan_pi_and_two_pi():
    areas = np.array([0, math.pi, 2 * math.pi])
    tab = D.rabi_scan(D.LevelSystem(), 12.0, areas, NO_DEPH)
    assert tab[1, 1] == pytest.approx(1, abs=1e-3)
    assert tab[2, 1] == pytest.approx(0, abs=1e-3)


def test_rabi_scan_requires_ascending_areas():
    with pytest.raises(ValueError):
        D.rabi_scan(D.LevelSystem(), 12.0, [1.0, 0.5], NO_DEPH)


def test_longer_pulses_damp_more():
    areas = np.linspace(0, 6 * math.pi, 241)
    deph = D.DephasingModel(0.005)
    env = [D.oscillation_envelope(areas, D.rabi_scan(D.LevelSystem(), s, areas, deph)[:, 1], 5 * math.pi)
           for s in (12.0, 48.0)]
    assert env[1] < env[0]


def test_intensity_dephasing_damps_with_area():
    areas = np.linspace(0, 8 * math.pi, 161)
    deph = D.DephasingModel(0.0, 0.1)
    tab = D.rabi_scan(D.LevelSystem(), 5.0, areas, deph)
    peaks = [D.oscillation_envelope(areas, tab[:, 1], k * math.pi) for k in (1, 3, 5, 7)]
    assert np.all(np.diff(peaks) < 0)
    # cross-check against a 10x finer step
    fine = D.rabi_scan(D.LevelSystem(), 5.0, areas, deph, dt=5.0 / 400)
    np.testing.assert_allclose(tab[:, 1], fine[:, 1], atol=1e-4)


# --- fringes -----------------------------------------------------------------------------


def test_visibility_examples(rng):
    x = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    assert D.visibility(np.column_stack([x, 0.5 + 0.5 * np.cos(x)])) == pytest.approx(1, abs=1e-12)
    assert D.visibility(np.column_stack([x, np.full_like(x, 0.3)])) == pytest.approx(0, abs=1e-12)
    x = np.linspace(0, 2 * np.pi, 64, endpoint=False)
    y = 0.5 + 0.2 * np.cos(x) + rng.normal(0, 0.01, x.size)
    assert D.visibility(np.column_stack([x, y])) == pytest.approx(0.4, abs=0.02)


def test_visibility_refusals():
    x = np.linspace(0, np.pi, 10)
    with pytest.raises(ValueError):
        D.visibility(np.column_stack([x, np.cos(x)]))
    x = np.linspace(0, 2 * np.pi, 4, endpoint=False)
    with pytest.raises(ValueError):
        D.visibility(np.column_stack([x, np.cos(x)]))
    x = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    with pytest.raises(ValueError):
        D.visibility(np.column_stack([x, np.zeros(8)]))


HALF = D.Pulse(math.pi / 2, 2.0)


def test_ramsey_in_phase_and_out_of_phase():
    delays = [20.0, 60.0, 150.0]
    res = D.ramsey(D.LevelSystem(), (HALF, HALF), delays, NO_DEPH)
    np.testing.assert_allclose(res.p_b, 1, atol=1e-6)
    res = D.ramsey(D.LevelSystem(), (HALF, HALF), delays, NO_DEPH, laser_phase=math.pi)
    np.testing.assert_allclose(res.p_b, 0, atol=1e-6)
    np.testing.assert_allclose(res.visibility, 1, atol=1e-6)


def test_ramsey_oscillates_at_detuning_frequency():
    det = 0.05
    delays = np.linspace(20, 20 + 2 * np.pi / det, 9)
    res = D.ramsey(D.LevelSystem(), (HALF, HALF), delays, NO_DEPH, detuning_mean=det)
    # one full period of the detuning apart: same readout
    assert res.p_b[0] == pytest.approx(res.p_b[-1], abs=1e-9)
    assert np.ptp(res.p_b) > 0.9


def test_ramsey_constant_dephasing_decay():
    delays = np.linspace(20, 1200, 12)
    res = D.ramsey(D.LevelSystem(), (HALF, HALF), delays, D.DephasingModel(1 / 400))
    np.testing.assert_allclose(res.visibility / np.exp(-delays / 400), 1, atol=0.01)
    # exciton emission follows the biexciton fringe
    np.testing.assert_allclose(res.p_x, res.p_b, atol=1e-12)


def test_ramsey_refuses_wrong_area():
    with pytest.raises(ValueError):
        D.ramsey(D.LevelSystem(), (D.Pulse(1.0, 2.0), HALF), [20.0], NO_DEPH)


def test_echo_without_inhomogeneity_is_perfect():
    res = D.echo(D.LevelSystem(), D.echo_template(HALF, 100.0), [40.0, 100.0], NO_DEPH)
    np.testing.assert_allclose(res.visibility, 1, atol=1e-6)


def test_echo_decays_with_constant_dephasing():
    res = D.echo(D.LevelSystem(), D.echo_template(HALF, 100.0), [100.0, 400.0], D.DephasingModel(1 / 400))
    assert res.visibility[1] < res.visibility[0] < 1


def test_echo_refocuses_static_noise_and_beats_ramsey():
    delays = np.array([60.0, 150.0, 250.0])
    std = 0.01
    ec = D.echo(D.LevelSystem(), D.echo_template(HALF, 100.0), delays, NO_DEPH,
                detuning_std=std, n_samples=100, seed=3)
    ra = D.ramsey(D.LevelSystem(), (HALF, HALF), delays, NO_DEPH, detuning_std=std, n_samples=100, seed=3)
    assert np.all(ec.visibility >= 0.99)
    assert np.all(ec.visibility >= ra.visibility)


def test_echo_refusals():
    asym = D.PulseSequence((D.Pulse(math.pi / 2, 2.0, center=0), D.Pulse(math.pi, 2.0, center=30),
                            D.Pulse(math.pi / 2, 2.0, center=100)))
    with pytest.raises(ValueError, match="asymmetric"):
        D.echo(D.LevelSystem(), asym, [100.0], NO_DEPH)
    with pytest.raises(ValueError):
        D.echo(D.LevelSystem(), D.echo_template(HALF, 100.0), [100.0], NO_DEPH, detuning_std=0.01, n_samples=50)


def test_echo_is_independent_of_sample_order():
    # the detuning ensemble is keyed by sample index: a prefix of a larger ensemble is the same draw
    a = D._detuning_ensemble(0.0, 0.01, 100, 9)
    b = D._detuning_ensemble(0.0, 0.01, 300, 9)
    np.testing.assert_array_equal(a, b[:100])
