from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import fidelity_lower_bound, ms_lindblad, ptrace_motion
from ionbench.hilbert import DOWNDOWN, PHI_PLUS, TWO_PI, UPUP, SpinMotionState, kron, purity, suggest_n_max
from ionbench.msgate import (
    Envelope,
    GateConfig,
    NoiseModel,
    apply_scattering_channel,
    bell_fidelity,
    gate_error_monte_carlo,
    lamb_dicke_correction_error,
    ms_propagate_analytic,
    ms_propagate_numeric,
    offresonant_error_estimate,
    phase_insensitive_gate,
    rabi_fluctuation_error,
    sample_quasistatic_noise,
    sweep_detuning,
    sweep_duration,
)
from ionbench.msgate.config import DEFAULT_RISE_FALL, REFERENCE_RAMAN_DETUNING, calibrate_shaped
from ionbench.msgate.noise import (
    debye_waller_rms,
    default_spectators,
    heating_error,
    scattering_kraus,
)
from ionbench.msgate.propagate import (
    beyond_lamb_dicke_error,
    evolve_spin_density,
    ms_spin_unitary,
    spin_state,
)
from ionbench.msgate.sweeps import fit_power_law, fit_quadratic

IDEAL = GateConfig.ideal()


def ground(ket=UPUP, n_max=10, nbar=0.0):
    if nbar:
        return SpinMotionState.from_spin_ket(ket, n_max, nbar=nbar)
    return SpinMotionState.from_spin_ket(ket, n_max, fock=0)


def test_ideal_gate_numeric():
    out = ms_propagate_numeric(IDEAL, ground())
    assert bell_fidelity(out.spin()) >= 1 - 1e-8
    assert out.fock_populations()[0] >= 1 - 1e-8
    out.validate()


def test_produced_state_phase():
    psi = spin_state(ms_propagate_analytic(IDEAL, ground()))
    # |up up> - i |down down>
    target = (UPUP - 1j * DOWNDOWN) / np.sqrt(2)
    assert np.real(target.conj() @ psi @ target) > 1 - 1e-10


def test_zero_drive_is_identity():
    s = ground(nbar=0.02)
    out = ms_propagate_numeric(replace(IDEAL, omega=0.0), s)
    assert np.allclose(out.rho, s.rho)


def test_half_gate_entangles_motion():
    half = spin_state(ms_propagate_numeric(IDEAL, ground(n_max=16), t_final=0.5 * IDEAL.t_gate))
    full = spin_state(ms_propagate_numeric(IDEAL, ground()))
    assert purity(half) < 0.99
    assert abs(purity(full) - 1) < 1e-8


def test_orthogonal_input_stays_orthogonal():
    up_down = kron(np.array([1, 0]), np.array([0, 1]))
    a = spin_state(ms_propagate_analytic(IDEAL, ground(up_down)))
    b = spin_state(ms_propagate_analytic(IDEAL, ground()))
    assert abs(np.trace(a @ b)) < 1e-10


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_numeric_matches_analytic(seed):
    rng = np.random.default_rng(seed)
    cfg = GateConfig.ideal(t_gate=rng.uniform(20e-6, 60e-6), loops=int(rng.integers(1, 3)),
                           phases=tuple(rng.uniform(0, TWO_PI, 4)))
    cfg = replace(cfg, omega=cfg.omega * rng.uniform(0.8, 1.1))
    nbar = rng.uniform(0.0, 0.03)
    # truncation must follow the displaced thermal tail, not just the thermal one
    s = ground(n_max=suggest_n_max(nbar, displacement=1.5), nbar=nbar)
    f = fidelity_lower_bound(ms_propagate_analytic(cfg, s).rho, ms_propagate_numeric(cfg, s).rho)
    assert f >= 1 - 1e-8


def test_step_control_converges():
    out, steps = ms_propagate_numeric(IDEAL, ground(), return_steps=True)
    half = ms_propagate_numeric(IDEAL, ground(), min_steps=steps // 2, max_steps=steps // 2 * 2)
    assert abs(bell_fidelity(out.spin()) - bell_fidelity(half.spin())) < 1e-9


def test_brute_force_master_equation_oracle():
    """Spin-motion Schrodinger/Lindblad integration of the plain Hamiltonian."""
    s = ground()
    for rate in (0.0, 3000.0):
        ref = ptrace_motion(ms_lindblad(s.rho, 10, IDEAL.coupling, IDEAL.delta, IDEAL.t_gate, rate), 10)
        got = evolve_spin_density(IDEAL, np.outer(UPUP, UPUP.conj()), 0.0, 0.0, 1.0, rate)
        assert np.max(np.abs(ref - got)) < 1e-6


def test_heating_bound():
    out = gate_error_monte_carlo(IDEAL, NoiseModel(heating_rate_S=1.0), shots=1, breakdown=False)
    assert out.simulated_error <= 3e-5
    assert abs(out.simulated_error - heating_error(1.0, IDEAL.t_gate)) < 2e-6


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, TWO_PI), st.floats(0.0, TWO_PI))
def test_phase_insensitive_gate(shift_b, shift_r):
    base = phase_insensitive_gate(IDEAL)
    moved = phase_insensitive_gate(IDEAL.with_phases((shift_b, shift_r, shift_b, shift_r)))
    ref = np.diag([1, 1j, 1j, 1])
    overlap = abs(np.trace(ref.conj().T @ base)) / 4
    assert overlap > 1 - 1e-9
    assert abs(abs(np.trace(base.conj().T @ moved)) / 4 - 1) < 1e-9


def test_phase_gate_squared_and_entangling():
    u = phase_insensitive_gate(IDEAL)
    sq = u @ u
    assert abs(abs(np.trace(np.diag([1, -1, -1, 1]) @ sq)) / 4 - 1) < 1e-9
    plus = np.ones(4) / 2
    out = u @ plus
    reduced = np.einsum("ij,kj->ik", out.reshape(2, 2), out.reshape(2, 2).conj())
    assert abs(purity(reduced) - 0.5) < 1e-9


def test_scattering_channel():
    rho = np.outer(PHI_PLUS, PHI_PLUS.conj())
    same, leak = apply_scattering_channel(rho, NoiseModel())
    assert np.allclose(same, rho) and leak == 0
    model = NoiseModel.reference_budget()
    block, leak = apply_scattering_channel(rho, model)
    err = 1 - np.real(PHI_PLUS.conj() @ block @ PHI_PLUS)
    assert abs(err - 5.7e-4) < 0.1 * 5.7e-4
    ks = scattering_kraus(model)
    assert np.max(np.abs(sum(k.conj().T @ k for k in ks) - np.eye(3))) < 1e-12
    with pytest.raises(ValueError):
        scattering_kraus(NoiseModel(raman_rate=0.2))


def test_leakage_bias():
    out = gate_error_monte_carlo(IDEAL, NoiseModel.reference_budget().only("raman", "rayleigh"), shots=1,
                                 breakdown=False)
    assert abs((out.apparent_fidelity - out.bell_fidelity) - 4e-5) < 0.5e-5


def test_quasistatic_draws():
    d = sample_quasistatic_noise(NoiseModel(chi=45.0), seed=1, shots=10)
    assert np.allclose(d.mode_shift, 45.0)
    z = sample_quasistatic_noise(NoiseModel(), seed=1, shots=10)
    assert not np.any(z.mode_shift) and not np.any(z.rabi_frac)
    a = sample_quasistatic_noise(NoiseModel.reference_budget(), seed=3, shots=50)
    b = sample_quasistatic_noise(NoiseModel.reference_budget(), seed=3, shots=50)
    assert np.array_equal(a.mode_shift, b.mode_shift) and np.array_equal(a.rabi_frac, b.rabi_frac)


def test_debye_waller_rms():
    m = NoiseModel(eta_C=0.25, nbar_C=0.01)
    d = sample_quasistatic_noise(m, seed=2, shots=10**6)
    assert abs(np.mean(d.rabi_frac)) < 1e-4
    rms = np.sqrt(np.mean(d.rabi_frac**2))
    assert abs(rms / debye_waller_rms(0.25, 0.01) - 1) < 0.05


def test_closed_form_errors():
    assert rabi_fluctuation_error(6e-3) == pytest.approx(9e-5, rel=1e-12)
    assert rabi_fluctuation_error(0.0) == 0.0
    assert abs(lamb_dicke_correction_error(0.19, 0.006) - 1.94e-5) < 1e-7
    assert lamb_dicke_correction_error(0.19, 0.0) == 0.0
    with pytest.raises(ValueError):
        rabi_fluctuation_error(0.2)


def test_fixed_rabi_offset_matches_formula():
    rho = evolve_spin_density(IDEAL, np.outer(UPUP, UPUP.conj()), rabi_scale=1.006)
    err = 1 - bell_fidelity(rho)
    assert abs(err / rabi_fluctuation_error(6e-3) - 1) < 0.2


def test_beyond_lamb_dicke_agrees_with_formula():
    err = beyond_lamb_dicke_error(IDEAL, 0.19, 0.006)
    assert abs(err / lamb_dicke_correction_error(0.19, 0.006) - 1) < 0.5


def test_offresonant_estimate():
    dets, cpls = zip(*default_spectators(IDEAL))
    square = offresonant_error_estimate(Envelope("square"), dets, IDEAL.omega, couplings=cpls)
    assert 1e-4 / 3 < square < 3e-4
    assert offresonant_error_estimate(Envelope("square"), [1e7], 0.0) == 0.0
    shaped = calibrate_shaped(replace(IDEAL, rise_fall=DEFAULT_RISE_FALL))
    dets, cpls = zip(*default_spectators(shaped))
    assert offresonant_error_estimate(shaped.envelope, dets, shaped.omega, couplings=cpls) < 1e-5


def test_noiseless_monte_carlo():
    out = gate_error_monte_carlo(IDEAL, NoiseModel(), shots=8)
    assert out.bell_fidelity >= 1 - 1e-8
    assert all(v >= 0 for _, v in out.error_breakdown)


def test_monte_carlo_deterministic():
    shaped = GateConfig.ideal(rise_fall=DEFAULT_RISE_FALL)
    a = gate_error_monte_carlo(shaped, NoiseModel.reference_budget(), shots=500, seed=9)
    b = gate_error_monte_carlo(shaped, NoiseModel.reference_budget(), shots=500, seed=9)
    assert np.array_equal(a.rho_final, b.rho_final)
    assert a.error_breakdown == b.error_breakdown


def test_mode_frequency_error_scale():
    out = gate_error_monte_carlo(IDEAL, NoiseModel(mode_freq_rms=100.0), shots=4000, breakdown=False)
    assert 0.5e-4 <= out.simulated_error <= 2e-4


def test_error_additivity():
    a = NoiseModel(mode_freq_rms=100.0)
    b = NoiseModel(rabi_frac_rms=4e-3)
    ea = gate_error_monte_carlo(IDEAL, a, 4000, breakdown=False).simulated_error
    eb = gate_error_monte_carlo(IDEAL, b, 4000, breakdown=False).simulated_error
    both = gate_error_monte_carlo(IDEAL, a.with_(rabi_frac_rms=4e-3), 4000, breakdown=False).simulated_error
    assert abs(both / (ea + eb) - 1) < 0.15


def test_tolerance_doubles_shots():
    out = gate_error_monte_carlo(IDEAL, NoiseModel(mode_freq_rms=100.0), shots=64, tolerance=2e-6,
                                 breakdown=False)
    assert out.std_error <= 2e-6 and out.shots > 64


def test_detuning_sweep():
    model = NoiseModel.reference_budget().only("raman", "rayleigh")
    dets = REFERENCE_RAMAN_DETUNING * np.array([0.5, 1.0, 2.0, 4.0])
    pts = sweep_detuning(dets, model, shots=1)
    raman = [p.component("raman") for p in pts]
    assert raman == sorted(raman, reverse=True)
    assert fit_power_law(np.abs(dets), raman)[1] == pytest.approx(-2.0, abs=0.1)
    assert all(abs(p.component("rayleigh") - 1.7e-4) < 0.17e-4 for p in pts)
    ref = pts[1]
    assert abs(ref.component("raman") + ref.component("rayleigh") - 5.7e-4) < 0.57e-4
    flat = sweep_detuning(dets, NoiseModel(), shots=1)
    # only the closed-form spectator term survives without noise
    assert all(abs(p.error - p.component("off_resonant")) < 1e-8 for p in flat)


def test_duration_sweep_quadratic_and_nested():
    ts = np.array([20e-6, 40e-6, 80e-6, 160e-6])
    curves = []
    for rms in (50.0, 100.0, 200.0):
        pts = sweep_duration(ts, NoiseModel(mode_freq_rms=rms), shots=2000)
        curves.append(np.array([p.component("mode_freq") for p in pts]))
    assert np.all(curves[0] < curves[1]) and np.all(curves[1] < curves[2])
    assert fit_power_law(ts, curves[1])[1] == pytest.approx(2.0, abs=0.1)
    assert fit_quadratic(ts, curves[1])[1] < 0.1


def test_gate_config_checks():
    with pytest.raises(ValueError):
        GateConfig(delta=1.0, omega=1.0, t_gate=-1.0)
    bad = replace(IDEAL, t_gate=1.1 * IDEAL.t_gate)
    assert any("closure" in v for v in bad.violations())
    assert IDEAL.violations() == []
    with pytest.raises(ValueError):
        ms_spin_unitary(bad)
    with pytest.raises(ValueError):
        NoiseModel(raman_rate=-1.0)
