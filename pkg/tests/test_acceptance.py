"""End-to-end acceptance checks. Each test records one PASS/FAIL line,
printed in the terminal summary."""

import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from conftest import CRITERIA
from helpers import fidelity_lower_bound
from ionbench.fidelity import avg_fidelity, avg_fidelity_oracle, ms_avg_fidelity, random_channel, random_unitary
from ionbench.harness import load_scenario, run
from ionbench.harness.runner import DEFAULT_TOLERANCES
from ionbench.harness.tables import read_table
from ionbench.hilbert import TWO_PI, UPUP, SpinMotionState, suggest_n_max
from ionbench.msgate import (
    GateConfig,
    NoiseModel,
    bell_fidelity,
    gate_error_monte_carlo,
    lamb_dicke_correction_error,
    ms_propagate_analytic,
    ms_propagate_numeric,
    rabi_fluctuation_error,
    sweep_detuning,
    sweep_duration,
)
from ionbench.msgate.config import DEFAULT_RISE_FALL
from ionbench.msgate.sweeps import fit_power_law
from ionbench.rb import RBNoise, run_rb
from ionbench.tomography import FitOptions, Optics, bell_fidelity_lower_bound, pumping_bound, synthetic_trial
from ionbench.tomography.ml import MONOTONE_SLACK

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def record(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    CRITERIA.append(line)
    print(line)
    assert ok, line


def test_criterion_1_ideal_gate():
    t0 = time.perf_counter()
    cfg = GateConfig.ideal()
    assert abs(cfg.eta_S * cfg.omega - cfg.delta / 2) < 1e-9 * cfg.delta
    assert abs(cfg.t_gate - TWO_PI / cfg.delta) < 1e-15
    start = SpinMotionState.from_spin_ket(UPUP, 10, fock=0)
    f_ideal = bell_fidelity(ms_propagate_numeric(cfg, start).spin())
    rng = np.random.default_rng(20)
    worst = 1.0
    for _ in range(20):
        c = GateConfig.ideal(t_gate=rng.uniform(20e-6, 60e-6), loops=int(rng.integers(1, 3)),
                             phases=tuple(rng.uniform(0, TWO_PI, 4)))
        c = replace(c, omega=c.omega * rng.uniform(0.8, 1.1), delta=c.delta * rng.uniform(0.95, 1.05))
        nbar = rng.uniform(0.0, 0.05)
        s = SpinMotionState.from_spin_ket(UPUP, suggest_n_max(nbar, displacement=1.5), nbar=nbar)
        worst = min(worst, fidelity_lower_bound(ms_propagate_analytic(c, s).rho, ms_propagate_numeric(c, s).rho))
    dt = time.perf_counter() - t0
    record(1, f_ideal >= 1 - 1e-8 and worst >= 1 - 1e-8 and dt < 10,
           f"Bell {f_ideal:.12f}, worst numeric/analytic fidelity bound {worst:.12f}, {dt:.1f} s")


def test_criterion_2_error_budget(tmp_path):
    t0 = time.perf_counter()
    sc = load_scenario(SCENARIOS / "error_budget.yaml").with_overrides(output_dir=str(tmp_path))
    man = run(sc)
    meta, cols, rows = read_table(tmp_path / "budget.tsv")
    dt = time.perf_counter() - t0
    summary = ", ".join(f"{r[0]} {float(r[2]):.2e}" for r in rows)
    bad = [r[0] for r in rows if r[5] != "true"]
    record(2, man.ok and not bad and int(meta["shots"]) >= 10**4 and dt < 600,
           f"{summary}; outside tolerance: {bad or 'none'}; {dt:.0f} s")


def test_criterion_3_duration_trend():
    ts = np.array([20, 30, 40, 60, 80, 100, 120, 160]) * 1e-6
    pts = sweep_duration(ts, NoiseModel(mode_freq_rms=100.0), shots=4000, seed=3)
    err = np.array([p.component("mode_freq") for p in pts])
    _, exponent = fit_power_law(ts, err)
    at30 = err[1]
    record(3, abs(exponent - 2.0) <= 0.1 and 0.5e-4 <= at30 <= 2e-4,
           f"exponent {exponent:.3f}, error at 30 us {at30:.2e}")


def test_criterion_4_detuning_trend():
    dets = -TWO_PI * 1e9 * np.array([200, 300, 450, 600, 900, 1200, 1800])
    model = NoiseModel.reference_budget()
    pts = sweep_detuning(dets, model, shots=1, rise_fall=DEFAULT_RISE_FALL, seed=2)
    raman = np.array([p.component("raman") for p in pts])
    rayleigh = np.array([p.component("rayleigh") for p in pts])
    _, slope = fit_power_law(np.abs(dets), raman)
    dev = np.max(np.abs(rayleigh / 1.7e-4 - 1))
    record(4, abs(slope + 2.0) <= 0.1 and dev <= 0.1,
           f"Raman slope {slope:.3f}, Rayleigh max deviation {dev:.1%}")


def test_criterion_5_closed_forms():
    vals = (rabi_fluctuation_error(6e-3), lamb_dicke_correction_error(0.19, 0.006),
            pumping_bound(8e-4, 0.8, 0.0), bell_fidelity_lower_bound(0.9992, 1e-3))
    ok = (vals[0] == 9.0e-5 and abs(vals[1] - 1.94e-5) <= 1e-7 and vals[2] == 1.0e-3 and vals[3] == 0.9972)
    record(5, ok, "values " + ", ".join(repr(v) for v in vals))


@pytest.fixture(scope="module")
def tomography_trials():
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(2024).generate_state(50)
    opts = FitOptions(record_history=True)
    trials = [synthetic_trial(0.9992, Optics(), 20000, int(s), 500, options=opts) for s in seeds]
    return trials, time.perf_counter() - t0


def test_criterion_6_tomography_coverage(tomography_trials):
    trials, dt = tomography_trials
    cover = np.mean([t.result.ci[0] <= 0.9992 <= t.result.ci[1] for t in trials])
    monotone = all(np.all(np.diff(h) >= -MONOTONE_SLACK * np.abs(np.asarray(h[1:])))
                   for h in (t.result.history for t in trials))
    failures = sum(t.bootstrap.failures for t in trials)
    record(6, 0.60 <= cover <= 0.78 and monotone and failures == 0 and dt < 900,
           f"coverage {cover:.2f} over {len(trials)} trials, monotone {monotone}, "
           f"bootstrap refit failures {failures}, {dt:.0f} s")


def test_criterion_7_model_check(tomography_trials):
    trials, _ = tomography_trials
    z = np.array([t.result.lr_z for t in trials])
    frac = np.mean(np.abs(z) <= 2)
    record(7, frac >= 0.9, f"|z| <= 2 in {frac:.0%} of trials (max |z| {np.max(np.abs(z)):.2f})")


def test_criterion_8_rb():
    t0 = time.perf_counter()
    res, _, _ = run_rb(per_length=50, noise=RBNoise(pulse_error=2.5e-5, rabi_frac_rms=1e-3, spam=2e-3), seed=3)
    dt = time.perf_counter() - t0
    record(8, 3.0e-5 <= res.epg <= 4.6e-5 and 1.4e-3 <= res.spam <= 2.6e-3 and dt < 300,
           f"EPG {res.epg:.2e} +- {res.epg_err:.1e}, SPAM {res.spam:.2e}, lengths up to "
           f"{int(res.lengths.max())}, {dt:.1f} s")


def test_criterion_9_average_fidelity():
    rng = np.random.default_rng(9)
    diff = 0.0
    for _ in range(50):
        chan, u = random_channel(rng, int(rng.integers(1, 8))), random_unitary(rng)
        diff = max(diff, abs(avg_fidelity(chan, u) - avg_fidelity_oracle(chan, u)))
    cfg, model = GateConfig.ideal(rise_fall=DEFAULT_RISE_FALL), NoiseModel.reference_budget()
    f, _, _ = ms_avg_fidelity(cfg, model, shots=20000, seed=6)
    bell = gate_error_monte_carlo(cfg, model, shots=20000, seed=6, breakdown=False).apparent_fidelity
    half = DEFAULT_TOLERANCES["interval"]
    record(9, diff <= 1e-10 and abs(f - bell) <= half,
           f"oracle max difference {diff:.1e}; F_avg {f:.6f} vs Bell {bell:.6f} +- {half:.0e}")


def test_criterion_10_estimator_targets(tomography_trials):
    trials, _ = tomography_trials
    mean_f = np.mean([t.result.fidelity for t in trials])
    lower = bell_fidelity_lower_bound(0.9992, pumping_bound(8e-4, 0.8, 0.0))
    record(10, abs(mean_f - 0.9992) <= 4e-4 and round(lower, 3) == 0.997,
           f"mean ML fidelity {mean_f:.5f} at truth 0.9992, lower bound {lower:.4f}")
