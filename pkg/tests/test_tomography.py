import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ionbench.tomography import (
    CountHistogram,
    FitOptions,
    Optics,
    SubspaceDistributions,
    TomographySetup,
    bell_fidelity_lower_bound,
    fit_counts,
    mutual_information,
    optimal_edges,
    parametric_bootstrap,
    pumping_bound,
    pumping_study,
    sensitivity_reference_populations,
    sensitivity_transfer_leakage,
    simulate_detection,
    train_binning,
    werner_state,
)
from ionbench.tomography.binning import brute_force_edges, split_training
from ionbench.tomography.detection import expected_counts, sample_counts, subspace_count_distributions
from ionbench.tomography.io import read_histogram, read_histogram_set, write_histogram, write_histogram_set
from ionbench.tomography.systematics import base_data, default_edges

EDGES = default_edges()


def binned(hs, edges=EDGES):
    refs = np.array([h.bin(edges).bin_counts for h in hs.references])
    data = np.array([h.bin(edges).bin_counts for h in hs.data])
    return refs, data


def test_histogram_validation():
    with pytest.raises(ValueError):
        CountHistogram([1, -1, 2])
    with pytest.raises(ValueError):
        CountHistogram([])
    with pytest.raises(ValueError):
        SubspaceDistributions(np.ones((3, 4)))
    h = CountHistogram.from_samples([0, 3, 3, 500], max_count=10)
    assert h.counts[10] == 1 and h.shots == 4


def test_count_distributions_normalised():
    q = subspace_count_distributions(Optics())
    assert np.allclose(q.sum(axis=1), 1.0, atol=1e-12)
    means = q @ np.arange(q.shape[1])
    assert means[0] > means[1] > means[2]
    # depumping pulls the bright means below the no-depumping values
    assert means[0] < 60.0 and abs(means[2] - 2.0) < 1e-9


def test_sampled_counts_match_exact_distribution():
    optics = Optics()
    rng = np.random.default_rng(4)
    q = subspace_count_distributions(optics)
    for j in range(3):
        emp = np.bincount(sample_counts(j, 200000, optics, rng), minlength=optics.max_count + 1) / 2e5
        assert np.max(np.abs(emp - q[j])) < 5e-3


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5))
def test_dp_binning_matches_brute_force(seed, n_bins):
    rng = np.random.default_rng(seed)
    p = rng.dirichlet(np.full(9, 0.7), size=4)
    e_dp, mi_dp = optimal_edges(p, n_bins)
    e_bf, mi_bf = brute_force_edges(p, n_bins)
    assert abs(mi_dp - mi_bf) < 1e-12
    assert abs(mutual_information(p, e_dp) - mi_dp) < 1e-12


def test_mutual_information_bounds():
    p = np.eye(4, 8)
    edges, mi = optimal_edges(p, 4)
    assert abs(mi - np.log(4)) < 1e-12
    assert mutual_information(np.ones((4, 8)) / 8, [0, 2, 4, 6, 8]) == pytest.approx(0.0, abs=1e-15)


def test_training_split_conserves_shots():
    hs = simulate_detection(werner_state(0.99), Optics(), 5000, seed=1)
    train, rest = split_training(hs.references, 0.1, seed=2)
    for t, r, h in zip(train, rest, hs.references):
        assert np.array_equal(t.counts + r.counts, h.counts)
        assert t.shots == 500
    res = train_binning(hs.references, seed=2)
    assert len(res.edges) == 8 and not res.degenerate


def test_degenerate_binning_flagged():
    refs = [CountHistogram(np.r_[[1000, 1000, 0], np.zeros(20, int)]) for _ in range(4)]
    assert train_binning(refs).degenerate


def test_ml_monotone_and_physical():
    hs = simulate_detection(werner_state(0.99), Optics(), 5000, seed=3)
    refs, data = binned(hs)
    fit = fit_counts(refs, data, TomographySetup(), FitOptions(record_history=True))
    hist = np.array(fit.history)
    assert np.all(np.diff(hist) >= -1e-9 * np.abs(hist[1:]))
    w = np.linalg.eigvalsh(fit.rho_hat)
    assert w.min() > -1e-12 and abs(np.trace(fit.rho_hat) - 1) < 1e-12
    assert np.allclose(fit.rho_hat, fit.rho_hat.conj().T)
    assert fit.converged and fit.gap < 1e-3


def test_ml_recovers_state_from_expected_counts():
    for f in (0.95, 0.9992):
        d = base_data(werner_state(f), shots=10**6)
        fit = fit_counts(d.refs, d.data, TomographySetup())
        assert abs(fit.fidelity - f) < 1e-4


def test_ml_error_scales_as_inverse_sqrt_shots():
    spread = {}
    for n in (2000, 20000):
        fs = [fit_counts(*binned(simulate_detection(werner_state(0.99), Optics(), n, seed=s)),
                         TomographySetup()).fidelity for s in range(16)]
        spread[n] = np.std(fs, ddof=1)
    ratio = spread[2000] / spread[20000]
    assert 1.6 < ratio < 6.3


def test_bootstrap_deterministic_and_ordered():
    hs = simulate_detection(werner_state(0.99), Optics(), 5000, seed=5)
    fit = fit_counts(*binned(hs), TomographySetup())
    a = parametric_bootstrap(fit, TomographySetup(), resamples=100, seed=7)
    b = parametric_bootstrap(fit, TomographySetup(), resamples=100, seed=7)
    assert np.array_equal(a.fidelities, b.fidelities)
    lo, hi = a.ci
    assert lo <= hi and lo <= fit.fidelity + 1e-3 and hi >= fit.fidelity - 1e-3
    assert 0 < a.lr_pvalue <= 1
    with pytest.raises(ValueError):
        parametric_bootstrap(fit, TomographySetup(), resamples=50)


def test_expected_counts_match_simulation_mean():
    rho = werner_state(0.97)
    refs, data = expected_counts(rho, Optics(), 20000)
    hs = simulate_detection(rho, Optics(), 20000, seed=8)
    sim = np.array([h.counts for h in hs.data])
    assert np.allclose(sim.sum(axis=1), data.sum(axis=1))
    assert abs(sim[:, :20].sum() - data[:, :20].sum()) / data[:, :20].sum() < 0.05


def test_reference_population_sensitivity_small():
    shift = sensitivity_reference_populations(5e-4)
    assert abs(shift) < 1e-4
    assert sensitivity_reference_populations(0.0) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        sensitivity_reference_populations(1e-3)


def test_transfer_leakage_sensitivity_small():
    assert abs(sensitivity_transfer_leakage(2e-3)) < 1e-4
    assert sensitivity_transfer_leakage(0.0) == 0.0


def test_pumping_bound_values():
    assert pumping_bound(0.0, 0.5, 0.01) == 0.0
    assert pumping_bound(0.001, 0.5, 0.01) == pytest.approx(0.001 / 0.49)
    assert pumping_bound(0.9, 0.5, 0.4) == 1.0
    with pytest.raises(ValueError):
        pumping_bound(0.001, 0.01, 0.01)
    with pytest.raises(ValueError):
        pumping_bound(-0.1, 0.5, 0.01)


def test_pumping_study_lower_bound_holds():
    study = pumping_study([0.0, 1e-3, 2e-3, 4e-3])
    assert study.bound_holds()
    assert study.true_error_slope() == pytest.approx(2.0, abs=0.05)
    # the standard fit sees only part of the pumping error
    assert study.ml_error_slope() < study.true_error_slope()
    assert bell_fidelity_lower_bound(0.001, 0.5) == 0.0


def test_histogram_io_round_trip(tmp_path):
    hs = simulate_detection(werner_state(0.99), Optics(), 1000, seed=9)
    write_histogram_set(tmp_path, hs.references, hs.data)
    refs, data = read_histogram_set(tmp_path)
    assert all(np.array_equal(a.counts, b.counts) for a, b in zip(refs, hs.references))
    assert all(np.array_equal(a.counts, b.counts) for a, b in zip(data, hs.data))
    b = hs.data[0].bin(EDGES)
    write_histogram(tmp_path / "binned.txt", b, "data", pulse_index=0)
    back, meta = read_histogram(tmp_path / "binned.txt")
    assert np.array_equal(back.bin_edges, b.bin_edges) and meta["pulse_index"] == 0
    (tmp_path / "bad.txt").write_text("# role: data\n# shots: 5\n0\t1\n1\t1\n")
    with pytest.raises(ValueError):
        read_histogram(tmp_path / "bad.txt")
