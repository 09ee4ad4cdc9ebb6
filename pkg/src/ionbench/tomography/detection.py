"""Fluorescence detection model and synthetic histogram generation.

Each bright ion scatters photons at a constant rate until it is optically
pumped dark, after an exponentially distributed time; a Poisson background
is always present. Counts above ``max_count`` are pooled in the top bin.
"""

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from .histograms import DEFAULT_MAX_COUNT, CountHistogram
from .setup import TomographySetup


@dataclass(frozen=True)
class Optics:
    """Mean counts for the three subspaces (both bright, one bright, both
    dark) in the absence of depumping; ``depump_time`` is the mean
    bright-to-dark time (None disables depumping)."""

    mean_both: float = 60.0
    mean_one: float = 32.0
    mean_dark: float = 2.0
    depump_time: float = 50e-3
    window: float = 330e-6
    max_count: int = DEFAULT_MAX_COUNT

    def __post_init__(self):
        if not self.mean_dark <= self.mean_one <= self.mean_both:
            raise ValueError("need mean_dark <= mean_one <= mean_both")
        if self.depump_time is not None and self.depump_time <= 0:
            raise ValueError("depump_time must be positive")

    @property
    def background(self):
        return self.mean_dark

    def ion_rate(self, subspace):
        """Per-bright-ion mean signal (excluding background) in subspace 0 or 1."""
        if subspace == 0:
            return 0.5 * (self.mean_both - self.mean_dark)
        return self.mean_one - self.mean_dark

    @property
    def survival(self):
        """Probability that a bright ion stays bright for the whole window."""
        if self.depump_time is None:
            return 1.0
        return float(np.exp(-self.window / self.depump_time))


def ion_count_pmf(rate, optics, n=None):
    """Signal-count distribution of one bright ion with depumping, 0..n-1."""
    n = optics.max_count + 1 if n is None else n
    c = np.arange(n)
    if optics.depump_time is None or rate == 0:
        return stats.poisson.pmf(c, rate)
    k = optics.window / (optics.depump_time * rate)
    # bright for the full window, or pumped dark at t < window
    pmf = optics.survival * stats.poisson.pmf(c, rate)
    log_pref = np.log(k) - (c + 1) * np.log1p(k)
    pmf = pmf + np.exp(log_pref) * special.gammainc(c + 1, (1.0 + k) * rate)
    return pmf


def _pool(pmf, max_count):
    out = pmf[: max_count + 1].copy()
    out[-1] += max(0.0, 1.0 - pmf[: max_count + 1].sum())
    return out


def subspace_count_distributions(optics):
    """Exact q_j(c) for c = 0..max_count (overflow pooled at max_count)."""
    n = optics.max_count + 1
    # compute on a longer grid so the convolution tails are right before pooling
    big = 2 * n + 64
    bg = stats.poisson.pmf(np.arange(big), optics.background)
    ion_both = ion_count_pmf(optics.ion_rate(0), optics, big)
    ion_one = ion_count_pmf(optics.ion_rate(1), optics, big)
    both = np.convolve(np.convolve(bg, ion_both)[:big], ion_both)[:big]
    one = np.convolve(bg, ion_one)[:big]
    return np.array([_pool(both, optics.max_count), _pool(one, optics.max_count),
                     _pool(bg, optics.max_count)])


def sample_counts(subspace, shots, optics, rng):
    """Photon counts for ``shots`` repetitions projected onto one subspace."""
    counts = rng.poisson(optics.background, shots).astype(np.int64)
    n_bright = (2, 1, 0)[subspace]
    if n_bright:
        rate = optics.ion_rate(subspace)
        for _ in range(n_bright):
            if optics.depump_time is None:
                frac = np.ones(shots)
            else:
                frac = np.minimum(rng.exponential(optics.depump_time, shots), optics.window) / optics.window
            counts += rng.poisson(rate * frac)
    return np.minimum(counts, optics.max_count)


def sample_histogram(populations, shots, optics, rng, label=""):
    """Histogram of ``shots`` experiments with subspace populations (3,)."""
    p = np.clip(np.asarray(populations, dtype=float), 0.0, None)
    n_j = rng.multinomial(shots, p / p.sum())
    samples = np.concatenate([sample_counts(j, n, optics, rng) for j, n in enumerate(n_j)])
    return CountHistogram.from_samples(samples, optics.max_count, label)


@dataclass(frozen=True)
class HistogramSet:
    references: tuple
    data: tuple

    @property
    def shots(self):
        return [h.shots for h in self.references] + [h.shots for h in self.data]


def simulate_detection(rho, optics=None, shots=20000, seed=0, setup=None, true_a=None,
                       reference_shots=None):
    """Four reference and nine data histograms for state ``rho``.

    ``setup`` fixes the measurement model (its ``a`` matrix is the default
    for the references); ``true_a`` overrides the reference populations,
    e.g. to model imperfect reference preparation.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    optics = optics or Optics()
    setup = setup or TomographySetup()
    a = setup.a if true_a is None else np.asarray(true_a)
    reference_shots = shots if reference_shots is None else reference_shots
    rng = np.random.default_rng(seed)
    refs = tuple(sample_histogram(a[i], reference_shots, optics, rng, f"r{i + 1}") for i in range(4))
    b = setup.b_map(rho)
    data = tuple(sample_histogram(b[k], shots, optics, rng, f"h{k}") for k in range(setup.n_settings))
    return HistogramSet(refs, data)


def expected_counts(rho, optics=None, shots=20000, setup=None, true_a=None, reference_shots=None):
    """Noise-free (mean) count arrays: (references (4, C+1), data (9, C+1))."""
    optics = optics or Optics()
    setup = setup or TomographySetup()
    a = setup.a if true_a is None else np.asarray(true_a)
    reference_shots = shots if reference_shots is None else reference_shots
    q = subspace_count_distributions(optics)
    return reference_shots * (a @ q), shots * (setup.b_map(rho) @ q)
