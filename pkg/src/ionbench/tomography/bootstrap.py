"""Parametric bootstrap: confidence interval and likelihood-ratio model check."""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ml import FitOptions, _xlogy, fit_counts, model_probabilities

MIN_RESAMPLES = 100
MAX_FAILURE_FRACTION = 0.05
CI_QUANTILES = (16.0, 84.0)


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapResult:
    fidelities: np.ndarray
    lr_statistics: np.ndarray
    observed_lr: float
    failures: int
    seed: int

    @property
    def ci(self):
        lo, hi = np.percentile(self.fidelities, CI_QUANTILES)
        return float(lo), float(hi)

    @property
    def lr_z(self):
        return float((self.observed_lr - self.lr_statistics.mean()) / self.lr_statistics.std(ddof=1))

    @property
    def lr_pvalue(self):
        """Upper-tail probability of the observed statistic under the fitted model."""
        k = np.count_nonzero(self.lr_statistics >= self.observed_lr)
        return float((k + 1) / (len(self.lr_statistics) + 1))


def likelihood_ratio(counts, probs):
    """2 (L_saturated - L_model); cells with no counts contribute nothing,
    so bins with zero expected mass drop out."""
    counts = np.asarray(counts, dtype=float)
    emp = counts / counts.sum(axis=1, keepdims=True)
    mask = counts > 0
    return float(2.0 * (np.sum(_xlogy(counts, emp)[mask]) - np.sum(_xlogy(counts, probs)[mask])))


def _one_resample(args):
    probs, shots, seed_seq, setup, q0, rho0, options = args
    rng = np.random.default_rng(seed_seq)
    counts = np.array([rng.multinomial(n, p / p.sum()) for n, p in zip(shots, probs)])
    try:
        fit = fit_counts(counts[:4], counts[4:], setup, options, q0=q0, rho0=rho0)
    except (ArithmeticError, ValueError, RuntimeError):
        return None
    lr = likelihood_ratio(counts, model_probabilities(fit, setup))
    return fit.fidelity, lr


def parametric_bootstrap(result, setup, resamples=500, seed=0, options=None, workers=1):
    """Refit ``resamples`` histogram sets drawn from the fitted model with the
    original shot counts. Each refit starts from the fitted point."""
    if resamples < MIN_RESAMPLES:
        raise ValueError(f"need at least {MIN_RESAMPLES} resamples")
    if result.counts is None:
        raise ValueError("result carries no counts")
    probs = np.clip(model_probabilities(result, setup), 0.0, None)
    options = options or FitOptions()
    seeds = np.random.SeedSequence(seed).spawn(resamples)
    jobs = [(probs, result.shots, s, setup, result.q_hat.q, result.rho_hat, options) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            out = list(pool.map(_one_resample, jobs, chunksize=max(1, resamples // (4 * workers))))
    else:
        out = [_one_resample(j) for j in jobs]
    good = [o for o in out if o is not None]
    failures = resamples - len(good)
    if failures > MAX_FAILURE_FRACTION * resamples:
        raise BootstrapError(f"{failures} of {resamples} bootstrap fits failed")
    fids, lrs = (np.array(v) for v in zip(*good))
    observed = likelihood_ratio(result.counts, model_probabilities(result, setup))
    return BootstrapResult(fids, lrs, observed, failures, seed)


def bootstrap_ci(result, setup, resamples=500, seed=0, options=None, workers=1):
    """1-sigma (16/84 percentile) interval of the bootstrap fidelities."""
    return parametric_bootstrap(result, setup, resamples, seed, options, workers).ci


def lr_model_check(result, setup, resamples=500, seed=0, options=None, workers=1):
    """(z, p): the data's likelihood-ratio statistic against the saturated
    model, standardised by its bootstrap distribution, and its tail probability."""
    boot = parametric_bootstrap(result, setup, resamples, seed, options, workers)
    return boot.lr_z, boot.lr_pvalue


def annotate(result, boot):
    """MLResult with the bootstrap interval and model-check fields filled in."""
    return result.with_ci(boot.ci).with_lr(boot.lr_z, boot.lr_pvalue)
