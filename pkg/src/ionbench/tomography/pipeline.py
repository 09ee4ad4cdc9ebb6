"""End-to-end analysis: binning, ML fit and bootstrap on one histogram set."""

from dataclasses import dataclass

from .binning import train_binning
from .bootstrap import annotate, parametric_bootstrap
from .detection import Optics, simulate_detection
from .ml import ml_fit
from .setup import TomographySetup, werner_state


@dataclass(frozen=True)
class Analysis:
    result: object  # MLResult with ci and model check filled in
    binning: object
    bootstrap: object


def analyze(histograms, setup=None, resamples=500, seed=0, train_frac=0.1, options=None, workers=1):
    """Train bins on a split of the references, fit the rest, bootstrap."""
    setup = setup or TomographySetup()
    binning = train_binning(histograms.references, train_frac, seed)
    refs = [h.bin(binning.edges) for h in binning.remainder]
    data = [h.bin(binning.edges) for h in histograms.data]
    fit = ml_fit(refs, data, setup, options)
    boot = parametric_bootstrap(fit, setup, resamples, seed, options, workers)
    return Analysis(annotate(fit, boot).with_seed(seed), binning, boot)


def synthetic_trial(fidelity=0.9992, optics=None, shots=20000, seed=0, resamples=500, rho=None,
                    options=None, workers=1):
    """Simulate histograms for a Werner state (or ``rho``) and analyse them."""
    rho = werner_state(fidelity) if rho is None else rho
    hs = simulate_detection(rho, optics or Optics(), shots, seed)
    return analyze(hs, resamples=resamples, seed=seed, options=options, workers=workers)
