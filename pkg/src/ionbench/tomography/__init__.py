from .binning import BinningResult, mutual_information, optimal_edges, train_binning
from .bootstrap import BootstrapResult, annotate, bootstrap_ci, lr_model_check, parametric_bootstrap
from .detection import HistogramSet, Optics, expected_counts, simulate_detection
from .histograms import BinnedHistogram, CountHistogram, SubspaceDistributions
from .ml import FitOptions, MLResult, fit_counts, ml_fit
from .setup import TomographySetup, analysis_pulses, bell_fidelity_fixed, reference_matrix, werner_state
from .systematics import (
    bell_fidelity_lower_bound,
    pumping_bound,
    pumping_study,
    sensitivity_reference_populations,
    sensitivity_transfer_leakage,
)
from .pipeline import Analysis, analyze, synthetic_trial
