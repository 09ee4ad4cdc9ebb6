from .config import Envelope, GateConfig, NoiseModel
from .montecarlo import GateOutcome, gate_error_monte_carlo
from .noise import (
    apply_scattering_channel,
    lamb_dicke_correction_error,
    offresonant_error_estimate,
    rabi_fluctuation_error,
    sample_quasistatic_noise,
)
from .propagate import (
    bell_fidelity,
    ms_propagate_analytic,
    ms_propagate_numeric,
    phase_insensitive_gate,
)
from .sweeps import sweep_detuning, sweep_duration
