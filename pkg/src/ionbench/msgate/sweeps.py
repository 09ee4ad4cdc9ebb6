"""Error curves versus Raman detuning and gate duration."""

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_T_GATE, REFERENCE_RAMAN_DETUNING, GateConfig
from .montecarlo import gate_error_monte_carlo


def raman_rate_at(detuning, reference_rate, reference_detuning=REFERENCE_RAMAN_DETUNING):
    """Raman probability per gate at fixed gate duration: scales as 1/Delta^2."""
    return reference_rate * (reference_detuning / detuning) ** 2


@dataclass(frozen=True)
class SweepPoint:
    x: float
    error: float
    std_error: float
    components: tuple

    def component(self, label):
        return dict(self.components).get(label, 0.0)


def sweep_detuning(detunings, model, t_gate=DEFAULT_T_GATE, rise_fall=0.0, shots=4000, seed=0,
                   reference_detuning=REFERENCE_RAMAN_DETUNING):
    """Total gate error at each Raman detuning (rad/s).

    ``model.raman_rate`` is the rate at ``reference_detuning``; the Rayleigh
    error does not depend on detuning.
    """
    config = GateConfig.ideal(t_gate=t_gate, rise_fall=rise_fall)
    out = []
    for det in detunings:
        m = model.with_(raman_rate=raman_rate_at(det, model.raman_rate, reference_detuning))
        res = gate_error_monte_carlo(config, m, shots=shots, seed=seed)
        out.append(SweepPoint(float(det), res.total_error, res.std_error, res.error_breakdown))
    return out


def sweep_duration(t_list, model, rise_fall=0.0, shots=4000, seed=0, loops=1):
    """Total gate error for closed, maximally entangling gates of each duration."""
    out = []
    for t in t_list:
        config = GateConfig.ideal(t_gate=t, rise_fall=rise_fall, loops=loops)
        res = gate_error_monte_carlo(config, model, shots=shots, seed=seed)
        out.append(SweepPoint(float(t), res.total_error, res.std_error, res.error_breakdown))
    return out


def fit_power_law(x, y):
    """Log-log least squares y = a x^k; returns (a, k)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k, log_a = np.polyfit(np.log(x), np.log(y), 1)
    return float(np.exp(log_a)), float(k)


def fit_quadratic(x, y):
    """Least-squares y = a x^2; returns (a, max relative residual)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    a = float(np.sum(y * x**2) / np.sum(x**4))
    resid = np.max(np.abs(a * x**2 - y) / np.abs(y))
    return a, float(resid)
