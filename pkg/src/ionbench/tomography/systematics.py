"""Systematic-error studies for the tomography pipeline and the pumping bound.

The sensitivity analyses work on noise-free (expected) binned counts so that
the returned shifts are free of shot noise.
"""

from dataclasses import dataclass

import numpy as np

from .binning import optimal_edges
from ..hilbert import PHI_PLUS
from .detection import Optics, expected_counts, simulate_detection, subspace_count_distributions
from .histograms import bin_counts
from .ml import fit_counts
from .setup import (TomographySetup, bell_fidelity_fixed, one_ion_bright_pairs, reference_matrix,
                    werner_state)

UP, DOWN, OUT = 0, 1, 2  # per-ion levels of the three-level model


@dataclass(frozen=True)
class BaseData:
    """Binned reference (4 x B) and data (9 x B) counts with their bin edges."""

    refs: np.ndarray
    data: np.ndarray
    edges: np.ndarray


def _bin_all(arr, edges):
    return np.array([bin_counts(row, edges) for row in arr])


def default_edges(optics=None):
    """DP bins for the exact reference distributions."""
    optics = optics or Optics()
    p = reference_matrix() @ subspace_count_distributions(optics)
    return optimal_edges(p)[0]


def base_data(rho=None, optics=None, shots=20000, edges=None, setup=None, true_a=None):
    """Expected counts for ``rho`` (default: Werner state at F = 0.9992)."""
    optics = optics or Optics()
    rho = werner_state(0.9992) if rho is None else rho
    edges = default_edges(optics) if edges is None else np.asarray(edges)
    refs, data = expected_counts(rho, optics, shots, setup, true_a)
    return BaseData(_bin_all(refs, edges), _bin_all(data, edges), edges)


def _fit_fidelity(refs, data, setup):
    return fit_counts(refs, data, setup).fidelity


def sensitivity_reference_populations(xi, base=None):
    """Fidelity change when the assumed bright population of each ion in the
    r3/r4 references is 0.5 + xi instead of 0.5."""
    if not 0.0 <= xi <= 5e-4:
        raise ValueError("xi must lie in [0, 5e-4]")
    base = base or base_data()
    nominal = _fit_fidelity(base.refs, base.data, TomographySetup())
    shifted = _fit_fidelity(base.refs, base.data, TomographySetup(reference_matrix(xi)))
    return shifted - nominal


def embed_two_qubit(rho):
    """Two-qubit operator placed in the (up, down) levels of two three-level ions."""
    idx = np.array([3 * i + j for i in (UP, DOWN) for j in (UP, DOWN)])
    out = np.zeros((9, 9), dtype=complex)
    out[np.ix_(idx, idx)] = rho
    return out


def _level_state(i, j):
    v = np.zeros(9)
    v[3 * i + j] = 1.0
    return np.outer(v, v)


def one_sided_loss(rho, p_out):
    """Each ion is independently outside the qubit manifold with probability
    ``p_out`` before the gate; the gate then leaves its partner in |up>."""
    keep = (1.0 - p_out) ** 2
    one = p_out * (1.0 - p_out)
    return (keep * embed_two_qubit(rho) + one * (_level_state(UP, OUT) + _level_state(OUT, UP))
            + p_out**2 * _level_state(OUT, OUT))


def transfer_leakage_model(transfer_error, rho):
    """(state, setup) for imperfect transfer between the detection level and
    |up>. Each transfer leg fails with probability transfer_error / 2: before
    the gate the ion is left outside the manifold (dark, partner in |up>);
    after the analysis pulse an |up> ion stays dark; and the shelving for the
    dark reference leaves each ion bright."""
    e = 0.5 * transfer_error
    a = reference_matrix()
    a[1] = one_ion_bright_pairs(e)
    setup = TomographySetup(a, bright=(1.0 - e, 0.0, 0.0))
    return one_sided_loss(rho, e), setup


def embedded_fidelity(state):
    """Bell fidelity of a two-qubit or two-qutrit state; population outside
    the qubit levels counts as error."""
    state = np.asarray(state)
    if state.shape == (4, 4):
        return bell_fidelity_fixed(state)
    return float(np.real(np.trace(embed_two_qubit(np.outer(PHI_PLUS, PHI_PLUS.conj())) @ state)))


def _apparent_minus_true(state, true_setup, optics, shots, edges):
    data = base_data(state, optics, shots, edges, setup=true_setup, true_a=true_setup.a)
    return _fit_fidelity(data.refs, data.data, TomographySetup()) - embedded_fidelity(state)


def sensitivity_transfer_leakage(transfer_error, rho=None, optics=None, shots=20000, edges=None):
    """Change in the gap between the standard ML fidelity and the true Bell
    fidelity when the data contain transfer errors of size ``transfer_error``
    (round trip). The leaked population is counted as error in both."""
    if not 0.0 <= transfer_error <= 2e-3:
        raise ValueError("transfer_error must lie in [0, 2e-3]")
    optics = optics or Optics()
    rho = werner_state(0.9992) if rho is None else rho
    edges = default_edges(optics) if edges is None else edges
    clean = _apparent_minus_true(*transfer_leakage_model(0.0, rho), optics, shots, edges)
    if transfer_error == 0.0:
        return 0.0
    leaky = _apparent_minus_true(*transfer_leakage_model(transfer_error, rho), optics, shots, edges)
    return leaky - clean


def pumping_error_model(epsilon, rho):
    """(state, setup generating the data) for a per-ion optical-pumping error
    ``epsilon``: the unpumped ion is dark and outside the qubit manifold, in
    the data and in every reference built on pumping."""
    ok = 1.0 - epsilon
    a = np.array([one_ion_bright_pairs(ok), [0.0, 0.0, 1.0],
                  one_ion_bright_pairs(0.5 * ok), one_ion_bright_pairs(0.5 * ok)])
    return one_sided_loss(rho, epsilon), TomographySetup(a, bright=(1.0, 0.0, 0.0))


@dataclass(frozen=True)
class PumpingStudy:
    epsilon: np.ndarray
    true_fidelity: np.ndarray
    ml_fidelity: np.ndarray

    @property
    def lower_bound(self):
        return np.array([bell_fidelity_lower_bound(f, e) for f, e in zip(self.ml_fidelity, self.epsilon)])

    def true_error_slope(self):
        return float(np.polyfit(self.epsilon, 1.0 - self.true_fidelity, 1)[0])

    def ml_error_slope(self):
        return float(np.polyfit(self.epsilon, 1.0 - self.ml_fidelity, 1)[0])

    def bound_holds(self):
        return bool(np.all(self.lower_bound <= self.true_fidelity + 1e-7))


def pumping_study(epsilons, rho=None, optics=None, shots=20000, edges=None, seed=None):
    """True and ML-inferred Bell fidelity over a grid of pumping errors.

    With ``seed`` None the ML fits use expected counts; otherwise each point
    is a simulated histogram set (binned with ``edges``).
    """
    optics = optics or Optics()
    rho = werner_state(0.9992) if rho is None else rho
    edges = default_edges(optics) if edges is None else np.asarray(edges)
    eps = np.asarray(epsilons, dtype=float)
    true_f, ml_f = [], []
    for i, e in enumerate(eps):
        state, setup = pumping_error_model(e, rho)
        true_f.append(embedded_fidelity(state))
        if seed is None:
            d = base_data(state, optics, shots, edges, setup=setup, true_a=setup.a)
            refs, data = d.refs, d.data
        else:
            hs = simulate_detection(state, optics, shots, seed=seed + i, setup=setup)
            refs = np.array([h.bin(edges).bin_counts for h in hs.references])
            data = np.array([h.bin(edges).bin_counts for h in hs.data])
        ml_f.append(_fit_fidelity(refs, data, TomographySetup()))
    return PumpingStudy(eps, np.array(true_f), np.array(ml_f))


def pumping_bound(t_b, l, t_bar_b):
    """Upper bound t_b / (l - t_bar_b) on the per-ion pumping error, clamped to [0, 1].

    t_b: observed low-count tail probability of the bright reference;
    l: lower bound on the same tail for a dark ion; t_bar_b: tail of an
    ideal bright ion.
    """
    for name, v in (("t_b", t_b), ("l", l), ("t_bar_b", t_bar_b)):
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    if l <= t_bar_b:
        raise ValueError("need l > t_bar_b; the calibration cannot bound the error")
    return float(min(max(t_b / (l - t_bar_b), 0.0), 1.0))


def bell_fidelity_lower_bound(ml_fidelity, epsilon):
    """ML fidelity minus 2 epsilon, clamped at 0."""
    if not (0.0 <= ml_fidelity <= 1.0 and 0.0 <= epsilon <= 1.0):
        raise ValueError("inputs must lie in [0, 1]")
    return max(ml_fidelity - 2.0 * epsilon, 0.0)
