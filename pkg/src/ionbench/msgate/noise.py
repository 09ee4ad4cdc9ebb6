"""Noise channels and closed-form error estimates for the MS gate."""

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

from ..hilbert import TWO_PI, ModeGeometry

@dataclass(frozen=True)
class QuasiStaticDraw:
    """Per-shot quasi-static parameters.

    mode_shift   stretch-mode frequency offset, Hz
    rabi_frac    fractional sideband Rabi-rate offset
    """

    mode_shift: np.ndarray
    rabi_frac: np.ndarray

    def __len__(self):
        return len(self.mode_shift)


def _stratified_uniform(rng, shots):
    """One uniform per stratum of [0, 1), in random order (Latin hypercube)."""
    return (rng.permutation(shots) + rng.random(shots)) / shots


def _thermal_from_uniform(u, nbar):
    """Inverse-CDF draw of a thermal occupation number."""
    if nbar == 0:
        return np.zeros_like(u)
    q = nbar / (1.0 + nbar)
    # P(n <= k) = 1 - q^(k+1)
    return np.floor(np.log1p(-u) / np.log(q)).astype(float)


def debye_waller_shift(n, eta, nbar):
    """Fractional Rabi change on a spectator mode in Fock state n, relative to
    the thermal mean: L_n(eta^2) exp(nbar eta^2) - 1.

    For small eta this is -(n - nbar) eta^2, whose thermal r.m.s. is
    eta^2 sqrt(nbar (nbar + 1)).
    """
    x = eta * eta
    n = np.asarray(n)
    return special.eval_laguerre(n, x) * np.exp(nbar * x) - 1.0


def debye_waller_rms(eta, nbar):
    return eta * eta * np.sqrt(nbar * (nbar + 1.0))


def sample_quasistatic_noise(model, seed, shots=1, t_gate=None, stratified=True):
    """Draw per-shot (mode shift in Hz, fractional Rabi offset).

    The mode shift adds a Gaussian(0, mode_freq_rms) term to the rocking-mode
    cross-Kerr shift chi (n_x + n_y + 1) for thermal n_x, n_y. The Rabi offset
    adds Gaussian(0, rabi_frac_rms) to the Debye-Waller factor of a thermal
    COM occupation; with ``t_gate`` the COM occupation includes half of the
    heating accumulated during the gate.
    """
    rng = np.random.default_rng(seed)
    if stratified:
        uniform = lambda: _stratified_uniform(rng, shots)  # noqa: E731
    else:
        uniform = lambda: rng.random(shots)  # noqa: E731
    gauss = lambda sigma: sigma * stats.norm.ppf(uniform()) if sigma else np.zeros(shots)  # noqa: E731

    shift = gauss(model.mode_freq_rms)
    if model.chi:
        n_x = _thermal_from_uniform(uniform(), model.nbar_x)
        n_y = _thermal_from_uniform(uniform(), model.nbar_y)
        shift = shift + model.chi * (n_x + n_y + 1.0)

    rabi = gauss(model.rabi_frac_rms)
    nbar_c = model.nbar_C
    if t_gate is not None:
        nbar_c += 0.5 * model.heating_rate_C * t_gate
    if model.eta_C and nbar_c:
        n_c = _thermal_from_uniform(uniform(), nbar_c)
        rabi = rabi + debye_waller_shift(n_c, model.eta_C, nbar_c)
    return QuasiStaticDraw(np.asarray(shift, dtype=float), np.asarray(rabi, dtype=float))


def mean_mode_shift(model):
    """Expected mode shift in Hz, absorbed by calibrating delta."""
    if not model.chi:
        return 0.0
    return model.chi * (model.nbar_x + model.nbar_y + 1.0)


# scattering -----------------------------------------------------------------

def raman_error_per_probability(leakage_fraction):
    """Bell infidelity per unit per-ion Raman probability (two ions).

    An in-manifold scatter randomises one ion (fidelity 1/4 left), a leak
    removes the population entirely.
    """
    return 2.0 * (0.75 * (1.0 - leakage_fraction) + leakage_fraction)


def raman_rate_for_error(error, leakage_fraction=1.0 / 3.0):
    return error / raman_error_per_probability(leakage_fraction)


def rayleigh_flip_probability(error):
    """Per-ion phase-flip probability q with 1 - (1-q)^2 - q^2 = error."""
    if not 0 <= error < 0.5:
        raise ValueError("rayleigh_error must lie in [0, 0.5)")
    return 0.5 * (1.0 - np.sqrt(1.0 - 2.0 * error))


def scattering_kraus(model):
    """Per-ion Kraus operators on (up, down, leaked)."""
    p = model.raman_rate
    if not 0 <= p < 0.1 or model.rayleigh_error >= 0.1:
        raise ValueError("scattering probabilities per gate must be below 0.1")
    lf = model.leakage_fraction
    q = rayleigh_flip_probability(model.rayleigh_error)
    kraus = []
    no_raman = np.diag([np.sqrt(1.0 - p), np.sqrt(1.0 - p), 1.0]).astype(complex)
    zflip = np.diag([1.0, -1.0, 1.0]).astype(complex)
    kraus.append(np.sqrt(1.0 - q) * no_raman)
    if q > 0:
        kraus.append(np.sqrt(q) * zflip @ no_raman)
    if p > 0:
        for s in range(2):
            for s2 in range(2):
                k = np.zeros((3, 3), dtype=complex)
                k[s, s2] = np.sqrt(p * (1.0 - lf) / 2.0)
                kraus.append(k)
            if lf > 0:
                k = np.zeros((3, 3), dtype=complex)
                k[2, s] = np.sqrt(p * lf)
                kraus.append(k)
    return kraus


def embed_qubits(rho):
    """Two-qubit 4x4 matrix into the 9x9 two-qutrit space."""
    idx = _qubit_indices()
    out = np.zeros((9, 9), dtype=complex)
    out[np.ix_(idx, idx)] = rho
    return out


def _qubit_indices():
    return np.array([0, 1, 3, 4])


def apply_two_ion_channel(rho9, kraus):
    rho = rho9.reshape(3, 3, 3, 3)
    # ion 1
    rho = sum(np.einsum("ai,ijkl,bk->ajbl", k, rho, k.conj()) for k in kraus)
    # ion 2
    rho = sum(np.einsum("aj,ijkl,bl->iakb", k, rho, k.conj()) for k in kraus)
    return rho.reshape(9, 9)


def apply_scattering_channel(rho, model, return_full=False):
    """Raman and Rayleigh scattering on a two-qubit state.

    Returns (qubit block, leaked population); the block has trace
    1 - leaked population. With ``return_full`` the 9x9 two-qutrit matrix
    is returned in place of the block.
    """
    kraus = scattering_kraus(model)
    out = apply_two_ion_channel(embed_qubits(rho), kraus)
    idx = _qubit_indices()
    block = out[np.ix_(idx, idx)]
    leak = float(np.real(np.trace(out)) - np.real(np.trace(block)))
    if return_full:
        return out, leak
    return block, leak


def leaked_as_dark(rho9):
    """Apparent two-qubit state when a leaked ion is detected as dark (down)."""
    keep = np.diag([1.0, 1.0, 0.0]).astype(complex)
    relabel = np.zeros((3, 3), dtype=complex)
    relabel[1, 2] = 1.0
    out = apply_two_ion_channel(rho9, [keep, relabel])
    idx = _qubit_indices()
    return out[np.ix_(idx, idx)]


# phase noise ----------------------------------------------------------------

def sample_phase_kicks(model, t_gate, seed, shots):
    """Per-shot, per-ion z phases: independent diffusion plus a common
    quasi-static qubit frequency offset."""
    rng = np.random.default_rng(seed)
    kicks = np.zeros((shots, 2))
    if model.dephasing_rate:
        sigma = np.sqrt(model.dephasing_rate * t_gate)
        for j in range(2):
            kicks[:, j] = sigma * stats.norm.ppf(_stratified_uniform(rng, shots))
    if model.qubit_freq_rms:
        common = TWO_PI * model.qubit_freq_rms * t_gate * stats.norm.ppf(_stratified_uniform(rng, shots))
        kicks += common[:, None]
    return kicks


def apply_phase_kicks(rho, kicks):
    """rho[..., 4, 4] -> Z-rotated states exp(-i phi_j Z_j / 2)."""
    z = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    ph = np.exp(-0.5j * kicks @ z.T)
    return rho * ph[..., :, None] * ph.conj()[..., None, :]


def dephasing_error(dephasing_rate, t_gate):
    """Bell error from independent per-ion phase diffusion."""
    return 0.5 * (1.0 - np.exp(-dephasing_rate * t_gate))


# closed-form estimates --------------------------------------------------------

def rabi_fluctuation_error(delta_omega_frac):
    """MS error for a static fractional Rabi-rate error: 2.5 (dOmega/Omega)^2."""
    if abs(delta_omega_frac) >= 0.1:
        raise ValueError("|delta_omega_frac| must be below 0.1")
    return 2.5 * delta_omega_frac**2


def lamb_dicke_correction_error(eta, nbar):
    """Error from the Fock-state dependence of sideband Rabi rates."""
    if not 0 <= eta < 0.5:
        raise ValueError("eta must lie in [0, 0.5)")
    return np.pi**2 / 4.0 * eta**4 * nbar * (nbar + 1.0)


def heating_error(heating_rate, t_gate, loops=1):
    """Bell error from symmetric heating during a square single-loop gate.

    Coherence between the |c| = 2 and |c| = 0 branches decays with the
    phase-space excursion; the leading-order error is rate * t_gate / 2.
    """
    return 0.5 * heating_rate * t_gate / loops


def default_spectators(config, geometry=None):
    """(detuning, coupling) of the transitions the MS tones can drive off
    resonance: the carrier, detuned by omega_S + delta, and the COM sideband,
    detuned by omega_S - omega_C + delta with strength eta_C * Omega."""
    geometry = geometry or ModeGeometry()
    carrier = (geometry.omega_S + config.delta, config.omega)
    com = (geometry.omega_S - geometry.omega_C + config.delta, geometry.eta_C * config.omega)
    return [carrier, com]


def offresonant_error_estimate(envelope, spectator_detunings, rabi, t_gate=None,
                               couplings=None, jitter=16, ions=2):
    """Spectator excitation from the envelope spectrum.

    Each spectator is a two-level system driven by coupling * g(t) *
    cos(detuning * t); to first order its excitation is
    coupling^2 |int g(t) cos(detuning t) dt|^2. The oscillating dependence on
    the exact duration is averaged over ``jitter`` durations spanning one
    period of the slowest spectator. Summed over spectators and ions.
    """
    from .config import DEFAULT_T_GATE

    t_gate = DEFAULT_T_GATE if t_gate is None else t_gate
    detunings = np.atleast_1d(np.asarray(spectator_detunings, dtype=float))
    if couplings is None:
        couplings = np.full(len(detunings), float(rabi))
    couplings = np.atleast_1d(np.asarray(couplings, dtype=float))
    if rabi == 0 or len(detunings) == 0:
        return 0.0
    period = TWO_PI / np.min(np.abs(detunings))
    total = 0.0
    for det, cpl in zip(detunings, couplings):
        acc = 0.0
        for k in range(jitter):
            t_end = t_gate + period * k / jitter
            acc += cpl**2 * abs(_cos_transform(envelope, t_end, det)) ** 2
        total += acc / jitter
    return float(ions * total)


def _cos_transform(envelope, t_gate, det, nodes=48):
    from numpy.polynomial import legendre

    x, w = legendre.leggauss(nodes)
    breaks = envelope.breakpoints(t_gate)
    n_sub = max(1, int(np.ceil(abs(det) * t_gate / np.pi)))
    edges = []
    for a, b in zip(breaks[:-1], breaks[1:]):
        k = max(1, int(np.ceil(n_sub * (b - a) / t_gate)))
        edges.extend(np.linspace(a, b, k + 1)[:-1])
    edges.append(breaks[-1])
    edges = np.asarray(edges)
    a, b = edges[:-1, None], edges[1:, None]
    t = 0.5 * (b - a) * (x + 1.0) + a
    return float(np.sum(0.5 * (b - a) * w * envelope(t, t_gate) * np.cos(det * t)))
