"""State and operator algebra for two qubits and one truncated motional mode.

Conventions used throughout the package:

* single-qubit basis ordering is (|up>, |down>); |up> is the bright state,
  ``SIGMA_PLUS = |up><down|``;
* two-qubit ordering is |up,up>, |up,down>, |down,up>, |down,down>;
* composite spin-motion states are ordered spin (major) x Fock (minor).
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import special

TWO_PI = 2.0 * np.pi

ID2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = SIGMA_PLUS.T.copy()

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)
UPUP = np.kron(UP, UP)
DOWNDOWN = np.kron(DOWN, DOWN)
PHI_PLUS = (UPUP + DOWNDOWN) / np.sqrt(2.0)

# Phases of the five-pulse composite pi transfer, see composite_pi_transfer.
COMPOSITE_PHASES_LISTED = (0.0, np.pi / 3, np.pi / 6, np.pi / 3, 0.0)
COMPOSITE_PHASES = tuple(2.0 * p for p in COMPOSITE_PHASES_LISTED)

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = -1e-9


class TruncationError(RuntimeError):
    """Population reached the top of the truncated Fock space."""


def kron(*ops):
    out = np.array([[1.0 + 0j]])
    for op in ops:
        out = np.kron(out, op)
    return out


def destroy(n_max):
    """Truncated annihilation operator on Fock states 0..n_max."""
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def number_op(n_max):
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(complex)


def thermal_populations(nbar, n_max):
    """Thermal occupation probabilities p(n) for n = 0..n_max (not renormalized)."""
    n = np.arange(n_max + 1)
    if nbar == 0:
        p = np.zeros(n_max + 1)
        p[0] = 1.0
        return p
    return nbar**n / (1.0 + nbar) ** (n + 1)


def thermal_tail(nbar, n_max):
    """Thermal probability mass above n_max, i.e. (nbar/(1+nbar))**(n_max+1)."""
    if nbar == 0:
        return 0.0
    return (nbar / (1.0 + nbar)) ** (n_max + 1)


def suggest_n_max(nbar, threshold=1e-8, displacement=1.0):
    """Smallest truncation whose thermal tail, padded for a coherent
    displacement of the given size, stays below ``threshold``."""
    n = 1
    while True:
        if thermal_tail(nbar, n) < threshold:
            break
        n += 1
    # coherent displacement |beta| spreads population over ~|beta|^2 +- few sqrt
    pad = int(np.ceil(displacement**2 + 6.0 * displacement + 4.0))
    return n + pad


def is_unitary(u, tol=1e-10):
    u = np.asarray(u)
    return np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))) <= tol


def equal_up_to_phase(u, v, tol=1e-9):
    """Distance between two unitaries after removing the best global phase."""
    u = np.asarray(u)
    v = np.asarray(v)
    overlap = np.trace(u.conj().T @ v)
    if abs(overlap) < 1e-300:
        return False
    phase = overlap / abs(overlap)
    return np.max(np.abs(u * phase - v)) <= tol


def gate_distance(u, v):
    overlap = np.trace(np.asarray(u).conj().T @ np.asarray(v))
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    return float(np.max(np.abs(np.asarray(u) * phase - np.asarray(v))))


def check_density_matrix(rho, label="density matrix", trace=1.0):
    """Raise ValueError unless rho is Hermitian, has the given trace and is PSD."""
    rho = np.asarray(rho)
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > HERMITIAN_TOL:
        raise ValueError(f"{label} not Hermitian (deviation {herm:.3e})")
    tr = np.trace(rho).real
    if trace is not None and abs(tr - trace) > TRACE_TOL:
        raise ValueError(f"{label} trace {tr!r} differs from {trace}")
    evmin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min()
    if evmin < PSD_TOL:
        raise ValueError(f"{label} has negative eigenvalue {evmin:.3e}")


def ptrace_motion(rho, n_max):
    """Trace out the motional mode of a (4*(n_max+1))**2 density matrix."""
    d = n_max + 1
    return np.einsum("anbn->ab", rho.reshape(4, d, 4, d))


def ptrace_spin(rho, n_max):
    d = n_max + 1
    return np.einsum("aman->mn", rho.reshape(4, d, 4, d))


def purity(rho):
    return float(np.real(np.trace(rho @ rho)))


def von_neumann_entropy(rho):
    ev = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    ev = ev[ev > 1e-15]
    return float(-np.sum(ev * np.log(ev)))


@dataclass(frozen=True)
class SpinMotionState:
    """Density matrix on (qubit x qubit) x Fock(0..n_max)."""

    rho: np.ndarray
    n_max: int
    dim_spin: int = 4

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        d = self.dim_spin * (self.n_max + 1)
        if rho.shape != (d, d):
            raise ValueError(f"rho has shape {rho.shape}, expected {(d, d)}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @classmethod
    def from_spin_ket(cls, spin_ket, n_max, nbar=0.0, fock=None):
        """Product of a pure spin state with a thermal (or Fock) motional state."""
        spin = np.outer(spin_ket, np.conj(spin_ket))
        if fock is not None:
            motion = np.zeros((n_max + 1, n_max + 1), dtype=complex)
            motion[fock, fock] = 1.0
        else:
            p = thermal_populations(nbar, n_max)
            motion = np.diag(p / p.sum()).astype(complex)
        return cls(np.kron(spin, motion), n_max)

    @classmethod
    def from_ket(cls, ket, n_max):
        ket = np.asarray(ket, dtype=complex)
        return cls(np.outer(ket, ket.conj()), n_max)

    @property
    def dim(self):
        return self.rho.shape[0]

    def spin(self):
        return ptrace_motion(self.rho, self.n_max)

    def motion(self):
        return ptrace_spin(self.rho, self.n_max)

    def fock_populations(self):
        return np.real(np.diag(self.motion()))

    def trailing_population(self):
        return float(self.fock_populations()[-1])

    def validate(self):
        check_density_matrix(self.rho, "SpinMotionState")
        return self


@dataclass(frozen=True)
class PulseSpec:
    """Rotation by ``theta`` about the equatorial axis at azimuth ``phi``.

    Both angles are reduced to [0, 2*pi) on construction; a 2*pi shift of
    theta only changes the global phase.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", float(np.mod(self.theta, TWO_PI)))
        object.__setattr__(self, "phi", float(np.mod(self.phi, TWO_PI)))


@dataclass(frozen=True)
class ModeGeometry:
    """Axial-mode parameters of the two-ion crystal."""

    omega_z: float = TWO_PI * 3.58e6
    eta_single: float = 0.25
    eta_S: float = 0.19
    eta_C: float = 0.25 / np.sqrt(2.0)
    mod_index: float = 2.9

    def __post_init__(self):
        if min(self.eta_single, self.eta_S, self.eta_C) <= 0:
            raise ValueError("Lamb-Dicke parameters must be positive")
        if not self.eta_S < self.eta_single:
            raise ValueError("eta_S must be smaller than the single-ion eta")
        if self.mod_index < 0:
            raise ValueError("mod_index must be non-negative")

    @property
    def omega_C(self):
        return self.omega_z

    @property
    def omega_S(self):
        return np.sqrt(3.0) * self.omega_z


def equatorial(phi):
    """cos(phi) sigma_x + sin(phi) sigma_y."""
    return np.cos(phi) * SIGMA_X + np.sin(phi) * SIGMA_Y


def pauli_rotation(p, phi=None):
    """exp(-i theta/2 (cos phi sigma_x + sin phi sigma_y)).

    Accepts a PulseSpec or a bare (theta, phi) pair.
    """
    if not isinstance(p, PulseSpec):
        p = PulseSpec(p, 0.0 if phi is None else phi)
    c, s = np.cos(p.theta / 2), np.sin(p.theta / 2)
    return c * ID2 - 1j * s * equatorial(p.phi)


def global_rotation(p, phi=None):
    """The same rotation applied to both qubits."""
    u = pauli_rotation(p, phi)
    return np.kron(u, u)


def detuned_pulse(theta, phi, amplitude_error=0.0, detuning_error=0.0, rabi=1.0):
    """Square pulse of nominal area ``theta`` with amplitude and detuning errors.

    H = rabi (1 + amplitude_error)/2 * sigma_phi + detuning_error/2 * sigma_z,
    applied for theta / rabi.
    """
    if rabi <= 0:
        raise ValueError("rabi must be positive")
    duration = theta / rabi
    a = 0.5 * rabi * (1.0 + amplitude_error)
    b = 0.5 * detuning_error
    h = a * equatorial(phi) + b * SIGMA_Z
    w = np.hypot(a, b)
    if w == 0:
        return ID2.copy()
    # exp(-i t (w n.sigma)) = cos(wt) - i sin(wt) n.sigma
    return np.cos(w * duration) * ID2 - 1j * np.sin(w * duration) * h / w


def composite_pi_transfer(amplitude_error=0.0, detuning_error=0.0, rabi=1.0,
                          phases=COMPOSITE_PHASES):
    """Five pi pulses at the given phases, each carrying the same errors.

    The default phase set (0, 2pi/3, pi/3, 2pi/3, 0) cancels amplitude errors
    to high order. ``COMPOSITE_PHASES_LISTED`` holds the half-angle variant.
    """
    if rabi <= 0:
        raise ValueError("rabi must be positive")
    u = ID2.copy()
    for phi in phases:
        u = detuned_pulse(np.pi, phi, amplitude_error, detuning_error, rabi) @ u
    return u


def transfer_infidelity(u):
    """1 - |<down|U|up>|^2 for a population transfer unitary."""
    return float(1.0 - abs(u[1, 0]) ** 2)


def two_way_transfer_error(amplitude_error=0.0, detuning_error=0.0, rabi=1.0,
                           phases=COMPOSITE_PHASES):
    """Population loss after transferring out and back with the same composite pulse."""
    u = composite_pi_transfer(amplitude_error, detuning_error, rabi, phases)
    start = np.array([1, 0], dtype=complex)
    # the return leg must bring |down> back to |up>
    back = u @ (np.array([0, 1]) * (u @ start)[1])
    return float(1.0 - abs(back[0]) ** 2)


def spin_echo_sequence(phase_error=0.0):
    """(pi/2, 0), (pi, 0), (pi/2, phi3) echo unitaries for phi3 = pi/2 and 3pi/2.

    ``phase_error`` is a static z phase accumulated in each free-evolution gap.
    Returns (U_r3, U_r4).
    """
    gap = np.diag([np.exp(-0.5j * phase_error), np.exp(0.5j * phase_error)])
    out = []
    for last in (np.pi / 2, 3 * np.pi / 2):
        u = pauli_rotation(np.pi / 2, 0.0)
        u = pauli_rotation(np.pi, 0.0) @ gap @ u
        u = pauli_rotation(np.pi / 2, last) @ gap @ u
        out.append(u)
    return tuple(out)


def sideband_matrix_element(n, m, eta, n_max=None):
    """<n| exp(i eta (b + b^dag)) |m>, exact, via associated Laguerre polynomials."""
    n = int(n)
    m = int(m)
    if n < 0 or m < 0 or (n_max is not None and (n > n_max or m > n_max)):
        raise IndexError(f"Fock index out of range: n={n}, m={m}, n_max={n_max}")
    if eta < 0:
        raise ValueError("eta must be non-negative")
    lo, hi = min(n, m), max(n, m)
    x = eta * eta
    # exp(i eta X) = D(i eta); both off-diagonal directions pick up (i eta)^|n-m|
    log_ratio = 0.5 * (special.gammaln(lo + 1) - special.gammaln(hi + 1))
    lag = special.eval_genlaguerre(lo, hi - lo, x)
    mag = np.exp(log_ratio - 0.5 * x) * lag
    if hi > lo:
        mag *= eta ** (hi - lo)
    return complex((1j) ** (hi - lo) * mag)


def sideband_operator(eta, n_max):
    """Full truncated matrix of exp(i eta (b + b^dag))."""
    d = n_max + 1
    out = np.empty((d, d), dtype=complex)
    for n in range(d):
        for m in range(n, d):
            v = sideband_matrix_element(n, m, eta)
            out[n, m] = v
            out[m, n] = v
    return out


def micromotion_factor(order, mod_index):
    """Bessel J_order(mod_index): Rabi-rate scaling on a micromotion sideband."""
    if order < 0:
        raise ValueError("order must be non-negative")
    return float(special.jv(order, mod_index))


def displacement_operator(alpha, n_max):
    """Fock-basis block 0..n_max of the untruncated displacement D(alpha).

    Each element is exact, so the block is only approximately unitary when
    the displaced states reach the truncation edge.
    """
    d = n_max + 1
    x = abs(alpha) ** 2
    out = np.zeros((d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            lo, hi = min(m, n), max(m, n)
            pref = np.exp(0.5 * (special.gammaln(lo + 1) - special.gammaln(hi + 1)) - 0.5 * x)
            z = alpha if m >= n else -np.conj(alpha)
            out[m, n] = pref * z ** (hi - lo) * special.eval_genlaguerre(lo, hi - lo, x)
    return out
