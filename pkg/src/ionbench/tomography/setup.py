"""Measurement model: analysis pulses, subspace POVMs and reference populations."""

from dataclasses import dataclass, field

import numpy as np

from ..hilbert import PHI_PLUS, PulseSpec, pauli_rotation

N_SETTINGS = 9


def analysis_pulses():
    """Identity followed by global (pi/2, n pi/4) pulses, n = 0..7."""
    return (None,) + tuple(PulseSpec(np.pi / 2, n * np.pi / 4) for n in range(8))


def one_ion_bright_pairs(p_bright):
    """(both, one, none) populations for two independent ions each bright with p."""
    p = p_bright
    return np.array([p * p, 2 * p * (1 - p), (1 - p) ** 2])


def reference_matrix(xi=0.0):
    """Rows: r1 (both pumped bright), r2 (both shelved dark), r3 and r4
    (each ion in an equal superposition, bright population 0.5 + xi)."""
    half = one_ion_bright_pairs(0.5 + xi)
    return np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], half, half])


def _ion_unitary(pulse, levels):
    u = np.eye(levels, dtype=complex)
    if pulse is not None:
        u[:2, :2] = pauli_rotation(pulse)
    return u


def subspace_projectors(bright):
    """Diagonal (both, one, none) bright-subspace operators for per-level
    bright probabilities ``bright`` (same for both ions)."""
    v = np.asarray(bright, dtype=float)
    d = 1.0 - v
    both = np.kron(v, v)
    one = np.kron(v, d) + np.kron(d, v)
    none = np.kron(d, d)
    return np.array([np.diag(both), np.diag(one), np.diag(none)]).astype(complex)


@dataclass(frozen=True)
class TomographySetup:
    """Reference populations ``a`` (4x3) and the POVM induced by the analysis
    pulses. ``bright`` gives the probability that an ion in each level is
    detected bright; the default is a qubit with |up> bright."""

    a: np.ndarray = field(default_factory=reference_matrix)
    pulses: tuple = field(default_factory=analysis_pulses)
    bright: tuple = (1.0, 0.0)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        if a.shape != (4, 3) or np.max(np.abs(a.sum(axis=1) - 1.0)) > 1e-12 or np.any(a < 0):
            raise ValueError("a must be 4x3 with rows on the simplex")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "bright", tuple(float(b) for b in self.bright))
        povm = self._build_povm()
        povm.setflags(write=False)
        object.__setattr__(self, "povm", povm)

    @property
    def levels(self):
        return len(self.bright)

    @property
    def dim(self):
        return self.levels**2

    @property
    def n_settings(self):
        return len(self.pulses)

    def unitary(self, k):
        u = _ion_unitary(self.pulses[k], self.levels)
        return np.kron(u, u)

    def _build_povm(self):
        proj = subspace_projectors(self.bright)
        out = np.empty((self.n_settings, 3, self.dim, self.dim), dtype=complex)
        for k in range(self.n_settings):
            u = self.unitary(k)
            for j in range(3):
                out[k, j] = u.conj().T @ proj[j] @ u
        return out

    def b_map(self, rho):
        """Subspace populations b[k, j] = Tr(E_kj rho)."""
        return np.real(np.einsum("kjab,ba->kj", self.povm, rho))

    def with_a(self, a):
        return TomographySetup(a, self.pulses, self.bright)


def werner_state(fidelity, target=PHI_PLUS):
    """F |t><t| + (1 - F)/3 (I - |t><t|)."""
    proj = np.outer(target, np.conj(target))
    return fidelity * proj + (1.0 - fidelity) / 3.0 * (np.eye(4) - proj)


def bell_fidelity_fixed(rho, target=PHI_PLUS):
    return float(np.real(np.conj(target) @ rho @ target))
