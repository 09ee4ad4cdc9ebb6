"""Average gate fidelity of a two-qubit channel from 36 Pauli-eigenstate inputs.

F_avg = 6/5 S+ + 3/5 S- - 1/5, where S+ averages the overlap of the noisy
output with the ideal output over all product inputs |U1 U2>, and S- uses the
orthogonal states |U1' U2'> in place of |U1 U2> with the same noisy output.
"""

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

KRAUS_TOL = 1e-12

_S = 1.0 / np.sqrt(2.0)
# +z, -z, +x, -x, +y, -y; minus states orthogonal to their partners
PAULI_STATES = (
    np.array([1, 0], dtype=complex),
    np.array([0, 1], dtype=complex),
    np.array([_S, _S], dtype=complex),
    np.array([_S, -_S], dtype=complex),
    np.array([_S, 1j * _S], dtype=complex),
    np.array([_S, -1j * _S], dtype=complex),
)
ORTHOGONAL = (1, 0, 3, 2, 5, 4)
SWAP_GATE = np.eye(4, dtype=complex)[[0, 2, 1, 3]]


def product_inputs():
    """The 36 (i, j) index pairs in row-major order."""
    return [(i, j) for i in range(6) for j in range(6)]


def product_state(i, j, states=PAULI_STATES):
    return np.kron(states[i], states[j])


@dataclass(frozen=True)
class QubitChannel:
    """CPTP map on two qubits, rho -> sum_k K rho K^dag."""

    kraus: tuple

    def __post_init__(self):
        ks = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not ks or any(k.shape != (4, 4) for k in ks):
            raise ValueError("kraus operators must be a non-empty list of 4x4 matrices")
        object.__setattr__(self, "kraus", ks)
        dev = np.max(np.abs(sum(k.conj().T @ k for k in ks) - np.eye(4)))
        if dev > KRAUS_TOL:
            raise ValueError(f"not trace preserving: |sum K^dag K - I| = {dev:.2e}")

    def __call__(self, rho):
        return sum(k @ rho @ k.conj().T for k in self.kraus)

    @classmethod
    def unitary(cls, u):
        return cls((u,))

    @classmethod
    def from_choi(cls, choi, tol=1e-13):
        """Kraus form of a Choi matrix J = sum_ij |i><j| (x) L(|i><j|)."""
        choi = 0.5 * (choi + choi.conj().T)
        w, v = np.linalg.eigh(choi)
        ks = [np.sqrt(x) * v[:, a].reshape(4, 4).T for a, x in enumerate(w) if x > tol]
        # restore exact trace preservation lost to eigen-truncation
        m = sum(k.conj().T @ k for k in ks)
        w2, v2 = np.linalg.eigh(m)
        fix = v2 @ np.diag(w2 ** -0.5) @ v2.conj().T
        return cls(tuple(k @ fix for k in ks))

    def then(self, other):
        """This channel followed by ``other``."""
        return QubitChannel(tuple(b @ a for a in self.kraus for b in other.kraus))

    def conjugated(self, w):
        """W L(W^dag . W) W^dag."""
        return QubitChannel(tuple(w @ k @ w.conj().T for k in self.kraus))


def depolarizing(p):
    """rho -> (1 - p) rho + p I/4."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    paulis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, -1j], [1j, 0]]), np.diag([1.0, -1.0])]
    ks = [np.sqrt(1.0 - 15.0 * p / 16.0) * np.eye(4, dtype=complex)]
    ks += [np.sqrt(p / 16.0) * np.kron(a, b) for ia, a in enumerate(paulis) for ib, b in enumerate(paulis)
           if ia or ib]
    return QubitChannel(tuple(ks))


def random_channel(rng, n_kraus=4):
    """Random CPTP map from a Haar-like isometry."""
    g = rng.normal(size=(4 * n_kraus, 4)) + 1j * rng.normal(size=(4 * n_kraus, 4))
    q, _ = np.linalg.qr(g)
    return QubitChannel(tuple(q[4 * a:4 * a + 4] for a in range(n_kraus)))


def random_unitary(rng, d=4):
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(g)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def _outputs(channel):
    """Noisy output for each of the 36 inputs. ``channel`` is a QubitChannel
    or a callable (rho_in, index) -> rho_out."""
    out = []
    for n, (i, j) in enumerate(product_inputs()):
        psi = product_state(i, j)
        rho = np.outer(psi, psi.conj())
        out.append(channel(rho) if isinstance(channel, QubitChannel) else channel(rho, n))
    return out


def s_terms(channel, ideal, outputs=None):
    """(S+, S-) with compensated summation over the 36 inputs."""
    outputs = _outputs(channel) if outputs is None else outputs
    plus, minus = [], []
    for (i, j), rho in zip(product_inputs(), outputs):
        back = ideal.conj().T @ rho @ ideal
        u = product_state(i, j)
        v = product_state(ORTHOGONAL[i], ORTHOGONAL[j])
        plus.append(float(np.real(u.conj() @ back @ u)))
        minus.append(float(np.real(v.conj() @ back @ v)))
    return math.fsum(plus) / 36.0, math.fsum(minus) / 36.0


def s_plus(channel, ideal):
    return s_terms(channel, ideal)[0]


def s_minus(channel, ideal):
    return s_terms(channel, ideal)[1]


def avg_fidelity(channel, ideal, outputs=None):
    sp, sm = s_terms(channel, ideal, outputs)
    return 1.2 * sp + 0.6 * sm - 0.2


def choi_matrix(channel):
    """J = sum_ij |i><j| (x) L(|i><j|), built from the channel's action on
    the matrix-unit basis."""
    j = np.zeros((16, 16), dtype=complex)
    for a in range(4):
        for b in range(4):
            e = np.zeros((4, 4), dtype=complex)
            e[a, b] = 1.0
            j += np.kron(e, channel(e))
    return j


def process_fidelity(channel, ideal):
    """<<U|J|U>> / d^2 with |U>> = sum_i |i> (x) U|i>."""
    vec = np.concatenate([ideal[:, i] for i in range(4)])
    j = choi_matrix(channel)
    return float(np.real(vec.conj() @ j @ vec)) / 16.0


def avg_fidelity_oracle(channel, ideal):
    return (4.0 * process_fidelity(channel, ideal) + 1.0) / 5.0


# MS gate channel -------------------------------------------------------------

_TOMO_STATES = (0, 1, 2, 4)  # +z, -z, +x, +y span the 2x2 operators


def channel_from_map(apply):
    """QubitChannel of a linear map known only on density matrices, via
    linear inversion on 16 product states."""
    inputs, outputs = [], []
    for i in _TOMO_STATES:
        for j in _TOMO_STATES:
            psi = product_state(i, j)
            rho = np.outer(psi, psi.conj())
            inputs.append(rho.reshape(-1))
            outputs.append(apply(rho).reshape(-1))
    # superoperator S with vec(L(rho)) = S vec(rho)
    s = np.linalg.solve(np.array(inputs), np.array(outputs)).T
    choi = np.zeros((16, 16), dtype=complex)
    for a in range(4):
        for b in range(4):
            e = np.zeros((4, 4), dtype=complex)
            e[a, b] = 1.0
            choi += np.kron(e, (s @ e.reshape(-1)).reshape(4, 4))
    return QubitChannel.from_choi(choi)


def _ms_noisy_output(config, model, shots, seed):
    from .msgate.montecarlo import simulate_shots
    from .msgate.noise import apply_scattering_channel, leaked_as_dark

    def apply(rho):
        mean, _ = simulate_shots(config, model, shots, seed, initial=rho)
        full, _ = apply_scattering_channel(mean, model, return_full=True)
        return leaked_as_dark(full)

    return apply


def ms_ideal(config):
    from .msgate.propagate import ms_spin_unitary

    return ms_spin_unitary(config)


def ms_channel(config, model, shots=20000, seed=0):
    """One noise realisation (shared draws) of the MS gate as a channel.
    Leaked ions are read out as dark."""
    return channel_from_map(_ms_noisy_output(config, model, shots, seed))


def ms_avg_fidelity(config, model, shots=20000, seed=0, mode="independent"):
    """(F_avg, S+, S-) for the noisy MS gate against the ideal one.

    ``mode`` "independent" draws fresh noise for every input state;
    "shared" reuses one realisation for all 36.
    """
    ideal = ms_ideal(config)
    if mode == "shared":
        chan = ms_channel(config, model, shots, seed)
        sp, sm = s_terms(chan, ideal)
    elif mode == "independent":
        seeds = np.random.SeedSequence(seed).generate_state(36)
        outputs = [_ms_noisy_output(config, model, shots, int(s))(rho)
                   for s, rho in zip(seeds, _outputs(lambda r, n: r))]
        sp, sm = s_terms(None, ideal, outputs)
    else:
        raise ValueError("mode must be 'independent' or 'shared'")
    return 1.2 * sp + 0.6 * sm - 0.2, sp, sm


# structured-text I/O ----------------------------------------------------------

def read_channel(path):
    """Kraus list from YAML: ``kraus: [{real: 4x4, imag: 4x4}, ...]``."""
    d = yaml.safe_load(Path(path).read_text())
    if not isinstance(d, dict) or "kraus" not in d:
        raise ValueError(f"{path}: expected a mapping with a 'kraus' list")
    ks = [np.array(k["real"], dtype=float) + 1j * np.array(k.get("imag", np.zeros((4, 4))), dtype=float)
          for k in d["kraus"]]
    return QubitChannel(tuple(ks))


def write_channel(path, channel):
    ks = [{"real": np.round(k.real, 15).tolist(), "imag": np.round(k.imag, 15).tolist()} for k in channel.kraus]
    Path(path).write_text(yaml.safe_dump({"kraus": ks}, sort_keys=False))


def fidelity_report(channel, ideal):
    sp, sm = s_terms(channel, ideal)
    return {"s_plus": sp, "s_minus": sm, "f_avg": 1.2 * sp + 0.6 * sm - 0.2}
