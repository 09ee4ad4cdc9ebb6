"""MS gate propagators: numeric time-ordered integration, closed-form oracle,
and the branch-resolved solution used by the Monte Carlo engine.

In the interaction picture the spin-dependent force reads

    H(t) = F g(t) sum_j S_j (b exp(i(delta t + pm_j)) + h.c.),
    S_j  = sigma_+ exp(i ps_j) + h.c.,

with F = eta_S Omega / 2, ps_j = (phi_jb + phi_jr)/2 and pm_j = (phi_jr - phi_jb)/2.
S_1 and S_2 commute, so in their joint eigenbasis (branches with eigenvalues
s_j = +-1) each block is a driven oscillator H_b = f_b b^dag + f_b^* b with
f_b = F g(t) c_b exp(-i delta t) and c_b = sum_j s_j exp(-i pm_j).
"""

from dataclasses import replace

import numpy as np
from numpy.polynomial import legendre

from ..hilbert import (
    SpinMotionState,
    TruncationError,
    UPUP,
    destroy,
    displacement_operator,
    pauli_rotation,
    ptrace_motion,
    sideband_operator,
)

BRANCH_SIGNS = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
TRAILING_THRESHOLD = 1e-8


def spin_axis_basis(spin_phases):
    """Columns are joint eigenvectors of (S_1, S_2), ordered as BRANCH_SIGNS."""
    cols = []
    for s1, s2 in BRANCH_SIGNS:
        v1 = np.array([1.0, s1 * np.exp(-1j * spin_phases[0])]) / np.sqrt(2.0)
        v2 = np.array([1.0, s2 * np.exp(-1j * spin_phases[1])]) / np.sqrt(2.0)
        cols.append(np.kron(v1, v2))
    return np.array(cols).T


def branch_coefficients(motion_phases):
    return BRANCH_SIGNS @ np.exp(-1j * np.asarray(motion_phases))


class EnvelopeQuadrature:
    """Gauss-Legendre panels over [0, t_final] for the envelope integrals

        U(t) = int_0^t g(s) exp(-i delta s) ds
        J    = Im int_0^T u(t)^* U(t) dt       (geometric phase per F^2 |c|^2)
        K    = int_0^T |U(t)|^2 dt             (phase-space excursion)

    vectorised over an array of detunings.
    """

    def __init__(self, envelope, t_gate, loops=1, t_final=None, nodes=20):
        self.envelope = envelope
        self.t_gate = t_gate
        t_final = t_gate if t_final is None else t_final
        breaks = envelope.breakpoints(t_gate)
        breaks = np.unique(np.clip(breaks, 0, t_final))
        # split long panels so each spans at most a quarter of a loop
        pieces = []
        for a, b in zip(breaks[:-1], breaks[1:]):
            n_sub = max(1, int(np.ceil((b - a) * 4 * loops / t_gate)))
            edges = np.linspace(a, b, n_sub + 1)
            pieces.extend(zip(edges[:-1], edges[1:]))
        x, w = legendre.leggauss(nodes)
        lmat = _legendre_integration_matrix(x)
        n_tot = nodes * len(pieces)
        self.t = np.empty(n_tot)
        self.w = np.empty(n_tot)
        self.cum = np.zeros((n_tot, n_tot))
        for p, (a, b) in enumerate(pieces):
            half = 0.5 * (b - a)
            sl = slice(p * nodes, (p + 1) * nodes)
            self.t[sl] = a + half * (x + 1.0)
            self.w[sl] = half * w
            self.cum[sl, : p * nodes] = self.w[: p * nodes]
            self.cum[sl, sl] = half * lmat
        self.g = envelope(self.t, t_gate)

    def integrand(self, deltas):
        deltas = np.atleast_1d(np.asarray(deltas, dtype=float))
        return self.g * np.exp(-1j * np.outer(deltas, self.t))

    def displacement_integral(self, deltas):
        return self.integrand(deltas) @ self.w

    def integrals(self, deltas):
        """Return (U(T), J, K) arrays for each detuning."""
        u = self.integrand(deltas)
        cum = u @ self.cum.T
        u_end = u @ self.w
        j = np.imag((np.conj(u) * cum) @ self.w)
        k = (np.abs(cum) ** 2) @ self.w
        return u_end, j, k

    def phase_integral(self, deltas):
        return self.integrals(deltas)[1]


def _legendre_integration_matrix(x):
    """L[k, l] = int_{-1}^{x_k} ell_l(s) ds for the Lagrange basis on nodes x."""
    n = len(x)
    inv_v = np.linalg.inv(legendre.legvander(x, n - 1))
    out = np.empty((n, n))
    for col in range(n):
        coeffs = legendre.legint(inv_v[:, col], lbnd=-1.0)
        out[:, col] = legendre.legval(x, coeffs)
    return out


def square_integrals(delta, t):
    """Closed forms of (U(t), J(t), K(t)) for a unit square envelope."""
    delta = np.asarray(delta, dtype=float)
    u_end = (1.0 - np.exp(-1j * delta * t)) / (1j * delta)
    j = t / delta - np.sin(delta * t) / delta**2
    k = (2.0 * t - 2.0 * np.sin(delta * t) / delta) / delta**2
    return u_end, j, k


def branch_solution(config, delta_shift=0.0, rabi_scale=1.0, t_final=None, quad=None):
    """Per-branch displacement beta_b and geometric phase theta_b.

    ``delta_shift`` (mode-frequency offset, rad/s) and ``rabi_scale`` may be
    arrays of per-shot values; outputs then have a leading shot axis.
    Returns (beta, theta, excursion) with excursion[..., b, b'] the integral
    of |beta_b(t) - beta_b'(t)|^2 over the pulse.
    """
    t_final = config.t_gate if t_final is None else t_final
    deltas = config.delta - np.atleast_1d(np.asarray(delta_shift, dtype=float))
    force = config.coupling * np.atleast_1d(np.asarray(rabi_scale, dtype=float))
    if config.envelope.is_square:
        u_end, j, k = square_integrals(deltas, t_final)
    else:
        if quad is None:
            quad = EnvelopeQuadrature(config.envelope, config.t_gate, config.loops, t_final)
        u_end, j, k = quad.integrals(deltas)
    c = branch_coefficients(config.motion_phases)
    beta = -1j * (force * u_end)[:, None] * c[None, :]
    theta = -(force**2 * j)[:, None] * np.abs(c[None, :]) ** 2
    dc = np.abs(c[:, None] - c[None, :]) ** 2
    excursion = (force**2 * k)[:, None, None] * dc[None, :, :]
    scalar = np.ndim(delta_shift) == 0 and np.ndim(rabi_scale) == 0
    if scalar:
        return beta[0], theta[0], excursion[0]
    return beta, theta, excursion


def evolve_spin_density(config, rho_spin, nbar=0.0, delta_shift=0.0, rabi_scale=1.0,
                        heating_rate=0.0, t_final=None, quad=None):
    """Reduced two-qubit state after the gate for a thermal initial mode.

    Exact for the Lamb-Dicke Hamiltonian: coherences between branches b, b'
    carry exp(i(theta_b - theta_b')) times the thermal overlap of the two
    displaced motional states, times exp(-heating_rate * excursion) for
    symmetric heating at ``heating_rate`` quanta/s.
    """
    beta, theta, exc = branch_solution(config, delta_shift, rabi_scale, t_final, quad)
    w = spin_axis_basis(config.spin_phases)
    rho_b = w.conj().T @ rho_spin @ w
    db = beta[..., :, None] - beta[..., None, :]
    overlap = np.exp(
        1j * np.imag(np.conj(beta[..., None, :]) * beta[..., :, None])
        - np.abs(db) ** 2 * (nbar + 0.5)
        - heating_rate * exc
    )
    phase = np.exp(1j * (theta[..., :, None] - theta[..., None, :]))
    out = rho_b * phase * overlap
    return w @ out @ w.conj().T


def ms_spin_unitary(config, tol=1e-6):
    """Spin-only MS unitary for a closed loop (all displacements return to 0)."""
    beta, theta, _ = branch_solution(config)
    if np.max(np.abs(beta)) > tol:
        raise ValueError(f"gate does not close: max |beta| = {np.max(np.abs(beta)):.3e}")
    w = spin_axis_basis(config.spin_phases)
    return w @ np.diag(np.exp(1j * theta)) @ w.conj().T


def _full_unitary(config, branch_unitaries):
    w = spin_axis_basis(config.spin_phases)
    d = branch_unitaries[0].shape[0]
    full = np.zeros((4 * d, 4 * d), dtype=complex)
    for b, ub in enumerate(branch_unitaries):
        proj = np.outer(w[:, b], w[:, b].conj())
        full += np.kron(proj, ub)
    return full


def _check_trailing(state):
    tail = state.trailing_population()
    if tail > TRAILING_THRESHOLD:
        raise TruncationError(
            f"population {tail:.2e} in Fock level n_max={state.n_max}; increase n_max"
        )


def ms_propagate_analytic(config, initial, t_final=None):
    """Closed-form propagator (square envelope, Lamb-Dicke Hamiltonian)."""
    if not config.envelope.is_square:
        raise ValueError("analytic propagator supports square envelopes only")
    _check_trailing(initial)
    beta, theta, _ = branch_solution(config, t_final=t_final)
    units = [np.exp(1j * theta[b]) * displacement_operator(beta[b], initial.n_max)
             for b in range(4)]
    u = _full_unitary(config, units)
    return SpinMotionState(u @ initial.rho @ u.conj().T, initial.n_max)


# fourth-order commutator-free exponential integrator
_CF4_NODES = (0.5 - np.sqrt(3.0) / 6.0, 0.5 + np.sqrt(3.0) / 6.0)
_CF4_A = 0.25 + np.sqrt(3.0) / 6.0
_CF4_B = 0.25 - np.sqrt(3.0) / 6.0


class _BranchGenerator:
    """exp(-i (a B^dag + a^* B)) for a fixed ladder-like operator B,
    evaluated for an array of complex amplitudes ``a``."""

    def __init__(self, lowering):
        self.lowering = lowering
        d = lowering.shape[0]
        self.is_boson = np.allclose(lowering, destroy(d - 1))
        if self.is_boson:
            x = lowering + lowering.conj().T
            self.x_eval, self.x_vec = np.linalg.eigh(x)
            self.n = np.arange(d)

    def expm(self, a):
        a = np.asarray(a, dtype=complex)
        if self.is_boson:
            # the phase of a is a rotation e^{i chi n} of the real case
            r = np.exp(1j * np.angle(a)[..., None] * self.n)
            ph = np.exp(-1j * np.abs(a)[..., None] * self.x_eval)
            core = (self.x_vec * ph[..., None, :]) @ self.x_vec.conj().T
            return r[..., :, None] * core * r.conj()[..., None, :]
        b = self.lowering
        h = a[..., None, None] * b.conj().T + np.conj(a)[..., None, None] * b
        ev, vec = np.linalg.eigh(h)
        return (vec * np.exp(-1j * ev)[..., None, :]) @ np.swapaxes(vec.conj(), -1, -2)


def _step_grid(config, t_final, steps):
    breaks = np.unique(np.clip(config.envelope.breakpoints(config.t_gate), 0, t_final))
    grid = [breaks[:1]]
    for a, b in zip(breaks[:-1], breaks[1:]):
        n = max(1, int(np.ceil(steps * (b - a) / t_final)))
        grid.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(grid)


def _branch_unitaries(config, lowering, t_final, steps, delta, force, chunk=256):
    gen = _BranchGenerator(lowering)
    c = np.asarray(branch_coefficients(config.motion_phases))
    grid = _step_grid(config, t_final, steps)
    h = np.diff(grid)
    ta = grid[:-1] + _CF4_NODES[0] * h
    tb = grid[:-1] + _CF4_NODES[1] * h
    fa = force * config.envelope(ta, config.t_gate) * np.exp(-1j * delta * ta)
    fb = force * config.envelope(tb, config.t_gate) * np.exp(-1j * delta * tb)
    first = (h * (_CF4_A * fa + _CF4_B * fb))[:, None] * c
    second = (h * (_CF4_B * fa + _CF4_A * fb))[:, None] * c
    d = lowering.shape[0]
    units = np.broadcast_to(np.eye(d, dtype=complex), (len(c), d, d)).copy()
    for lo in range(0, len(h), chunk):
        # (steps in chunk, branch, d, d)
        step = gen.expm(second[lo:lo + chunk]) @ gen.expm(first[lo:lo + chunk])
        for u in step:
            units = u @ units
    return list(units)


def _trace_distance(r1, r2):
    diff = r1 - r2
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))


def ms_propagate_numeric(config, initial, envelope=None, t_final=None, delta_shift=0.0,
                         rabi_scale=1.0, lowering=None, tol=1e-9, min_steps=16,
                         max_steps=2**15, return_steps=False):
    """Time-ordered integration of the MS Hamiltonian.

    Steps are doubled until the final density matrix moves by less than
    ``tol`` in trace distance, which bounds the change of any fidelity.
    ``lowering`` replaces b in the Hamiltonian (default: the truncated
    annihilation operator, i.e. the Lamb-Dicke form).
    """
    if envelope is not None:
        config = replace(config, rise_fall=envelope.rise_fall if not envelope.is_square else 0.0)
    _check_trailing(initial)
    t_final = config.t_gate if t_final is None else t_final
    if lowering is None:
        lowering = destroy(initial.n_max)
    delta = config.delta - delta_shift
    force = config.coupling * rabi_scale
    if force == 0 or t_final == 0:
        return (initial, 0) if return_steps else initial

    def run(steps):
        u = _full_unitary(config, _branch_unitaries(config, lowering, t_final, steps, delta, force))
        return u @ initial.rho @ u.conj().T

    steps = max(min_steps, 8 * config.loops)
    prev = run(steps)
    while True:
        steps *= 2
        if steps > max_steps:
            raise RuntimeError(f"step control did not converge within {max_steps} steps")
        cur = run(steps)
        if _trace_distance(cur, prev) < tol:
            break
        prev = cur
    out = SpinMotionState(0.5 * (cur + cur.conj().T), initial.n_max)
    _check_trailing(out)
    return (out, steps) if return_steps else out


def exact_sideband_lowering(eta, n_max):
    """Delta n = -1 part of exp(i eta X), rescaled so <0|B|1> = 1.

    Replacing b by this operator keeps the full Fock-state dependence of the
    sideband Rabi rates beyond the Lamb-Dicke approximation, with the drive
    recalibrated to be exact on the ground state.
    """
    e = sideband_operator(eta, n_max)
    lower = np.diag(np.diag(e, 1), 1) / 1j
    return (lower / lower[0, 1]).astype(complex)


def phase_insensitive_gate(config):
    """MS unitary sandwiched between global pi/2 pulses that share its phases.

    The analysis pulses rotate each ion's spin axis S_j onto sigma_z, so the
    result is exp(-i pi/4 Z Z) up to a global phase whatever the common
    phase phi_b + phi_r.
    """
    ms = ms_spin_unitary(config)
    ps = config.spin_phases
    pre = np.kron(pauli_rotation(np.pi / 2, np.pi / 2 - ps[0]),
                  pauli_rotation(np.pi / 2, np.pi / 2 - ps[1]))
    return pre @ ms @ pre.conj().T


def bell_fidelity(rho_spin):
    """Fidelity with (|up,up> + e^{i a}|down,down>)/sqrt 2, maximised over a."""
    rho_spin = np.asarray(rho_spin)
    return float(0.5 * np.real(rho_spin[0, 0] + rho_spin[3, 3]) + np.abs(rho_spin[0, 3]))


def spin_state(state):
    return ptrace_motion(state.rho, state.n_max)


def _vacuum_error(config, lowering, rabi_frac, delta_frac, tol):
    n_max = lowering.shape[0] - 1
    st = SpinMotionState.from_spin_ket(UPUP, n_max, fock=0)
    out = ms_propagate_numeric(config, st, lowering=lowering, rabi_scale=1.0 + rabi_frac,
                               delta_shift=delta_frac * config.delta, tol=tol)
    return 1.0 - bell_fidelity(spin_state(out))


def calibrate_exact_drive(config, lowering, rounds=3, span=0.02, tol=1e-9):
    """Fractional (Rabi, detuning) corrections that maximise the ground-state
    Bell fidelity with the exact sideband operator.

    Each round fits a 2-d quadratic to a 3x3 grid and jumps to its minimum,
    mimicking an experimental scan of laser power and detuning.
    """
    x0 = np.zeros(2)
    offsets = np.array([(i, j) for i in (-1, 0, 1) for j in (-1, 0, 1)], dtype=float)
    for _ in range(rounds):
        pts = x0 + span * offsets
        vals = np.array([_vacuum_error(config, lowering, a, b, tol) for a, b in pts])
        dx = pts - x0
        design = np.column_stack([np.ones(9), dx[:, 0], dx[:, 1], dx[:, 0] ** 2,
                                  dx[:, 0] * dx[:, 1], dx[:, 1] ** 2])
        c = np.linalg.lstsq(design, vals, rcond=None)[0]
        hess = np.array([[2 * c[3], c[4]], [c[4], 2 * c[5]]])
        step = np.linalg.solve(hess, -c[1:3])
        x0 = x0 + np.clip(step, -2 * span, 2 * span)
        span *= 0.25
    return float(x0[0]), float(x0[1])


def beyond_lamb_dicke_error(config, eta, nbar, n_max=8, tol=1e-9, calibration=None):
    """Bell error of the thermal state under the exact sideband Hamiltonian,
    after recalibrating the drive on the motional ground state."""
    lowering = exact_sideband_lowering(eta, n_max)
    if calibration is None:
        calibration = calibrate_exact_drive(config, lowering, tol=tol)
    rabi_frac, delta_frac = calibration
    st = SpinMotionState.from_spin_ket(UPUP, n_max, nbar=nbar)
    out = ms_propagate_numeric(config, st, lowering=lowering, rabi_scale=1.0 + rabi_frac,
                               delta_shift=delta_frac * config.delta, tol=tol)
    return 1.0 - bell_fidelity(spin_state(out))
