import numpy as np
from scipy.integrate import solve_ivp


def trace_distance(a, b):
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * ((a - b) + (a - b).conj().T)))))


def fidelity_lower_bound(a, b):
    """(1 - D)^2 <= F (Fuchs-van de Graaf). Unlike the Uhlmann formula it
    does not pick up sqrt(round-off) from near-zero eigenvalues."""
    return (1.0 - trace_distance(a, b)) ** 2


def ms_lindblad(rho0, n_max, force, delta, t_gate, heating_rate=0.0, rtol=1e-10):
    """Brute-force master equation for H = F S_x (b e^{i delta t} + b^dag e^{-i delta t})
    with symmetric heating D[b] + D[b^dag] at ``heating_rate``; square pulse,
    zero beam phases."""
    d = n_max + 1
    b = np.diag(np.sqrt(np.arange(1, d)), 1).astype(complex)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    s_x = np.kron(sx, np.eye(2)) + np.kron(np.eye(2), sx)
    bb = np.kron(np.eye(4), b)
    spin = np.kron(s_x, np.eye(d))
    jumps = [np.sqrt(heating_rate) * bb, np.sqrt(heating_rate) * bb.conj().T] if heating_rate else []
    dim = 4 * d

    def rhs(t, y):
        rho = y.reshape(dim, dim)
        a = bb * np.exp(1j * delta * t)
        h = force * spin @ (a + a.conj().T)
        out = -1j * (h @ rho - rho @ h)
        for c in jumps:
            cd = c.conj().T
            out += c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)
        return out.reshape(-1)

    sol = solve_ivp(rhs, (0.0, t_gate), rho0.astype(complex).reshape(-1), method="DOP853",
                    rtol=rtol, atol=rtol * 1e-2)
    return sol.y[:, -1].reshape(dim, dim)


def ptrace_motion(rho, n_max):
    d = n_max + 1
    return np.einsum("iaja->ij", rho.reshape(4, d, 4, d))
