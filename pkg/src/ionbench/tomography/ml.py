"""Joint maximum-likelihood estimation of count distributions and state.

The log-likelihood of reference histograms r_i and data histograms h_k is

    L = sum_ic r_i(c) log(sum_j a_ij q_j(c)) + sum_kc h_k(c) log(sum_j b_kj(rho) q_j(c)).

It is maximised by alternating a q half-step (multiplicative EM update) with
a rho half-step (diluted R rho R). Both are monotone but crawl once the
estimate approaches the boundary (a rank-deficient rho, empty bins in some
q_j), which is the usual situation near a pure Bell state. After a short
alternating phase the iterate is therefore polished by a joint quasi-Newton
ascent on square-root factors (q_j = s_j^2 / |s_j|^2, rho = T T^+ / tr),
whose line search is also monotone, and the alternation is resumed until
the relative improvement per iteration drops below ``tol``. Every step is
checked to be non-decreasing.
"""

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize

from ..hilbert import PHI_PLUS
from .histograms import SubspaceDistributions

MONOTONE_SLACK = 1e-9


class MonotonicityError(RuntimeError):
    pass


@dataclass(frozen=True)
class FitOptions:
    """``tol``: relative log-likelihood improvement per iteration at which to
    stop; ``max_iter`` caps the alternating iterations, ``warmup`` of which
    run before the quasi-Newton polish (``polish=False`` disables it)."""

    tol: float = 1e-10
    max_iter: int = 5000
    warmup: int = 20
    polish: bool = True
    polish_iter: int = 2000
    check_monotone: bool = True
    record_history: bool = False


@dataclass(frozen=True)
class MLResult:
    rho_hat: np.ndarray
    q_hat: SubspaceDistributions
    loglik: float
    fidelity: float
    iterations: int
    converged: bool
    achieved_tol: float
    gap: float = float("nan")
    history: tuple = ()
    ci: tuple = (float("nan"), float("nan"))
    lr_z: float = float("nan")
    lr_pvalue: float = float("nan")
    shots: tuple = ()
    seed: object = None
    counts: np.ndarray = None

    def with_ci(self, ci):
        return replace(self, ci=tuple(float(c) for c in ci))

    def with_lr(self, z, pvalue):
        return replace(self, lr_z=float(z), lr_pvalue=float(pvalue))

    def with_seed(self, seed):
        return replace(self, seed=seed)


def _xlogy(x, y):
    out = np.zeros(np.shape(y))
    mask = x > 0
    out[mask] = x[mask] * np.log(y[mask])
    return out


def _ratio(x, y):
    out = np.zeros(np.shape(y))
    mask = x > 0
    out[mask] = x[mask] / y[mask]
    return out


class LikelihoodModel:
    """Count arrays and the measurement model for one fit."""

    def __init__(self, refs, data, setup):
        self.refs = np.asarray(refs, dtype=float)
        self.data = np.asarray(data, dtype=float)
        if self.refs.shape[0] != 4 or self.data.shape[0] != setup.n_settings:
            raise ValueError("expected 4 reference and one data histogram per analysis setting")
        if self.refs.shape[1] != self.data.shape[1]:
            raise ValueError("inconsistent number of bins")
        if np.any(self.refs.sum(axis=1) <= 0) or np.any(self.data.sum(axis=1) <= 0):
            raise ValueError("empty histogram")
        self.setup = setup
        self.a = setup.a
        self.dim = setup.dim
        self.n_settings = setup.n_settings
        self.n_bins = self.refs.shape[1]
        self.povm_flat = setup.povm.reshape(self.n_settings * 3, self.dim**2)
        self.n_data = self.data.sum()
        self.counts = np.concatenate([self.refs, self.data])

    def b(self, rho):
        return np.real(self.povm_flat @ rho.T.ravel()).reshape(self.n_settings, 3)

    def probabilities(self, q, b):
        return np.vstack([self.a, b]) @ q

    def loglik(self, q, rho, b=None):
        b = self.b(rho) if b is None else b
        return float(np.sum(_xlogy(self.counts, self.probabilities(q, b))))

    def data_loglik(self, q, rho):
        return float(np.sum(_xlogy(self.data, self.b(rho) @ q)))

    def q_gradient(self, q, b):
        """dL/dq_j(c)."""
        m = np.vstack([self.a, b])
        return m.T @ _ratio(self.counts, m @ q)

    def r_operator(self, q, b):
        """R = dL/drho / N_data; R = I on the support of rho at a maximum."""
        w = _ratio(self.data, b @ q) @ q.T  # (settings, 3)
        return (w.ravel() @ self.povm_flat).reshape(self.dim, self.dim) / self.n_data

    def q_step(self, q, b):
        new = q * self.q_gradient(q, b)
        return new / new.sum(axis=1, keepdims=True)

    def rho_step(self, q, rho, eps):
        """Diluted R rho R; eps grows after success and is halved until the
        data log-likelihood does not decrease."""
        r = self.r_operator(q, self.b(rho))
        base = self.data_loglik(q, rho)
        eye = np.eye(self.dim)
        while True:
            m = (eye + eps * r) / (1.0 + eps)
            new = m @ rho @ m.conj().T
            new = new / np.real(np.trace(new))
            new = 0.5 * (new + new.conj().T)
            if self.data_loglik(q, new) >= base or eps < 1e-12:
                return new, min(2.0 * eps, 1e6)
            eps *= 0.5

    def gap_bound(self, q, rho):
        """Upper bound (nats) on the gain from moving either block alone.

        By concavity in rho, L(sigma) - L(rho) <= N (lambda_max(R) - 1); each
        q row gives max_c g(c) - sum_c q(c) g(c).
        """
        b = self.b(rho)
        gap_rho = self.n_data * max(np.linalg.eigvalsh(self.r_operator(q, b))[-1] - 1.0, 0.0)
        g = self.q_gradient(q, b)
        gap_q = np.sum(np.clip(g.max(axis=1) - np.sum(q * g, axis=1), 0.0, None))
        return float(gap_rho + gap_q)

    # square-root factor parametrisation for the quasi-Newton polish

    def pack(self, q, rho):
        w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        t = v * np.sqrt(np.clip(w, 0.0, None))
        return np.concatenate([np.sqrt(q).ravel(), t.real.ravel(), t.imag.ravel()])

    def unpack(self, x):
        n, d = 3 * self.n_bins, self.dim
        s = x[:n].reshape(3, self.n_bins)
        t = (x[n:n + d * d] + 1j * x[n + d * d:]).reshape(d, d)
        q = s * s
        q = q / q.sum(axis=1, keepdims=True)
        rho = t @ t.conj().T
        return q, rho / np.real(np.trace(rho))

    def neg_loglik_and_grad(self, x):
        n, d = 3 * self.n_bins, self.dim
        s = x[:n].reshape(3, self.n_bins)
        t = (x[n:n + d * d] + 1j * x[n + d * d:]).reshape(d, d)
        ns = np.sum(s * s, axis=1, keepdims=True)
        nt = np.sum(np.abs(t) ** 2)
        q = s * s / ns
        rho = t @ t.conj().T / nt
        b = self.b(rho)
        ll = np.sum(_xlogy(self.counts, self.probabilities(q, b)))
        g = self.q_gradient(q, b)
        gs = 2.0 * s / ns * (g - np.sum(q * g, axis=1, keepdims=True))
        big = self.r_operator(q, b) * self.n_data
        gt = 2.0 * (big @ t - np.real(np.trace(big @ rho)) * t) / nt
        grad = np.concatenate([gs.ravel(), gt.real.ravel(), gt.imag.ravel()])
        return -ll, -grad


def initial_q(refs, a):
    """Distributions implied by the references alone (least squares, floored)."""
    p = refs / refs.sum(axis=1, keepdims=True)
    q, *_ = np.linalg.lstsq(a, p, rcond=None)
    q = np.clip(q, 0.0, None) + 1e-6
    return q / q.sum(axis=1, keepdims=True)


class _Monitor:
    """Collects log-likelihood values and enforces monotonicity."""

    def __init__(self, ll, check, record):
        self.last = ll
        self.check = check
        self.history = [ll] if record else None
        self.steps = 0

    def __call__(self, ll):
        self.steps += 1
        if self.check and ll < self.last - MONOTONE_SLACK * abs(self.last):
            raise MonotonicityError(f"log-likelihood decreased at step {self.steps}: {self.last} -> {ll}")
        if self.history is not None:
            self.history.append(ll)
        self.last = max(ll, self.last)


def _alternate(model, q, rho, ll, monitor, n_iter, tol, state):
    """Up to ``n_iter`` alternating iterations; returns (q, rho, ll, done, rel)."""
    rel = np.inf
    for _ in range(n_iter):
        b = model.b(rho)
        q = model.q_step(q, b)
        ll_q = model.loglik(q, rho, b)
        monitor(ll_q)
        rho, state["eps"] = model.rho_step(q, rho, state["eps"])
        ll_new = model.loglik(q, rho)
        monitor(ll_new)
        state["iterations"] += 1
        rel = abs(ll_new - ll) / max(abs(ll), 1e-300)
        ll = ll_new
        if rel < tol:
            return q, rho, ll, True, rel
    return q, rho, ll, False, rel


def _polish(model, q, rho, ll, monitor, max_iter):
    x0 = model.pack(q, rho)

    def callback(intermediate_result):
        monitor(-float(intermediate_result.fun))

    res = minimize(model.neg_loglik_and_grad, x0, jac=True, method="L-BFGS-B", callback=callback,
                   options=dict(maxiter=max_iter, gtol=1e-9, ftol=1e-15, maxcor=30))
    q_new, rho_new = model.unpack(res.x)
    ll_new = model.loglik(q_new, rho_new)
    if not ll_new >= ll:
        return q, rho, ll
    return q_new, rho_new, ll_new


def _target(dim):
    if dim == 4:
        return PHI_PLUS
    # qutrit pair: the Bell state embedded in the qubit levels
    levels = int(round(np.sqrt(dim)))
    t = np.zeros(dim, dtype=complex)
    t[0] = t[levels + 1] = 1.0 / np.sqrt(2.0)
    return t


def fit_counts(refs, data, setup, options=None, q0=None, rho0=None):
    """Maximum-likelihood fit on raw count arrays (4 x B references, 9 x B
    data); non-integer counts are allowed."""
    options = options or FitOptions()
    model = LikelihoodModel(refs, data, setup)
    q = initial_q(model.refs, model.a) if q0 is None else np.array(q0, dtype=float)
    if rho0 is None:
        rho = np.eye(model.dim, dtype=complex) / model.dim
    else:
        rho = np.array(rho0, dtype=complex)
    ll = model.loglik(q, rho)
    if not np.isfinite(ll):
        raise ValueError("starting point has zero likelihood")
    monitor = _Monitor(ll, options.check_monotone, options.record_history)
    state = {"eps": 1.0, "iterations": 0}
    warm = min(options.warmup, options.max_iter) if options.polish else options.max_iter
    q, rho, ll, done, rel = _alternate(model, q, rho, ll, monitor, warm, options.tol, state)
    if options.polish and not done:
        q, rho, ll = _polish(model, q, rho, ll, monitor, options.polish_iter)
        q, rho, ll, done, rel = _alternate(model, q, rho, ll, monitor,
                                           options.max_iter - state["iterations"], options.tol, state)
    q = np.clip(q, 0.0, None)
    q = q / q.sum(axis=1, keepdims=True)
    rho = 0.5 * (rho + rho.conj().T)
    target = _target(model.dim)
    fid = float(np.real(np.conj(target) @ rho @ target))
    return MLResult(
        rho_hat=rho,
        q_hat=SubspaceDistributions(q),
        loglik=ll,
        fidelity=min(max(fid, 0.0), 1.0),
        iterations=state["iterations"],
        converged=done,
        achieved_tol=float(rel),
        gap=model.gap_bound(q, rho),
        history=tuple(monitor.history) if monitor.history is not None else (),
        shots=tuple(int(round(s)) for s in model.counts.sum(axis=1)),
        counts=model.counts,
    )


def ml_fit(references, data, setup, options=None, q0=None, rho0=None):
    """Fit binned reference and data histograms (BinnedHistogram sequences)."""
    edges = references[0].bin_edges
    for h in tuple(references) + tuple(data):
        if not np.array_equal(h.bin_edges, edges):
            raise ValueError("all histograms must share the same bins")
    refs = np.array([h.bin_counts for h in references])
    dat = np.array([h.bin_counts for h in data])
    return fit_counts(refs, dat, setup, options, q0, rho0)


def model_probabilities(result, setup):
    """Per-histogram bin probabilities of a fitted model (references first)."""
    return np.vstack([setup.a, setup.b_map(result.rho_hat)]) @ result.q_hat.q


def saturated_loglik(counts):
    """Log-likelihood of the per-histogram empirical distributions."""
    counts = np.asarray(counts, dtype=float)
    return float(np.sum(_xlogy(counts, counts / counts.sum(axis=1, keepdims=True))))
