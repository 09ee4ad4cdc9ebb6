"""Single-qubit randomized benchmarking: sequences, noisy simulation, decay fit.

Each computational gate is a Pauli (I, X, Y, Z) followed by a Clifford
(I, X/2, Y/2, Z/2). X and Y Paulis are two pi/2 pulses about the same axis,
z rotations are frame updates, identities are short waits. States are
tracked as Bloch vectors.
"""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml
from scipy.optimize import curve_fit

DEFAULT_LENGTHS = (1, 3, 10, 30, 100, 300, 1000)
PAULIS = ("I", "X", "Y", "Z")
CLIFFORDS = ("I", "X", "Y", "Z")  # pi/2 about the axis; "I" is a wait
PULSE_TIME = 2e-6
WAIT_TIME = 1e-6
COHERENCE_TIME = 1.5

_AXES = {"X": np.array([1.0, 0.0, 0.0]), "Y": np.array([0.0, 1.0, 0.0]), "Z": np.array([0.0, 0.0, 1.0])}
_CARDINALS = np.array([[0, 0, 1], [0, 0, -1], [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)


def rotation(axis, angle):
    """3x3 Bloch-vector rotation (Rodrigues)."""
    n = _AXES[axis] if isinstance(axis, str) else np.asarray(axis, dtype=float)
    k = np.array([[0, -n[2], n[1]], [n[2], 0, -n[0]], [-n[1], n[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def expand(pauli, clifford):
    """Primitive operations of one computational gate: ("pulse", axis) is a
    pi/2 pulse, ("frame", axis) a noiseless pi/2 frame rotation about z (the
    Pauli Z is two of them), ("wait",) an identity."""
    ops = []
    if pauli in ("X", "Y"):
        ops += [("pulse", pauli), ("pulse", pauli)]
    elif pauli == "Z":
        ops += [("frame", "Z"), ("frame", "Z")]
    else:
        ops.append(("wait",))
    if clifford in ("X", "Y"):
        ops.append(("pulse", clifford))
    elif clifford == "Z":
        ops.append(("frame", "Z"))
    else:
        ops.append(("wait",))
    return ops


def _cardinal_index(r):
    return int(np.argmax(_CARDINALS @ r))


def _recovery_table():
    """Shortest word in {X/2, Y/2, Z/2} taking each cardinal state to +z and to -z."""
    gens = {g: rotation(g, np.pi / 2) for g in ("X", "Y", "Z")}
    table = {}
    for target in (0, 1):
        # breadth-first search backwards is unnecessary for 6 states: search forwards from each
        for start in range(6):
            seen = {start: ()}
            queue = deque([start])
            while queue:
                s = queue.popleft()
                if s == target:
                    break
                for g, m in gens.items():
                    nxt = _cardinal_index(m @ _CARDINALS[s])
                    if nxt not in seen:
                        seen[nxt] = seen[s] + (g,)
                        queue.append(nxt)
            table[start, target] = seen[target]
    return table


RECOVERY = _recovery_table()


@dataclass(frozen=True)
class RBSequence:
    """``steps``: (pauli, clifford) pairs; ``recovery``: pi/2 rotations that
    bring the ideal state to +z (expected=+1, bright) or -z (expected=-1)."""

    length: int
    steps: tuple
    recovery: tuple
    expected: int
    seed: int = 0

    def operations(self):
        ops = [op for p, c in self.steps for op in expand(p, c)]
        for g in self.recovery:
            ops.append(("frame", "Z") if g == "Z" else ("pulse", g))
        return ops

    def pulse_count(self):
        return sum(op[0] == "pulse" for op in self.operations())


def ideal_final_state(steps):
    r = _CARDINALS[0].copy()
    for p, c in steps:
        for op in expand(p, c):
            if op[0] != "wait":
                r = rotation(op[1], np.pi / 2) @ r
    return r


def generate_sequences(lengths=DEFAULT_LENGTHS, per_length=50, seed=0):
    """``per_length`` random sequences for each length, each with a random
    expected outcome."""
    lengths = list(lengths)
    if not lengths or per_length < 1:
        raise ValueError("need at least one length and per_length >= 1")
    children = np.random.SeedSequence(seed).spawn(len(lengths) * per_length)
    out = []
    for i, length in enumerate(lengths):
        if length < 0:
            raise ValueError("lengths must be non-negative")
        for j in range(per_length):
            ss = children[i * per_length + j]
            rng = np.random.default_rng(ss)
            paulis = rng.integers(0, 4, length)
            cliffs = rng.integers(0, 4, length)
            steps = tuple((PAULIS[a], CLIFFORDS[b]) for a, b in zip(paulis, cliffs))
            expected = 1 if rng.integers(0, 2) == 0 else -1
            start = _cardinal_index(ideal_final_state(steps))
            recovery = RECOVERY[start, 0 if expected == 1 else 1]
            out.append(RBSequence(length, steps, recovery, expected, int(ss.generate_state(1)[0])))
    return out


@dataclass(frozen=True)
class RBNoise:
    """``pulse_error``: depolarizing infidelity per pi/2 pulse;
    ``rabi_frac_rms``: quasi-static fractional Rabi error, one draw per
    sequence; ``spam``: total preparation-plus-detection flip probability,
    split evenly; ``coherence_time``: pure dephasing time (s), None for none."""

    pulse_error: float = 2.5e-5
    rabi_frac_rms: float = 1e-3
    spam: float = 2e-3
    coherence_time: float = COHERENCE_TIME
    pulse_time: float = PULSE_TIME
    wait_time: float = WAIT_TIME

    def __post_init__(self):
        if min(self.pulse_error, self.rabi_frac_rms, self.spam) < 0:
            raise ValueError("noise parameters must be non-negative")

    @classmethod
    def noiseless(cls):
        return cls(0.0, 0.0, 0.0, None)


def _dephase(r, t, t2):
    if t2 is None or t == 0:
        return r
    f = np.exp(-t / t2)
    return np.array([r[0] * f, r[1] * f, r[2]])


def sequence_survival(seq, noise, rabi_frac=0.0):
    """Probability of observing the expected outcome."""
    shrink = 1.0 - 2.0 * noise.pulse_error
    angle = 0.5 * np.pi * (1.0 + rabi_frac)
    mats = {"X": rotation("X", angle), "Y": rotation("Y", angle), "Z": rotation("Z", np.pi / 2)}
    p_prep = 0.5 * noise.spam
    r = np.array([0.0, 0.0, 1.0 - 2.0 * p_prep])
    for op in seq.operations():
        kind = op[0]
        if kind == "pulse":
            r = shrink * (mats[op[1]] @ r)
            r = _dephase(r, noise.pulse_time, noise.coherence_time)
        elif kind == "frame":
            r = mats["Z"] @ r
        else:
            r = _dephase(r, noise.wait_time, noise.coherence_time)
    p = 0.5 * (1.0 + seq.expected * r[2])
    p_meas = 0.5 * noise.spam
    return (1.0 - p_meas) * p + p_meas * (1.0 - p)


def simulate_rb(sequences, noise=None, seed=0, shots=None):
    """Survival per sequence; with ``shots`` the probabilities are sampled."""
    noise = noise or RBNoise()
    rng = np.random.default_rng(seed)
    rabi = rng.normal(0.0, noise.rabi_frac_rms, len(sequences)) if noise.rabi_frac_rms > 0 else np.zeros(len(sequences))
    p = np.array([sequence_survival(s, noise, x) for s, x in zip(sequences, rabi)])
    if shots is not None:
        p = rng.binomial(shots, np.clip(p, 0.0, 1.0)) / shots
    return p


@dataclass(frozen=True)
class RBResult:
    lengths: np.ndarray
    mean_survival: np.ndarray
    sem: np.ndarray
    fit: tuple  # (A, B, p)
    covariance: np.ndarray
    epg: float
    epg_err: float
    spam: float
    spam_err: float
    residuals: np.ndarray = field(default=None)


def decay(l, a, b, p):
    return a * p**l + b


def group_by_length(sequences, survivals):
    by = {}
    for s, v in zip(sequences, survivals):
        by.setdefault(s.length, []).append(v)
    return {k: np.array(v) for k, v in sorted(by.items())}


def fit_rb(by_length, fixed_b=0.5):
    """Weighted least-squares fit of A p^l + B (B fixed unless ``fixed_b`` is None)."""
    lengths = np.array(sorted(by_length), dtype=float)
    if len(lengths) < 3:
        raise ValueError("need at least 3 distinct lengths")
    means = np.array([np.mean(by_length[k]) for k in sorted(by_length)])
    sem = np.array([np.std(by_length[k], ddof=1) / np.sqrt(len(by_length[k])) if len(by_length[k]) > 1 else 0.0
                    for k in sorted(by_length)])
    sigma = np.maximum(sem, 1e-9)
    p0 = np.clip(1.0 - (means[0] - means[-1]) / max(lengths[-1] - lengths[0], 1.0), 0.5, 1.0)
    if fixed_b is None:
        f = decay
        x0, lo, hi = [means[0] - 0.5, 0.5, p0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]
    else:
        def f(l, a, p):
            return decay(l, a, fixed_b, p)
        x0, lo, hi = [means[0] - fixed_b, p0], [0.0, 0.0], [1.0, 1.0]
    popt, pcov = curve_fit(f, lengths, means, p0=x0, sigma=sigma, absolute_sigma=True, bounds=(lo, hi),
                           xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000)
    if fixed_b is None:
        a, b, p = popt
        cov = pcov
        var_sum = pcov[0, 0] + pcov[1, 1] + 2 * pcov[0, 1]
    else:
        (a, p), b = popt, fixed_b
        cov = np.zeros((3, 3))
        cov[np.ix_([0, 2], [0, 2])] = pcov
        var_sum = pcov[0, 0]
    resid = means - decay(lengths, a, b, p)
    return RBResult(lengths, means, sem, (float(a), float(b), float(p)), cov,
                    float((1.0 - p) / 2.0), float(np.sqrt(max(cov[2, 2], 0.0)) / 2.0),
                    float(1.0 - (a + b)), float(np.sqrt(max(var_sum, 0.0))), resid)


def bootstrap_epg(by_length, resamples=200, seed=0, fixed_b=0.5):
    """EPG spread from resampling sequences within each length."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(resamples):
        sample = {k: rng.choice(v, len(v), replace=True) for k, v in by_length.items()}
        out.append(fit_rb(sample, fixed_b).epg)
    return np.array(out)


def run_rb(lengths=DEFAULT_LENGTHS, per_length=50, noise=None, seed=0, shots=None, fixed_b=0.5):
    seqs = generate_sequences(lengths, per_length, seed)
    surv = simulate_rb(seqs, noise, seed=seed + 1, shots=shots)
    return fit_rb(group_by_length(seqs, surv), fixed_b), seqs, surv


def write_survival_table(path, sequences, survivals, meta=None):
    lines = [f"# {k}: {v}\n" for k, v in (meta or {}).items()]
    lines.append("length\tsequence\texpected\tpulses\tsurvival\n")
    for i, (s, v) in enumerate(zip(sequences, survivals)):
        lines.append(f"{s.length}\t{i}\t{s.expected}\t{s.pulse_count()}\t{v:.12g}\n")
    Path(path).write_text("".join(lines))


def write_sequences(path, sequences):
    lines = ["length\texpected\tseed\tsteps\trecovery\n"]
    for s in sequences:
        steps = " ".join(p + c for p, c in s.steps) or "-"
        lines.append(f"{s.length}\t{s.expected}\t{s.seed}\t{steps}\t{''.join(s.recovery) or '-'}\n")
    Path(path).write_text("".join(lines))


def fit_report(result, seed=None):
    a, b, p = result.fit
    return {"A": a, "B": b, "p": p, "epg": result.epg, "epg_err": result.epg_err, "spam": result.spam,
            "spam_err": result.spam_err, "covariance": np.asarray(result.covariance).tolist(),
            "lengths": result.lengths.tolist(), "mean_survival": result.mean_survival.tolist(),
            "residuals": np.asarray(result.residuals).tolist(), "seed": seed}


def write_fit_report(path, result, seed=None):
    Path(path).write_text(yaml.safe_dump(fit_report(result, seed), sort_keys=False))
