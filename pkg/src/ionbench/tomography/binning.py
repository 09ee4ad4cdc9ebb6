"""Mutual-information binning of photon counts into contiguous bins."""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .histograms import N_BINS, CountHistogram

TIE_TOL = 1e-13


@dataclass(frozen=True)
class BinningResult:
    edges: np.ndarray
    mutual_information: float
    degenerate: bool
    training: tuple
    remainder: tuple


def split_training(references, train_frac=0.1, seed=0):
    """Set aside a random ``train_frac`` of each histogram's shots.

    Sampling is without replacement (multivariate hypergeometric on the
    per-count occurrences). Returns (training, remainder) tuples.
    """
    if not 0 < train_frac < 1:
        raise ValueError("train_frac must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    train, rest = [], []
    for h in references:
        n_train = int(round(train_frac * h.shots))
        picked = rng.multivariate_hypergeometric(h.counts, n_train)
        train.append(CountHistogram(picked, h.label))
        rest.append(CountHistogram(h.counts - picked, h.label))
    return tuple(train), tuple(rest)


def _label_distributions(histograms):
    counts = np.array([h.counts for h in histograms], dtype=float)
    totals = counts.sum(axis=1, keepdims=True)
    if np.any(totals == 0):
        raise ValueError("empty reference histogram")
    return counts / totals


def interval_information(p):
    """f[s, e] = MI contribution of the bin [s, e) for label distributions p
    (labels x counts) under a uniform label prior."""
    n_lab, n = p.shape
    csum = np.concatenate([np.zeros((n_lab, 1)), np.cumsum(p, axis=1)], axis=1)
    mass = csum[:, None, :] - csum[:, :, None]  # [label, s, e]
    mass = np.clip(mass, 0.0, None)
    marg = mass.mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mass > 0, mass * np.log(mass / marg[None]), 0.0)
    return terms.sum(axis=0) / n_lab


def mutual_information(p, edges):
    """MI (nats) between bin index and label, uniform label prior."""
    f = interval_information(np.asarray(p, dtype=float))
    edges = np.asarray(edges)
    return float(sum(f[s, e] for s, e in zip(edges[:-1], edges[1:])))


def optimal_edges(p, n_bins=N_BINS):
    """Exact DP over cut positions; ties go to the lexicographically smallest cuts."""
    p = np.asarray(p, dtype=float)
    n = p.shape[1]
    if n < n_bins:
        raise ValueError(f"need at least {n_bins} count values")
    f = interval_information(p)
    # best[k, s]: max MI of covering [s, n) with k bins
    best = np.full((n_bins + 1, n + 1), -np.inf)
    best[0, n] = 0.0
    choice = np.zeros((n_bins + 1, n + 1), dtype=np.int64)
    for k in range(1, n_bins + 1):
        for s in range(n - k, -1, -1):
            ends = np.arange(s + 1, n - k + 2)
            vals = f[s, ends] + best[k - 1, ends]
            top = vals.max()
            # leftmost end among (near-)ties
            idx = int(np.argmax(vals >= top - TIE_TOL * max(1.0, abs(top))))
            best[k, s] = vals[idx]
            choice[k, s] = ends[idx]
    edges = [0]
    for k in range(n_bins, 0, -1):
        edges.append(int(choice[k, edges[-1]]))
    return np.array(edges), float(best[n_bins, 0])


def brute_force_edges(p, n_bins=N_BINS):
    """Exhaustive search over all cut placements (small C only)."""
    p = np.asarray(p, dtype=float)
    n = p.shape[1]
    f = interval_information(p)
    best, best_edges = -np.inf, None
    for cuts in combinations(range(1, n), n_bins - 1):
        edges = (0,) + cuts + (n,)
        val = sum(f[s, e] for s, e in zip(edges[:-1], edges[1:]))
        if best_edges is None or val > best + TIE_TOL * max(1.0, abs(best)):
            best, best_edges = val, edges
    return np.array(best_edges), float(best)


def train_binning(references, train_frac=0.1, seed=0, n_bins=N_BINS):
    """Choose ``n_bins`` contiguous bins from a random training split.

    Flags ``degenerate`` when fewer than ``n_bins`` distinct counts occur in
    the training data; the bins are then still valid but some are empty.
    """
    if len(references) == 0:
        raise ValueError("no reference histograms")
    train, rest = split_training(references, train_frac, seed)
    p = _label_distributions(train)
    edges, mi = optimal_edges(p, n_bins)
    occupied = int(np.count_nonzero(p.sum(axis=0)))
    return BinningResult(edges, mi, occupied < n_bins, train, rest)
