"""Photon-count histogram containers."""

from dataclasses import dataclass

import numpy as np

N_BINS = 7
N_SUBSPACES = 3
DEFAULT_MAX_COUNT = 150


def _frozen(arr, dtype):
    arr = np.array(arr, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CountHistogram:
    """Occurrences of each photon count 0..C; counts above C are pooled at C."""

    counts: np.ndarray
    label: str = ""

    def __post_init__(self):
        counts = _frozen(self.counts, np.int64)
        if counts.ndim != 1 or len(counts) == 0:
            raise ValueError("counts must be a non-empty 1-d array")
        if np.any(counts < 0):
            raise ValueError("occurrences must be non-negative")
        object.__setattr__(self, "counts", counts)

    @property
    def shots(self):
        return int(self.counts.sum())

    @property
    def max_count(self):
        return len(self.counts) - 1

    @classmethod
    def from_samples(cls, samples, max_count=DEFAULT_MAX_COUNT, label=""):
        samples = np.minimum(np.asarray(samples, dtype=np.int64), max_count)
        return cls(np.bincount(samples, minlength=max_count + 1), label)

    def mean(self):
        c = np.arange(len(self.counts))
        return float(c @ self.counts / max(self.shots, 1))

    def bin(self, edges):
        return BinnedHistogram(edges, bin_counts(self.counts, edges), self.label)


def bin_counts(counts, edges):
    csum = np.concatenate([[0], np.cumsum(counts)])
    edges = np.asarray(edges)
    return csum[edges[1:]] - csum[edges[:-1]]


@dataclass(frozen=True)
class BinnedHistogram:
    """Counts pooled into contiguous bins [edges[k], edges[k+1])."""

    bin_edges: np.ndarray
    bin_counts: np.ndarray
    label: str = ""

    def __post_init__(self):
        edges = _frozen(self.bin_edges, np.int64)
        counts = _frozen(self.bin_counts, np.int64)
        if len(edges) != len(counts) + 1:
            raise ValueError("need len(bin_edges) == len(bin_counts) + 1")
        if edges[0] != 0 or np.any(np.diff(edges) <= 0):
            raise ValueError("bin edges must start at 0 and increase strictly")
        if np.any(counts < 0):
            raise ValueError("bin counts must be non-negative")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "bin_counts", counts)

    @property
    def shots(self):
        return int(self.bin_counts.sum())

    @property
    def n_bins(self):
        return len(self.bin_counts)


@dataclass(frozen=True)
class SubspaceDistributions:
    """Row j: distribution over bins for subspace j (both bright, one bright, both dark)."""

    q: np.ndarray

    def __post_init__(self):
        q = _frozen(self.q, float)
        if q.ndim != 2 or q.shape[0] != N_SUBSPACES:
            raise ValueError("q must have shape (3, n_bins)")
        if np.any(q < 0) or np.max(np.abs(q.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("rows of q must lie on the probability simplex")
        object.__setattr__(self, "q", q)

    @property
    def n_bins(self):
        return self.q.shape[1]
