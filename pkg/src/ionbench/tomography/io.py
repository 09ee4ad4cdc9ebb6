"""Histogram files and fit reports.

Histogram files are tab-separated, one row per count value (or bin), with a
'#'-prefixed header block carrying role, label and analysis-pulse index.
"""

from pathlib import Path

import numpy as np
import yaml

from .histograms import BinnedHistogram, CountHistogram

REFERENCE, DATA = "reference", "data"


def _header(meta):
    return "".join(f"# {k}: {v}\n" for k, v in meta.items())


def _parse(path):
    meta, rows = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition(":")
            meta[key.strip()] = value.strip()
        elif line.strip():
            rows.append([int(x) for x in line.split("\t")])
    return meta, np.array(rows, dtype=np.int64).reshape(-1, 3 if meta.get("kind") == "binned" else 2)


def write_histogram(path, hist, role, pulse_index=None):
    """Write a CountHistogram or BinnedHistogram."""
    if role not in (REFERENCE, DATA):
        raise ValueError(f"role must be {REFERENCE!r} or {DATA!r}")
    meta = {"role": role, "label": hist.label, "shots": hist.shots}
    if pulse_index is not None:
        meta["pulse_index"] = int(pulse_index)
    if isinstance(hist, BinnedHistogram):
        meta["kind"] = "binned"
        e = hist.bin_edges
        body = "".join(f"{lo}\t{hi}\t{n}\n" for lo, hi, n in zip(e[:-1], e[1:], hist.bin_counts))
        header = "# columns: first_count\tend_count\toccurrences\n"
    else:
        meta["kind"] = "counts"
        body = "".join(f"{c}\t{n}\n" for c, n in enumerate(hist.counts))
        header = "# columns: count\toccurrences\n"
    Path(path).write_text(_header(meta) + header + body)


def read_histogram(path):
    """(histogram, metadata dict)."""
    meta, rows = _parse(path)
    meta.pop("columns", None)
    label = meta.get("label", "")
    if meta.get("kind") == "binned":
        edges = np.append(rows[:, 0], rows[-1, 1])
        hist = BinnedHistogram(edges, rows[:, 2], label)
    else:
        if not np.array_equal(rows[:, 0], np.arange(len(rows))):
            raise ValueError(f"{path}: count column must run 0..C")
        hist = CountHistogram(rows[:, 1], label)
    if "shots" in meta and int(meta["shots"]) != hist.shots:
        raise ValueError(f"{path}: header shots {meta['shots']} != {hist.shots}")
    if "pulse_index" in meta:
        meta["pulse_index"] = int(meta["pulse_index"])
    return hist, meta


def write_histogram_set(directory, references, data):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, h in enumerate(references):
        paths.append(directory / f"reference_r{i + 1}.tsv")
        write_histogram(paths[-1], h, REFERENCE)
    for k, h in enumerate(data):
        paths.append(directory / f"data_{k}.tsv")
        write_histogram(paths[-1], h, DATA, pulse_index=k)
    return paths


def read_histogram_set(directory):
    """(references, data) ordered by file name and pulse index."""
    refs, data = [], []
    for path in sorted(Path(directory).glob("*.tsv")):
        hist, meta = read_histogram(path)
        if meta.get("role") == REFERENCE:
            refs.append((path.name, hist))
        elif meta.get("role") == DATA:
            data.append((meta.get("pulse_index", len(data)), hist))
    if len(refs) != 4:
        raise ValueError(f"expected 4 reference histograms, found {len(refs)}")
    return tuple(h for _, h in sorted(refs, key=lambda t: t[0])), tuple(h for _, h in sorted(data, key=lambda t: t[0]))


def report_dict(result):
    rho = np.asarray(result.rho_hat)
    return {
        "fidelity": float(result.fidelity),
        "ci": [float(c) for c in result.ci],
        "lr_z": float(result.lr_z),
        "lr_pvalue": float(result.lr_pvalue),
        "loglik": float(result.loglik),
        "iterations": int(result.iterations),
        "converged": bool(result.converged),
        "achieved_tol": float(result.achieved_tol),
        "seed": None if result.seed is None else int(result.seed),
        "q_hat": np.round(result.q_hat.q, 12).tolist(),
        "rho_hat": {"real": np.round(rho.real, 12).tolist(), "imag": np.round(rho.imag, 12).tolist()},
    }


def write_report(path, result):
    Path(path).write_text(yaml.safe_dump(report_dict(result), sort_keys=False))


def read_report(path):
    d = yaml.safe_load(Path(path).read_text())
    d["rho_hat"] = np.array(d["rho_hat"]["real"]) + 1j * np.array(d["rho_hat"]["imag"])
    return d
