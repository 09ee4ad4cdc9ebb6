"""Gate error against Raman detuning, by error source."""

import argparse

import numpy as np

from ionbench.harness.tables import write_table
from ionbench.hilbert import TWO_PI
from ionbench.msgate import NoiseModel, sweep_detuning
from ionbench.msgate.config import DEFAULT_RISE_FALL
from ionbench.msgate.sweeps import fit_power_law


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="detuning_sweep.tsv")
    ap.add_argument("--shots", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=2)
    args = ap.parse_args()
    ghz = np.array([-200, -300, -450, -600, -900, -1200, -1800], dtype=float)
    pts = sweep_detuning(TWO_PI * 1e9 * ghz, NoiseModel.reference_budget(), rise_fall=DEFAULT_RISE_FALL,
                         shots=args.shots, seed=args.seed)
    keys = sorted({k for p in pts for k, _ in p.components})
    rows = [(g, p.error, p.std_error) + tuple(p.component(k) for k in keys) for g, p in zip(ghz, pts)]
    write_table(args.out, ("detuning_ghz", "total", "std_error") + tuple(keys), rows, {"seed": args.seed})
    slope = fit_power_law(np.abs(ghz), [p.component("raman") for p in pts])[1]
    print(f"wrote {args.out}; Raman log-log slope {slope:.3f}")


if __name__ == "__main__":
    main()
