"""Mode-frequency-noise error against gate duration for several noise levels."""

import argparse

import numpy as np

from ionbench.harness.tables import write_table
from ionbench.msgate import NoiseModel, sweep_duration
from ionbench.msgate.sweeps import fit_power_law


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="duration_sweep.tsv")
    ap.add_argument("--shots", type=int, default=4000)
    ap.add_argument("--seed", type=int, default=3)
    ap.add_argument("--rms-hz", type=float, nargs="+", default=[50.0, 100.0, 200.0])
    args = ap.parse_args()
    ts = np.array([20, 30, 40, 60, 80, 100, 120, 160], dtype=float)
    rows = []
    for rms in args.rms_hz:
        pts = sweep_duration(ts * 1e-6, NoiseModel(mode_freq_rms=rms), shots=args.shots, seed=args.seed)
        err = [p.component("mode_freq") for p in pts]
        rows += [(rms, t, e, p.std_error) for t, e, p in zip(ts, err, pts)]
        print(f"{rms:6.0f} Hz: exponent {fit_power_law(ts, err)[1]:.3f}, error at 30 us {err[1]:.2e}")
    write_table(args.out, ("rms_hz", "t_gate_us", "error", "std_error"), rows, {"seed": args.seed})


if __name__ == "__main__":
    main()
