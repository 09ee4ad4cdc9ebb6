"""Coverage of the bootstrap interval and spread of the model-check z over
repeated synthetic tomography experiments."""

import argparse
import time

import numpy as np

from ionbench.harness.tables import write_table
from ionbench.tomography import Optics, synthetic_trial


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="tomography_coverage.tsv")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--resamples", type=int, default=500)
    ap.add_argument("--fidelity", type=float, default=0.9992)
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    t0 = time.perf_counter()
    rows = []
    for i, s in enumerate(np.random.SeedSequence(args.seed).generate_state(args.trials)):
        r = synthetic_trial(args.fidelity, Optics(), 20000, int(s), args.resamples, workers=args.workers).result
        rows.append((i, r.fidelity, r.ci[0], r.ci[1], r.lr_z, bool(r.ci[0] <= args.fidelity <= r.ci[1])))
    write_table(args.out, ("trial", "fidelity", "ci_low", "ci_high", "lr_z", "covers"), rows,
                {"true_fidelity": args.fidelity, "seed": args.seed})
    cover = np.mean([r[-1] for r in rows])
    zok = np.mean([abs(r[4]) <= 2 for r in rows])
    print(f"coverage {cover:.2f}, |z| <= 2 in {zok:.0%}, {time.perf_counter() - t0:.0f} s")


if __name__ == "__main__":
    main()
