"""Randomized benchmarking decay with the default noise model."""

import argparse

from ionbench.harness.tables import write_table
from ionbench.rb import RBNoise, bootstrap_epg, decay, group_by_length, run_rb


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="rb_decay.tsv")
    ap.add_argument("--per-length", type=int, default=50)
    ap.add_argument("--pulse-error", type=float, default=2.5e-5)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()
    res, seqs, surv = run_rb(per_length=args.per_length, noise=RBNoise(pulse_error=args.pulse_error),
                             seed=args.seed)
    boot = bootstrap_epg(group_by_length(seqs, surv), 200, args.seed)
    rows = [(int(l), m, s, decay(l, *res.fit)) for l, m, s in zip(res.lengths, res.mean_survival, res.sem)]
    write_table(args.out, ("length", "mean_survival", "sem", "fit"), rows,
                {"epg": res.epg, "spam": res.spam, "seed": args.seed})
    print(f"EPG {res.epg:.3e} (fit +- {res.epg_err:.1e}, bootstrap +- {boot.std(ddof=1):.1e}), "
          f"SPAM {res.spam:.3e}")


if __name__ == "__main__":
    main()
