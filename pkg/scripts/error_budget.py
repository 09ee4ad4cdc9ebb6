"""Error budget of the shaped 30 us gate at the default Raman detuning."""

import argparse

from ionbench.harness.runner import REFERENCE_BUDGET
from ionbench.msgate import GateConfig, NoiseModel, gate_error_monte_carlo
from ionbench.msgate.config import DEFAULT_RISE_FALL


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--shots", type=int, default=10000)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    cfg = GateConfig.ideal(rise_fall=DEFAULT_RISE_FALL)
    out = gate_error_monte_carlo(cfg, NoiseModel.reference_budget(), shots=args.shots, seed=args.seed)
    print(f"{'source':<40}{'simulated':>12}{'reference':>12}")
    for key, (label, ref, upper) in REFERENCE_BUDGET.items():
        bound = "<" if upper else ""
        print(f"{label:<40}{out.breakdown.get(key, 0.0):>12.2e}{bound + format(ref * 1e-4, '.1e'):>12}")
    print(f"{'total':<40}{out.total_error:>12.2e}{'8e-04':>12}")
    print(f"Bell fidelity {out.bell_fidelity:.6f}, leaked read as dark {out.apparent_fidelity:.6f}")


if __name__ == "__main__":
    main()
