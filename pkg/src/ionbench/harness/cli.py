"""Command line: python -m ionbench {run,validate,report} --scenario FILE."""

import argparse
import sys
from pathlib import Path

import yaml

from .runner import run, validate
from .scenario import ScenarioError, load_scenario
from .tables import read_table


def _tolerance(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("expected NAME=VALUE")
    try:
        return key.strip(), float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{value!r} is not a number") from None


def build_parser():
    ap = argparse.ArgumentParser(prog="ionbench")
    ap.add_argument("verb", choices=("run", "validate", "report"))
    ap.add_argument("--scenario", help="scenario file (run, validate)")
    ap.add_argument("--seed", type=int, help="override the scenario seed")
    ap.add_argument("--out", help="output directory (run, report)")
    ap.add_argument("--threads", type=int, default=1, help="worker processes for bootstrap fits")
    ap.add_argument("--tolerance", type=_tolerance, action="append", default=[], metavar="NAME=VALUE")
    return ap


def _load(args):
    if not args.scenario:
        raise ScenarioError("--scenario is required")
    return load_scenario(args.scenario).with_overrides(args.seed, args.out, dict(args.tolerance))


def _report(out):
    out = Path(out)
    man = out / "manifest.yaml"
    if not man.exists():
        raise ScenarioError(f"{out}: no manifest.yaml")
    d = yaml.safe_load(man.read_text())
    print(f"{d['kind']}  hash {d['scenario_hash']}  seed {d['seed']}  status {d['status']}  "
          f"{d['wall_time']} s")
    for v in d["violations"]:
        print(f"  violation: {v}")
    for name in d["outputs"]:
        if name.endswith(".tsv"):
            meta, cols, rows = read_table(out / name)
            print(f"{name}: {len(rows)} rows; columns {', '.join(cols)}")
    return 0 if d["status"] == "ok" else 1


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "report":
            if not args.out:
                raise ScenarioError("--out is required for report")
            return _report(args.out)
        scenario = _load(args)
        if args.verb == "validate":
            rep = validate(scenario)
            for e in rep["errors"]:
                print(f"error: {e}")
            for w in rep["warnings"]:
                print(f"warning: {w}")
            if not rep["errors"]:
                print("ok")
            return 1 if rep["errors"] else 0
        man = run(scenario, threads=args.threads)
        for v in man.violations:
            print(f"violation: {v}", file=sys.stderr)
        print(f"{scenario.kind}: {len(man.outputs)} files in {scenario.output_dir} ({man.wall_time} s)")
        return 0 if man.ok else 1
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
