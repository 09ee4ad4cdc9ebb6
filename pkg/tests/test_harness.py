from pathlib import Path

import pytest
import yaml

from ionbench.harness import ScenarioError, load_scenario, parse_scenario, run, validate
from ionbench.harness.cli import main
from ionbench.harness.tables import read_table, write_table

SCENARIOS = Path(__file__).resolve().parents[1] / "scenarios"


def write(tmp_path, text, name="s.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_empty_file_exit_code(tmp_path, capsys):
    assert main(["validate", "--scenario", write(tmp_path, "")]) == 2
    assert "empty" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["validate", "--scenario", str(tmp_path / "nope.yaml")]) == 2


def test_parse_error_reports_line():
    with pytest.raises(ScenarioError, match=r"s.yaml:3"):
        parse_scenario("kind: rb\nseed: 1\noutput_dir: a: b\nparams: {}\n", "s.yaml")


def test_missing_seed_names_field():
    with pytest.raises(ScenarioError, match="seed"):
        parse_scenario("kind: rb\nparams:\n  lengths: [1, 2, 3]\n  per_length: 2\n", "s.yaml")


def test_unknown_field_and_kind():
    with pytest.raises(ScenarioError, match="colour"):
        parse_scenario("kind: rb\nseed: 1\ncolour: red\n")
    with pytest.raises(ScenarioError, match="kind"):
        parse_scenario("kind: teleport\nseed: 1\n")


def test_missing_required_param():
    with pytest.raises(ScenarioError, match="per_length"):
        parse_scenario("kind: rb\nseed: 1\nparams:\n  lengths: [1, 2, 3]\n")


def test_hash_ignores_formatting():
    a = parse_scenario("kind: pumping-bound\nseed: 1\nparams: {t_b: 0.001, l: 0.8, t_bar_b: 0.0}\n")
    b = parse_scenario("seed: 1\nkind: pumping-bound\nparams:\n  l: 0.8\n  t_b: 1.0e-3\n  t_bar_b: 0.0\n")
    assert a.hash() == b.hash()
    assert a.with_overrides(seed=2).hash() != a.hash()


def test_closure_violation_flagged(tmp_path, capsys):
    text = """kind: error-budget
seed: 1
params:
  gate: {t_gate_us: 30, delta_khz: 40, omega_khz: 50, rise_fall_us: 0}
"""
    assert main(["validate", "--scenario", write(tmp_path, text)]) == 1
    assert "closure" in capsys.readouterr().out


def test_small_n_max_warns(tmp_path, capsys):
    text = """kind: error-budget
seed: 1
params:
  gate: {t_gate_us: 30, n_max: 4}
  noise: {base: none, nbar_S: 0.05}
"""
    assert main(["validate", "--scenario", write(tmp_path, text)]) == 0
    assert "n_max" in capsys.readouterr().out


def test_validate_rb_lengths(tmp_path):
    sc = parse_scenario("kind: rb\nseed: 1\nparams: {lengths: [1, 1, 2], per_length: 3}\n")
    assert validate(sc)["errors"]


def test_bundled_scenarios_validate():
    for path in sorted(SCENARIOS.glob("*.yaml")):
        assert validate(load_scenario(path))["errors"] == [], path.name


def test_pumping_run_and_report(tmp_path, capsys):
    out = tmp_path / "pump"
    code = main(["run", "--scenario", str(SCENARIOS / "pumping.yaml"), "--out", str(out)])
    assert code == 0
    man = yaml.safe_load((out / "manifest.yaml").read_text())
    assert man["status"] == "ok" and man["seed"] == 7
    assert set(man["outputs"]) <= {p.name for p in out.iterdir()}
    assert main(["report", "--out", str(out)]) == 0
    assert "pumping-bound" in capsys.readouterr().out


def test_rb_run_is_deterministic(tmp_path):
    text = """kind: rb
seed: 5
params:
  lengths: [1, 10, 100, 1000]
  per_length: 5
  bootstrap: 0
"""
    outs = []
    for name in ("a", "b"):
        sc = parse_scenario(text).with_overrides(output_dir=str(tmp_path / name))
        man = run(sc)
        outs.append({f: (tmp_path / name / f).read_bytes() for f in man.outputs})
    assert outs[0] == outs[1] and outs[0]


def test_tomography_tables_independent_of_threads(tmp_path):
    text = """kind: tomography-synthetic
seed: 2
params:
  fidelity: 0.99
  trials: 1
  shots: 3000
  resamples: 100
"""
    got = []
    for threads in (1, 2):
        sc = parse_scenario(text).with_overrides(output_dir=str(tmp_path / str(threads)))
        man = run(sc, threads=threads)
        got.append({f: (tmp_path / str(threads) / f).read_bytes() for f in man.outputs})
    assert got[0] == got[1]


def test_error_budget_rows(tmp_path):
    sc = parse_scenario("kind: error-budget\nseed: 1\nparams: {shots: 300}\n")
    sc = sc.with_overrides(output_dir=str(tmp_path))
    run(sc)
    meta, cols, rows = read_table(tmp_path / "budget.tsv")
    assert [r[0] for r in rows][-1] == "total" and len(rows) == 10
    assert {"seed", "scenario_hash"} <= set(cols)
    assert meta["seed"] == "1"


def test_tolerance_override(tmp_path, capsys):
    code = main(["run", "--scenario", str(SCENARIOS / "pumping.yaml"), "--out", str(tmp_path),
                 "--tolerance", "relative=0.5", "--seed", "9"])
    assert code == 0
    man = yaml.safe_load((tmp_path / "manifest.yaml").read_text())
    assert man["tolerances"]["relative"] == 0.5 and man["seed"] == 9
    with pytest.raises(SystemExit):
        main(["run", "--scenario", "x.yaml", "--tolerance", "oops"])


def test_table_round_trip(tmp_path):
    write_table(tmp_path / "t.tsv", ("a", "b"), [(1, 0.1), (2, True)], {"k": "v"}, {"seed": 3})
    meta, cols, rows = read_table(tmp_path / "t.tsv")
    assert meta == {"k": "v"} and cols == ["a", "b", "seed"]
    assert rows == [["1", "0.1", "3"], ["2", "true", "3"]]
    with pytest.raises(ValueError):
        write_table(tmp_path / "u.tsv", ("a",), [(1, 2)])
