"""Scenario execution, validation and run manifests."""

import platform
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import scipy
import yaml

import ionbench

from .. import rb
from ..fidelity import ms_avg_fidelity, ms_ideal, read_channel, s_terms
from ..hilbert import TWO_PI, suggest_n_max
from ..msgate import GateConfig, NoiseModel, gate_error_monte_carlo, sweep_detuning, sweep_duration
from ..tomography import HistogramSet, Optics, analyze, pumping_bound, pumping_study, synthetic_trial
from ..tomography.io import read_histogram_set, write_report
from ..tomography.systematics import bell_fidelity_lower_bound
from .scenario import ScenarioError
from .tables import write_table

# reference values (x 1e-4) and whether the value is an upper bound
REFERENCE_BUDGET = {
    "raman": ("Spontaneous emission (Raman)", 4.0, False),
    "rayleigh": ("Spontaneous emission (Rayleigh)", 1.7, False),
    "mode_freq": ("Motional mode frequency fluctuations", 1.0, False),
    "rabi": ("Rabi rate fluctuations", 1.0, False),
    "dephasing": ("Laser coherence", 0.2, False),
    "qubit": ("Qubit coherence", 0.1, True),
    "heating": ("Stretch-mode heating", 0.3, False),
    "lamb_dicke": ("Lamb-Dicke approximation", 0.2, False),
    "off_resonant": ("Off-resonant coupling", 0.1, True),
}
DEFAULT_TOLERANCES = {"relative": 0.3, "absolute": 0.3e-4, "interval": 4e-4}


@dataclass
class RunManifest:
    scenario_hash: str
    seed: int
    kind: str
    tolerances: dict
    versions: dict
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)
    violations: list = field(default_factory=list)

    @property
    def ok(self):
        return not self.violations

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["outputs"] = [str(p) for p in self.outputs]
        d["status"] = "ok" if self.ok else "violations"
        return d


def versions():
    return {"ionbench": ionbench.__version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# parameter blocks ----------------------------------------------------------------

def gate_config(block):
    """GateConfig from a scenario gate block (us, kHz)."""
    try:
        t_gate = 1e-6 * float(block["t_gate_us"])
        rise = 1e-6 * float(block.get("rise_fall_us", 0.0))
        eta = float(block.get("eta_S", 0.19))
        loops = int(block.get("loops", 1))
    except KeyError as exc:
        raise ScenarioError(f"field 'params.gate.{exc.args[0]}': required") from None
    if "delta_khz" in block or "omega_khz" in block:
        return GateConfig(delta=TWO_PI * 1e3 * float(block["delta_khz"]),
                          omega=TWO_PI * 1e3 * float(block["omega_khz"]), eta_S=eta, t_gate=t_gate,
                          rise_fall=rise, loops=loops, closed=bool(block.get("closed", True)),
                          maximal=bool(block.get("maximal", True)),
                          phases=tuple(block.get("phases", (0.0, 0.0, 0.0, 0.0))))
    return GateConfig.ideal(t_gate=t_gate, eta_S=eta, loops=loops, rise_fall=rise)


def noise_model(spec):
    """NoiseModel from 'reference_budget', 'none' or {base: ..., field: value}."""
    if isinstance(spec, str):
        spec = {"base": spec}
    spec = dict(spec or {})
    base = spec.pop("base", "none")
    if base == "reference_budget":
        model = NoiseModel.reference_budget()
    elif base == "none":
        model = NoiseModel()
    else:
        raise ScenarioError(f"field 'params.noise.base': unknown base {base!r}")
    known = {f.name for f in fields(NoiseModel)}
    for k in spec:
        if k not in known:
            raise ScenarioError(f"field 'params.noise.{k}': not a noise parameter")
    return model.with_(**{k: float(v) for k, v in spec.items()})


def optics(block):
    block = block or {}
    depump = block.get("depump_ms", 50.0)
    return Optics(mean_both=float(block.get("mean_both", 60.0)), mean_one=float(block.get("mean_one", 32.0)),
                  mean_dark=float(block.get("mean_dark", 2.0)),
                  depump_time=None if depump is None else 1e-3 * float(depump),
                  window=1e-6 * float(block.get("window_us", 330.0)))


# kind handlers: each returns (list of (name, columns, rows, meta), violations) ----

def _budget(sc, tol, workers):
    p = sc.params
    cfg, model = gate_config(p["gate"]), noise_model(p["noise"])
    out = gate_error_monte_carlo(cfg, model, shots=int(p["shots"]), seed=sc.seed,
                                 tolerance=tol.get("mc_std_error"))
    parts = out.breakdown
    rows, bad = [], []
    for key, (label, ref, upper) in REFERENCE_BUDGET.items():
        value = parts.get(key, 0.0)
        ref = ref * 1e-4
        ok = value <= ref if upper else abs(value - ref) <= max(tol["relative"] * ref, tol["absolute"])
        rows.append((key, label, value, ref, "upper" if upper else "value", ok))
        if not ok:
            bad.append(f"{key}: {value:.3e} vs {ref:.1e}")
    total = out.total_error
    ok = 4e-4 <= total <= 1.2e-3
    rows.append(("total", "Total", total, 8e-4, "value", ok))
    if not ok:
        bad.append(f"total {total:.3e} outside [4e-4, 1.2e-3]")
    cols = ("source", "label", "error", "reference", "reference_kind", "within_tolerance")
    meta = {"shots": out.shots, "std_error": out.std_error, "bell_fidelity": out.bell_fidelity,
            "apparent_fidelity": out.apparent_fidelity}
    return [("budget.tsv", cols, rows, meta)], bad


def _sweep_tables(points, x_name, scale):
    labels = sorted({k for pt in points for k, _ in pt.components})
    cols = (x_name, "total", "std_error") + tuple(labels)
    rows = [(round(pt.x * scale, 9), pt.error, pt.std_error) + tuple(pt.component(k) for k in labels) for pt in points]
    plot = [("total", round(pt.x * scale, 9), pt.error, pt.std_error) for pt in points]
    plot += [(k, round(pt.x * scale, 9), pt.component(k), 0.0) for k in labels for pt in points]
    return [("sweep.tsv", cols, rows, {}), ("plot.tsv", ("series", "x", "y", "sigma"), plot, {"x": x_name})]


def _sweep_detuning(sc, tol, workers):
    p = sc.params
    g = p["gate"]
    dets = [TWO_PI * 1e9 * float(x) for x in p["detunings_ghz"]]
    pts = sweep_detuning(dets, noise_model(p["noise"]), t_gate=1e-6 * g["t_gate_us"],
                         rise_fall=1e-6 * g.get("rise_fall_us", 0.0), shots=int(p["shots"]), seed=sc.seed)
    return _sweep_tables(pts, "detuning_ghz", 1.0 / (TWO_PI * 1e9)), []


def _sweep_duration(sc, tol, workers):
    p = sc.params
    g = p["gate"]
    ts = [1e-6 * float(t) for t in p["t_gates_us"]]
    pts = sweep_duration(ts, noise_model(p["noise"]), rise_fall=1e-6 * g.get("rise_fall_us", 0.0),
                         shots=int(p["shots"]), seed=sc.seed, loops=int(g.get("loops", 1)))
    return _sweep_tables(pts, "t_gate_us", 1e6), []


def _fit_row(a, truth=None):
    r = a.result
    row = (r.fidelity, r.ci[0], r.ci[1], r.lr_z, r.lr_pvalue, r.iterations, r.converged, a.bootstrap.failures)
    if truth is not None:
        row += (bool(r.ci[0] <= truth <= r.ci[1]),)
    return row


_FIT_COLS = ("fidelity", "ci_low", "ci_high", "lr_z", "lr_pvalue", "iterations", "converged", "bootstrap_failures")


def _tomo_synthetic(sc, tol, workers):
    p = sc.params
    truth = float(p["fidelity"])
    seeds = np.random.SeedSequence(sc.seed).generate_state(int(p["trials"]))
    rows, bad = [], []
    for i, s in enumerate(seeds):
        a = synthetic_trial(truth, optics(p.get("optics")), int(p["shots"]), int(s), int(p["resamples"]),
                            workers=workers)
        rows.append((i, int(s)) + _fit_row(a, truth))
        if not a.result.converged:
            bad.append(f"trial {i}: fit did not converge")
    cover = float(np.mean([r[-1] for r in rows]))
    return [("trials.tsv", ("trial", "trial_seed") + _FIT_COLS + ("covers_truth",), rows,
             {"true_fidelity": truth, "coverage": cover})], bad


def _tomo_fit(sc, tol, workers, out_dir):
    p = sc.params
    path = Path(p["input_dir"])
    if not path.is_absolute() and sc.source:
        path = Path(sc.source).parent / path
    a = analyze(HistogramSet(*read_histogram_set(path)), resamples=int(p["resamples"]), seed=sc.seed, train_frac=float(p["train_fraction"]),
                workers=workers)
    write_report(out_dir / "fit_report.yaml", a.result)
    bad = [] if a.result.converged else ["ML fit did not converge"]
    return [("fit.tsv", _FIT_COLS, [_fit_row(a)], {"bin_edges": " ".join(map(str, a.binning.edges))})], bad


def _rb(sc, tol, workers, out_dir):
    p = sc.params
    noise = rb.RBNoise(pulse_error=float(p["pulse_error"]), rabi_frac_rms=float(p["rabi_frac_rms"]),
                       spam=float(p["spam"]), coherence_time=p.get("coherence_time_s"))
    fixed_b = p.get("fixed_b", 0.5)
    shots = p.get("shots")
    res, seqs, surv = rb.run_rb(p["lengths"], int(p["per_length"]), noise, sc.seed,
                                None if shots is None else int(shots), None if fixed_b is None else float(fixed_b))
    by = rb.group_by_length(seqs, surv)
    boot = rb.bootstrap_epg(by, int(p["bootstrap"]), sc.seed, fixed_b) if p.get("bootstrap") else np.array([])
    rb.write_sequences(out_dir / "sequences.tsv", seqs)
    rb.write_fit_report(out_dir / "rb_fit.yaml", res, sc.seed)
    a, b, pp = res.fit
    per_len = [(int(l), m, s, rb.decay(l, a, b, pp), r)
               for l, m, s, r in zip(res.lengths, res.mean_survival, res.sem, res.residuals)]
    surv_rows = [(s.length, i, s.expected, s.pulse_count(), v) for i, (s, v) in enumerate(zip(seqs, surv))]
    meta = {"epg": res.epg, "epg_err": res.epg_err, "spam": res.spam, "spam_err": res.spam_err,
            "epg_bootstrap_std": float(np.std(boot, ddof=1)) if len(boot) > 1 else "n/a"}
    bad = [] if 0 < pp <= 1 else [f"fitted p = {pp} outside (0, 1]"]
    return [("survival.tsv", ("length", "sequence", "expected", "pulses", "survival"), surv_rows, {}),
            ("decay.tsv", ("length", "mean_survival", "sem", "fit", "residual"), per_len, meta)], bad


def _favg(sc, tol, workers):
    p = sc.params
    cfg = gate_config(p["gate"])
    ideal = ms_ideal(cfg)
    if p.get("channel_file"):
        path = Path(p["channel_file"])
        if not path.is_absolute() and sc.source:
            path = Path(sc.source).parent / path
        sp, sm = s_terms(read_channel(path), ideal)
        rows = [("s_plus", sp), ("s_minus", sm), ("f_avg", 1.2 * sp + 0.6 * sm - 0.2)]
        return [("favg.tsv", ("quantity", "value"), rows, {"channel": path.name})], []
    model = noise_model(p["noise"])
    f, sp, sm = ms_avg_fidelity(cfg, model, int(p["shots"]), sc.seed, p.get("mode", "independent"))
    bell = gate_error_monte_carlo(cfg, model, int(p["shots"]), sc.seed, breakdown=False).apparent_fidelity
    rows = [("s_plus", sp), ("s_minus", sm), ("f_avg", f), ("bell_fidelity", bell)]
    bad = [] if abs(f - bell) <= tol["interval"] else [f"F_avg {f:.6f} outside Bell fidelity {bell:.6f} +- {tol['interval']}"]
    return [("favg.tsv", ("quantity", "value"), rows, {"mode": p.get("mode", "independent")})], bad


def _pumping(sc, tol, workers):
    p = sc.params
    eps = pumping_bound(float(p["t_b"]), float(p["l"]), float(p["t_bar_b"]))
    lower = bell_fidelity_lower_bound(float(p["ml_fidelity"]), eps)
    tables = [("bound.tsv", ("quantity", "value"),
               [("epsilon_bound", eps), ("ml_fidelity", float(p["ml_fidelity"])), ("fidelity_lower_bound", lower)], {})]
    if p.get("study_epsilons"):
        st = pumping_study(p["study_epsilons"])
        rows = list(zip(st.epsilon, st.true_fidelity, st.ml_fidelity, st.lower_bound))
        tables.append(("study.tsv", ("epsilon", "true_fidelity", "ml_fidelity", "lower_bound"), rows, {}))
        if not st.bound_holds():
            return tables, ["lower bound exceeds the true fidelity"]
    return tables, []


HANDLERS = {
    "error-budget": _budget,
    "gate-sweep-detuning": _sweep_detuning,
    "gate-sweep-duration": _sweep_duration,
    "tomography-synthetic": _tomo_synthetic,
    "tomography-fit": _tomo_fit,
    "rb": _rb,
    "favg": _favg,
    "pumping-bound": _pumping,
}
_NEEDS_DIR = {"tomography-fit", "rb"}


def run(scenario, threads=1):
    """Execute ``scenario``; writes tables and manifest.yaml under its output_dir."""
    t0 = time.perf_counter()
    out_dir = Path(scenario.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(scenario.tolerances)
    handler = HANDLERS[scenario.kind]
    try:
        if scenario.kind in _NEEDS_DIR:
            tables, bad = handler(scenario, tol, threads, out_dir)
        else:
            tables, bad = handler(scenario, tol, threads)
    except ScenarioError:
        raise
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"{scenario.kind}: bad or missing parameter {exc}") from exc
    except Exception as exc:
        raise RuntimeError(f"{scenario.kind} scenario (hash {scenario.hash()}): {exc}") from exc
    prov = {"seed": scenario.seed, "scenario_hash": scenario.hash()}
    outputs = []
    for name, cols, rows, meta in tables:
        head = {"kind": scenario.kind, **prov, **meta}
        outputs.append(write_table(out_dir / name, cols, rows, head, prov))
    # files the handler wrote itself (reports, sequence lists)
    outputs += [p for p in out_dir.iterdir() if p.is_file() and p.name != "manifest.yaml"]
    man = RunManifest(scenario.hash(), scenario.seed, scenario.kind, tol, versions(),
                      round(time.perf_counter() - t0, 3), sorted({p.name for p in outputs}), bad)
    d = man.to_dict()
    d["params"] = scenario.params
    (out_dir / "manifest.yaml").write_text(yaml.safe_dump(d, sort_keys=False))
    return man


def validate(scenario):
    """{"errors": [...], "warnings": [...]} without running anything."""
    errors, warnings = [], []
    p = scenario.params
    if "gate" in p:
        try:
            cfg = gate_config(p["gate"])
            errors += [f"gate {v}" for v in cfg.violations()]
        except (ScenarioError, ValueError) as exc:
            errors.append(str(exc))
            cfg = None
        nbar = 0.0
        if "noise" in p:
            try:
                nbar = noise_model(p["noise"]).nbar_S
            except (ScenarioError, ValueError) as exc:
                errors.append(str(exc))
        n_max = p["gate"].get("n_max")
        if n_max is not None and cfg is not None:
            need = suggest_n_max(nbar, displacement=1.0 / np.sqrt(cfg.loops))
            if int(n_max) < need:
                warnings.append(f"n_max = {n_max} too small for nbar = {nbar}; suggest n_max >= {need}")
    if scenario.kind == "rb":
        if len(set(p["lengths"])) < 3:
            errors.append("rb needs at least 3 distinct lengths")
        if int(p["per_length"]) < 1:
            errors.append("per_length must be >= 1")
    if scenario.kind == "pumping-bound" and not float(p["l"]) > float(p["t_bar_b"]):
        errors.append("pumping bound needs l > t_bar_b")
    if scenario.kind == "tomography-synthetic":
        try:
            optics(p.get("optics"))
        except ValueError as exc:
            errors.append(f"optics: {exc}")
        if not 0.0 <= float(p["fidelity"]) <= 1.0:
            errors.append("fidelity must lie in [0, 1]")
    return {"errors": errors, "warnings": warnings}
