"""Command line front end.

Verbs:
  validate   parse and cross-check a config, print the resolved process
  simulate   run one Monte Carlo ensemble, write ensemble.csv
  solve      run the stationary/evolution solvers, write field CSVs
  verify     run the requested duality checks, write report.json
  report     re-print the summary table of an existing report.json

Exit codes: 0 all checks pass (or hit the infinite-mean regime),
1 a check failed, 2 configuration error, 3 I/O error.

All outputs are deterministic functions of (config, seed): CSV floats
are written with repr (shortest round-trip form), JSON keys are sorted,
line endings are LF, and no timestamps or timings are recorded, so a
rerun of the same config byte-reproduces every artifact.  --threads
changes only the worker count, never the streams, so it cannot change
any output either.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import numeric, rng
from .analytic import is_recurrent
from .duality import (
    FAIL,
    INF_REGIME,
    MEAN_SE_LIMIT,
    RATIO_BAND,
    DualityReport,
    check_distribution_duality,
    check_mean_duality,
    check_proposition,
    check_theorem1_residual,
    infinite_mean_regime,
)
from .model import (
    GridSpec,
    InvalidSpecError,
    ProcessSpec,
    SimConfig,
    grid_violations,
    sim_config_violations,
    spec_violations,
)
from .simulate import (
    KIND_HIT,
    KIND_LABELS,
    CensoringBiasError,
    default_escape_radius,
    run_ensemble,
)

REPORT_SCHEMA = "fpduality-report-v1"

_CHECK_NAMES = ("distribution", "mean", "theorem1", "proposition")
_CHECK_MODES = ("assert-pass", "expect-fail")
_MEAN_ENGINES = ("analytic", "simulate", "numeric")


class ConfigError(Exception):
    """Invalid configuration; .messages lists every problem found."""

    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("; ".join(self.messages))


@dataclass(frozen=True)
class ExperimentPlan:
    """A parsed config: everything a verb needs except the output directory."""

    spec: ProcessSpec
    simulation: dict
    grid: GridSpec
    checks: tuple
    check_mode: str
    mean_engine: str
    theorem1: dict
    proposition: dict
    out_dir: str = None


def _take(raw, context, defaults, errors):
    """Defaults overlaid with raw, rejecting unknown keys."""
    if raw is None:
        return dict(defaults)
    if not isinstance(raw, dict):
        errors.append(f"{context}: expected a JSON object")
        return dict(defaults)
    out = dict(defaults)
    for key, value in raw.items():
        if key not in defaults:
            errors.append(f"{context}.{key}: unknown field")
        else:
            out[key] = value
    return out


def _coerce(out, context, key, kind, errors, optional=False):
    value = out[key]
    if value is None and optional:
        return
    try:
        if kind is int:
            if isinstance(value, bool) or int(value) != value:
                raise ValueError
            out[key] = int(value)
        elif kind is float:
            if isinstance(value, bool):
                raise ValueError
            out[key] = float(value)
        elif kind is bool:
            if not isinstance(value, bool):
                raise ValueError
        else:
            raise AssertionError(kind)
    except (TypeError, ValueError):
        errors.append(f"{context}.{key}: expected {kind.__name__}, got {value!r}")


_PROCESS_DEFAULTS = {
    "d": 1,
    "diffusion": 1.0,
    "drift_strength": 1.0,
    "drift_sign": 1,
    "target_radius": 0.0,
    "start_radius": 1.0,
}

_SIMULATION_DEFAULTS = {
    "n_paths": 10000,
    "dt": 1e-3,
    "t_max": 10.0,
    "r_escape": None,
    "seed": 0,
    "bridge_correction": True,
}

_GRID_DEFAULTS = {
    "r_max": None,
    "n_cells": 512,
    "dt": 0.01,
    "t_end": 1.0,
}

_THEOREM1_DEFAULTS = {
    "base_cells": 96,
    "base_dt": 1.0 / 32.0,
    "levels": 4,
    "r_max": None,
    "t_eval": 1.0,
    "window": None,
    "startup_halfsteps": 2,
    "perturb_drift": False,
}

_PROPOSITION_DEFAULTS = {
    "mode": "stationary",
    "diffusion": None,
    "sigma": None,
    "levels": None,
    "domain": None,
    "x_ref": None,
    "precise_level": None,
    "precise_dps": 50,
    "inject_linear_drift": False,
    "t_eval": 0.5,
    "startup_halfsteps": 2,
}


def parse_config(path):
    """Read a JSON config into an ExperimentPlan.

    Unknown keys anywhere are rejected (strict schema).  Absent sections
    get the documented defaults: the canonical 1D process, 10^4 paths at
    dt = 1e-3, a 512-cell grid reaching ten start-distances out, no
    checks.  All structural cross-validation from `model` is applied;
    every violation is reported, not just the first.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"]) from exc

    errors = []
    top = _take(raw, "config", {
        "process": None,
        "simulation": None,
        "grid": None,
        "checks": None,
        "check_mode": "assert-pass",
        "mean_engine": "analytic",
        "theorem1": None,
        "proposition": None,
    }, errors)

    proc = _take(top["process"], "process", _PROCESS_DEFAULTS, errors)
    for key, kind in (
        ("d", int), ("diffusion", float), ("drift_strength", float),
        ("drift_sign", int), ("target_radius", float), ("start_radius", float),
    ):
        _coerce(proc, "process", key, kind, errors)
    if errors:
        raise ConfigError(errors)
    spec = ProcessSpec(**proc)
    errors.extend(f"process.{msg}" for msg in spec_violations(spec))

    sim = _take(top["simulation"], "simulation", _SIMULATION_DEFAULTS, errors)
    for key, kind in (
        ("n_paths", int), ("dt", float), ("t_max", float), ("seed", int),
        ("bridge_correction", bool),
    ):
        _coerce(sim, "simulation", key, kind, errors)
    _coerce(sim, "simulation", "r_escape", float, errors, optional=True)
    if not errors:
        probe = SimConfig(
            n_paths=sim["n_paths"], dt=sim["dt"], t_max=sim["t_max"],
            r_escape=sim["r_escape"] if sim["r_escape"] is not None
            else spec.start_radius + 1.0,
            seed=sim["seed"], bridge_correction=sim["bridge_correction"],
        )
        errors.extend(f"simulation.{msg}" for msg in sim_config_violations(spec, probe))

    grd = _take(top["grid"], "grid", _GRID_DEFAULTS, errors)
    if grd["r_max"] is None:
        grd["r_max"] = spec.target_radius + 10.0 * spec.distance_to_target()
    for key, kind in (("r_max", float), ("n_cells", int), ("dt", float), ("t_end", float)):
        _coerce(grd, "grid", key, kind, errors)
    grid = None
    if not errors:
        grid = GridSpec(**grd)
        errors.extend(f"grid.{msg}" for msg in grid_violations(spec, grid))

    checks = top["checks"] if top["checks"] is not None else []
    if not isinstance(checks, list):
        errors.append("checks: expected a list of check names")
        checks = []
    for name in checks:
        if name not in _CHECK_NAMES:
            errors.append(f"checks: unknown check {name!r} (known: {', '.join(_CHECK_NAMES)})")
    if top["check_mode"] not in _CHECK_MODES:
        errors.append(f"check_mode: must be one of {', '.join(_CHECK_MODES)}")
    if top["mean_engine"] not in _MEAN_ENGINES:
        errors.append(f"mean_engine: must be one of {', '.join(_MEAN_ENGINES)}")

    th = _take(top["theorem1"], "theorem1", _THEOREM1_DEFAULTS, errors)
    for key, kind in (
        ("base_cells", int), ("base_dt", float), ("levels", int),
        ("t_eval", float), ("startup_halfsteps", int), ("perturb_drift", bool),
    ):
        _coerce(th, "theorem1", key, kind, errors)
    _coerce(th, "theorem1", "r_max", float, errors, optional=True)
    if th["r_max"] is None:
        th["r_max"] = spec.target_radius + 6.0
    if th["window"] is not None and (
        not isinstance(th["window"], list) or len(th["window"]) != 2
    ):
        errors.append("theorem1.window: expected [lo, hi]")
    if th["levels"] < 2 and "theorem1" in checks:
        errors.append("theorem1.levels: need at least 2 refinement levels")

    prop = _take(top["proposition"], "proposition", _PROPOSITION_DEFAULTS, errors)
    if prop["mode"] not in ("stationary", "survival"):
        errors.append("proposition.mode: must be 'stationary' or 'survival'")
    if prop["diffusion"] is None:
        prop["diffusion"] = spec.diffusion
    if prop["sigma"] is None:
        prop["sigma"] = spec.drift_sign * spec.drift_strength
    if prop["domain"] is None:
        prop["domain"] = [0.0, 1.0] if prop["mode"] == "stationary" else [0.0, 8.0]
    if prop["levels"] is None:
        if prop["mode"] == "stationary":
            prop["levels"] = [256, 512, 1024, 2048]
        else:
            prop["levels"] = [[128, 1.0 / 64.0], [256, 1.0 / 128.0], [512, 1.0 / 256.0]]
    for key, kind in (("diffusion", float), ("sigma", float), ("t_eval", float),
                      ("startup_halfsteps", int), ("precise_dps", int),
                      ("inject_linear_drift", bool)):
        _coerce(prop, "proposition", key, kind, errors)
    _coerce(prop, "proposition", "precise_level", int, errors, optional=True)
    _coerce(prop, "proposition", "x_ref", float, errors, optional=True)
    if not (isinstance(prop["domain"], list) and len(prop["domain"]) == 2):
        errors.append("proposition.domain: expected [lo, hi]")

    if errors:
        raise ConfigError(errors)
    return ExperimentPlan(
        spec=spec,
        simulation=sim,
        grid=grid,
        checks=tuple(checks),
        check_mode=top["check_mode"],
        mean_engine=top["mean_engine"],
        theorem1=th,
        proposition=prop,
    )


def _sim_config_for(spec, sim, label=None):
    """SimConfig for one signed process; fills the escape-radius default.

    When the plan runs both signs (the duality checks), each sign gets
    its own stream seed derived from the base seed and its own default
    escape radius (inward runs are horizon-censored, not escape-censored,
    so their default is just a wide box).
    """
    seed = sim["seed"] if label is None else rng.derive_stream_seed(sim["seed"], label)
    r_escape = sim["r_escape"]
    if r_escape is None:
        r_escape = default_escape_radius(spec)
    config = SimConfig(
        n_paths=sim["n_paths"],
        dt=sim["dt"],
        t_max=sim["t_max"],
        r_escape=r_escape,
        seed=seed,
        bridge_correction=sim["bridge_correction"],
    )
    errors = sim_config_violations(spec, config)
    if errors:
        raise ConfigError([f"simulation.{msg}" for msg in errors])
    return config


def _fmt(x):
    return repr(float(x))


def _write_ensemble_csv(path, ens):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("path_index,outcome,tau\n")
        for i in range(ens.n_paths):
            kind = ens.kinds[i]
            tau = _fmt(ens.taus[i]) if kind == KIND_HIT else ""
            fh.write(f"{i},{KIND_LABELS[kind]},{tau}\n")


def _write_field_csv(path, field):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("r,value\n")
        for r, value in zip(field.grid, field.values):
            fh.write(f"{_fmt(r)},{_fmt(value)}\n")


def _write_json(path, doc):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ensure_out(plan):
    if plan.out_dir is None:
        raise ConfigError(["--out: an output directory is required for this verb"])
    os.makedirs(plan.out_dir, exist_ok=True)
    return plan.out_dir


def _resolved_doc(plan, derived=None):
    doc = {
        "process": {
            "d": plan.spec.d,
            "diffusion": plan.spec.diffusion,
            "drift_strength": plan.spec.drift_strength,
            "drift_sign": plan.spec.drift_sign,
            "target_radius": plan.spec.target_radius,
            "start_radius": plan.spec.start_radius,
        },
        "simulation": dict(plan.simulation),
        "grid": {
            "r_max": plan.grid.r_max,
            "n_cells": plan.grid.n_cells,
            "dt": plan.grid.dt,
            "t_end": plan.grid.t_end,
        },
        "checks": list(plan.checks),
        "check_mode": plan.check_mode,
        "mean_engine": plan.mean_engine,
        "theorem1": dict(plan.theorem1),
        "proposition": dict(plan.proposition),
    }
    if derived:
        doc["derived"] = derived
    return doc


def _theorem1_args(plan):
    th = plan.theorem1
    grids = [
        GridSpec(
            r_max=th["r_max"],
            n_cells=th["base_cells"] * 2 ** k,
            dt=th["base_dt"] / 2 ** k,
            t_end=th["t_eval"] + th["base_dt"],
        )
        for k in range(th["levels"])
    ]
    perturb = None
    if th["perturb_drift"]:
        a = plan.spec.target_radius

        def perturb(r):
            return 1.0 + 0.5 * np.sin(r - a)

    window = tuple(th["window"]) if th["window"] is not None else None
    return grids, window, perturb


def _proposition_args(plan):
    prop = plan.proposition
    if prop["mode"] == "stationary":
        levels = tuple(int(n) for n in prop["levels"])
    else:
        levels = tuple((int(n), float(dt)) for n, dt in prop["levels"])
    injected = None
    if prop["inject_linear_drift"]:
        injected = lambda x: x
    return dict(
        diffusion=prop["diffusion"],
        sigma=prop["sigma"],
        mode=prop["mode"],
        levels=levels,
        domain=(float(prop["domain"][0]), float(prop["domain"][1])),
        x_ref=prop["x_ref"],
        sigma_injected=injected,
        precise_level=prop["precise_level"],
        precise_dps=prop["precise_dps"],
        t_eval=prop["t_eval"],
        startup_halfsteps=prop["startup_halfsteps"],
    )


def run_experiment(plan):
    """Run the plan's checks, write all artifacts, return the exit code.

    Artifacts in plan.out_dir: ensemble_plus.csv / ensemble_minus.csv
    when ensembles were needed, report.json (the DualityReport),
    resolved_config.json (the plan with every default filled in).  The
    report is written before the exit code is decided, so a failing run
    still leaves the full evidence on disk.
    """
    out = _ensure_out(plan)
    spec = plan.spec
    checks = plan.checks
    derived = {}

    ens_plus = ens_minus = None
    needs_mc = "distribution" in checks or (
        "mean" in checks and plan.mean_engine == "simulate"
    )
    if needs_mc:
        cfg_plus = _sim_config_for(spec.with_sign(+1), plan.simulation, "plus")
        cfg_minus = _sim_config_for(spec.with_sign(-1), plan.simulation, "minus")
        derived["seed_plus"] = cfg_plus.seed
        derived["seed_minus"] = cfg_minus.seed
        derived["r_escape_plus"] = cfg_plus.r_escape
        derived["r_escape_minus"] = cfg_minus.r_escape
        ens_plus = run_ensemble(spec.with_sign(+1), cfg_plus)
        ens_minus = run_ensemble(spec.with_sign(-1), cfg_minus)
        _write_ensemble_csv(os.path.join(out, "ensemble_plus.csv"), ens_plus)
        _write_ensemble_csv(os.path.join(out, "ensemble_minus.csv"), ens_minus)

    ks = mean = theorem1 = proposition = None
    if "distribution" in checks:
        ks = check_distribution_duality(ens_plus, ens_minus)
    if "mean" in checks:
        if plan.mean_engine == "simulate":
            mean = check_mean_duality(
                spec, "simulate", ens_plus=ens_plus, ens_minus=ens_minus
            )
        elif plan.mean_engine == "numeric":
            mean = check_mean_duality(spec, "numeric", grid=plan.grid)
        else:
            mean = check_mean_duality(spec, "analytic")
    if "theorem1" in checks:
        grids, window, perturb = _theorem1_args(plan)
        theorem1 = check_theorem1_residual(
            spec,
            grids,
            t_eval=plan.theorem1["t_eval"],
            window=window,
            startup_halfsteps=plan.theorem1["startup_halfsteps"],
            drift_perturbation=perturb,
        )
    if "proposition" in checks:
        proposition = check_proposition(**_proposition_args(plan))

    report = DualityReport(ks=ks, mean=mean, theorem1=theorem1, proposition=proposition)
    doc = {"schema": REPORT_SCHEMA}
    doc.update(report.to_json_dict())
    _write_json(os.path.join(out, "report.json"), doc)
    _write_json(os.path.join(out, "resolved_config.json"), _resolved_doc(plan, derived))
    print(emit_summary(report))

    flags = report.pass_flags
    if plan.check_mode == "expect-fail":
        ok = all(v == FAIL for v in flags.values())
    else:
        ok = report.all_ok
    return 0 if ok else 1


def _verb_simulate(plan):
    out = _ensure_out(plan)
    config = _sim_config_for(plan.spec, plan.simulation)
    ens = run_ensemble(plan.spec, config)
    _write_ensemble_csv(os.path.join(out, "ensemble.csv"), ens)
    _write_json(
        os.path.join(out, "resolved_config.json"),
        _resolved_doc(plan, {"seed": config.seed, "r_escape": config.r_escape}),
    )
    n_hits = int(ens.hit_mask.sum())
    print(
        f"{ens.n_paths} paths: {n_hits} hit, "
        f"hit fraction {ens.hit_fraction:.6g}"
    )
    return 0


def _fmt_time(t):
    return f"{t:g}"


def _verb_solve(plan):
    out = _ensure_out(plan)
    spec, grid = plan.spec, plan.grid
    hitting = numeric.solve_hitting_ode(spec, grid)
    _write_field_csv(os.path.join(out, "field_hitting_0.csv"), hitting)
    wrote = ["field_hitting_0.csv"]

    if infinite_mean_regime(spec):
        print("mean first-passage time diverges in this drift regime; field skipped")
    else:
        try:
            if is_recurrent(spec):
                mean_field = numeric.solve_mean_fpt_ode(spec, grid)
            else:
                hp = hitting if spec.d <= 2 else numeric.hit_probability_field(spec, grid)
                mean_field = numeric.solve_mean_fpt_ode(
                    spec, grid, conditioned=True, hit_prob=hp
                )
            _write_field_csv(os.path.join(out, "field_mean_0.csv"), mean_field)
            wrote.append("field_mean_0.csv")
        except numeric.MeanDivergesError as exc:
            print(f"mean field skipped: {exc}")

    try:
        survival = numeric.run_survival(spec, grid, [grid.t_end])[0]
    except ValueError as exc:
        raise ConfigError([f"grid.t_end: {exc}"]) from exc
    name = f"field_survival_{_fmt_time(grid.t_end)}.csv"
    _write_field_csv(os.path.join(out, name), survival)
    wrote.append(name)

    _write_json(os.path.join(out, "resolved_config.json"), _resolved_doc(plan))
    print("wrote " + ", ".join(wrote))
    return 0


def _g(x):
    return f"{x:.6g}"


def _summary_table(doc):
    """Fixed-width CHECK/STATISTIC/THRESHOLD/VERDICT table from a report dict."""
    flags = doc.get("pass_flags", {})
    if not flags:
        return "no checks requested"
    rows = [("CHECK", "STATISTIC", "THRESHOLD", "VERDICT")]
    if "distribution" in flags:
        rows.append((
            "distribution", _g(doc["ks_statistic"]), _g(doc["ks_critical"]),
            flags["distribution"],
        ))
    if "mean" in flags:
        if flags["mean"] == INF_REGIME:
            rows.append(("mean", "infinite", "-", INF_REGIME))
        else:
            rows.append((
                "mean", _g(doc["mean_diff_se_units"]), _g(MEAN_SE_LIMIT),
                flags["mean"],
            ))
    for check, key in (("theorem1", "theorem1_ratios"), ("proposition", "proposition_ratios")):
        if check in flags:
            ratios = doc[key]
            band = doc.get(f"{check}_ratio_band", list(RATIO_BAND))
            worst = max(ratios, key=lambda q: abs(q - 0.5 * (band[0] + band[1])))
            rows.append((check, _g(worst), f"{_g(band[0])}..{_g(band[1])}", flags[check]))
    widths = [max(len(row[col]) for row in rows) for col in range(4)]
    return "\n".join(
        "  ".join(cell.ljust(widths[col]) for col, cell in enumerate(row)).rstrip()
        for row in rows
    )


def emit_summary(report):
    """Human-readable table of a DualityReport (6 significant digits)."""
    return _summary_table(report.to_json_dict())


def _verb_report(out_dir):
    path = os.path.join(out_dir, "report.json")
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    print(_summary_table(doc))
    flags = doc.get("pass_flags", {})
    return 0 if all(v != FAIL for v in flags.values()) else 1


def _configure_threads(n):
    """Pin the numba worker count without perturbing any output.

    Must run before the first kernel import to take effect via the
    environment; afterwards the count can only be clamped downward.
    """
    if n is None:
        return
    if n < 1:
        raise ConfigError(["--threads: must be >= 1"])
    if "numba" in sys.modules:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
    else:
        os.environ["NUMBA_NUM_THREADS"] = str(n)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fpduality",
        description="First-passage duality laboratory: simulate, solve, verify.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)
    specs = {
        "validate": ("parse and cross-check a config", True, False),
        "simulate": ("run one Monte Carlo ensemble", True, True),
        "solve": ("run the ODE/PDE solvers on the configured grid", True, True),
        "verify": ("run the requested duality checks", True, True),
        "report": ("re-print the summary of an existing report.json", False, True),
    }
    for verb, (blurb, needs_config, needs_out) in specs.items():
        sp = sub.add_parser(verb, help=blurb)
        if needs_config:
            sp.add_argument("--config", required=True, help="JSON experiment config")
            sp.add_argument("--seed-override", type=int, default=None,
                            help="replace the config's base seed")
            sp.add_argument("--threads", type=int, default=None,
                            help="numba worker count (outputs do not depend on it)")
        if needs_out:
            sp.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        _configure_threads(getattr(args, "threads", None))
        if args.verb == "report":
            return _verb_report(args.out)
        plan = parse_config(args.config)
        if args.seed_override is not None:
            sim = dict(plan.simulation)
            sim["seed"] = args.seed_override
            plan = replace(plan, simulation=sim)
        plan = replace(plan, out_dir=getattr(args, "out", None))
        if args.verb == "validate":
            print(f"config ok: {plan.spec}")
            if plan.checks:
                print("checks: " + ", ".join(plan.checks))
            return 0
        if args.verb == "simulate":
            return _verb_simulate(plan)
        if args.verb == "solve":
            return _verb_solve(plan)
        return run_experiment(plan)
    except ConfigError as exc:
        for message in exc.messages:
            print(f"config error: {message}", file=sys.stderr)
        return 2
    except InvalidSpecError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return 2
    except CensoringBiasError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
