"""Command-line front end.

Subcommands:
  solve         one instance -> equilibrium JSON
  deploy        equilibrium + placement mechanism -> deployment JSON
  sweep-market  market outcomes vs worker count -> CSV + summary
  sweep-deploy  median-vs-optimal placement gap grid -> CSV + summary
  verify        property suite (stationarity, uniqueness, single-peakedness,
                strategyproofness, placement bound); exit 0 iff all pass

Configuration is a flat-key JSON file; every key has a default matching the
reference setup, so an empty file (or no --config) is a complete
configuration. Decibel inputs (g_db, gamma_db) are converted to linear scale
here, once. All outputs embed a hash of the resolved configuration and the
effective seed, so any result file can be traced to its exact inputs.
"""

import argparse
import hashlib
import json
import math
import os
import sys
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .deployment import (
    check_prop2_bound,
    check_strategyproofness,
    evaluate_deployment,
    manipulation_witness,
)
from .experiments import (
    ExperimentConfig,
    generate_instance,
    replication_seed,
    run_deployment_sweep,
    run_market_sweep,
    write_aggregate_csv,
    write_raw_csv,
    write_summary_json,
    _sanitize,
)
from .game import (
    ConvergenceError,
    SolverConfig,
    best_response_residuals,
    solve_ne,
    solve_stackelberg,
)
from .model import RadioParams, data_phase_worker_utility, Location

_DEFAULTS = {
    "task_side": 50.0,
    "n": 50,
    "n_values": [10, 20, 30, 40, 50],
    "alpha": 2.0,
    "alpha_values": [2.0, 2.5, 3.0],
    "replications": 100,
    "height_h": 5.0,
    "g_db": 90.0,
    "bandwidth_b": 6e7,
    "a1": 1000.0,
    "a2": 200.0,
    "eta": 0.5,
    "gamma_db": -30.0,
    "b_min": 1e-4,
    "b_max": 1.5e-4,
    "seed": 0,
    "mechanism": "med",
    "br_tolerance": 1e-9,
    "br_max_iters": 10000,
    "foc_tolerance": 1e-10,
    "pc_grid_points": 200,
    "pc_upper_bound": None,
    "refine_iters": 60,
    "misreport_grid": 21,
}

VALID_KEYS = frozenset(_DEFAULTS)


@dataclass(frozen=True)
class RunSpec:
    """One CLI invocation, resolved."""

    command: str
    config_path: Optional[str]
    output_dir: str
    seed_override: Optional[int]
    format: str
    reps_override: Optional[int] = None
    grid_override: Optional[int] = None


def _resolve(text: str, spec: Optional[RunSpec] = None) -> dict:
    """Merge a JSON config over the defaults, applying CLI overrides."""
    raw = json.loads(text) if text.strip() else {}
    if not isinstance(raw, dict):
        raise ValueError("config must be a JSON object of flat keys")
    unknown = sorted(set(raw) - VALID_KEYS)
    if unknown:
        raise ValueError(
            f"unknown config key(s) {', '.join(repr(k) for k in unknown)}; "
            f"valid keys: {', '.join(sorted(VALID_KEYS))}")
    merged = {**_DEFAULTS, **raw}
    if spec is not None:
        if spec.seed_override is not None:
            merged["seed"] = spec.seed_override
        if spec.reps_override is not None:
            merged["replications"] = spec.reps_override
        if spec.grid_override is not None:
            if spec.command == "verify":
                merged["misreport_grid"] = spec.grid_override
            else:
                merged["pc_grid_points"] = spec.grid_override
    return merged


def _build(merged: dict):
    """Construct the three typed configs from a resolved dict."""
    if merged["eta"] <= 0:
        raise ValueError("eta must be > 0")
    radio = RadioParams(
        bandwidth_b=float(merged["bandwidth_b"]),
        cnr_g=10.0 ** (float(merged["g_db"]) / 10.0),
        pathloss_alpha=float(merged["alpha"]),
        height_h=float(merged["height_h"]),
        kappa=1.0 / (float(merged["eta"]) * 10.0 ** (float(merged["gamma_db"]) / 10.0)),
        a1=float(merged["a1"]),
        a2=float(merged["a2"]))
    exp = ExperimentConfig(
        n_values=tuple(int(v) for v in merged["n_values"]),
        alpha_values=tuple(float(v) for v in merged["alpha_values"]),
        replications=int(merged["replications"]),
        base_radio=radio,
        task_side=float(merged["task_side"]),
        b_range=(float(merged["b_min"]), float(merged["b_max"])),
        seed=int(merged["seed"]))
    ub = merged["pc_upper_bound"]
    solver = SolverConfig(
        br_tolerance=float(merged["br_tolerance"]),
        br_max_iters=int(merged["br_max_iters"]),
        foc_tolerance=float(merged["foc_tolerance"]),
        pc_grid_points=int(merged["pc_grid_points"]),
        pc_upper_bound=None if ub is None else float(ub),
        refine_iters=int(merged["refine_iters"]))
    if merged["mechanism"] not in ("med", "opt"):
        raise ValueError("mechanism must be 'med' or 'opt'")
    return radio, exp, solver


def parse_config(text: str):
    """Parse a flat-key JSON configuration; missing keys take the defaults.

    Returns (RadioParams, ExperimentConfig, SolverConfig).
    """
    return _build(_resolve(text))


def _config_hash(merged: dict) -> str:
    canon = json.dumps(merged, sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _load(spec: RunSpec):
    if spec.config_path is None:
        text = ""
    else:
        with open(spec.config_path) as fh:
            text = fh.read()
    merged = _resolve(text, spec)
    radio, exp, solver = _build(merged)
    return merged, radio, exp, solver, _config_hash(merged)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(_sanitize(payload), fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _loc_dict(loc: Location) -> dict:
    return {"x": loc.x, "y": loc.y}


def cmd_solve(spec: RunSpec) -> int:
    merged, radio, exp, solver, chash = _load(spec)
    instance = generate_instance(merged["n"], radio, exp.seed,
                                 exp.task_side, exp.b_range)
    eq = solve_stackelberg(instance, solver)
    os.makedirs(spec.output_dir, exist_ok=True)
    path = os.path.join(spec.output_dir, "equilibrium.json")
    _write_json(path, {
        "config_hash": chash,
        "seed": exp.seed,
        "n": instance.n,
        "p_c_star": eq.p_c_star,
        "converged": eq.converged,
        "iterations_used": eq.iterations_used,
        "platform_utility": eq.platform_utility,
        "employed": int((np.asarray(eq.rates) > 0).sum()),
        "rates": list(map(float, eq.rates)),
        "charging_powers": list(map(float, eq.charging_powers)),
        "worker_utilities": list(map(float, eq.worker_utilities)),
    })
    print(f"wrote {path} (p_c*={eq.p_c_star:.6g} W, "
          f"platform utility={eq.platform_utility:.4f})")
    return 0


def cmd_deploy(spec: RunSpec) -> int:
    merged, radio, exp, solver, chash = _load(spec)
    instance = generate_instance(merged["n"], radio, exp.seed,
                                 exp.task_side, exp.b_range)
    eq = solve_stackelberg(instance, solver)
    outcome = evaluate_deployment(merged["mechanism"], eq, instance)
    os.makedirs(spec.output_dir, exist_ok=True)
    path = os.path.join(spec.output_dir, "deployment.json")
    _write_json(path, {
        "config_hash": chash,
        "seed": exp.seed,
        "n": instance.n,
        "mechanism": outcome.mechanism_name,
        "service_location": _loc_dict(outcome.service_location),
        "platform_utility": outcome.platform_utility,
        "phi": outcome.phi,
        "p_c_star": eq.p_c_star,
        "worker_utilities": list(map(float, outcome.worker_utilities)),
    })
    print(f"wrote {path} ({outcome.mechanism_name} at "
          f"({outcome.service_location.x:.3f}, {outcome.service_location.y:.3f}), "
          f"platform utility={outcome.platform_utility:.4f})")
    return 0


def _run_sweep(spec: RunSpec, kind: str) -> int:
    merged, radio, exp, solver, chash = _load(spec)
    if kind == "market":
        rows, records = run_market_sweep(exp, solver, return_records=True)
    else:
        rows, records = run_deployment_sweep(exp, solver, return_records=True)
    os.makedirs(spec.output_dir, exist_ok=True)
    base = "market" if kind == "market" else "deploy"
    written = []
    if spec.format == "csv":
        raw_path = os.path.join(spec.output_dir, f"{base}_raw.csv")
        agg_path = os.path.join(spec.output_dir, f"{base}_aggregate.csv")
        write_raw_csv(records, raw_path, chash, exp.seed)
        write_aggregate_csv(records, agg_path, chash, exp.seed)
        written += [raw_path, agg_path]
    summary_path = os.path.join(spec.output_dir, f"{base}_summary.json")
    write_summary_json(rows, summary_path, merged, chash, exp.seed)
    written.append(summary_path)
    print("wrote " + ", ".join(written))
    return 0


def cmd_sweep_market(spec: RunSpec) -> int:
    return _run_sweep(spec, "market")


def cmd_sweep_deploy(spec: RunSpec) -> int:
    return _run_sweep(spec, "deploy")


def _verify_instances(merged, radio, exp, solver):
    n = int(merged["n"])
    for rep in range(exp.replications):
        seed = replication_seed(exp.seed, n, rep)
        instance = generate_instance(n, radio, seed, exp.task_side, exp.b_range)
        yield seed, instance, solve_stackelberg(instance, solver)


def cmd_verify(spec: RunSpec) -> int:
    """Run the property suite and print one verdict line per property."""
    merged, radio, exp, solver, chash = _load(spec)
    if spec.reps_override is None:
        # default trimmed for an interactive check; --reps raises it
        exp = ExperimentConfig(
            n_values=exp.n_values, alpha_values=exp.alpha_values,
            replications=min(exp.replications, 20), base_radio=radio,
            task_side=exp.task_side, b_range=exp.b_range, seed=exp.seed)
    mechanism = merged["mechanism"]
    grid = int(merged["misreport_grid"])
    results = []

    worst_resid, worst_resid_seed = -1.0, None
    worst_uniq, worst_uniq_seed = -1.0, None
    sp_fail = None
    sp_max_gain, sp_max_seed = -math.inf, None
    sp_detail = None
    bound_fail = None
    dom_fail = None
    peak_fail = None

    for seed, instance, eq in _verify_instances(merged, radio, exp, solver):
        resid = float(best_response_residuals(eq.rates, eq.p_c_star, instance).max())
        if resid > worst_resid:
            worst_resid, worst_resid_seed = resid, seed

        rng = np.random.default_rng(seed)
        r_a = solve_ne(eq.p_c_star, instance, solver)
        r_b = solve_ne(eq.p_c_star, instance, solver,
                       initial_rates=rng.uniform(0.1, 10.0, instance.n)
                       * radio.bandwidth_b)
        scale = max(float(np.abs(r_a).max()), 1e-300)
        uniq = float(np.abs(r_a - r_b).max()) / scale
        if uniq > worst_uniq:
            worst_uniq, worst_uniq_seed = uniq, seed

        for _ in range(100):
            i = int(rng.integers(instance.n))
            li = instance.workers[i].true_location
            area = instance.task_area
            far = Location(float(rng.uniform(area.x_min, area.x_max)),
                           float(rng.uniform(area.y_min, area.y_max)))
            tx, ty = rng.uniform(0.0, 1.0, 2)
            near = Location(li.x + tx * (far.x - li.x), li.y + ty * (far.y - li.y))
            if (data_phase_worker_utility(i, near, eq, instance)
                    < data_phase_worker_utility(i, far, eq, instance)):
                peak_fail = (seed, i)
                break

        if not (np.asarray(eq.rates) > 0).any():
            continue
        report = check_strategyproofness(mechanism, instance, eq, grid)
        if report.max_gain > sp_max_gain:
            sp_max_gain, sp_max_seed = report.max_gain, seed
            sp_detail = report
        if report.max_gain > 1e-9 and sp_fail is None:
            sp_fail = seed
        bound = check_prop2_bound(instance, eq)
        if not bound.holds and bound_fail is None:
            bound_fail = (seed, bound.slack)
        if (bound.opt_utility - bound.med_utility
                < -1e-9 * max(1.0, abs(bound.opt_utility)) and dom_fail is None):
            dom_fail = (seed, bound.opt_utility - bound.med_utility)

    # Sampled instances keep transmission rates tiny, so placement
    # preferences sit near float noise; the fixed adversarial scenario makes
    # the rate-weighted placement's manipulability macroscopic.
    wit_instance, wit_eq = manipulation_witness()
    wit_report = check_strategyproofness(mechanism, wit_instance, wit_eq, grid)
    if wit_report.max_gain > sp_max_gain:
        sp_max_gain, sp_max_seed = wit_report.max_gain, "witness"
        sp_detail = wit_report
    if wit_report.max_gain > 1e-9 and sp_fail is None:
        sp_fail = "witness"

    results.append(("stationarity", worst_resid < 1e-6,
                    f"max relative residual {worst_resid:.3e}"
                    + (f" (instance seed {worst_resid_seed})"
                       if worst_resid >= 1e-6 else "")))
    results.append(("uniqueness", worst_uniq <= 1e-6,
                    f"max sup-norm disagreement {worst_uniq:.3e}"
                    + (f" (instance seed {worst_uniq_seed})"
                       if worst_uniq > 1e-6 else "")))
    results.append(("single_peakedness", peak_fail is None,
                    "no ordered pair violated monotonicity" if peak_fail is None
                    else f"violated at instance seed {peak_fail[0]}, worker {peak_fail[1]}"))
    if sp_detail is None:
        results.append((f"strategyproofness[{mechanism}]", False, "no employed roster"))
    elif sp_fail is None:
        results.append((f"strategyproofness[{mechanism}]", True,
                        f"max misreport gain {sp_max_gain:.3e}"))
    else:
        loc = sp_detail.best_misreport
        where = ("on the adversarial witness scenario" if sp_max_seed == "witness"
                 else f"at instance seed {sp_max_seed}")
        results.append((f"strategyproofness[{mechanism}]", False,
                        f"gain {sp_max_gain:.3e} {where}: "
                        f"worker {sp_detail.worker_index} profits by reporting "
                        f"({loc.x:.2f}, {loc.y:.2f})"))
    results.append(("placement_bound", bound_fail is None,
                    "worst-case guarantee held on every instance" if bound_fail is None
                    else f"violated at instance seed {bound_fail[0]} (slack {bound_fail[1]:.3e})"))
    results.append(("opt_dominance", dom_fail is None,
                    "optimal placement never below median" if dom_fail is None
                    else f"violated at instance seed {dom_fail[0]} (gap {dom_fail[1]:.3e})"))

    print(f"# config_hash={chash} seed={exp.seed} "
          f"instances={exp.replications} n={merged['n']}")
    ok = True
    for name, passed, detail in results:
        ok &= passed
        print(f"{name:28s} {'PASS' if passed else 'FAIL'}  {detail}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="crowdwatt",
        description="Charging-budget game and service placement for "
                    "wirelessly powered crowdsensing markets.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in [
            ("solve", "solve one instance's charging equilibrium"),
            ("deploy", "solve, then place the base station"),
            ("sweep-market", "market outcomes vs worker count"),
            ("sweep-deploy", "median-vs-optimal placement gap grid"),
            ("verify", "run the property suite; exit 0 iff all pass")]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", metavar="PATH", default=None,
                       help="flat-key JSON config (defaults used if omitted)")
        p.add_argument("--out", metavar="DIR", default=".",
                       help="output directory (default: current)")
        p.add_argument("--seed", metavar="U64", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--format", choices=["csv", "json"], default="csv",
                       help="sweep output format (json: summary only)")
        p.add_argument("--reps", metavar="K", type=int, default=None,
                       help="override replication count")
        p.add_argument("--grid", metavar="K", type=int, default=None,
                       help="override pc grid size (verify: misreport grid)")
    args = parser.parse_args(argv)
    spec = RunSpec(command=args.command, config_path=args.config,
                   output_dir=args.out, seed_override=args.seed,
                   format=args.format, reps_override=args.reps,
                   grid_override=args.grid)
    handlers = {
        "solve": cmd_solve,
        "deploy": cmd_deploy,
        "sweep-market": cmd_sweep_market,
        "sweep-deploy": cmd_sweep_deploy,
        "verify": cmd_verify,
    }
    try:
        return handlers[spec.command](spec)
    except (ValueError, ConvergenceError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
