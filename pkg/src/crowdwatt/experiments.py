"""Seeded instance generation and the reported parameter sweeps.

Two studies are reproduced at desk scale: market outcomes (platform utility,
worker utility, employment) as the number of registered workers grows, and
the placement gap between the median mechanism and the optimal placement as
the worker count and the path-loss exponent vary.

Every replication draws its own generator from (master seed, n, replication
index), so results are independent of execution order and of which sweep a
cell belongs to. The derivation deliberately excludes the path-loss
exponent: sweeps at different exponents see identical instances, which
removes sampling noise from cross-exponent comparisons.
"""

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from .deployment import check_prop2_bound
from .game import ConvergenceError, SolverConfig, solve_stackelberg
from .model import Instance, Location, RadioParams, Rect, WorkerProfile, max_distance

logger = logging.getLogger(__name__)

# bits/s; reported "employed" counts use this floor, roster logic uses r > 0
EMPLOYMENT_THRESHOLD = 1e-6

_CSV_COLUMNS = ("n", "alpha", "seed", "pc_star", "platform_utility",
                "mean_worker_utility", "employed", "med_utility",
                "opt_utility", "rel_diff", "prop2_slack")


def default_radio(alpha: float = 2.0) -> RadioParams:
    """Reference constants: B = 60 MHz, g = 90 dB, h = 5 m, kappa = 2000
    (eta = 0.5, Gamma = -30 dB), a1 = 1000, a2 = 200."""
    return RadioParams(bandwidth_b=6e7, cnr_g=1e9, pathloss_alpha=alpha,
                       height_h=5.0, kappa=2000.0, a1=1000.0, a2=200.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep layout plus the instance-generation parameters."""

    n_values: tuple = (10, 20, 30, 40, 50)
    alpha_values: tuple = (2.0, 2.5, 3.0)
    replications: int = 100
    base_radio: Optional[RadioParams] = None
    task_side: float = 50.0
    b_range: tuple = (1e-4, 1.5e-4)
    seed: int = 0

    def __post_init__(self):
        if len(self.n_values) == 0:
            raise ValueError("n_values must be nonempty")
        if any(n < 1 for n in self.n_values):
            raise ValueError("worker counts must be >= 1")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.task_side <= 0:
            raise ValueError("task_side must be > 0")
        lo, hi = self.b_range
        if not (0 < lo <= hi):
            raise ValueError("b_range must satisfy 0 < b_min <= b_max")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")

    def radio(self) -> RadioParams:
        return self.base_radio if self.base_radio is not None else default_radio()


@dataclass(frozen=True)
class ReplicationRecord:
    """One solved instance, flattened to the raw CSV columns."""

    n: int
    alpha: float
    seed: int
    pc_star: float
    platform_utility: float
    mean_worker_utility: float
    employed: int
    med_utility: float
    opt_utility: float
    rel_diff: float
    prop2_slack: float


@dataclass(frozen=True)
class SweepRow:
    """Per-cell means with standard errors of the mean."""

    n: int
    alpha: float
    mean_platform_utility: float
    sem_platform_utility: float
    mean_worker_utility: float
    sem_worker_utility: float
    mean_employed_count: float
    sem_employed_count: float
    mean_relative_difference: float
    sem_relative_difference: float
    replications: int
    rel_diff_skipped: int


def replication_seed(master_seed: int, n: int, replication: int) -> int:
    """Stream seed for one (worker count, replication) cell."""
    ss = np.random.SeedSequence([int(master_seed), int(n), int(replication)])
    return int(ss.generate_state(1, np.uint64)[0])


def generate_instance(n: int, radio: RadioParams, seed: int,
                      task_side: float = 50.0,
                      b_range=(1e-4, 1.5e-4)) -> Instance:
    """Random instance on the square task area [0, task_side]^2.

    Per worker: a half-width beta ~ U[0, task_side/2] defines the roaming
    square centered on the area's center, the true location is uniform in
    that square, and the sensing cost is uniform in b_range.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(int(seed))
    half = task_side / 2.0
    betas = rng.uniform(0.0, half, n)
    lo = half - betas
    hi = half + betas
    xs = rng.uniform(lo, hi)
    ys = rng.uniform(lo, hi)
    bs = rng.uniform(b_range[0], b_range[1], n)
    task = Rect(0.0, task_side, 0.0, task_side)
    workers = []
    for i in range(n):
        area = Rect(float(lo[i]), float(hi[i]), float(lo[i]), float(hi[i]))
        workers.append(WorkerProfile(
            sensing_cost_b=float(bs[i]),
            work_area=area,
            true_location=Location(float(xs[i]), float(ys[i])),
            worst_case_distance_d=max_distance(area, task, radio.height_h)))
    return Instance(task_area=task, radio=radio, workers=tuple(workers),
                    seed=int(seed))


def run_replication(cfg: ExperimentConfig, n: int, alpha: float,
                    replication: int,
                    solver: Optional[SolverConfig] = None) -> ReplicationRecord:
    """Generate, solve and score one instance; fills every CSV column.

    Empty markets (zero optimal charging power) are recorded with zero
    utilities; placement columns are nan there since no one transmits.
    The relative difference is also nan when the optimal placement's
    utility is non-positive, where the ratio is undefined.
    """
    seed = replication_seed(cfg.seed, n, replication)
    radio = replace(cfg.radio(), pathloss_alpha=float(alpha))
    instance = generate_instance(n, radio, seed, cfg.task_side, cfg.b_range)
    try:
        eq = solve_stackelberg(instance, solver)
    except ConvergenceError as exc:
        raise ConvergenceError(
            f"instance seed {seed} (n={n}, alpha={alpha}): {exc}",
            rates=exc.rates) from exc
    rates = np.asarray(eq.rates, dtype=float)
    employed = int((rates > EMPLOYMENT_THRESHOLD).sum())
    if (rates > 0).any():
        bound = check_prop2_bound(instance, eq)
        u_med, u_opt, slack = bound.med_utility, bound.opt_utility, bound.slack
        if u_opt > 0:
            rel = (u_opt - u_med) / u_opt
        else:
            rel = math.nan
            logger.warning(
                "instance seed %d (n=%d, alpha=%g): optimal placement utility "
                "%.4g <= 0, relative difference skipped", seed, n, alpha, u_opt)
    else:
        u_med = u_opt = rel = slack = math.nan
        logger.warning(
            "instance seed %d (n=%d, alpha=%g): empty market, no placement",
            seed, n, alpha)
    return ReplicationRecord(
        n=n, alpha=float(alpha), seed=seed,
        pc_star=float(eq.p_c_star),
        platform_utility=float(eq.platform_utility),
        mean_worker_utility=float(np.asarray(eq.worker_utilities).mean()),
        employed=employed,
        med_utility=float(u_med), opt_utility=float(u_opt),
        rel_diff=float(rel), prop2_slack=float(slack))


def _mean_sem(values):
    arr = np.asarray(values, dtype=float)
    good = arr[~np.isnan(arr)]
    if good.size == 0:
        return math.nan, math.nan
    mean = float(good.mean())
    sem = float(good.std(ddof=1) / math.sqrt(good.size)) if good.size > 1 else 0.0
    return mean, sem


def _aggregate_row(n, alpha, recs) -> SweepRow:
    pu, pu_se = _mean_sem([r.platform_utility for r in recs])
    wu, wu_se = _mean_sem([r.mean_worker_utility for r in recs])
    em, em_se = _mean_sem([r.employed for r in recs])
    rd, rd_se = _mean_sem([r.rel_diff for r in recs])
    skipped = sum(1 for r in recs if math.isnan(r.rel_diff))
    return SweepRow(
        n=n, alpha=float(alpha),
        mean_platform_utility=pu, sem_platform_utility=pu_se,
        mean_worker_utility=wu, sem_worker_utility=wu_se,
        mean_employed_count=em, sem_employed_count=em_se,
        mean_relative_difference=rd, sem_relative_difference=rd_se,
        replications=len(recs), rel_diff_skipped=skipped)


def _run_cells(cfg, cells, solver):
    rows, records = [], []
    for (n, alpha) in cells:
        recs = [run_replication(cfg, n, alpha, rep, solver)
                for rep in range(cfg.replications)]
        records.extend(recs)
        rows.append(_aggregate_row(n, alpha, recs))
    return rows, records


def run_market_sweep(cfg: ExperimentConfig,
                     solver: Optional[SolverConfig] = None,
                     return_records: bool = False):
    """Market outcomes versus the number of registered workers, at the base
    radio's path-loss exponent. Returns SweepRows; with return_records=True
    also the per-replication records."""
    alpha = cfg.radio().pathloss_alpha
    cells = [(n, alpha) for n in cfg.n_values]
    rows, records = _run_cells(cfg, cells, solver)
    return (rows, records) if return_records else rows


def run_deployment_sweep(cfg: ExperimentConfig,
                         solver: Optional[SolverConfig] = None,
                         return_records: bool = False):
    """Placement gap between median and optimal deployment over the full
    (worker count, path-loss exponent) grid."""
    cells = [(n, a) for n in cfg.n_values for a in cfg.alpha_values]
    rows, records = _run_cells(cfg, cells, solver)
    return (rows, records) if return_records else rows


def _row_values(record_dict):
    return [str(record_dict[c]) for c in _CSV_COLUMNS]


def write_raw_csv(records, path, config_hash: str, seed: int) -> None:
    """One line per replication; leading comment carries hash and seed so a
    result file is traceable to its exact configuration."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash} seed={seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for rec in records:
            writer.writerow(_row_values(asdict(rec)))


def write_aggregate_csv(records, path, config_hash: str, seed: int) -> None:
    """One line per (n, alpha) cell with column means; same columns as the
    raw file, the seed column holding the master seed."""
    order, groups = [], {}
    for rec in records:
        key = (rec.n, rec.alpha)
        if key not in groups:
            groups[key] = []
            order.append(key)
        groups[key].append(rec)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash} seed={seed}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for key in order:
            recs = groups[key]
            agg = {
                "n": key[0],
                "alpha": key[1],
                "seed": seed,
                "pc_star": _mean_sem([r.pc_star for r in recs])[0],
                "platform_utility": _mean_sem([r.platform_utility for r in recs])[0],
                "mean_worker_utility": _mean_sem([r.mean_worker_utility for r in recs])[0],
                "employed": _mean_sem([r.employed for r in recs])[0],
                "med_utility": _mean_sem([r.med_utility for r in recs])[0],
                "opt_utility": _mean_sem([r.opt_utility for r in recs])[0],
                "rel_diff": _mean_sem([r.rel_diff for r in recs])[0],
                "prop2_slack": _mean_sem([r.prop2_slack for r in recs])[0],
            }
            writer.writerow(_row_values(agg))


def _sanitize(obj):
    """Make a structure JSON-clean: numpy scalars to python, nan/inf to None."""
    if isinstance(obj, dict):
        return {k: _sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_sanitize(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_summary_json(rows, path, config: dict, config_hash: str, seed: int) -> None:
    """Aggregate rows plus a full echo of the resolved configuration."""
    payload = {
        "config": _sanitize(config),
        "config_hash": config_hash,
        "seed": int(seed),
        "rows": [_sanitize(asdict(r)) for r in rows],
        "totals": {
            "cells": len(rows),
            "instances": int(sum(r.replications for r in rows)),
            "rel_diff_skipped": int(sum(r.rel_diff_skipped for r in rows)),
        },
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")
