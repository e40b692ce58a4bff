"""Seeded replication sweeps and their reproducible result files.

Scaled-down version of the two headline experiments (5 replications
instead of 100): market outcomes versus worker count, and the
median-vs-optimal placement gap across path-loss exponents. Writes the
same CSV/JSON artifacts the CLI produces and proves a rerun is
byte-identical. Run: python3 demos/04_sweeps.py
"""

import tempfile
from pathlib import Path

from crowdwatt import (
    ExperimentConfig,
    run_deployment_sweep,
    run_market_sweep,
    write_raw_csv,
    write_summary_json,
)

cfg = ExperimentConfig(n_values=(5, 10, 20), alpha_values=(2.0,),
                       replications=5, seed=3)
print(f"market sweep: n in {cfg.n_values}, {cfg.replications} replications")
rows = run_market_sweep(cfg)
print(f"{'n':>4} {'platform utility':>22} {'employed':>14} {'worker utility':>18}")
for r in rows:
    print(f"{r.n:>4} {r.mean_platform_utility:>14.2f} +-{r.sem_platform_utility:5.2f}"
          f" {r.mean_employed_count:>8.2f} +-{r.sem_employed_count:4.2f}"
          f" {r.mean_worker_utility:>11.3e} +-{r.sem_worker_utility:.1e}")
print("utility and employment grow with the roster while the per-worker")
print("share of the charging budget shrinks.")

dcfg = ExperimentConfig(n_values=(10, 20), alpha_values=(2.0, 2.5, 3.0),
                        replications=5, seed=3)
print(f"\nplacement sweep: n in {dcfg.n_values}, alpha in {dcfg.alpha_values}")
drows, records = run_deployment_sweep(dcfg, return_records=True)
for r in drows:
    print(f"n={r.n:>2} alpha={r.alpha}: relative med-vs-opt gap "
          f"{r.mean_relative_difference:.3e} +-{r.sem_relative_difference:.1e}"
          f"  ({r.replications - r.rel_diff_skipped} runs)")

print("\n-- artifacts ------------------------------------------------------")
with tempfile.TemporaryDirectory() as tmp:
    raw = Path(tmp) / "deploy_raw.csv"
    summary = Path(tmp) / "deploy_summary.json"
    write_raw_csv(records, str(raw), config_hash="demo", seed=dcfg.seed)
    write_summary_json(drows, str(summary), {"demo": True}, "demo", dcfg.seed)
    lines = raw.read_text().splitlines()
    print(f"{raw.name}: {len(lines)} lines; header comment: {lines[0]}")
    print(f"first data row: {lines[2][:72]}...")
    again = Path(tmp) / "again.csv"
    write_raw_csv(run_deployment_sweep(dcfg, return_records=True)[1],
                  str(again), config_hash="demo", seed=dcfg.seed)
    print(f"rerun byte-identical: {again.read_bytes() == raw.read_bytes()}")
