"""Charging-budget games and service placement for wirelessly powered crowdsensing.

The package is organised around the life of one sensing campaign:

- :mod:`crowdwatt.model`       physical channel, costs, utilities
- :mod:`crowdwatt.game`        worker rate equilibrium and the platform's
                               charging-budget choice above it
- :mod:`crowdwatt.deployment`  where to put the base station once rates are set
- :mod:`crowdwatt.experiments` seeded instance generation and sweep harnesses
- :mod:`crowdwatt.cli`         command line front end
"""

from .model import (
    Instance,
    Location,
    RadioParams,
    Rect,
    WorkerProfile,
    charging_shares,
    data_phase_platform_utility,
    data_phase_worker_utility,
    distance,
    max_distance,
    quality,
    task_phase_platform_utility,
    task_phase_worker_utility,
    transmission_power,
    transmission_rate,
    worker_power_cost,
    wpt_cost,
)
from .game import (
    ConvergenceError,
    EquilibriumResult,
    SolverConfig,
    best_response,
    best_response_residuals,
    marginal_utility,
    solve_ne,
    solve_stackelberg,
)
from .deployment import (
    BoundReport,
    DeploymentOutcome,
    MisreportReport,
    check_prop2_bound,
    check_strategyproofness,
    deployment_roster,
    evaluate_deployment,
    generalized_median_deploy,
    manipulation_witness,
    med_deploy,
    opt_deploy,
)
from .experiments import (
    ExperimentConfig,
    ReplicationRecord,
    SweepRow,
    default_radio,
    generate_instance,
    replication_seed,
    run_deployment_sweep,
    run_market_sweep,
    write_aggregate_csv,
    write_raw_csv,
    write_summary_json,
)

__version__ = "0.1.0"

__all__ = [
    "Instance", "Location", "RadioParams", "Rect", "WorkerProfile",
    "charging_shares", "distance", "max_distance", "quality",
    "transmission_power", "transmission_rate", "worker_power_cost", "wpt_cost",
    "task_phase_platform_utility", "task_phase_worker_utility",
    "data_phase_platform_utility", "data_phase_worker_utility",
    "ConvergenceError", "EquilibriumResult", "SolverConfig",
    "best_response", "best_response_residuals", "marginal_utility",
    "solve_ne", "solve_stackelberg",
    "BoundReport", "DeploymentOutcome", "MisreportReport",
    "check_prop2_bound", "check_strategyproofness", "deployment_roster",
    "evaluate_deployment",
    "generalized_median_deploy", "manipulation_witness", "med_deploy", "opt_deploy",
    "ExperimentConfig", "ReplicationRecord", "SweepRow",
    "default_radio", "generate_instance", "replication_seed",
    "run_deployment_sweep", "run_market_sweep",
    "write_aggregate_csv", "write_raw_csv", "write_summary_json",
]
