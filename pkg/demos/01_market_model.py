"""Tour of the physical market model: channel, costs, utilities.

Builds a three-worker scenario by hand and prices every quantity the
later stages optimize over, so the magnitudes in the other demos have
context. Run: python3 demos/01_market_model.py
"""

import numpy as np

from crowdwatt import (
    Instance,
    Location,
    Rect,
    WorkerProfile,
    charging_shares,
    default_radio,
    max_distance,
    quality,
    task_phase_platform_utility,
    task_phase_worker_utility,
    transmission_power,
    transmission_rate,
    worker_power_cost,
)

radio = default_radio()
task = Rect(0.0, 50.0, 0.0, 50.0)
print(f"radio: B={radio.bandwidth_b:.2e} Hz, g={radio.cnr_g:.1e}, "
      f"alpha={radio.pathloss_alpha}, h={radio.height_h} m, kappa={radio.kappa:.0f}")

print("\n-- channel duality ----------------------------------------------")
for r in (1.0, 1e3, 6e7):
    p = transmission_power(r, 5.0, radio)
    back = transmission_rate(p, 5.0, radio)
    print(f"rate {r:>12.1f} bit/s  needs {p:.3e} W at d=5 m  (inverts to {back:.6g})")

print("\n-- worker roster ------------------------------------------------")


def worker(x, y, half, b):
    area = Rect(x - half, x + half, y - half, y + half)
    return WorkerProfile(sensing_cost_b=b, work_area=area,
                         true_location=Location(x, y),
                         worst_case_distance_d=max_distance(area, task, radio.height_h))


workers = (
    worker(10.0, 10.0, 5.0, 1.0e-4),
    worker(25.0, 25.0, 10.0, 1.2e-4),
    worker(40.0, 35.0, 2.0, 1.5e-4),
)
instance = Instance(task_area=task, radio=radio, workers=workers, seed=0)
for i, w in enumerate(workers):
    print(f"worker {i}: roams {w.work_area.x_max - w.work_area.x_min:.0f} m square "
          f"around ({w.true_location.x:.0f},{w.true_location.y:.0f}), "
          f"worst-case d={w.worst_case_distance_d:.2f} m, b={w.sensing_cost_b:.1e}")
    print(f"          sustaining 1 bit/s forever costs "
          f"{worker_power_cost(1.0, w.worst_case_distance_d, w.sensing_cost_b, radio):.4e} W")

print("\n-- a hand-picked operating point --------------------------------")
rates = np.array([0.08, 0.05, 0.02])
p_c = 2e-4
shares = charging_shares(rates)
print(f"rates {rates} bit/s, total charging budget {p_c:.1e} W")
print(f"proportional charging shares: {np.round(shares, 4)}")
print(f"data quality of the pooled stream: {quality(rates.sum(), radio):.2f}")
for i in range(3):
    u = task_phase_worker_utility(i, rates, p_c, instance)
    print(f"worker {i} task-phase utility: {u:+.6e}")
print(f"platform task-phase utility: "
      f"{task_phase_platform_utility(p_c, rates, instance):.2f}")
print("\nworker utilities scale with received power minus sensing cost;")
print("the platform trades quality against the charging bill. The next demo")
print("lets both sides optimize instead of using hand-picked numbers.")
