"""Shared fixtures: a reference radio and point-roaming instance builders."""

import numpy as np

from crowdwatt import Instance, Location, RadioParams, Rect, WorkerProfile, max_distance

TASK = Rect(0.0, 50.0, 0.0, 50.0)
RADIO = RadioParams(bandwidth_b=6e7, cnr_g=1e9, pathloss_alpha=2.0,
                    height_h=5.0, kappa=2000.0, a1=1000.0, a2=200.0)

# acceptance-criterion verdict lines, echoed after the run summary so they
# survive output capture
VERDICTS = []


def pytest_terminal_summary(terminalreporter):
    if VERDICTS:
        terminalreporter.section("acceptance scoreboard")
        for line in VERDICTS:
            terminalreporter.write_line(line)


def pinned_worker(x, y, b=1e-4, radio=RADIO, task=TASK):
    """A worker whose roaming area is the single point (x, y)."""
    spot = Rect(x, x, y, y)
    return WorkerProfile(sensing_cost_b=b, work_area=spot,
                         true_location=Location(x, y),
                         worst_case_distance_d=max_distance(spot, task, radio.height_h))


def pinned_instance(points, radio=RADIO, task=TASK, seed=0):
    workers = tuple(pinned_worker(x, y, b, radio, task) for x, y, b in points)
    return Instance(task_area=task, radio=radio, workers=workers, seed=seed)


def random_pinned_instance(rng, n, radio=RADIO, task=TASK):
    pts = [(rng.uniform(1, 49), rng.uniform(1, 49), rng.uniform(1e-4, 1.5e-4))
           for _ in range(n)]
    return pinned_instance(pts, radio=radio, task=task)
