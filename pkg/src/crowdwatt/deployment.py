"""Service placement mechanisms for the data-collection phase.

After the rate game settles, the platform must place the base station using
only worker-reported locations. Two mechanisms are implemented: the
coordinatewise median (strategyproof: no worker can gain by lying, because
preferences over placements are single-peaked per axis) and the
utility-optimal placement (better for the platform, but manipulable).
Harnesses quantify both claims on concrete instances: an exhaustive
misreport grid for strategyproofness, and the worst-case guarantee that
bounds how far the median placement can fall below the optimum.

Workers whose equilibrium rate is zero neither transmit nor receive charge,
so they are dropped from the deployment roster before any mechanism runs.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .game import ConvergenceError, EquilibriumResult
from .model import (
    Instance,
    Location,
    Rect,
    WorkerProfile,
    charging_shares,
    data_phase_platform_utility,
    data_phase_worker_utility,
    max_distance,
    quality,
    task_phase_platform_utility,
    task_phase_worker_utility,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DeploymentOutcome:
    """A mechanism's placement and the utilities realized there."""

    mechanism_name: str
    service_location: Location
    platform_utility: float
    worker_utilities: np.ndarray
    phi: float


@dataclass(frozen=True)
class BoundReport:
    """Worst-case guarantee check for the median placement.

    bound_rhs = phi - 2^(alpha/2) N^(alpha/2-1) (r_max/r_min) (phi - opt_utility),
    over the employed roster. holds <=> slack >= -1e-6 |phi|.
    """

    med_utility: float
    opt_utility: float
    phi: float
    bound_rhs: float
    slack: float
    holds: bool


@dataclass(frozen=True)
class MisreportReport:
    """Best misreport found by the strategyproofness sweep."""

    max_gain: float
    worker_index: int
    truthful_location: Location
    best_misreport: Location
    truthful_utility: float
    misreport_utility: float
    pairs_checked: int


def med_deploy(reported_locations) -> Location:
    """Coordinatewise median of the reports.

    Per axis: sort ascending; odd count takes the middle element, even count
    the mean of the two middle elements. The axes never interact.
    """
    if len(reported_locations) == 0:
        raise ValueError("med_deploy needs at least one report")
    xs = np.array([loc.x for loc in reported_locations])
    ys = np.array([loc.y for loc in reported_locations])
    return Location(float(np.median(xs)), float(np.median(ys)))


def generalized_median_deploy(reported_locations, constants_x, constants_y) -> Location:
    """Median of the N reports augmented with N+1 fixed constants per axis.

    The constants may include +-inf; choosing ceil((N+1)/2) of them -inf and
    the rest +inf reproduces the plain median. Any strategyproof anonymous
    placement rule on this preference domain has this form.
    """
    n = len(reported_locations)
    if n == 0:
        raise ValueError("generalized_median_deploy needs at least one report")
    if len(constants_x) != n + 1 or len(constants_y) != n + 1:
        raise ValueError(f"need exactly {n + 1} constants per axis for {n} reports")
    xs = np.array([loc.x for loc in reported_locations] + [float(c) for c in constants_x])
    ys = np.array([loc.y for loc in reported_locations] + [float(c) for c in constants_y])
    # 2N+1 values: the median is a single order statistic, so infinite
    # constants never average into the output unless they are the median
    return Location(float(np.median(xs)), float(np.median(ys)))


def deployment_roster(eq, instance: Instance) -> np.ndarray:
    """Indices of employed workers: equilibrium rate strictly positive."""
    return np.flatnonzero(np.asarray(eq.rates, dtype=float) > 0)


def _ingest_reports(reports, task_area):
    """Clamp reports into the task area, logging every correction."""
    out = []
    for idx, loc in enumerate(reports):
        if task_area.contains(loc):
            out.append(loc)
        else:
            fixed = task_area.clamp(loc)
            logger.warning(
                "report %d at (%g, %g) lies outside the task area; clamped to (%g, %g)",
                idx, loc.x, loc.y, fixed.x, fixed.y)
            out.append(fixed)
    return out


def _opt_point(xs, ys, w, scale, alpha, h, area, gtol=1e-8, max_iters=500):
    """Minimize scale * sum_i w_i d_i(x,y)^alpha over the area.

    Projected gradient descent with backtracking halving from the weighted
    centroid, then Newton polish on the 2x2 system; the objective is smooth
    and convex, and its unconstrained minimum lies in the hull of the
    points, so the raw gradient vanishes at the solution. The descent stage
    only needs to reach the Newton basin, so it stops at a loose multiple
    of the initial gradient; the polish owns the last ten orders.
    """
    h2 = h * h
    x = float((w * xs).sum() / w.sum())
    y = float((w * ys).sum() / w.sum())

    def cost(x, y):
        d2 = (xs - x) ** 2 + (ys - y) ** 2 + h2
        return scale * float((w * d2 ** (alpha / 2.0)).sum())

    def grad(x, y):
        d2 = (xs - x) ** 2 + (ys - y) ** 2 + h2
        p = d2 ** (alpha / 2.0 - 1.0)
        gx = scale * alpha * float((w * p * (x - xs)).sum())
        gy = scale * alpha * float((w * p * (y - ys)).sum())
        return gx, gy

    def clamp(v, lo, hi):
        return min(hi, max(lo, v))

    f = cost(x, y)
    coarse = max(gtol, 1e-4 * math.hypot(*grad(x, y)))
    for _ in range(max_iters):
        gx, gy = grad(x, y)
        if math.hypot(gx, gy) < coarse:
            break
        step = 1.0
        improved = False
        while step > 1e-22:
            nx = clamp(x - step * gx, area.x_min, area.x_max)
            ny = clamp(y - step * gy, area.y_min, area.y_max)
            nf = cost(nx, ny)
            if nf <= f:
                improved = True
                break
            step *= 0.5
        if not improved:
            # objective resolution exhausted; hand over to Newton
            break
        x, y, f = nx, ny, nf
    for _ in range(40):
        gx, gy = grad(x, y)
        if math.hypot(gx, gy) < gtol:
            break
        d2 = (xs - x) ** 2 + (ys - y) ** 2 + h2
        p = d2 ** (alpha / 2.0 - 1.0)
        q = (alpha / 2.0 - 1.0) * d2 ** (alpha / 2.0 - 2.0)
        hxx = scale * alpha * float((w * (p + 2.0 * q * (x - xs) ** 2)).sum())
        hyy = scale * alpha * float((w * (p + 2.0 * q * (y - ys) ** 2)).sum())
        hxy = scale * alpha * float((w * 2.0 * q * (x - xs) * (y - ys)).sum())
        det = hxx * hyy - hxy * hxy
        if det <= 0.0:
            break
        x = clamp(x - (hyy * gx - hxy * gy) / det, area.x_min, area.x_max)
        y = clamp(y - (hxx * gy - hxy * gx) / det, area.y_min, area.y_max)
    gx, gy = grad(x, y)
    gnorm = math.hypot(gx, gy)
    if gnorm >= gtol:
        raise ConvergenceError(
            f"placement gradient norm {gnorm:.3e} still above {gtol:g}")
    return x, y


def opt_deploy(eq, instance: Instance, reported_locations=None) -> Location:
    """Placement maximizing the platform's data-phase utility.

    Equivalent to minimizing the rate-weighted charging cost, which is
    convex in the placement for path-loss exponents >= 2. When
    ``reported_locations`` is given it must align one-to-one with the
    employed roster; otherwise the roster's true locations are used.
    """
    rates = np.asarray(eq.rates, dtype=float)
    roster = deployment_roster(eq, instance)
    if roster.size == 0:
        raise ValueError("deployment roster is empty: no worker transmits")
    if reported_locations is None:
        locs = [instance.workers[i].true_location for i in roster]
    else:
        if len(reported_locations) != roster.size:
            raise ValueError("reported_locations must match the employed roster")
        locs = _ingest_reports(reported_locations, instance.task_area)
    xs = np.array([loc.x for loc in locs])
    ys = np.array([loc.y for loc in locs])
    w = rates[roster] / rates.sum()
    radio = instance.radio
    scale = eq.p_c_star * radio.kappa
    if scale <= 0.0:
        # no charging cost to shave: every placement ties, take the centroid
        return Location(float((w * xs).sum() / w.sum()),
                        float((w * ys).sum() / w.sum()))
    x, y = _opt_point(xs, ys, w, scale, radio.pathloss_alpha, radio.height_h,
                      instance.task_area)
    return Location(x, y)


def _mechanism_location(mechanism, reports, eq, instance):
    if callable(mechanism):
        return getattr(mechanism, "__name__", "custom"), mechanism(reports, eq, instance)
    if mechanism == "med":
        return "med", med_deploy(reports)
    if mechanism == "opt":
        return "opt", opt_deploy(eq, instance, reported_locations=reports)
    raise ValueError(f"unknown mechanism {mechanism!r}; use 'med', 'opt', or a callable")


def evaluate_deployment(mechanism, eq, instance: Instance,
                        reported_locations=None) -> DeploymentOutcome:
    """Run a mechanism on the employed workers' reports and price the result.

    Reports default to the roster's true locations; reports outside the
    task area are clamped in and logged. Worker utilities are evaluated for
    every registered worker at its true location.
    """
    roster = deployment_roster(eq, instance)
    if roster.size == 0:
        raise ValueError("deployment roster is empty: no worker transmits")
    if reported_locations is None:
        reports = [instance.workers[i].true_location for i in roster]
    else:
        if len(reported_locations) != roster.size:
            raise ValueError("reported_locations must match the employed roster")
        reports = _ingest_reports(reported_locations, instance.task_area)
    name, loc = _mechanism_location(mechanism, reports, eq, instance)
    worker_us = np.array([data_phase_worker_utility(i, loc, eq, instance)
                          for i in range(instance.n)])
    return DeploymentOutcome(
        mechanism_name=name,
        service_location=loc,
        platform_utility=data_phase_platform_utility(loc, eq, instance),
        worker_utilities=worker_us,
        phi=quality(float(np.asarray(eq.rates, dtype=float).sum()), instance.radio))


def check_strategyproofness(mechanism, instance: Instance, eq,
                            misreport_grid: int = 21) -> MisreportReport:
    """Exhaustive misreport sweep: can any employed worker move the placement
    in its own favor?

    For each roster worker, every point of a misreport_grid x misreport_grid
    lattice over the task area (plus the truthful report) replaces that
    worker's report; utilities are always evaluated at the true location.
    Returns the largest utility gain found, which is <= 1e-9 for a
    strategyproof mechanism and strictly positive for a manipulable one on
    a witness instance.
    """
    if misreport_grid < 2:
        raise ValueError("misreport_grid must be >= 2")
    roster = deployment_roster(eq, instance)
    if roster.size == 0:
        raise ValueError("deployment roster is empty: no worker transmits")
    area = instance.task_area
    truthful = [instance.workers[i].true_location for i in roster]
    _, loc_true = _mechanism_location(mechanism, truthful, eq, instance)
    grid_x = np.linspace(area.x_min, area.x_max, misreport_grid)
    grid_y = np.linspace(area.y_min, area.y_max, misreport_grid)

    best_gain = -math.inf
    best = None
    pairs = 0
    for pos, j in enumerate(roster):
        u_true = data_phase_worker_utility(int(j), loc_true, eq, instance)
        candidates = [truthful[pos]]
        candidates += [Location(float(gx), float(gy)) for gx in grid_x for gy in grid_y]
        reports = list(truthful)
        for cand in candidates:
            reports[pos] = cand
            _, loc = _mechanism_location(mechanism, reports, eq, instance)
            u = data_phase_worker_utility(int(j), loc, eq, instance)
            pairs += 1
            gain = u - u_true
            if gain > best_gain:
                best_gain = gain
                best = (int(j), truthful[pos], cand, u_true, u)
        reports[pos] = truthful[pos]
    return MisreportReport(
        max_gain=best_gain,
        worker_index=best[0],
        truthful_location=best[1],
        best_misreport=best[2],
        truthful_utility=best[3],
        misreport_utility=best[4],
        pairs_checked=pairs)


def manipulation_witness():
    """A scenario where the optimal placement is profitably manipulable.

    One worker sits far from a clustered pair; exaggerating its position
    drags the rate-weighted placement toward it, and with transmission
    rates of bandwidth order the saved transmit power is far above float
    noise (the gain is around 1e-7, versus 1e-16 at market-equilibrium
    rates). The median placement on this roster is an order statistic and
    cannot be dragged. Returns (instance, equilibrium).
    """
    from .experiments import default_radio

    radio = default_radio()
    task = Rect(0.0, 50.0, 0.0, 50.0)

    def pinned(x, y, b):
        spot = Rect(x, x, y, y)
        return WorkerProfile(sensing_cost_b=b, work_area=spot,
                             true_location=Location(x, y),
                             worst_case_distance_d=max_distance(spot, task, radio.height_h))

    workers = (pinned(45.0, 45.0, 1e-4), pinned(5.0, 5.0, 1.1e-4),
               pinned(6.0, 4.0, 1.2e-4))
    instance = Instance(task_area=task, radio=radio, workers=workers, seed=0)
    rates = np.full(3, radio.bandwidth_b)
    p_c = 1e-3
    eq = EquilibriumResult(
        p_c_star=p_c, rates=rates,
        charging_powers=charging_shares(rates) * p_c,
        platform_utility=task_phase_platform_utility(p_c, rates, instance),
        worker_utilities=np.array(
            [task_phase_worker_utility(i, rates, p_c, instance) for i in range(3)]),
        iterations_used=0, converged=True)
    return instance, eq


def check_prop2_bound(instance: Instance, eq) -> BoundReport:
    """Check the median placement's worst-case guarantee on one instance.

    With N the employed-roster size and the rate ratio taken over the
    roster, the median's utility must stay within a factor of the optimum:

        u(MED) >= phi - 2^(alpha/2) N^(alpha/2-1) (r_max/r_min) (phi - u(OPT))

    allowing -1e-6*|phi| numerical slack.
    """
    rates = np.asarray(eq.rates, dtype=float)
    roster = deployment_roster(eq, instance)
    if roster.size == 0:
        raise ValueError("deployment roster is empty: no worker transmits")
    employed = rates[roster]
    if employed.min() <= 0.0:
        raise ValueError("roster contains a zero rate; ratio undefined")
    med_loc = med_deploy([instance.workers[i].true_location for i in roster])
    opt_loc = opt_deploy(eq, instance)
    u_med = data_phase_platform_utility(med_loc, eq, instance)
    u_opt = data_phase_platform_utility(opt_loc, eq, instance)
    phi = quality(float(rates.sum()), instance.radio)
    alpha = instance.radio.pathloss_alpha
    n_emp = roster.size
    rhs = phi - 2.0 ** (alpha / 2.0) * n_emp ** (alpha / 2.0 - 1.0) \
        * float(employed.max() / employed.min()) * (phi - u_opt)
    slack = u_med - rhs
    return BoundReport(
        med_utility=u_med,
        opt_utility=u_opt,
        phi=phi,
        bound_rhs=rhs,
        slack=slack,
        holds=bool(slack >= -1e-6 * abs(phi)))
