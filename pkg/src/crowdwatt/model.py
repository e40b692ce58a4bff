"""Physical and economic primitives of the charging-for-sensing market.

Everything here is expressed in linear SI units: meters, Hz, bit/s, watts.
Decibel quantities must be converted before they reach this module (the CLI
config loader does that once at ingestion).

Two families of utility functions live here. The "task phase" variants price
a worker's transmission at its worst-case distance, because rates are chosen
before anyone knows where the base station will stand. The "data phase"
variants re-evaluate the same contracts at the actual service placement.
"""

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


@dataclass(frozen=True)
class Location:
    """A planar point, in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("location coordinates must be finite")


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle used for the task area and worker roaming areas."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError("rectangle must satisfy x_min <= x_max and y_min <= y_max")

    def contains(self, loc: Location) -> bool:
        return (self.x_min <= loc.x <= self.x_max
                and self.y_min <= loc.y <= self.y_max)

    def contains_rect(self, other: "Rect") -> bool:
        return (self.x_min <= other.x_min and other.x_max <= self.x_max
                and self.y_min <= other.y_min and other.y_max <= self.y_max)

    def corners(self) -> list[Location]:
        return [Location(self.x_min, self.y_min), Location(self.x_min, self.y_max),
                Location(self.x_max, self.y_min), Location(self.x_max, self.y_max)]

    def clamp(self, loc: Location) -> Location:
        """Nearest point of the rectangle to ``loc``."""
        return Location(min(max(loc.x, self.x_min), self.x_max),
                        min(max(loc.y, self.y_min), self.y_max))


@dataclass(frozen=True)
class RadioParams:
    """Channel, charging and data-quality constants shared by every worker.

    bandwidth_b    channel bandwidth B in Hz
    cnr_g          channel gain to noise ratio g, linear (not dB)
    pathloss_alpha path loss exponent, at least 2
    height_h       base station antenna height in meters
    kappa          charging overhead 1/(eta * Gamma): watts radiated per watt
                   delivered at unit distance
    a1, a2         coefficients of the data quality a1 * ln(1 + a2 * R)
    """

    bandwidth_b: float
    cnr_g: float
    pathloss_alpha: float
    height_h: float
    kappa: float
    a1: float
    a2: float

    def __post_init__(self):
        if self.bandwidth_b <= 0:
            raise ValueError("bandwidth_b must be > 0")
        if self.cnr_g <= 0:
            raise ValueError("cnr_g must be > 0 (linear scale, not dB)")
        if self.pathloss_alpha < 2:
            raise ValueError("pathloss_alpha must be >= 2")
        if self.height_h <= 0:
            raise ValueError("height_h must be > 0")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")
        # a1 == 0 is legal: it models worthless data and shuts the market down.
        if self.a1 < 0:
            raise ValueError("a1 must be >= 0")
        if self.a2 <= 0:
            raise ValueError("a2 must be > 0")


@dataclass(frozen=True)
class WorkerProfile:
    """One registered worker.

    sensing_cost_b is the unit sensing cost in watts per bit/s. The
    worst-case distance is the largest worker-to-station separation possible
    given the roaming area and the task area; workers price their
    transmission against it during the task phase.
    """

    sensing_cost_b: float
    work_area: Rect
    true_location: Location
    worst_case_distance_d: float

    def __post_init__(self):
        if self.sensing_cost_b <= 0:
            raise ValueError("sensing_cost_b must be > 0")
        if not self.work_area.contains(self.true_location):
            raise ValueError("true_location must lie inside work_area")
        if self.worst_case_distance_d <= 0:
            raise ValueError("worst_case_distance_d must be > 0")


@dataclass(frozen=True)
class Instance:
    """A full problem instance: geometry, radio constants and the roster."""

    task_area: Rect
    radio: RadioParams
    workers: tuple
    seed: int

    def __post_init__(self):
        if len(self.workers) < 1:
            raise ValueError("an instance needs at least one worker")
        if not (0 <= int(self.seed) < 2 ** 64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")
        for i, w in enumerate(self.workers):
            if not self.task_area.contains_rect(w.work_area):
                raise ValueError(f"worker {i}: work_area must lie inside task_area")
            expect = max_distance(w.work_area, self.task_area, self.radio.height_h)
            if not math.isclose(w.worst_case_distance_d, expect, rel_tol=1e-9):
                raise ValueError(
                    f"worker {i}: worst_case_distance_d {w.worst_case_distance_d!r} "
                    f"does not match the area geometry ({expect!r})")

    @property
    def n(self) -> int:
        return len(self.workers)

    def worst_case_distances(self) -> np.ndarray:
        return np.array([w.worst_case_distance_d for w in self.workers])

    def sensing_costs(self) -> np.ndarray:
        return np.array([w.sensing_cost_b for w in self.workers])


def distance(worker_loc: Location, bs_loc: Location, h: float) -> float:
    """Line-of-sight distance between a ground worker and the elevated station."""
    return math.sqrt((worker_loc.x - bs_loc.x) ** 2
                     + (worker_loc.y - bs_loc.y) ** 2 + h * h)


def max_distance(work_area: Rect, task_area: Rect, h: float) -> float:
    """Worst-case separation over all worker and station positions.

    The squared planar distance is convex in both endpoints, so the maximum
    over the two rectangles is attained at a pair of corners; enumerating the
    sixteen pairs is exact.
    """
    if not task_area.contains_rect(work_area):
        raise ValueError("work_area must lie inside task_area")
    best = 0.0
    for wc in work_area.corners():
        for tc in task_area.corners():
            best = max(best, (wc.x - tc.x) ** 2 + (wc.y - tc.y) ** 2)
    return math.sqrt(best + h * h)


def transmission_rate(p_t: float, d: float, radio: RadioParams) -> float:
    """Achievable rate in bit/s for transmit power ``p_t`` at distance ``d``."""
    if p_t < 0:
        raise ValueError("transmit power must be >= 0")
    if d <= 0:
        raise ValueError("distance must be > 0")
    snr = p_t * radio.cnr_g / d ** radio.pathloss_alpha
    return radio.bandwidth_b * math.log1p(snr) / LN2


def transmission_power(r: float, d: float, radio: RadioParams) -> float:
    """Transmit power in watts needed to sustain rate ``r`` at distance ``d``.

    Exact inverse of :func:`transmission_rate`. Uses expm1 so rates far below
    the bandwidth do not lose precision.
    """
    if r < 0:
        raise ValueError("rate must be >= 0")
    if d <= 0:
        raise ValueError("distance must be > 0")
    return math.expm1(r * LN2 / radio.bandwidth_b) / radio.cnr_g * d ** radio.pathloss_alpha


def worker_power_cost(r: float, d: float, b: float, radio: RadioParams) -> float:
    """Total power a worker spends at rate ``r``: transmission plus sensing."""
    return transmission_power(r, d, radio) + b * r


def wpt_cost(p_c_i: float, d: float, radio: RadioParams) -> float:
    """Power the platform radiates to deliver ``p_c_i`` watts at distance ``d``."""
    if p_c_i < 0:
        raise ValueError("delivered power must be >= 0")
    if d <= 0:
        raise ValueError("distance must be > 0")
    return p_c_i * d ** radio.pathloss_alpha * radio.kappa


def quality(total_rate: float, radio: RadioParams) -> float:
    """Data quality a1 * ln(1 + a2 * R) of aggregate rate ``R`` (natural log)."""
    if total_rate < 0:
        raise ValueError("total rate must be >= 0")
    return radio.a1 * math.log1p(radio.a2 * total_rate)


def charging_shares(rates) -> np.ndarray:
    """Proportional charging split r_i / sum(r). An all-zero profile gets
    all-zero shares rather than a 0/0."""
    rates = np.asarray(rates, dtype=float)
    if (rates < 0).any():
        raise ValueError("rates must be >= 0")
    total = rates.sum()
    if total <= 0.0:
        return np.zeros_like(rates)
    return rates / total


def task_phase_worker_utility(i: int, rates, p_c: float, instance: Instance) -> float:
    """Worker i's anticipated utility: charging share minus worst-case power cost."""
    rates = np.asarray(rates, dtype=float)
    w = instance.workers[i]
    share = charging_shares(rates)[i]
    cost = worker_power_cost(float(rates[i]), w.worst_case_distance_d,
                             w.sensing_cost_b, instance.radio)
    return share * p_c - cost


def task_phase_platform_utility(p_c: float, rates, instance: Instance) -> float:
    """Platform utility during recruitment: quality minus worst-case charging cost."""
    if p_c < 0:
        raise ValueError("charging power must be >= 0")
    rates = np.asarray(rates, dtype=float)
    shares = charging_shares(rates)
    if shares.sum() == 0.0:
        return 0.0
    d_pow = instance.worst_case_distances() ** instance.radio.pathloss_alpha
    cost = p_c * instance.radio.kappa * float((shares * d_pow).sum())
    return quality(float(rates.sum()), instance.radio) - cost


def data_phase_worker_utility(i: int, bs_loc: Location, eq, instance: Instance) -> float:
    """Worker i's realized utility once the station stands at ``bs_loc``.

    ``eq`` is an equilibrium outcome exposing ``rates`` and ``p_c_star``;
    shares and rates stay frozen from the task phase, only the distance moves.
    """
    w = instance.workers[i]
    d = distance(w.true_location, bs_loc, instance.radio.height_h)
    share = charging_shares(eq.rates)[i]
    cost = worker_power_cost(float(eq.rates[i]), d, w.sensing_cost_b, instance.radio)
    return share * eq.p_c_star - cost


def data_phase_platform_utility(bs_loc: Location, eq, instance: Instance) -> float:
    """Platform utility at placement ``bs_loc`` under frozen equilibrium contracts."""
    rates = np.asarray(eq.rates, dtype=float)
    shares = charging_shares(rates)
    if shares.sum() == 0.0:
        return 0.0
    radio = instance.radio
    d = np.array([distance(w.true_location, bs_loc, radio.height_h)
                  for w in instance.workers])
    cost = eq.p_c_star * radio.kappa * float((shares * d ** radio.pathloss_alpha).sum())
    return quality(float(rates.sum()), radio) - cost
