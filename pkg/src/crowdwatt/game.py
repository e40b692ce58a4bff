"""Equilibrium solvers for the charging-compensated rate game.

Inner game: given a total charging power, each worker picks the transmission
rate that maximizes its proportional share of the charging budget minus its
sensing and transmission costs, priced at the worst-case distance. The
marginal of that objective is strictly decreasing in the own rate, so best
responses are unique and the game has a single Nash equilibrium.

Outer problem: the platform scans charging powers for the induced
equilibrium that maximizes data quality minus worst-case charging cost.

`solve_ne` is the literal round-robin best-response iteration and serves as
the reference equilibrium. The outer scan additionally exploits an
aggregate-rate reformulation: at an equilibrium with total rate R each
worker's rate solves a scalar equation in R alone, so the equilibrium
reduces to the root of a one-dimensional residual. That route vectorizes
across workers and across a whole grid of candidate charging powers; the
winning charging power is then certified with plain sweeps.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .model import (
    LN2,
    Instance,
    charging_shares,
    task_phase_platform_utility,
    task_phase_worker_utility,
)

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class ConvergenceError(RuntimeError):
    """A solver failed to meet its tolerance; carries the last iterate."""

    def __init__(self, message: str, rates=None):
        super().__init__(message)
        self.rates = rates


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and iteration caps for the equilibrium solvers.

    br_tolerance    sup-norm relative change between sweeps declaring a
                    fixed point
    br_max_iters    sweep cap per run
    foc_tolerance   absolute stationarity residual for one best response
    pc_grid_points  charging-power grid size for the outer scan
    pc_upper_bound  top of the scanned interval; None picks 10 * a1, far
                    above where the logarithmic quality can pay for charging
    refine_iters    golden-section steps inside the best grid bracket
    """

    br_tolerance: float = 1e-9
    br_max_iters: int = 10000
    foc_tolerance: float = 1e-10
    pc_grid_points: int = 200
    pc_upper_bound: Optional[float] = None
    refine_iters: int = 60

    def __post_init__(self):
        if self.br_tolerance <= 0 or self.foc_tolerance <= 0:
            raise ValueError("tolerances must be > 0")
        if self.br_max_iters < 1 or self.refine_iters < 0:
            raise ValueError("iteration caps must be positive")
        if self.pc_grid_points < 2:
            raise ValueError("pc_grid_points must be >= 2")
        if self.pc_upper_bound is not None and self.pc_upper_bound <= 0:
            raise ValueError("pc_upper_bound must be > 0")


@dataclass
class EquilibriumResult:
    """Joint outcome: the platform's charging power and the worker equilibrium
    it induces, with all utilities evaluated at worst-case distances."""

    p_c_star: float
    rates: np.ndarray
    charging_powers: np.ndarray
    platform_utility: float
    worker_utilities: np.ndarray
    iterations_used: int
    converged: bool


def _coeffs(instance: Instance):
    """Per-worker marginal-cost coefficients (b_i, k_i) of the rate game."""
    radio = instance.radio
    b = instance.sensing_costs()
    k = instance.worst_case_distances() ** radio.pathloss_alpha * (LN2 / radio.bandwidth_b)
    return b, k


def marginal_utility(i: int, rates, p_c: float, instance: Instance) -> float:
    """Derivative of worker i's task-phase objective in its own rate:

        p_c * S_-i / S^2  -  (D_i^alpha * ln2 / B) * 2^(r_i / B)  -  b_i

    with S the total rate. Strictly decreasing in r_i, so its sign change
    pins the unique best response. An all-zero profile gets reward term 0.
    """
    rates = np.asarray(rates, dtype=float)
    radio = instance.radio
    w = instance.workers[i]
    r_i = float(rates[i])
    total = float(rates.sum())
    reward = p_c * (total - r_i) / (total * total) if total > 0 else 0.0
    k = w.worst_case_distance_d ** radio.pathloss_alpha * LN2 / radio.bandwidth_b
    # exp cap keeps the value finite (and hugely negative) instead of overflowing
    growth = math.exp(min(LN2 * r_i / radio.bandwidth_b, 700.0))
    return reward - k * growth - w.sensing_cost_b


def _best_response_scalar(s: float, p_c: float, b: float, k: float,
                          bw: float, foc_tol: float) -> float:
    if p_c <= 0.0 or s <= 0.0:
        return 0.0
    if p_c / s <= b + k:
        # marginal at zero is already non-positive: corner
        return 0.0
    c = LN2 / bw

    def f(r):
        total = s + r
        return p_c * s / (total * total) - k * math.exp(min(c * r, 700.0)) - b

    lo, hi = 0.0, bw
    grown = 0
    while f(hi) > 0.0:
        lo, hi = hi, 2.0 * hi
        grown += 1
        if grown > 60:
            raise ConvergenceError("best-response bracket grew past 2^60 * B")
    mid = 0.5 * (lo + hi)
    for _ in range(500):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < foc_tol or hi - lo < 1e-18 * max(hi, 1.0):
            break
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
    for _ in range(4):
        total = s + mid
        fp = -2.0 * p_c * s / total ** 3 - k * c * math.exp(min(c * mid, 700.0))
        new = mid - f(mid) / fp
        if not lo <= new <= hi:
            break
        mid = new
    return max(mid, 0.0)


def best_response(i: int, r_minus_i, p_c: float, instance: Instance,
                  cfg: Optional[SolverConfig] = None) -> float:
    """Worker i's unique optimal rate against the others' rates.

    Returns 0 when the marginal at zero is non-positive. Otherwise brackets
    the marginal's root by geometric growth from [0, B] and bisects until
    the residual is below cfg.foc_tolerance, with a short Newton polish.
    """
    cfg = cfg if cfg is not None else SolverConfig()
    radio = instance.radio
    w = instance.workers[i]
    s = float(np.asarray(r_minus_i, dtype=float).sum())
    k = w.worst_case_distance_d ** radio.pathloss_alpha * LN2 / radio.bandwidth_b
    return _best_response_scalar(s, p_c, w.sensing_cost_b, k,
                                 radio.bandwidth_b, cfg.foc_tolerance)


def _sweep_run(p_c, b, k, bw, cfg, init):
    """Round-robin best-response sweeps from ``init``.

    Returns (rates, sweeps, converged). Each component update sees the
    freshest values of all the others.
    """
    n = b.size
    r = np.array(init, dtype=float)
    for sweep in range(1, cfg.br_max_iters + 1):
        old = r.copy()
        total = float(r.sum())
        for i in range(n):
            s = total - r[i]
            new = _best_response_scalar(s, p_c, b[i], k[i], bw, cfg.foc_tolerance)
            total += new - r[i]
            r[i] = new
        change = float(np.abs(r - old).max())
        if change <= cfg.br_tolerance * max(float(np.abs(r).max()), 1e-300):
            return r, sweep, True
    return r, cfg.br_max_iters, False


def _solve_ne_sweeps(p_c, instance, cfg, initial_rates=None):
    """Sweep iteration plus restart ladder; returns (rates, total sweeps)."""
    n = instance.n
    if p_c <= 0.0 or n < 2:
        return np.zeros(n), 0
    b, k = _coeffs(instance)
    bw = instance.radio.bandwidth_b
    if initial_rates is None:
        r = np.full(n, bw)
    else:
        r = np.asarray(initial_rates, dtype=float).copy()
        if r.shape != (n,):
            raise ValueError("initial_rates must have one entry per worker")
        if (r < 0).any():
            raise ValueError("initial_rates must be >= 0")
    total_sweeps = 0
    scale = bw
    for _ in range(20):
        r, used, ok = _sweep_run(p_c, b, k, bw, cfg, r)
        total_sweeps += used
        if not ok:
            raise ConvergenceError(
                f"best-response sweeps still moving after {cfg.br_max_iters} sweeps",
                rates=r)
        if np.count_nonzero(r) >= 2:
            return r, total_sweeps
        # The all-idle profile absorbs sweeps started too high (everyone
        # corners while the others still look expensive) yet is never an
        # equilibrium at positive charging power: a lone transmitter would
        # claim the whole budget at vanishing cost. Restart smaller.
        scale *= 1e-3
        r = np.full(n, scale)
    raise ConvergenceError(
        "sweeps kept collapsing to an idle profile; no equilibrium certified",
        rates=r)


def solve_ne(p_c: float, instance: Instance, cfg: Optional[SolverConfig] = None,
             initial_rates=None) -> np.ndarray:
    """Nash equilibrium rates at charging power ``p_c`` by best-response sweeps.

    Converged when the sup-norm relative change across one sweep drops below
    cfg.br_tolerance. Zero charging power, or a single registered worker,
    yields the all-zero profile. Raises ConvergenceError (with the last
    iterate attached) instead of returning an uncertified vector.
    """
    cfg = cfg if cfg is not None else SolverConfig()
    rates, _ = _solve_ne_sweeps(p_c, instance, cfg, initial_rates)
    return rates


def best_response_residuals(rates, p_c: float, instance: Instance) -> np.ndarray:
    """Per-worker stationarity violation, relative to the cost scale b_i + k_i.

    Active workers report |marginal|; idle workers report the positive part
    of the marginal at zero, so a legitimate corner scores exactly 0.
    """
    rates = np.asarray(rates, dtype=float)
    b, k = _coeffs(instance)
    out = np.empty(instance.n)
    for i in range(instance.n):
        m = marginal_utility(i, rates, p_c, instance)
        out[i] = abs(m) if rates[i] > 0 else max(m, 0.0)
    return out / (b + k)


def _rates_for_totals(R, p_cs, b, k, bw, x0=None):
    """Each worker's optimal rate against a fixed aggregate rate (batched).

    Solves p_c (R - r) / R^2 = b_i + k_i 2^(r/B) on [0, R] for every worker
    and every batch lane; corner at zero when p_c / R <= b_i + k_i.
    R, p_cs: (m,); b, k: (n,). Returns (m, n). The per-worker curve is
    concave and strictly decreasing, so the safeguarded Newton converges
    from any start; ``x0`` reuses a neighboring solve's rates.
    """
    c = LN2 / bw
    Rc, Pc = R[:, None], p_cs[:, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        A = np.where(Rc > 0, Pc / (Rc * Rc), 0.0)
        interior = np.where(Rc > 0, Pc / Rc, 0.0) > (b + k)[None, :]
    if x0 is None:
        # linearization 2^(r/B) ~= 1 + c r, nearly exact where r << B
        x0 = (A * Rc - b[None, :] - k[None, :]) / (A + k[None, :] * c)
    x = np.clip(np.where(interior, x0, 0.0), 0.0, Rc)
    lo = np.zeros_like(x)
    hi = np.broadcast_to(Rc, x.shape).copy()
    for _ in range(12):
        e = np.exp(np.minimum(c * x, 700.0))
        g = A * (Rc - x) - b[None, :] - k[None, :] * e
        gp = -A - k[None, :] * c * e
        lo = np.where(g >= 0, x, lo)
        hi = np.where(g <= 0, x, hi)
        xn = x - g / gp
        bad = (xn < lo) | (xn > hi) | ~np.isfinite(xn)
        x_new = np.where(interior & ~bad, xn, np.where(interior, 0.5 * (lo + hi), 0.0))
        settled = np.all(np.abs(x_new - x) <= 1e-15 * np.maximum(x, 1e-300))
        x = x_new
        if settled:
            break
    return np.where(interior, np.clip(x, 0.0, Rc), 0.0)


def _ne_rates_batch(p_cs, b, k, bw, n, r_bracket=None):
    """Equilibrium rates for a batch of charging powers at once.

    Uses the aggregate fixed point: the equilibrium total R is the root of
    sum_i r_i(R) - R, which is positive for small R and negative for large
    R, so bisection on R finds the (unique) equilibrium per lane.
    ``r_bracket`` is an optional warm (lo, hi) guess for the aggregate; a
    wrong guess only costs the expansion steps that repair it.
    """
    p_cs = np.atleast_1d(np.asarray(p_cs, dtype=float))
    m = p_cs.size
    if n < 2:
        return np.zeros((m, n))
    pos = p_cs > 0
    if r_bracket is not None and r_bracket[1] > 0.0:
        lo = np.full(m, max(r_bracket[0], 1e-12 * r_bracket[1]))
        hi = np.full(m, float(r_bracket[1]))
    else:
        cbar = float(np.median(b + k))
        R0 = np.where(pos, p_cs * (n - 1) / (n * cbar), 1.0)
        lo, hi = R0.copy(), R0.copy()

    xc = None

    def phi(R):
        nonlocal xc
        xc = _rates_for_totals(R, p_cs, b, k, bw, x0=xc)
        return xc.sum(axis=1) - R

    for _ in range(300):
        need = pos & (phi(lo) <= 0)
        if not need.any():
            break
        lo = np.where(need, lo / 8.0, lo)
    for _ in range(300):
        need = pos & (phi(hi) > 0)
        if not need.any():
            break
        hi = np.where(need, hi * 8.0, hi)
    for _ in range(110):
        if np.all((hi - lo) <= 1e-14 * hi):
            break
        mid = 0.5 * (lo + hi)
        up = phi(mid) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    rates = _rates_for_totals(0.5 * (lo + hi), p_cs, b, k, bw, x0=xc)
    rates[~pos] = 0.0
    return rates


def _platform_utilities(p_cs, rates, d_pow, radio):
    tot = rates.sum(axis=1)
    safe = np.where(tot > 0, tot, 1.0)
    shares = np.where(tot[:, None] > 0, rates / safe[:, None], 0.0)
    q = radio.a1 * np.log1p(radio.a2 * tot)
    cost = p_cs * radio.kappa * (shares * d_pow[None, :]).sum(axis=1)
    return np.where(tot > 0, q - cost, 0.0)


def solve_stackelberg(instance: Instance,
                      cfg: Optional[SolverConfig] = None) -> EquilibriumResult:
    """Charging power maximizing platform utility over induced equilibria.

    Scans a uniform grid over [0, pc_upper_bound], refines the bracket
    around the best grid point by golden section, then certifies the winner
    with best-response sweeps warm-started from the scan's equilibrium.
    Warns (and marks the result non-converged) when the maximizer sits at
    the top of the grid, i.e. the configured bound clipped the search.
    """
    cfg = cfg if cfg is not None else SolverConfig()
    radio = instance.radio
    n = instance.n
    ub = cfg.pc_upper_bound if cfg.pc_upper_bound is not None else 10.0 * radio.a1
    if ub <= 0.0 or n < 2:
        # worthless data or a collapsed market: charging buys nothing
        rates = np.zeros(n)
        return EquilibriumResult(
            p_c_star=0.0, rates=rates, charging_powers=np.zeros(n),
            platform_utility=task_phase_platform_utility(0.0, rates, instance),
            worker_utilities=np.zeros(n), iterations_used=0, converged=True)

    b, k = _coeffs(instance)
    bw = radio.bandwidth_b
    d_pow = instance.worst_case_distances() ** radio.pathloss_alpha

    grid = np.linspace(0.0, ub, cfg.pc_grid_points)
    rates_g = _ne_rates_batch(grid, b, k, bw, n)
    utils_g = _platform_utilities(grid, rates_g, d_pow, radio)
    j = int(np.argmax(utils_g))
    at_edge = j == cfg.pc_grid_points - 1
    if at_edge:
        warnings.warn(
            "platform optimum sits at pc_upper_bound; the bound is too small",
            RuntimeWarning)
    best_pc, best_u = float(grid[j]), float(utils_g[j])
    a = float(grid[max(j - 1, 0)])
    z = float(grid[min(j + 1, cfg.pc_grid_points - 1)])

    # The aggregate rate is monotone in the charging power, so the grid
    # neighbors of the maximizer bracket it for every power the refinement
    # will ever probe.
    totals_g = rates_g.sum(axis=1)
    r_right = float(totals_g[min(j + 1, cfg.pc_grid_points - 1)])
    r_left = float(totals_g[max(j - 1, 0)])
    bracket = (0.5 * r_left, 2.0 * r_right) if r_right > 0.0 else None

    def evalu(pc):
        r1 = _ne_rates_batch(np.array([pc]), b, k, bw, n, r_bracket=bracket)
        return float(_platform_utilities(np.array([pc]), r1, d_pow, radio)[0])

    c = z - (z - a) * _INVPHI
    d = a + (z - a) * _INVPHI
    fc, fd = evalu(c), evalu(d)
    for _ in range(cfg.refine_iters):
        if fc > fd:
            z, d, fd = d, c, fc
            c = z - (z - a) * _INVPHI
            fc = evalu(c)
        else:
            a, c, fc = c, d, fd
            d = a + (z - a) * _INVPHI
            fd = evalu(d)
        if fc > best_u:
            best_u, best_pc = fc, float(c)
        if fd > best_u:
            best_u, best_pc = fd, float(d)

    if best_pc <= 0.0:
        rates = np.zeros(n)
        sweeps = 0
    else:
        warm = _ne_rates_batch(np.array([best_pc]), b, k, bw, n,
                               r_bracket=bracket)[0]
        rates, sweeps = _solve_ne_sweeps(best_pc, instance, cfg, initial_rates=warm)

    shares = charging_shares(rates)
    worker_us = np.array([task_phase_worker_utility(i, rates, best_pc, instance)
                          for i in range(n)])
    return EquilibriumResult(
        p_c_star=best_pc,
        rates=rates,
        charging_powers=shares * best_pc,
        platform_utility=task_phase_platform_utility(best_pc, rates, instance),
        worker_utilities=worker_us,
        iterations_used=sweeps,
        converged=not at_edge)
