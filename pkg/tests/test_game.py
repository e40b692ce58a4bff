"""Rate game: best responses, equilibrium solving, and the power choice above."""

import math

import numpy as np
import pytest

from crowdwatt import (
    ConvergenceError,
    SolverConfig,
    best_response,
    best_response_residuals,
    charging_shares,
    default_radio,
    generate_instance,
    marginal_utility,
    solve_ne,
    solve_stackelberg,
    task_phase_platform_utility,
)

from conftest import RADIO, pinned_instance

BW = RADIO.bandwidth_b


def stage_objective(r, s, p_c, b, d_alpha, bw=BW):
    """Antiderivative of the stationarity condition solved by best_response:
    proportional reward minus exponential transmission growth minus sensing."""
    total = r + s
    share = r / total if total > 0 else 0.0
    return share * p_c - (2.0 ** (r / bw) - 1.0) * d_alpha - b * r


def cost_coeffs(instance, i):
    w = instance.workers[i]
    d_alpha = w.worst_case_distance_d ** instance.radio.pathloss_alpha
    return w.sensing_cost_b, d_alpha


# ------------------------------------------------------------ marginal

def test_marginal_matches_fd_of_stage_objective():
    rng = np.random.default_rng(29)
    inst = pinned_instance([(12, 40, 1.2e-4), (33, 8, 1e-4)])
    for _ in range(200):
        i = int(rng.integers(2))
        b, d_alpha = cost_coeffs(inst, i)
        r = rng.uniform(1e3, 3e7)
        s = rng.uniform(1e3, 3e7)
        p_c = rng.uniform(1e-4, 10.0)
        rates = np.zeros(2)
        rates[i], rates[1 - i] = r, s
        h = max(1.0, 1e-5 * (r + s))
        fd = (stage_objective(r + h, s, p_c, b, d_alpha)
              - stage_objective(r - h, s, p_c, b, d_alpha)) / (2 * h)
        got = marginal_utility(i, rates, p_c, inst)
        scale = b + d_alpha * math.log(2) / BW * 2.0 ** (r / BW) + abs(fd)
        assert abs(got - fd) <= 1e-6 * scale


def test_marginal_with_no_coworkers_is_pure_cost():
    inst = pinned_instance([(25, 25, 1e-4), (25, 25, 1e-4)])
    b, d_alpha = cost_coeffs(inst, 0)
    k = d_alpha * math.log(2) / BW
    got = marginal_utility(0, [1e6, 0.0], 5.0, inst)
    assert got == pytest.approx(-k * 2.0 ** (1e6 / BW) - b, rel=1e-12)
    # all-idle profile: reward term is defined as 0, so the corner is stable
    assert marginal_utility(0, [0.0, 0.0], 5.0, inst) < 0


def test_marginal_strictly_decreasing_in_own_rate():
    rng = np.random.default_rng(31)
    inst = pinned_instance([(5, 5, 1e-4), (45, 45, 1.4e-4), (25, 10, 1.1e-4)])
    for _ in range(100):
        rates = rng.uniform(0, 2e7, 3)
        i = int(rng.integers(3))
        p_c = rng.uniform(1e-4, 5.0)
        m1 = marginal_utility(i, rates, p_c, inst)
        bumped = rates.copy()
        bumped[i] += rng.uniform(1e3, 1e6)
        m2 = marginal_utility(i, bumped, p_c, inst)
        assert m2 < m1


# ------------------------------------------------------- best response

def test_best_response_corner_conditions():
    inst = pinned_instance([(25, 25, 1e-4), (30, 30, 1e-4)])
    b, d_alpha = cost_coeffs(inst, 0)
    k = d_alpha * math.log(2) / BW
    s = 1e6
    threshold = s * (b + k)
    assert best_response(0, [s], 0.0, inst) == 0.0
    assert best_response(0, [s], threshold * (1 - 1e-9), inst) == 0.0
    assert best_response(0, [s], threshold, inst) == 0.0
    assert best_response(0, [0.0], 5.0, inst) == 0.0
    assert best_response(0, [s], threshold * 1.1, inst) > 0.0


def test_best_response_matches_grid_argmax():
    rng = np.random.default_rng(37)
    inst = pinned_instance([(12, 40, 1.2e-4), (33, 8, 1e-4)])
    grid = np.linspace(0.0, 4e7, 200001)
    step = grid[1] - grid[0]
    for _ in range(10):
        i = int(rng.integers(2))
        b, d_alpha = cost_coeffs(inst, i)
        s = rng.uniform(1e5, 1e7)
        p_c = rng.uniform(0.1, 10.0)
        shares = grid / (grid + s)
        u = shares * p_c - (2.0 ** (grid / BW) - 1.0) * d_alpha - b * grid
        star = best_response(i, [s], p_c, inst)
        assert star < grid[-1] - step  # argmax is interior to the grid
        assert abs(star - grid[np.argmax(u)]) <= step


def test_best_response_monotone_in_charging_power():
    inst = pinned_instance([(25, 25, 1e-4), (10, 10, 1.3e-4)])
    s = 5e5
    prev = -1.0
    for p_c in np.linspace(1e-5, 2.0, 10):
        r = best_response(0, [s], p_c, inst)
        assert r >= prev - 1e-12
        prev = r


# -------------------------------------------------------- equilibrium

def test_solve_ne_trivial_cases():
    inst2 = pinned_instance([(25, 25, 1e-4), (10, 10, 1.3e-4)])
    assert (solve_ne(0.0, inst2) == 0.0).all()
    inst1 = pinned_instance([(25, 25, 1e-4)])
    assert (solve_ne(1.0, inst1) == 0.0).all()


def test_symmetric_equilibrium_matches_scalar_root():
    # identical workers: the equilibrium is symmetric and its common rate
    # solves p_c (n-1) / (n^2 r) = b + k 2^(r/B), a scalar root-find
    for n in (2, 5):
        inst = pinned_instance([(25, 25, 1e-4)] * n)
        b, d_alpha = cost_coeffs(inst, 0)
        k = d_alpha * math.log(2) / BW
        for p_c in (1e-4, 1e-2, 1.0):
            def excess(r):
                return p_c * (n - 1) / (n * n * r) - b - k * 2.0 ** (r / BW)

            lo, hi = 1e-12, BW
            for _ in range(200):
                mid = math.sqrt(lo * hi)  # geometric: the root spans decades
                if excess(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            root = math.sqrt(lo * hi)
            rates = solve_ne(p_c, inst)
            assert rates.max() - rates.min() <= 1e-9 * rates.max()
            assert rates[0] == pytest.approx(root, rel=1e-6)


def test_solve_ne_stationary_and_fixed_point():
    rng = np.random.default_rng(41)
    for alpha in (2.0, 2.5, 3.0):
        radio = default_radio(alpha)
        for n in (5, 12):
            seed = int(rng.integers(2 ** 32))
            inst = generate_instance(n, radio, seed)
            p_c = 10.0 ** rng.uniform(-4, -2)
            rates = solve_ne(p_c, inst)
            assert (best_response_residuals(rates, p_c, inst) < 1e-6).all()
            for i in range(n):
                others = np.delete(rates, i)
                br = best_response(i, others, p_c, inst)
                assert abs(br - rates[i]) <= 1e-6 * max(rates[i], 1e-12)


def test_solve_ne_init_independence():
    rng = np.random.default_rng(43)
    for seed in rng.integers(2 ** 32, size=5):
        inst = generate_instance(10, default_radio(), int(seed))
        p_c = 3e-4
        base = solve_ne(p_c, inst)
        for init in (rng.uniform(0.1, 10.0, 10) * BW, np.full(10, 1e-6 * BW)):
            other = solve_ne(p_c, inst, initial_rates=init)
            denom = max(float(np.abs(base).max()), 1e-12)
            assert float(np.abs(other - base).max()) <= 1e-6 * denom


def test_solve_ne_initial_rates_validation():
    inst = pinned_instance([(25, 25, 1e-4), (10, 10, 1.3e-4)])
    with pytest.raises(ValueError):
        solve_ne(1e-3, inst, initial_rates=np.ones(3))
    with pytest.raises(ValueError):
        solve_ne(1e-3, inst, initial_rates=np.array([1.0, -1.0]))


# --------------------------------------------------- platform's choice

def test_stackelberg_reference_market():
    inst = generate_instance(50, default_radio(), 1)
    eq = solve_stackelberg(inst)
    assert eq.converged
    assert eq.p_c_star == pytest.approx(2.3545796e-4, rel=1e-4)
    assert eq.platform_utility == pytest.approx(4755.51, rel=1e-3)
    assert int((eq.rates > 0).sum()) == 16
    assert (best_response_residuals(eq.rates, eq.p_c_star, inst) < 1e-6).all()
    # participation is voluntary: nobody ends below the stay-out payoff
    assert (eq.worker_utilities >= -1e-9).all()
    assert eq.worker_utilities[eq.rates == 0].sum() == 0.0
    assert eq.charging_powers.sum() == pytest.approx(eq.p_c_star, rel=1e-12)
    assert np.allclose(eq.charging_powers,
                       charging_shares(eq.rates) * eq.p_c_star)
    assert eq.iterations_used >= 1
    # the certified rates agree with a cold solve at the winning power
    cold = solve_ne(eq.p_c_star, inst)
    assert float(np.abs(cold - eq.rates).max()) <= 1e-6 * float(eq.rates.max())


def test_stackelberg_is_local_maximum():
    inst = generate_instance(20, default_radio(), 9)
    eq = solve_stackelberg(inst)
    u_star = eq.platform_utility
    for bump in (-0.02, 0.02):
        p_c = eq.p_c_star * (1 + bump)
        u = task_phase_platform_utility(p_c, solve_ne(p_c, inst), inst)
        assert u <= u_star + 1e-6 * abs(u_star)


def test_stackelberg_worthless_data_shuts_market():
    radio = default_radio()
    radio = type(radio)(radio.bandwidth_b, radio.cnr_g, radio.pathloss_alpha,
                        radio.height_h, radio.kappa, 0.0, radio.a2)
    inst = generate_instance(10, radio, 3)
    eq = solve_stackelberg(inst)
    assert eq.converged
    assert eq.p_c_star == 0.0
    assert eq.platform_utility == 0.0
    assert (eq.rates == 0.0).all()


def test_stackelberg_warns_when_bound_clips_optimum():
    inst = generate_instance(10, default_radio(), 5)
    cfg = SolverConfig(pc_upper_bound=1e-5)
    with pytest.warns(RuntimeWarning, match="pc_upper_bound"):
        eq = solve_stackelberg(inst, cfg)
    assert not eq.converged


def test_solver_config_defaults_and_validation():
    cfg = SolverConfig()
    assert cfg.br_tolerance == 1e-9
    assert cfg.br_max_iters == 10000
    assert cfg.foc_tolerance == 1e-10
    assert cfg.pc_grid_points == 200
    assert cfg.pc_upper_bound is None
    assert cfg.refine_iters == 60
    with pytest.raises(ValueError):
        SolverConfig(br_tolerance=0.0)
    with pytest.raises(ValueError):
        SolverConfig(pc_grid_points=1)
    with pytest.raises(ValueError):
        SolverConfig(pc_upper_bound=-1.0)


def test_convergence_error_carries_last_iterate():
    err = ConvergenceError("stalled", rates=np.array([1.0, 2.0]))
    assert isinstance(err, RuntimeError)
    assert (err.rates == np.array([1.0, 2.0])).all()
