"""Worker rate competition and the platform's charging-budget choice.

Solves the two-level game on one seeded instance: the inner fixed point
of worker best responses at a given charging budget, then the budget the
platform actually picks. Run: python3 demos/02_stackelberg_equilibrium.py
"""

import numpy as np

from crowdwatt import (
    best_response_residuals,
    default_radio,
    generate_instance,
    solve_ne,
    solve_stackelberg,
    task_phase_platform_utility,
)

instance = generate_instance(10, default_radio(), seed=42)
print(f"instance: n={instance.n}, seed={instance.seed}")

print("\n-- inner game: rates at a fixed charging budget ------------------")
for p_c in (5e-5, 2e-4, 1e-3):
    rates = solve_ne(p_c, instance)
    u = task_phase_platform_utility(p_c, rates, instance)
    print(f"P_c={p_c:.1e} W: {int((rates > 0).sum())}/{instance.n} workers active, "
          f"total rate {rates.sum():.4f} bit/s, platform utility {u:.2f}")
print("a bigger budget recruits more workers but costs more than the extra")
print("data quality is worth past some point, so the platform optimizes.")

print("\n-- outer game: the platform's budget ------------------------------")
eq = solve_stackelberg(instance)
print(f"P_c* = {eq.p_c_star:.6e} W  (converged={eq.converged}, "
      f"{eq.iterations_used} certification sweeps)")
print(f"platform utility {eq.platform_utility:.4f}, "
      f"employed {int((np.asarray(eq.rates) > 0).sum())}/{instance.n}")
print(f"rates: {np.array2string(np.asarray(eq.rates), precision=4)}")
print(f"charging split: {np.array2string(np.asarray(eq.charging_powers), precision=3)}")

resid = best_response_residuals(eq.rates, eq.p_c_star, instance)
print(f"\nstationarity: max best-response residual {resid.max():.2e}")

print("\n-- the budget is a genuine peak -----------------------------------")
for factor in (0.95, 1.0, 1.05):
    p = eq.p_c_star * factor
    u = task_phase_platform_utility(p, solve_ne(p, instance), instance)
    mark = "  <-- chosen" if factor == 1.0 else ""
    print(f"P_c = {factor:4.2f} * P_c*: platform utility {u:.6f}{mark}")
