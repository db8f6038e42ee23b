"""Penalty-minimizing solar subset selection with a learned surrogate.

Every hour of every synthetic day is simulated under all 32 on/off subsets
of the five solar plants: switch at t=1 from the all-on t=0+ state, check
congestion (50-point penalty), and price the commitment gap (scaled onto
0..50). A dense surrogate learns total penalty from (pre-switch voltages,
mask); exhaustive argmin over its predictions picks the subset, and the
brute-force simulator grades the choice.
"""

from gridseer import build_default_grid
from gridseer.dispatch import (
    brute_force_best_subset, gen_subset_scenarios, select_optimal_subset,
    train_day_count, train_surrogate,
)
from gridseer.grid import with_loads

grid = build_default_grid()
print("simulating 4 synthetic days x 24 hours x 32 masks...")
scenarios, scaler = gen_subset_scenarios(grid, days=4, seed=3)
print(f"{len(scenarios)} scenarios, "
      f"{sum(s.l2 > 0 for s in scenarios)} hit the congestion penalty")

surrogate = train_surrogate(scenarios, seed=3, steps=2500)
print(f"surrogate test MSE: {surrogate.metadata['test_mse']:.1f} penalty-points^2")

days = sorted({s.day for s in scenarios})
test_day = days[train_day_count(len(days))]
noon = next(s for s in scenarios if s.day == test_day and s.hour == 12)

mask, predicted = select_optimal_subset(surrogate, noon.pre_voltages, 5)
grid_hour = with_loads(grid, noon.p_loads, noon.q_loads)
ranking = brute_force_best_subset(grid_hour, noon.weather, noon.committed_power,
                                  noon.actual_power, scaler)
truth = {m.bits: t for m, t in ranking}
print(f"\nheld-out noon hour (day {test_day}):")
print(f"  surrogate picks {mask.bits}, predicted {predicted:.1f}, "
      f"true {truth[mask.bits]:.1f}")
print(f"  oracle best    {ranking[0][0].bits}, true {ranking[0][1]:.1f}")
print(f"  regret: {truth[mask.bits] - ranking[0][1]:.2f} penalty points")
print("\ntrue ranking head:")
for m, t in ranking[:5]:
    print(f"  {m.bits}  total {t:6.2f}")
