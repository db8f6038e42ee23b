"""Solve the bundled 23-bus grid and inspect loadings.

The grid ships with three conventional plants in the north (buses 1-3) and
five solar plants embedded in the southern load pockets. This script solves
the base case, prints the voltage profile and branch loadings, and then
shows what happens to the north-south corridors when the whole solar fleet
drops out.
"""

import numpy as np

from gridseer import build_default_grid, check_congestion, solve_powerflow
from gridseer.grid import with_generators
from dataclasses import replace

grid = build_default_grid()
solution = solve_powerflow(grid)

print(f"converged in {solution.iterations} iterations, "
      f"max mismatch {solution.max_mismatch:.2e} pu")
print("\nbus voltages (pu):")
for bus, vm, va in zip(grid.buses, solution.v_mag, solution.v_ang):
    tag = {"Slack": "*", "PV": "+"}.get(bus.kind, " ")
    print(f"  bus {bus.id:2d}{tag} |V| = {vm:.4f}  angle = {np.degrees(va):6.2f} deg")

limits = np.array([b.mva_limit for b in grid.branches])
loading = solution.branch_flows / limits
print(f"\nheaviest branch loading: {loading.max():.0%} "
      f"(branch {int(loading.argmax())})")
print("congested:", check_congestion(solution, grid).congested)

# Now lose the solar fleet at full load.
no_solar = with_generators(
    grid, [replace(g, on=False) if g.kind == "Solar" else g for g in grid.generators])
stressed = solve_powerflow(no_solar)
report = check_congestion(stressed, no_solar)
print("\nwith every solar plant off:")
for idx, ratio in report.overloads:
    br = no_solar.branches[idx]
    print(f"  branch {br.from_bus}-{br.to_bus} overloaded at {ratio:.0%}")
