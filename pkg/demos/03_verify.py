"""Run the verification battery on a solved game and show a failing config.

The first part solves the reference game and runs every check. The second
part feeds the cost validator a config whose player-I cost is constant 1,
for which two small jumps are no cheaper than one big one would need to be.

Run:  python3 demos/03_verify.py
"""

from impulse_games import SpaceTimeGrid, build_spec, canonical_1d, run_checks, solve, validate_costs

spec = canonical_1d()
grid = SpaceTimeGrid.for_spec(spec, 301, 64)
field, policies = solve(spec, grid)

report = run_checks(spec, field, policies, seed=0, n_paths=4000)
for line in report.summary_lines():
    print(line)
print("all required checks pass:", report.ok)

bad = build_spec(c="1", chi="1", h_min=0.5, allow_invalid_costs=True, r_max=2, m_imp=5, x_min=-3, x_max=3)
costs = validate_costs(bad)
print("\nconstant unit cost for player I:")
for line in costs.summary_lines():
    print(" ", line)
