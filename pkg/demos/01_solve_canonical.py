"""Solve the one-dimensional reference game and look at what the value does.

Player I collects max(0, 10 - |x|) at the horizon. Player II pays it. Either
player may shift the state by a jump, at cost 2 (player I) or 1 (player II).
Between jumps the state is a Brownian motion with volatility 0.5.

Run:  python3 demos/01_solve_canonical.py
"""

import numpy as np

from impulse_games import SpaceTimeGrid, canonical_1d, solve
from impulse_games.intervention import IMPULSE_I, IMPULSE_II

spec = canonical_1d()
grid = SpaceTimeGrid.for_spec(spec, 301, 64)
field, policies = solve(spec, grid)
x = grid.lattice.axes[0]

print(f"lattice {grid.lattice.N[0]} nodes on [{x[0]}, {x[-1]}], {grid.K} time steps of {grid.dt}")

# The terminal payoff is reshaped before any dynamics act. Player II can jump
# out of the peak for a cost of 1, so the lifted payoff never exceeds 1.
g = np.maximum(0, 10 - np.abs(x))
lifted = field.values[-1]
print("\nterminal layer: raw payoff vs face-lifted payoff")
for xi in (0.0, 3.0, 9.0, 10.0, 12.0):
    i = int(np.argmin(np.abs(x - xi)))
    print(f"  x={xi:5.1f}   g={g[i]:6.3f}   lifted={lifted[i]:6.3f}")

print(f"\nV(0, 0) = {float(field.values[0][150])!r}")

# Where does each player intervene at t = 0?
lab = policies[0].labels
for name, code in (("player I", IMPULSE_I), ("player II", IMPULSE_II)):
    nodes = x[lab == code]
    where = f"{nodes.min():.2f} .. {nodes.max():.2f}" if len(nodes) else "nowhere"
    print(f"{name} jumps at t=0: {len(nodes)} nodes, {where}")

# Nobody jumps before T: the lifted payoff is already flat near the peak,
# so an early jump only costs money.
iters = field.iterations
print(f"\nprojection sweeps per time level: min {min(iters)}, max {max(iters)}")
