"""Simulate a game where intervention changes the outcome.

Player I earns max(0, 2 - |x|) per unit time near the origin and may jump
either way. Player II may only push the state upward, at cost 1.2. A mild
drift tanh(x) pulls the state outward. We solve the game, replay the solver's
feedback strategies by Monte Carlo, and then take player II's jumps away to
see what that right is worth to them.

Run:  python3 demos/02_simulate_drift_game.py
"""

import numpy as np

from impulse_games import (
    PLAYER_I,
    PLAYER_II,
    SpaceTimeGrid,
    build_spec,
    estimate_value,
    from_policy,
    silent,
    simulate_path,
    solve,
)

spec = build_spec(
    T=2, sigma="0.5", b="0.3*tanh(x1)", f="max(0, 2-abs(x1))", g="0.5*tanh(x1)", U="line", V="plus",
    c="2+0.05*abs(y1)", chi="1.2", h_min=0.5, r_max=6, m_imp=25, x_min=-6, x_max=6,
)
grid = SpaceTimeGrid.for_spec(spec, 121, 64)
field, policies = solve(spec, grid)
x0 = np.zeros(1)
print(f"grid value V(0, 0) = {float(field.value_at(0.0, x0)[0]):.5f}")

x = grid.lattice.axes[0]
lab = policies[0].labels
print(f"at t=0 player II jumps on [{x[lab == 2].min():.1f}, {x[lab == 2].max():.1f}]", end="")
print(f", player I on [{x[lab == 1].min():.1f}, {x[lab == 1].max():.1f}]")

s1 = from_policy(policies, grid, PLAYER_I)
s2 = from_policy(policies, grid, PLAYER_II)
delta = grid.dt / 4

est = estimate_value(spec, s1, s2, 0.0, x0, delta, 5000, seed=11)
print(f"\nMonte Carlo, both follow the solver: {est.mean:.5f} +/- {est.stderr:.5f}")
lazy = estimate_value(spec, s1, silent(PLAYER_II), 0.0, x0, delta, 5000, seed=11)
print(f"Monte Carlo, player II never jumps:  {lazy.mean:.5f} +/- {lazy.stderr:.5f}")

# Player II leaves the peak at once and player I does not bother to come back.
path = simulate_path(spec, s1, s2, 0.0, x0, delta, seed=3)
print(f"\none sample path: {len(path.events)} impulses, final state {path.states[-1][0]:.3f}")
for ev in path.events[:6]:
    who = "I " if ev.player == PLAYER_I else "II"
    print(f"   t={ev.time:.4f}  player {who} jumps by {ev.action[0]:+.2f}")
