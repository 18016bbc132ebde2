import time

import numpy as np
import pytest

from conftest import TINY_GAMES
from impulse_games import GridFunction, SpaceTimeGrid, build_spec, canonical_1d, solve
from impulse_games.oracle import OracleSizeError, brute_force_value, face_lift
from impulse_games.solver import step_backward, terminal_layer


def tiny(name):
    return canonical_1d(**TINY_GAMES[name])


def test_hand_computed_face_lift():
    # dx = 1, actions {-2, 0, 2}, chi = 1: player II walks outward in jumps of 2
    # while each jump lowers g by 2 > chi, e.g. V(0) = g(4) + 1 + 1 = 8.
    expected = [5, 6, 6, 7, 7, 8, 7, 7, 6, 6, 5]
    assert face_lift(tiny("canonical"), 11) == pytest.approx(expected, abs=0)


@pytest.mark.parametrize("name", sorted(TINY_GAMES))
def test_solver_matches_oracle(name):
    spec = tiny(name)
    field, _ = solve(spec, SpaceTimeGrid.for_spec(spec, 11, 4))
    ref = np.array(brute_force_value(spec, 11, 4))
    assert np.abs(field.values - ref).max() <= 1e-10


def test_oracle_frozen_values():
    # every explicit step adds (1/32) * second difference, so all values are dyadic and exact
    ref = brute_force_value(tiny("canonical"), 11, 4)
    assert ref[0][5] == 7.7724761962890625
    assert ref[0][1] == ref[0][9] == 5.886238098144531
    assert ref[0][::2] == [5.0, 6.0, 7.0, 7.0, 6.0, 5.0]


def test_one_step_from_terminal_layer():
    spec = tiny("drift")
    grid = SpaceTimeGrid.for_spec(spec, 11, 4)
    VT, _ = terminal_layer(spec, grid)
    V3, _ = step_backward(VT, spec, grid)
    ref = brute_force_value(spec, 11, 4)
    np.testing.assert_allclose(V3.values, ref[3], rtol=0, atol=1e-10)


def test_dominating_costs_reduce_to_pure_diffusion():
    spec = build_spec(sigma="0.5", g="0.1*x1^2", c="20", chi="10", h_min=0.5, r_max=2, m_imp=5, x_min=-5, x_max=5)
    ref = np.array(brute_force_value(spec, 11, 4))
    x = np.linspace(-5, 5, 11)
    # heat flow of a quadratic: the interior gains 0.5 * 0.25 * 0.2 per unit time
    np.testing.assert_allclose(ref[3][2:-2], 0.1 * x[2:-2] ** 2 + 0.25 * 0.025, atol=1e-12)


def test_pure_running_gain():
    spec = build_spec(f="1", c="2", chi="1", h_min=0.5, r_max=2, m_imp=5, x_min=-5, x_max=5)
    ref = brute_force_value(spec, 11, 4)
    assert ref[0] == pytest.approx([1.0] * 11, abs=1e-14)


def test_canonical_face_lift_matches_terminal_layer(canonical_solved):
    spec, grid, field, _ = canonical_solved
    assert np.abs(field.values[-1] - np.array(face_lift(spec, 301))).max() <= 1e-10


def test_size_limits():
    with pytest.raises(OracleSizeError):
        brute_force_value(canonical_1d(), 11, 4)
    with pytest.raises(OracleSizeError):
        brute_force_value(tiny("canonical"), 31, 4)


def test_oracle_is_fast():
    t0 = time.perf_counter()
    brute_force_value(tiny("time_costs"), 11, 4)
    assert time.perf_counter() - t0 < 1.0
