import numpy as np
import pytest

from impulse_games import SpaceTimeGrid, build_spec, canonical_1d, run_checks, solve
from impulse_games.solver import ValueField
from impulse_games.verify import (
    ALL_CHECKS,
    check_dpp,
    check_obstacle_ordering,
    check_one_step_reduction,
    check_structural_identity,
    check_value_gap,
    regularity_moduli,
    value_gap,
)

QUIET = dict(c="2", chi="1", h_min=0.5, r_max=2, m_imp=5, x_min=-5, x_max=5)


def _edited(field, k, j, delta):
    v = field.values.copy()
    v[k, j] += delta
    return ValueField(field.grid, v, field.raw_terminal, field.iterations, field.tols)


def test_identity_holds_on_solution(canonical_solved):
    spec, grid, field, _ = canonical_solved
    assert check_structural_identity(field, spec, grid).passed


def test_identity_fails_when_a_jump_target_is_lowered(canonical_solved):
    spec, grid, field, _ = canonical_solved
    j = 270  # x = 12, where g = 0 and player II lands
    bad = check_structural_identity(_edited(field, 0, j, -0.5), spec, grid)
    assert not bad.passed and bad.measured == pytest.approx(0.5, abs=1e-4)
    assert "k=0" in bad.diagnostics


def test_identity_holds_trivially_with_dominating_costs():
    spec = build_spec(**QUIET)
    grid = SpaceTimeGrid.for_spec(spec, 21, 4)
    field, _ = solve(spec, grid)
    r = check_structural_identity(field, spec, grid)
    assert r.passed and r.measured == 0.0


def test_ordering_and_one_step_on_richer_game(drift_solved):
    spec, grid, field, _ = drift_solved
    assert check_obstacle_ordering(field, spec, grid).passed
    assert check_one_step_reduction(field, spec, grid).passed


def test_one_step_names_profitable_jump(canonical_solved):
    spec, grid, field, _ = canonical_solved
    bad = check_one_step_reduction(_edited(field, 0, 150, 2.0), spec, grid)
    assert not bad.passed
    assert "player II profits" in bad.diagnostics and "node=[150]" in bad.diagnostics and "z=" in bad.diagnostics


def test_dpp_degenerate_case_is_exact():
    spec = build_spec(T=1, f="1", **{**QUIET, "c": "50", "chi": "40"})
    grid = SpaceTimeGrid.for_spec(spec, 41, 64)
    field, policies = solve(spec, grid)
    r = check_dpp(spec, field, policies, 0.5, np.zeros(1), 200, 1 / 256, seed=0)
    assert r.passed and r.measured <= 1e-12
    assert r.context["mean"] == r.context["value"] == 1.0


def test_dpp_martingale_case():
    spec = build_spec(sigma="0.5", g="0.2*x1", **QUIET)
    grid = SpaceTimeGrid.for_spec(spec, 41, 64)
    field, policies = solve(spec, grid)
    r = check_dpp(spec, field, policies, 0.5, np.array([0.5]), 4000, 1 / 256, seed=2, c_budget=0.0)
    assert r.passed


def test_dpp_on_richer_game(running_gain_solved):
    spec, grid, field, policies = running_gain_solved
    r = check_dpp(spec, field, policies, 1.0, np.zeros(1), 4000, 1 / 128, seed=4)
    assert r.passed


def test_value_gap_zero_when_costs_dominate():
    spec = build_spec(sigma="0.3", g="0.4*tanh(x1)", **QUIET)
    gap, excluded, _, _, _ = value_gap(spec, SpaceTimeGrid.for_spec(spec, 21, 8))
    assert gap == 0.0


def test_value_gap_closes_on_richer_game(drift_solved):
    spec, grid, field, _ = drift_solved
    r = check_value_gap(spec, grid)
    assert r.passed and not r.advisory
    assert r.context["excluded_fraction"] < 0.01


def test_value_gap_advisory_when_costs_invalid():
    spec = canonical_1d(c="1", allow_invalid_costs=True)
    r = check_value_gap(spec, SpaceTimeGrid.for_spec(spec, 151, 16))
    assert r.advisory and "cost conditions fail" in r.diagnostics


def test_moduli_of_simple_fields():
    grid = SpaceTimeGrid.for_spec(canonical_1d(), 31, 8, check=False)
    const = ValueField(grid, np.full((9, 31), 3.0), np.zeros(31))
    assert regularity_moduli(const, grid) == (0.0, 0.0)
    x = grid.lattice.points()[:, 0]
    lin = ValueField(grid, np.tile(x, (9, 1)), x)
    lip, holder = regularity_moduli(lin, grid)
    assert lip == pytest.approx(1.0) and holder == 0.0


def test_run_checks_selection_and_unknown_names(running_gain_solved):
    spec, grid, field, policies = running_gain_solved
    rep = run_checks(spec, field, policies, only=["structural_identity", "bound"])
    assert list(rep) == ["structural_identity", "bound"] and rep.ok
    with pytest.raises(ValueError):
        run_checks(spec, field, policies, only=["nonsense"])


def test_full_suite_on_richer_game(drift_solved):
    spec, grid, field, policies = drift_solved
    rep = run_checks(spec, field, policies, seed=1, n_paths=4000, delta=1 / 128)
    assert rep.ok, rep.failures()
    assert set(ALL_CHECKS) - {"regularity", "costs"} <= set(rep)


def test_tampered_field_fails_suite(canonical_solved):
    spec, grid, field, policies = canonical_solved
    rep = run_checks(spec, _edited(field, 5, 150, 3.0), policies, only=["structural_identity", "residual"])
    assert not rep.ok
    assert set(rep.failures()) == {"structural_identity", "residual"}
