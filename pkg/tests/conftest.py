import numpy as np
import pytest

from impulse_games import SpaceTimeGrid, build_spec, canonical_1d, solve

# Two richer 1-D games where both players act before the horizon.
RUNNING_GAIN_GAME = dict(
    T=2, sigma="0.5", f="min(max(x1, 0), 2)", g="0", U="line", V="plus",
    c="2+0.05*abs(y1)", chi="1", h_min=0.5, r_max=6, m_imp=25, x_min=-6, x_max=6,
)
DRIFT_GAME = dict(
    T=2, sigma="0.5", b="0.3*tanh(x1)", f="max(0, 2-abs(x1))", g="0.5*tanh(x1)", U="line", V="plus",
    c="2+0.05*abs(y1)", chi="1.2", h_min=0.5, r_max=6, m_imp=25, x_min=-6, x_max=6,
)
# Small problems the brute-force oracle can handle (11 nodes, <= 5 actions).
TINY_GAMES = {
    "canonical": dict(r_max=2, m_imp=3, x_min=-5, x_max=5),
    "drift": dict(r_max=1.5, m_imp=3, x_min=-5, x_max=5, b="0.4*tanh(x1)", f="0.5*max(0, 2-abs(x1))"),
    "time_costs": dict(
        r_max=2, m_imp=5, x_min=-5, x_max=5, g="max(0, 4-abs(x1-1))",
        c="2.2+0.1*abs(y1)+0.2*(1-t)", chi="1 + 0.05*abs(z1)+0.1*(1-t)",
    ),
}


@pytest.fixture(scope="session")
def canonical():
    return canonical_1d()


@pytest.fixture(scope="session")
def canonical_solved(canonical):
    grid = SpaceTimeGrid.for_spec(canonical, 301, 64)
    field, policies = solve(canonical, grid)
    return canonical, grid, field, policies


@pytest.fixture(scope="session")
def running_gain_solved():
    spec = build_spec(**RUNNING_GAIN_GAME)
    grid = SpaceTimeGrid.for_spec(spec, 121, 64)
    field, policies = solve(spec, grid)
    return spec, grid, field, policies


@pytest.fixture(scope="session")
def drift_solved():
    spec = build_spec(**DRIFT_GAME)
    grid = SpaceTimeGrid.for_spec(spec, 121, 64)
    field, policies = solve(spec, grid)
    return spec, grid, field, policies


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance lines recorded by test_acceptance.py, printed once at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
