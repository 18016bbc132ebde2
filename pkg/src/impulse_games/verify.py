"""Numerical checks of a solved game: identities, DPP, value gap, regularity.

Each ``check_*`` returns a :class:`~impulse_games.report.CheckResult`;
:func:`run_checks` assembles them into a :class:`VerificationReport`.
"""

from __future__ import annotations

import math

import numpy as np

from .grids import ActionGrid
from .intervention import FixedPointError, cost_vectors, inf_obstacle, sup_obstacle
from .oracle import brute_force_value  # noqa: F401  (re-exported oracle)
from .problem import validate_costs
from .report import CheckResult, VerificationReport
from .sim import child_seeds, draw_increments, estimate_value, n_steps, run_batch
from .solver import SpaceTimeGrid, residual, solve, terminal_residual, value_bound
from .strategy import PLAYER_I, PLAYER_II, from_policy


def _obstacles(V, spec, grid, t):
    actions = ActionGrid.from_space(spec.actions)
    c_vec, chi_vec = cost_vectors(spec.costs, actions, t)
    hsup, _ = sup_obstacle(V, grid.lattice, actions, c_vec)
    hinf, _ = inf_obstacle(V, grid.lattice, actions, chi_vec)
    return hsup, hinf


def _ctx(grid: SpaceTimeGrid, **extra):
    ctx = {"nodes": list(grid.lattice.N), "steps": grid.K}
    ctx.update(extra)
    return ctx


def _locate(grid, k, flat):
    idx = np.unravel_index(flat, grid.lattice.shape)
    x = [float(ax[i]) for ax, i in zip(grid.lattice.axes, idx)]
    return f"k={k} node={[int(i) for i in idx]} x={x}"


def check_structural_identity(field, spec, grid: SpaceTimeGrid, tol: float = 1e-7) -> CheckResult:
    """``max{min[0, V - H_sup V], V - H_inf V} = 0`` on every slice ``k < K``."""
    worst, where = 0.0, ""
    for k in range(grid.K):
        V = field.values[k]
        hsup, hinf = _obstacles(V, spec, grid, k * grid.dt)
        expr = np.abs(np.maximum(np.minimum(0.0, V - hsup), V - hinf))
        j = int(np.argmax(expr))
        if expr.flat[j] > worst:
            worst, where = float(expr.flat[j]), _locate(grid, k, j)
    return CheckResult(worst <= tol, worst, tol, context=_ctx(grid), diagnostics=where if worst > tol else "")


def check_obstacle_ordering(field, spec, grid: SpaceTimeGrid, tol: float = 1e-7) -> CheckResult:
    """``V <= H_inf V + tol`` everywhere; ``V >= H_sup V - tol`` where ``V < H_inf V - tol``."""
    worst, where = 0.0, ""
    for k in range(grid.K):
        V = field.values[k]
        hsup, hinf = _obstacles(V, spec, grid, k * grid.dt)
        upper = V - hinf
        lower = np.where(V < hinf - tol, hsup - V, -np.inf)
        viol = np.maximum(upper, lower)
        j = int(np.argmax(viol))
        if viol.flat[j] > worst:
            worst, where = float(viol.flat[j]), _locate(grid, k, j)
    return CheckResult(worst <= tol, worst, tol, context=_ctx(grid), diagnostics=where if worst > tol else "")


def check_one_step_reduction(field, spec, grid: SpaceTimeGrid, tol: float = 1e-7) -> CheckResult:
    """No single grid impulse is a profitable deviation at any node.

    Deviations are recomputed action by action with direct point
    interpolation, independently of the stencil operators used by the solver.
    """
    lattice = grid.lattice
    pts = lattice.points().reshape(-1, spec.n)
    lo, hi = np.array(lattice.x_min), np.array(lattice.x_max)
    eps = 1e-9 * np.array(lattice.dx)
    acts_u, acts_v = spec.actions.grid(1), spec.actions.grid(2)
    worst, where = 0.0, ""
    for k in range(grid.K):
        t = k * grid.dt
        V = field.values[k].reshape(-1)
        c = spec.costs.c_values(t, acts_u)
        chi = spec.costs.chi_values(t, acts_v)
        best_two = np.full(V.shape, np.inf)
        arg_two = np.zeros(V.shape, dtype=int)
        for a, z in enumerate(acts_v):
            q = pts + z
            ok = np.all((q >= lo - eps) & (q <= hi + eps), axis=1)
            val = np.where(ok, lattice.interpolate(field.values[k], q) + chi[a], np.inf)
            better = val < best_two
            best_two, arg_two = np.where(better, val, best_two), np.where(better, a, arg_two)
        gain_two = V - best_two  # > 0: player II profits by jumping
        j = int(np.argmax(gain_two))
        if gain_two[j] > tol and gain_two[j] > worst:
            worst = float(gain_two[j])
            where = f"player II profits at {_locate(grid, k, j)} with z={acts_v[arg_two[j]].tolist()}"
        not_two = V < best_two - tol
        for a, y in enumerate(acts_u):
            q = pts + y
            ok = np.all((q >= lo - eps) & (q <= hi + eps), axis=1)
            gain_one = np.where(ok & not_two, lattice.interpolate(field.values[k], q) - c[a] - V, -np.inf)
            j = int(np.argmax(gain_one))
            if gain_one[j] > tol and gain_one[j] > worst:
                worst = float(gain_one[j])
                where = f"player I profits at {_locate(grid, k, j)} with y={y.tolist()}"
    return CheckResult(worst <= tol, worst, tol, context=_ctx(grid), diagnostics=where)


def lipschitz_g(spec, grid: SpaceTimeGrid) -> float:
    g = spec.payoff(grid.lattice.points())
    out = 0.0
    for ax, h in enumerate(grid.lattice.dx):
        out = max(out, float(np.abs(np.diff(g, axis=ax)).max()) / h)
    return out


def default_budget_constant(spec, grid) -> float:
    return 5.0 * (1.0 + lipschitz_g(spec, grid))


def scheme_budget(spec, grid, delta, c_budget=None) -> float:
    c = default_budget_constant(spec, grid) if c_budget is None else c_budget
    return c * (max(grid.lattice.dx) + math.sqrt(delta))


def check_mc_value(spec, field, policies, x0, n_paths, delta, seed, tol_sigmas=3.0, c_budget=None) -> CheckResult:
    """Monte Carlo gain under the solver's own strategies against ``V(0, x0)``."""
    grid = field.grid
    sI, sII = from_policy(policies, grid, PLAYER_I), from_policy(policies, grid, PLAYER_II)
    est = estimate_value(spec, sI, sII, 0.0, x0, delta, n_paths, seed)
    v0 = float(field.value_at(0.0, np.atleast_1d(x0))[0])
    budget = scheme_budget(spec, grid, delta, c_budget)
    tol = tol_sigmas * est.stderr + budget
    diff = abs(est.mean - v0)
    return CheckResult(
        diff <= tol,
        diff,
        tol,
        context=_ctx(grid, mean=est.mean, stderr=est.stderr, value=v0, n_paths=n_paths, seed=seed, delta=delta, budget=budget),
    )


def check_dpp(spec, field, policies, s, x0, n_paths, delta, seed, tol_sigmas=3.0, c_budget=None) -> CheckResult:
    """Value at ``(0, x0)`` against the simulated right-hand side of the DPP at time ``s``.

    Impulses strictly before ``s`` are charged; ``V(s, .)`` is read from the
    field by interpolation at the pre-jump state.
    """
    grid = field.grid
    k_s = field.time_index(s)
    sI, sII = from_policy(policies, grid, PLAYER_I), from_policy(policies, grid, PLAYER_II)
    K = n_steps(s, 0.0, delta)
    dW = draw_increments(child_seeds(seed, n_paths), K, spec.d)
    res = run_batch(
        spec,
        sI,
        sII,
        0.0,
        x0,
        delta,
        dW,
        horizon=s,
        terminal=lambda X: grid.lattice.interpolate(field.values[k_s], X),
        impulses_at_horizon=False,
    )
    if not res.valid.all():
        return CheckResult(False, float("inf"), 0.0, context=_ctx(grid), diagnostics="invalid simulated paths")
    mean = float(res.gains.mean())
    stderr = float(res.gains.std(ddof=1) / math.sqrt(n_paths))
    v0 = float(field.value_at(0.0, np.atleast_1d(x0))[0])
    budget = scheme_budget(spec, grid, delta, c_budget)
    tol = tol_sigmas * stderr + budget
    diff = abs(mean - v0)
    return CheckResult(
        diff <= tol,
        diff,
        tol,
        context=_ctx(grid, s=s, mean=mean, stderr=stderr, value=v0, n_paths=n_paths, seed=seed, delta=delta, budget=budget),
    )


def value_gap(spec, grid: SpaceTimeGrid, tol=None):
    """Solve with both projection nestings; return (gap, excluded count, node count, fields)."""
    lo, _ = solve(spec, grid, tol=tol, nesting="min_outside")
    hi, _ = solve(spec, grid, tol=tol, nesting="max_outside")
    band = tol if tol is not None else 1e-9 * (1.0 + float(np.abs(lo.values).max()))
    excluded = np.zeros(lo.values.shape, dtype=bool)
    for k in range(grid.K + 1):
        t = k * grid.dt
        for F in (lo, hi):
            hsup, hinf = _obstacles(F.values[k], spec, grid, t)
            excluded[k] |= np.abs(hinf - hsup) <= band
    diff = np.abs(lo.values - hi.values)
    gap = float(diff[~excluded].max()) if np.any(~excluded) else 0.0
    return gap, int(excluded.sum()), int(excluded.size), lo, hi


def check_value_gap(spec, grid: SpaceTimeGrid, tol=None, gap_tol=None) -> CheckResult:
    """Sup-norm gap between player-II-priority and player-I-priority solves.

    When the cost conditions fail (spec loaded with an override) the result
    is advisory, and a projection that cycles is reported rather than raised.
    """
    costs_ok = validate_costs(spec).ok
    note = "" if costs_ok else "cost conditions fail; gap reported for information"
    try:
        gap, n_ex, n_all, lo, _ = value_gap(spec, grid, tol)
    except FixedPointError as exc:
        limit = 0.0 if gap_tol is None else gap_tol
        return CheckResult(False, float(exc.change), limit, advisory=not costs_ok, context=_ctx(grid),
                           diagnostics=f"{note}; {exc}" if note else str(exc))
    base = tol if tol is not None else max(lo.tols)
    limit = 10 * base if gap_tol is None else gap_tol
    return CheckResult(
        gap <= limit,
        gap,
        limit,
        advisory=not costs_ok,
        context=_ctx(grid, excluded=n_ex, total=n_all, excluded_fraction=n_ex / n_all),
        diagnostics=note,
    )


def regularity_moduli(field, grid: SpaceTimeGrid, t_cut: float = 0.1):
    """Discrete Lipschitz quotient in space and 1/2-Hölder quotient in time.

    The time quotient uses all slice pairs with ``t, t' <= T - t_cut``.
    """
    V = field.values
    lip = 0.0
    for ax, h in enumerate(grid.lattice.dx):
        lip = max(lip, float(np.abs(np.diff(V, axis=ax + 1)).max()) / h)
    times = grid.times
    keep = np.flatnonzero(times <= grid.T - t_cut + 1e-12)
    holder = 0.0
    for a in range(len(keep)):
        ka = keep[a]
        rest = keep[a + 1 :]
        if len(rest) == 0:
            break
        d = np.abs(V[rest] - V[ka]).reshape(len(rest), -1).max(axis=1)
        holder = max(holder, float(np.max(d / np.sqrt(times[rest] - times[ka]))))
    return lip, holder


def check_residual(field, spec, grid, tol) -> CheckResult:
    r = residual(field, spec, grid)
    return CheckResult(r <= tol, r, tol, context=_ctx(grid))


def check_terminal(field, spec, grid, tol) -> CheckResult:
    r = terminal_residual(field, spec, grid)
    return CheckResult(r <= tol, r, tol, context=_ctx(grid))


def check_bound(field, spec, grid) -> CheckResult:
    bound = value_bound(spec, grid)
    m = float(np.abs(field.values).max())
    return CheckResult(m <= bound + 1e-12, m, bound, context=_ctx(grid))


def check_uniqueness(field, spec, grid, tol=None) -> CheckResult:
    """Restart the terminal fixed point from ``g + 1``; fields must agree."""
    other, _ = solve(spec, grid, tol=tol, init_shift=1.0)
    base = tol if tol is not None else max(field.tols)
    diff = float(np.abs(other.values - field.values).max())
    return CheckResult(diff <= 2 * base, diff, 2 * base, context=_ctx(grid))


ALL_CHECKS = (
    "costs",
    "structural_identity",
    "obstacle_ordering",
    "one_step_reduction",
    "residual",
    "terminal",
    "bound",
    "uniqueness",
    "value_gap",
    "mc_value",
    "dpp",
    "regularity",
)


def run_checks(
    spec,
    field,
    policies,
    only=None,
    seed=0,
    tol=1e-7,
    x0=None,
    s=None,
    n_paths=20_000,
    delta=None,
    c_budget=None,
    tol_sigmas=3.0,
) -> VerificationReport:
    """Run the selected checks (default: all) on a solved field."""
    grid = field.grid
    selected = ALL_CHECKS if not only else tuple(only)
    unknown = set(selected) - set(ALL_CHECKS)
    if unknown:
        raise ValueError(f"unknown checks: {sorted(unknown)}")
    x0 = np.zeros(spec.n) if x0 is None else np.atleast_1d(np.asarray(x0, dtype=float))
    if s is None:
        s = field.grid.times[grid.K // 2]
    if delta is None:
        delta = grid.dt / 4
    report = VerificationReport()
    for name in selected:
        if name == "costs":
            report.merge(validate_costs(spec, seed=seed))
        elif name == "structural_identity":
            report.add(name, check_structural_identity(field, spec, grid, tol))
        elif name == "obstacle_ordering":
            report.add(name, check_obstacle_ordering(field, spec, grid, tol))
        elif name == "one_step_reduction":
            report.add(name, check_one_step_reduction(field, spec, grid, tol))
        elif name == "residual":
            report.add(name, check_residual(field, spec, grid, 2 * max(field.tols)))
        elif name == "terminal":
            report.add(name, check_terminal(field, spec, grid, 2 * max(field.tols)))
        elif name == "bound":
            report.add(name, check_bound(field, spec, grid))
        elif name == "uniqueness":
            report.add(name, check_uniqueness(field, spec, grid))
        elif name == "value_gap":
            report.add(name, check_value_gap(spec, grid))
        elif name == "mc_value":
            report.add(name, check_mc_value(spec, field, policies, x0, n_paths, delta, seed, tol_sigmas, c_budget))
        elif name == "dpp":
            report.add(name, check_dpp(spec, field, policies, s, x0, n_paths, delta, seed + 1, tol_sigmas, c_budget))
        elif name == "regularity":
            lip, holder = regularity_moduli(field, grid)
            report.add("lip_x", CheckResult(True, lip, None, advisory=True, context=_ctx(grid)))
            report.add("holder_t", CheckResult(True, holder, None, advisory=True, context=_ctx(grid)))
    return report
