"""Explicit monotone scheme for the double-obstacle HJBI equation.

Each backward step takes an explicit Euler continuation value
``W = V_{k+1} + dt * (L V_{k+1} + f)`` and then projects it onto the implicit
obstacles with :func:`~impulse_games.intervention.qvi_fixed_point`. The terminal
slice is the projection of ``g`` itself (face-lift); raw ``g`` is kept on the
field for the simulator.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .grids import ActionGrid, GridFunction, Lattice
from .intervention import (
    _fixed_point,
    cost_vectors,
    default_tol,
    inf_obstacle,
    sup_obstacle,
)


class CFLError(ValueError):
    pass


class DiagonalDominanceError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceTimeGrid:
    lattice: Lattice
    K: int
    T: float

    @property
    def dt(self) -> float:
        return self.T / self.K

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dt

    @classmethod
    def for_spec(cls, spec, nodes, steps, check=True) -> "SpaceTimeGrid":
        """Build a grid, refusing CFL or diagonal-dominance violations."""
        grid = cls(Lattice.for_spec(spec, nodes), int(steps), float(spec.T))
        if grid.K < 1:
            raise ValueError("need at least one time step")
        if check:
            check_grid(spec, grid)
        return grid


def cfl_number(spec, grid: SpaceTimeGrid) -> float:
    """``dt * (sum_i sup a_ii / dx_i^2 + sum_i sup |b_i| / dx_i)`` sampled on the lattice."""
    dx = np.array(grid.lattice.dx)
    worst = 0.0
    for t in (0.0, 0.5 * spec.T, spec.T):
        c = _coefficients(spec, grid.lattice, t)
        diag = np.array([c.a[..., i, i].max() for i in range(spec.n)])
        drift = np.array([np.abs(c.b[..., i]).max() for i in range(spec.n)])
        worst = max(worst, grid.dt * float(np.sum(diag / dx**2) + np.sum(drift / dx)))
    return worst


def check_grid(spec, grid: SpaceTimeGrid) -> None:
    nu = cfl_number(spec, grid)
    if nu > 1.0 + 1e-12:
        raise CFLError(f"CFL condition violated: dt*(a/dx^2 + |b|/dx) = {nu:.4g} > 1; use more time steps")
    dx = np.array(grid.lattice.dx)
    for t in (0.0, 0.5 * spec.T, spec.T):
        a = _coefficients(spec, grid.lattice, t).a
        for i in range(spec.n):
            off = sum(np.abs(a[..., i, j]) / (dx[i] * dx[j]) for j in range(spec.n) if j != i)
            lack = off - a[..., i, i] / dx[i] ** 2
            if spec.n > 1 and np.max(lack) > 1e-12:
                raise DiagonalDominanceError(
                    f"sigma sigma' is not diagonally dominant on axis {i + 1} (excess {np.max(lack):.3g}); "
                    "the cross-difference stencil would not be monotone"
                )


@dataclass(frozen=True)
class _Coeffs:
    b: np.ndarray
    a: np.ndarray
    f: np.ndarray


@lru_cache(maxsize=32)
def _coefficients(spec, lattice: Lattice, t: float) -> _Coeffs:
    x = lattice.points()
    b = spec.drift(t, x)
    s = spec.diffusion(t, x)
    a = np.einsum("...ik,...jk->...ij", s, s)
    f = spec.running_gain(t, x)
    return _Coeffs(b, a, f)


def _shifted(V, axis, step):
    """``V[j + step]`` along ``axis`` with edge padding."""
    n = V.shape[axis]
    idx = np.clip(np.arange(n) + step, 0, n - 1)
    return np.take(V, idx, axis=axis)


def _shifted2(V, ax1, s1, ax2, s2):
    return _shifted(_shifted(V, ax1, s1), ax2, s2)


def _edge(shape, axis):
    m = np.zeros(shape, dtype=bool)
    sl = [slice(None)] * len(shape)
    sl[axis] = 0
    m[tuple(sl)] = True
    sl[axis] = -1
    m[tuple(sl)] = True
    return m


def generator_values(V: np.ndarray, spec, lattice: Lattice, t: float) -> np.ndarray:
    """Discrete ``<b, grad V> + 1/2 tr(sigma sigma' D^2 V) + f`` as a raw array."""
    c = _coefficients(spec, lattice, float(t))
    dx = lattice.dx
    out = c.f.copy()
    for i in range(spec.n):
        up, down = _shifted(V, i, 1), _shifted(V, i, -1)
        bi = c.b[..., i]
        out += np.maximum(bi, 0.0) * (up - V) / dx[i] + np.minimum(bi, 0.0) * (V - down) / dx[i]
        d2 = (up - 2.0 * V + down) / dx[i] ** 2
        d2[_edge(V.shape, i)] = 0.0
        out += 0.5 * c.a[..., i, i] * d2
    for i, j in itertools.combinations(range(spec.n), 2):
        aij = c.a[..., i, j]
        if not np.any(aij):
            continue
        axis_sum = _shifted(V, i, 1) + _shifted(V, i, -1) + _shifted(V, j, 1) + _shifted(V, j, -1)
        pos = (2.0 * V + _shifted2(V, i, 1, j, 1) + _shifted2(V, i, -1, j, -1) - axis_sum) / (2 * dx[i] * dx[j])
        neg = -(2.0 * V + _shifted2(V, i, 1, j, -1) + _shifted2(V, i, -1, j, 1) - axis_sum) / (2 * dx[i] * dx[j])
        mixed = np.where(aij >= 0, pos, neg)
        mixed[_edge(V.shape, i) | _edge(V.shape, j)] = 0.0
        out += aij * mixed
    return out


def generator_apply(V: GridFunction, spec, grid: SpaceTimeGrid) -> GridFunction:
    return V.with_values(generator_values(V.values, spec, V.lattice, V.t))


@dataclass
class ValueField:
    """Value slices ``values[k]`` at ``t_k = k dt``; slice ``K`` is face-lifted."""

    grid: SpaceTimeGrid
    values: np.ndarray
    raw_terminal: np.ndarray
    iterations: list = field(default_factory=list)
    tols: list = field(default_factory=list)

    def slice(self, k: int) -> GridFunction:
        return GridFunction(self.grid.lattice, self.values[k], k * self.grid.dt)

    def time_index(self, t: float) -> int:
        k = int(round(t / self.grid.dt))
        if abs(k * self.grid.dt - t) > 1e-9 * max(1.0, self.grid.T):
            raise ValueError(f"t={t} is not on the time lattice")
        return k

    def value_at(self, t: float, x) -> np.ndarray:
        """Interpolated values at points ``x`` of shape ``(m, n)`` or ``(n,)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.ndim == 1:
            x = x[None, :]
        return self.grid.lattice.interpolate(self.values[self.time_index(t)], x)


def _actions(spec) -> ActionGrid:
    return ActionGrid.from_space(spec.actions)


def terminal_layer(spec, grid: SpaceTimeGrid, tol=None, max_iter=10_000, nesting="min_outside", init_shift=0.0):
    """Face-lift of ``g``: the obstacle projection of the sampled payoff at ``t = T``."""
    lattice = grid.lattice
    g = spec.payoff(lattice.points())
    actions = _actions(spec)
    c_vec, chi_vec = cost_vectors(spec.costs, actions, spec.T)
    init = g + init_shift if init_shift else None
    return _fixed_point(g, lattice, spec.T, actions, c_vec, chi_vec, tol, max_iter, nesting, init)


def step_backward(
    V_next: GridFunction, spec, grid: SpaceTimeGrid, tol=None, max_iter=10_000, nesting="min_outside", sweeps=None
):
    """One explicit Euler continuation step followed by the obstacle projection at ``t - dt``.

    ``sweeps`` fixes the number of projection sweeps instead of iterating to ``tol``.
    """
    W = V_next.values + grid.dt * generator_values(V_next.values, spec, grid.lattice, V_next.t)
    t = max(V_next.t - grid.dt, 0.0)
    if abs(t) < 1e-12 * grid.T:
        t = 0.0
    actions = _actions(spec)
    c_vec, chi_vec = cost_vectors(spec.costs, actions, t)
    return _fixed_point(W, grid.lattice, t, actions, c_vec, chi_vec, tol, max_iter, nesting, sweeps=sweeps)


def solve(spec, grid: SpaceTimeGrid, tol=None, max_iter=10_000, nesting="min_outside", init_shift=0.0):
    """March the scheme from ``T`` to ``0``.

    Returns the :class:`ValueField` and the list of policies, indexed by
    time level ``k = 0..K``. ``init_shift`` starts the terminal fixed-point
    iteration from ``g + init_shift`` (used by the uniqueness check).
    """
    K = grid.K
    values = np.empty((K + 1,) + grid.lattice.shape)
    policies = [None] * (K + 1)
    iterations = [0] * (K + 1)
    tols = [0.0] * (K + 1)
    g = spec.payoff(grid.lattice.points())
    V, pol = terminal_layer(spec, grid, tol, max_iter, nesting, init_shift)
    values[K], policies[K], iterations[K] = V.values, pol, pol.iterations
    tols[K] = tol if tol is not None else default_tol(g)
    for k in range(K - 1, -1, -1):
        V = GridFunction(grid.lattice, values[k + 1], (k + 1) * grid.dt)
        Vk, pol = step_backward(V, spec, grid, tol, max_iter, nesting)
        values[k], policies[k], iterations[k] = Vk.values, pol, pol.iterations
        tols[k] = tol if tol is not None else default_tol(
            V.values + grid.dt * generator_values(V.values, spec, grid.lattice, V.t)
        )
    return ValueField(grid, values, g, iterations, tols), policies


def _interior(lattice: Lattice) -> np.ndarray:
    return ~lattice.boundary_mask()


def residual_values(field: ValueField, spec, grid: SpaceTimeGrid, k: int) -> np.ndarray:
    """Nodewise discrete HJBI residual at level ``k < K``."""
    lattice = grid.lattice
    actions = _actions(spec)
    t = k * grid.dt
    Vk, Vn = field.values[k], field.values[k + 1]
    W = Vn + grid.dt * generator_values(Vn, spec, lattice, (k + 1) * grid.dt)
    c_vec, chi_vec = cost_vectors(spec.costs, actions, t)
    hsup, _ = sup_obstacle(Vk, lattice, actions, c_vec)
    hinf, _ = inf_obstacle(Vk, lattice, actions, chi_vec)
    return np.maximum(np.minimum((Vk - W) / grid.dt, Vk - hsup), Vk - hinf)


def residual(field: ValueField, spec, grid: SpaceTimeGrid) -> float:
    """Max absolute discrete HJBI residual over interior nodes and levels ``k < K``."""
    inside = _interior(grid.lattice)
    worst = 0.0
    for k in range(grid.K):
        r = residual_values(field, spec, grid, k)
        worst = max(worst, float(np.max(np.abs(r[inside]))))
    return worst


def terminal_residual(field: ValueField, spec, grid: SpaceTimeGrid) -> float:
    """Max absolute residual of the terminal condition at the face-lifted slice."""
    actions = _actions(spec)
    V = field.values[grid.K]
    c_vec, chi_vec = cost_vectors(spec.costs, actions, spec.T)
    hsup, _ = sup_obstacle(V, grid.lattice, actions, c_vec)
    hinf, _ = inf_obstacle(V, grid.lattice, actions, chi_vec)
    r = np.maximum(np.minimum(V - field.raw_terminal, V - hsup), V - hinf)
    return float(np.max(np.abs(r)))


def value_bound(spec, grid: SpaceTimeGrid) -> float:
    """``sup|g| + T sup|f| + max(0, sup chi)`` sampled on the lattice and action grid."""
    x = grid.lattice.points()
    g = np.abs(spec.payoff(x)).max()
    f = max(np.abs(_coefficients(spec, grid.lattice, float(t)).f).max() for t in grid.times)
    chi = max(
        float(spec.costs.chi_values(t, _actions(spec).array(2)).max()) for t in (0.0, spec.T)
    )
    return float(g + spec.T * f + max(0.0, chi))
