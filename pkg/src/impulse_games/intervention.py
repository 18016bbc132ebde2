"""Nonlocal intervention operators and the implicit-obstacle projection.

``h_sup_c`` is player I's best single impulse, ``max_y V(x+y) - c(t,y)``;
``h_inf_chi`` is player II's, ``min_z V(x+z) + chi(t,z)``. Off-grid values are
read by multilinear interpolation and actions leaving the box are excluded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import ActionGrid, GridFunction, Lattice, stencil_table

CONTINUE, IMPULSE_I, IMPULSE_II = 0, 1, 2
NESTINGS = ("min_outside", "max_outside")


class NoAdmissibleActionError(RuntimeError):
    pass


class FixedPointError(RuntimeError):
    def __init__(self, iterations: int, change: float, period: int | None = None):
        msg = f"obstacle projection did not converge after {iterations} iterations (last change {change:.3g})"
        if period is not None:
            msg += f"; iterates repeat with period {period}, so the projection has no attracting fixed point from W"
        super().__init__(msg)
        self.iterations = iterations
        self.change = change
        self.period = period


@dataclass(frozen=True)
class ArgField:
    """Best action index per node, ``-1`` where undefined."""

    index: np.ndarray
    actions: tuple


@dataclass(frozen=True)
class PolicySlice:
    """Regime label and attached action index per node at one time level."""

    labels: np.ndarray  # int8, CONTINUE / IMPULSE_I / IMPULSE_II
    action_index: np.ndarray  # into the owning player's action list, -1 for continue
    actions: ActionGrid
    t: float
    iterations: int = 0

    def action_vectors(self) -> np.ndarray:
        """Action per node (zeros where continuing), shape ``labels.shape + (n,)``."""
        p1, p2 = self.actions.array(1), self.actions.array(2)
        out = np.zeros(self.labels.shape + (p1.shape[1],))
        m1 = self.labels == IMPULSE_I
        m2 = self.labels == IMPULSE_II
        out[m1] = p1[self.action_index[m1]]
        out[m2] = p2[self.action_index[m2]]
        return out

    def counts(self) -> dict:
        return {name: int(np.sum(self.labels == k)) for k, name in enumerate(("continue", "I", "II"))}


def _best(values, lattice: Lattice, actions: tuple, cost: np.ndarray, sign: float):
    """sign=+1: max_a V(x+a) - cost(a); sign=-1: min_a V(x+a) + cost(a).

    Ties go to the smallest action index.
    """
    st = stencil_table(lattice, actions)
    cand = np.where(st.valid, sign * st.apply(values) - np.asarray(cost, dtype=float)[:, None], -np.inf)
    arg = np.argmax(cand, axis=0)
    best = np.take_along_axis(cand, arg[None, :], axis=0)[0]
    if np.any(np.isneginf(best)):
        raise NoAdmissibleActionError("some node has no admissible action")
    return (sign * best).reshape(lattice.shape), arg.reshape(lattice.shape)


def cost_vectors(costs, actions: ActionGrid, t: float):
    return costs.c_values(t, actions.array(1)), costs.chi_values(t, actions.array(2))


def sup_obstacle(values, lattice, actions: ActionGrid, c_vec):
    return _best(values, lattice, actions.player1, c_vec, 1.0)


def inf_obstacle(values, lattice, actions: ActionGrid, chi_vec):
    return _best(values, lattice, actions.player2, chi_vec, -1.0)


def h_sup_c(V: GridFunction, costs, actions: ActionGrid):
    c_vec = costs.c_values(V.t, actions.array(1))
    vals, arg = sup_obstacle(V.values, V.lattice, actions, c_vec)
    return V.with_values(vals), ArgField(arg, actions.player1)


def h_inf_chi(V: GridFunction, costs, actions: ActionGrid):
    chi_vec = costs.chi_values(V.t, actions.array(2))
    vals, arg = inf_obstacle(V.values, V.lattice, actions, chi_vec)
    return V.with_values(vals), ArgField(arg, actions.player2)


def project(W, hsup, hinf, nesting="min_outside"):
    """One application of the double-obstacle projection."""
    if nesting == "min_outside":
        return np.minimum(hinf, np.maximum(W, hsup))
    if nesting == "max_outside":
        return np.maximum(hsup, np.minimum(W, hinf))
    raise ValueError(f"unknown nesting {nesting!r}")


def classify(W, V, hsup, arg_sup, hinf, arg_inf, tol, nesting="min_outside"):
    labels = np.zeros(W.shape, dtype=np.int8)
    idx = np.full(W.shape, -1, dtype=np.int64)
    if nesting == "min_outside":
        two = hinf < np.maximum(W, hsup) - tol
        one = (hsup > W + tol) & ~two
    else:
        one = hsup > np.minimum(W, hinf) + tol
        two = (hinf < W - tol) & ~one
    labels[one], idx[one] = IMPULSE_I, arg_sup[one]
    labels[two], idx[two] = IMPULSE_II, arg_inf[two]
    return labels, idx


def default_tol(W) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(W))))


def qvi_fixed_point(
    W: GridFunction,
    costs,
    actions: ActionGrid,
    tol: float | None = None,
    max_iter: int = 10_000,
    nesting: str = "min_outside",
    init=None,
):
    """Solve ``V = min(H_inf V, max(W, H_sup V))`` by Jacobi iteration from ``V = W``.

    Both obstacles are recomputed from the previous iterate every sweep.
    ``nesting="max_outside"`` instead solves ``V = max(H_sup V, min(W, H_inf V))``
    (player-I priority); ``init`` overrides the starting iterate.
    Returns the fixed point and its :class:`PolicySlice`.
    """
    lattice = W.lattice
    c_vec, chi_vec = cost_vectors(costs, actions, W.t)
    return _fixed_point(W.values, lattice, W.t, actions, c_vec, chi_vec, tol, max_iter, nesting, init)


def _fixed_point(Wv, lattice, t, actions, c_vec, chi_vec, tol, max_iter, nesting, init=None, sweeps=None):
    """Jacobi iteration to ``change < tol``, or exactly ``sweeps`` sweeps when given.

    Every sweep is monotone in ``W`` and in the iterate, so a fixed sweep
    count gives an exactly order-preserving map (useful for comparison tests).
    """
    if tol is None:
        tol = default_tol(Wv)
    if not tol > 0:
        raise ValueError("tol must be positive")
    V = np.array(Wv if init is None else np.asarray(init, dtype=float).reshape(lattice.shape), dtype=float)
    change = np.inf
    seen = {}  # exact iterate bytes -> iteration, to stop early on a cycle
    for it in range(1, max_iter + 1):
        hsup, arg_sup = sup_obstacle(V, lattice, actions, c_vec)
        hinf, arg_inf = inf_obstacle(V, lattice, actions, chi_vec)
        new = project(Wv, hsup, hinf, nesting)
        change = float(np.max(np.abs(new - V)))
        V = new
        if sweeps is not None:
            if it >= sweeps:
                break
            continue
        if change < tol:
            break
        key = V.tobytes()
        if key in seen:
            raise FixedPointError(it, change, period=it - seen[key])
        seen[key] = it
        if len(seen) > 64:
            seen.pop(next(iter(seen)))
    else:
        raise FixedPointError(max_iter, change)
    hsup, arg_sup = sup_obstacle(V, lattice, actions, c_vec)
    hinf, arg_inf = inf_obstacle(V, lattice, actions, chi_vec)
    labels, idx = classify(Wv, V, hsup, arg_sup, hinf, arg_inf, tol, nesting)
    return GridFunction(lattice, V, t), PolicySlice(labels, idx, actions, t, it)


def activation_round_bound(W, costs, actions: ActionGrid, t: float = 0.0) -> int:
    """``ceil(osc(W) / m) + 1`` with ``m`` the smallest sampled impulse cost."""
    c_vec, chi_vec = cost_vectors(costs, actions, t)
    m = min(float(c_vec.min()), float(chi_vec.min()))
    W = np.asarray(W)
    return int(np.ceil((W.max() - W.min()) / m)) + 1
