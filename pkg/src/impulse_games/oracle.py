"""Brute-force reference values on tiny one-dimensional lattices.

Plain-Python scalar loops only. Nothing here imports the solver or the
intervention operators: the point is to recompute the same discrete game
by an independent route.
"""

from __future__ import annotations

import math

from .expr import eval_expr

MAX_NODES = 15
MAX_STEPS = 6
MAX_ACTIONS = 5


class OracleSizeError(ValueError):
    pass


def _nodes(x_min, x_max, N):
    h = (x_max - x_min) / (N - 1)
    return [x_min + j * h for j in range(N)], h


def _read(values, x_min, h, N, x):
    """Linear interpolation at ``x``; None if ``x`` leaves the interval."""
    q = (x - x_min) / h
    if q < -1e-9 or q > N - 1 + 1e-9:
        return None
    j = int(math.floor(q + 1e-9))
    th = q - j
    if th < 1e-9:
        th = 0.0
    j = min(max(j, 0), N - 1)
    if th == 0.0:
        return values[j]
    return (1.0 - th) * values[j] + th * values[min(j + 1, N - 1)]


def _instant_game(W, x_min, h, N, ys, zs, cs, chis, tol=1e-13, max_rounds=100_000):
    """Value of the same-instant impulse game with continuation payoff ``W``.

    At every node player II either stops (letting player I choose) or jumps
    by some z collecting chi; if II stops, player I takes W or jumps by some
    y paying c. The recursion is iterated until the values stop moving.
    """
    V = list(W)
    for _ in range(max_rounds):
        new = []
        for j in range(N):
            x = x_min + j * h
            best_two = math.inf
            for z, ch in zip(zs, chis):
                v = _read(V, x_min, h, N, x + z)
                if v is not None and v + ch < best_two:
                    best_two = v + ch
            best_one = W[j]
            for y, c in zip(ys, cs):
                v = _read(V, x_min, h, N, x + y)
                if v is not None and v - c > best_one:
                    best_one = v - c
            new.append(best_two if best_two < best_one else best_one)
        change = max(abs(a - b) for a, b in zip(new, V))
        V = new
        if change <= tol:
            return V
    raise RuntimeError("instant game did not settle")


def face_lift(spec, N):
    """Terminal layer computed by scalar loops; any lattice size."""
    (x_min,), (x_max,) = spec.x_min, spec.x_max
    xs, h = _nodes(x_min, x_max, N)
    T = spec.T
    ys = [a[0] for a in spec.actions.grid(1)]
    zs = [a[0] for a in spec.actions.grid(2)]
    cs = [float(eval_expr(spec.costs.c, {"t": T, "y1": y})) for y in ys]
    chis = [float(eval_expr(spec.costs.chi, {"t": T, "z1": z})) for z in zs]
    g = [float(eval_expr(spec.g, {"t": T, "x1": x})) for x in xs]
    return _instant_game(g, x_min, h, N, ys, zs, cs, chis)


def brute_force_value(spec, N, K):
    """Exhaustive backward induction for a 1-D game; returns rows ``V[k][j]``.

    Each level: explicit continuation (upwind drift, central diffusion,
    zero second difference at the two end nodes) then the instant game.
    """
    if spec.n != 1:
        raise OracleSizeError("the oracle handles one space dimension")
    ys = [a[0] for a in spec.actions.grid(1)]
    zs = [a[0] for a in spec.actions.grid(2)]
    if N > MAX_NODES or K > MAX_STEPS or len(ys) > MAX_ACTIONS or len(zs) > MAX_ACTIONS:
        raise OracleSizeError(f"oracle limits: {MAX_NODES} nodes, {MAX_STEPS} steps, {MAX_ACTIONS} actions")
    (x_min,), (x_max,) = spec.x_min, spec.x_max
    xs, h = _nodes(x_min, x_max, N)
    dt = spec.T / K
    rows = [None] * (K + 1)
    rows[K] = face_lift(spec, N)
    for k in range(K - 1, -1, -1):
        tn = (k + 1) * dt
        t = k * dt
        Vn = rows[k + 1]
        W = []
        for j, x in enumerate(xs):
            env = {"t": tn, "x1": x}
            b = float(eval_expr(spec.b[0], env))
            s = sum(float(eval_expr(e, env)) ** 2 for e in spec.sigma[0])
            f = float(eval_expr(spec.f, env))
            right = Vn[j + 1] if j + 1 < N else Vn[j]
            left = Vn[j - 1] if j > 0 else Vn[j]
            if b > 0:
                drift = b * (right - Vn[j]) / h
            else:
                drift = b * (Vn[j] - left) / h
            second = 0.0 if j in (0, N - 1) else (right - 2 * Vn[j] + left) / h**2
            W.append(Vn[j] + dt * (drift + 0.5 * s * second + f))
        cs = [float(eval_expr(spec.costs.c, {"t": t, "y1": y})) for y in ys]
        chis = [float(eval_expr(spec.costs.chi, {"t": t, "z1": z})) for z in zs]
        rows[k] = _instant_game(W, x_min, h, N, ys, zs, cs, chis)
    return rows
