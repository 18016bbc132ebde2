"""Monte Carlo simulation of the impulse-controlled state and the gain functional.

Paths are Euler-Maruyama on the lattice ``t0 + k * delta``. At each step both
strategies are queried on the pre-jump state; when both fire only player II's
impulse is applied and player I's is recorded as uncharged. Impulses at the
final time are allowed and precede the terminal payoff.

Every path owns a child seed of the master seed, so a path simulated alone
is bitwise identical to the same path inside a batch.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .strategy import PLAYER_I, PLAYER_II


class SimulationError(RuntimeError):
    pass


@dataclass(frozen=True)
class ImpulseEvent:
    time: float
    player: int
    action: tuple
    charged: bool
    step: int = 0


@dataclass
class SimPath:
    t0: float
    x0: tuple
    delta: float
    times: np.ndarray
    states: np.ndarray  # post-impulse state at each step, shape (K+1, n)
    events: list
    seed: object
    increments: np.ndarray  # standard normals, shape (K, d)
    valid: bool = True
    message: str = ""


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stderr: float
    n_paths: int
    seed: int
    delta: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class BatchResult:
    gains: np.ndarray
    final: np.ndarray
    counts: np.ndarray  # (m, 2) charged impulses per player
    valid: np.ndarray
    events: list = field(default_factory=list)  # per step: (k, t, fire1, y, fire2, z) when recorded
    states: np.ndarray | None = None


def n_steps(T: float, t0: float, delta: float) -> int:
    K = int(round((T - t0) / delta))
    if K < 1 or abs(K * delta - (T - t0)) > 1e-9 * max(1.0, T):
        raise ValueError(f"delta={delta} does not divide T - t0 = {T - t0}")
    return K


def child_seeds(seed, n_paths: int):
    return np.random.SeedSequence(seed).spawn(n_paths)


def draw_increments(seeds, K: int, d: int) -> np.ndarray:
    return np.stack([np.random.default_rng(s).standard_normal((K, d)) for s in seeds])


def default_max_impulses(spec) -> int:
    """``10 T sup|g| / min cost`` with a floor of 10."""
    from .grids import Lattice

    lat = Lattice.for_spec(spec, 41 if spec.n == 1 else 11)
    sup_g = float(np.abs(spec.payoff(lat.points())).max())
    grid_u, grid_v = spec.actions.grid(1), spec.actions.grid(2)
    m = min(
        float(spec.costs.c_values(t, grid_u).min()) for t in (0.0, spec.T)
    )
    m = min(m, min(float(spec.costs.chi_values(t, grid_v).min()) for t in (0.0, spec.T)))
    return max(10, int(math.ceil(10 * spec.T * max(sup_g, 1.0) / m)))


def run_batch(
    spec,
    strat_I,
    strat_II,
    t0,
    x0,
    delta,
    increments,
    horizon=None,
    terminal=None,
    impulses_at_horizon=True,
    max_impulses=None,
    record=False,
) -> BatchResult:
    """Simulate ``len(increments)`` paths on ``[t0, horizon]``.

    ``terminal(X)`` replaces ``g`` as the end-of-window payoff (the DPP check
    reads the value function there). Running gain uses the left endpoint of
    each step, evaluated after that step's impulses.
    """
    horizon = spec.T if horizon is None else horizon
    K = n_steps(horizon, t0, delta)
    m = increments.shape[0]
    n = spec.n
    if max_impulses is None:
        max_impulses = default_max_impulses(spec)
    X = np.tile(np.asarray(x0, dtype=float).reshape(1, n), (m, 1))
    running = np.zeros(m)
    chi_sum = np.zeros(m)
    c_sum = np.zeros(m)
    counts = np.zeros((m, 2), dtype=np.int64)
    valid = np.ones(m, dtype=bool)
    events = []
    states = np.empty((K + 1, m, n)) if record else None
    sq = math.sqrt(delta)
    for k in range(K + 1):
        t = horizon if k == K else t0 + k * delta
        if k < K or impulses_at_horizon:
            fire2, z = strat_II.batch(t, X)
            fire1, y = strat_I.batch(t, X)
            charged1 = fire1 & ~fire2
            if fire2.any():
                chi_sum[fire2] += spec.costs.chi_values(t, z[fire2])
                X = X + np.where(fire2[:, None], z, 0.0)
            if charged1.any():
                c_sum[charged1] += spec.costs.c_values(t, y[charged1])
                X = X + np.where(charged1[:, None], y, 0.0)
            counts[:, 0] += charged1
            counts[:, 1] += fire2
            if record and (fire1.any() or fire2.any()):
                events.append((k, t, fire1.copy(), y.copy(), fire2.copy(), z.copy()))
        if record:
            states[k] = X
        if k == K:
            break
        running += spec.running_gain(t, X) * delta
        drift = spec.drift(t, X)
        sig = spec.diffusion(t, X)
        X = X + drift * delta + np.einsum("mij,mj->mi", sig, increments[:, k, :]) * sq
        bad = ~np.all(np.isfinite(X), axis=1)
        if bad.any():
            valid &= ~bad
            X[bad] = np.asarray(x0, dtype=float).reshape(n)
    valid &= counts.max(axis=1) <= max_impulses
    final = X
    end = spec.payoff(final) if terminal is None else np.asarray(terminal(final), dtype=float)
    gains = running + chi_sum - c_sum + end
    return BatchResult(gains, final, counts, valid, events, states)


def simulate_path(spec, strat_I, strat_II, t0, x0, delta, seed, max_impulses=None) -> SimPath:
    """One path with its impulse events; ``seed`` may be an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    K = n_steps(spec.T, t0, delta)
    dW = draw_increments([ss], K, spec.d)
    if max_impulses is None:
        max_impulses = default_max_impulses(spec)
    res = run_batch(spec, strat_I, strat_II, t0, x0, delta, dW, max_impulses=max_impulses, record=True)
    events = []
    for k, t, fire1, y, fire2, z in res.events:
        if fire1[0]:
            events.append(ImpulseEvent(float(t), PLAYER_I, tuple(y[0].tolist()), not bool(fire2[0]), k))
        if fire2[0]:
            events.append(ImpulseEvent(float(t), PLAYER_II, tuple(z[0].tolist()), True, k))
    times = np.array([spec.T if k == K else t0 + k * delta for k in range(K + 1)])
    message = ""
    valid = bool(res.valid[0])
    if not valid:
        if res.counts[0].max() > max_impulses:
            message = f"impulse cap {max_impulses} exceeded"
        else:
            message = "non-finite state"
    x0t = tuple(np.atleast_1d(np.asarray(x0, dtype=float)).tolist())
    return SimPath(t0, x0t, delta, times, res.states[:, 0, :], events, seed, dW[0], valid, message)


def gain_functional(path: SimPath, spec) -> float:
    """Realized gain of player I on one path, with the raw terminal payoff."""
    K = len(path.times) - 1
    total = 0.0
    for k in range(K):
        total += float(spec.running_gain(path.times[k], path.states[k][None, :])[0]) * path.delta
    for ev in path.events:
        a = np.asarray(ev.action, dtype=float)[None, :]
        if ev.player == PLAYER_II:
            total += float(spec.costs.chi_values(ev.time, a)[0])
        elif ev.charged:
            total -= float(spec.costs.c_values(ev.time, a)[0])
    return total + float(spec.payoff(path.states[K][None, :])[0])


def estimate_value(spec, strat_I, strat_II, t0, x0, delta, n_paths, seed, max_impulses=None) -> McEstimate:
    """Sample mean and standard error of the gain over independent paths."""
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    K = n_steps(spec.T, t0, delta)
    dW = draw_increments(child_seeds(seed, n_paths), K, spec.d)
    res = run_batch(spec, strat_I, strat_II, t0, x0, delta, dW, max_impulses=max_impulses)
    if not res.valid.all():
        bad = int(np.argmin(res.valid))
        raise SimulationError(f"{int((~res.valid).sum())} invalid paths (first: path {bad}, impulses {res.counts[bad].tolist()})")
    return McEstimate(float(res.gains.mean()), float(res.gains.std(ddof=1) / math.sqrt(n_paths)), n_paths, int(seed), float(delta))


def impulse_count(path: SimPath, window, player: int = PLAYER_I) -> int:
    """Charged impulses of ``player`` with time in ``[a, b]``."""
    a, b = window
    return sum(1 for ev in path.events if ev.player == player and ev.charged and a <= ev.time <= b)


def write_path_csv(path: SimPath, fh) -> None:
    w = csv.writer(fh)
    n = len(path.x0)
    w.writerow(["step", "t"] + [f"x{i + 1}" for i in range(n)] + ["event"])
    marks = {}
    for ev in path.events:
        tag = ("I" if ev.player == PLAYER_I else "II") + ("" if ev.charged else "(uncharged)")
        marks.setdefault(ev.step, []).append(tag)
    for k, (t, x) in enumerate(zip(path.times, path.states)):
        w.writerow([k, repr(float(t))] + [repr(float(v)) for v in x] + ["+".join(marks.get(k, []))])
