"""Feedback impulse strategies: ``(t, x) -> action or None``.

Every strategy is evaluated in batch form ``batch(t, X) -> (fire, actions)``
with ``X`` of shape ``(m, n)``; calling the strategy on a single point wraps
that. Rules depend only on the current time and state, so the induced
controls are nonanticipative.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .intervention import IMPULSE_I, IMPULSE_II

PLAYER_I, PLAYER_II = 1, 2


@dataclass(frozen=True)
class RestrictionWindow:
    a: float
    b: float

    def __post_init__(self):
        if not self.a <= self.b:
            raise ValueError("restriction window needs a <= b")

    def contains(self, t: float) -> bool:
        return self.a <= t <= self.b


@dataclass(frozen=True)
class FeedbackStrategy:
    player: int
    batch: Callable
    n: int
    source: str = ""

    def __call__(self, t: float, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        fire, act = self.batch(t, x[None, :])
        return act[0].copy() if fire[0] else None


def silent(player: int, n: int = 1) -> FeedbackStrategy:
    def batch(t, X):
        return np.zeros(len(X), dtype=bool), np.zeros((len(X), n))

    return FeedbackStrategy(player, batch, n, "silent")


def constant(player: int, action, when=None, n: int | None = None) -> FeedbackStrategy:
    """Fire ``action`` whenever ``when(t, X)`` (default: always)."""
    action = np.atleast_1d(np.asarray(action, dtype=float))
    n = len(action) if n is None else n

    def batch(t, X):
        fire = np.ones(len(X), dtype=bool) if when is None else np.broadcast_to(np.asarray(when(t, X), dtype=bool), (len(X),)).copy()
        return fire, np.tile(action, (len(X), 1))

    return FeedbackStrategy(player, batch, n, f"constant{action.tolist()}")


def at_times(player: int, action, times, tol: float = 1e-12) -> FeedbackStrategy:
    """Fire ``action`` only at the listed times."""
    times = np.asarray(times, dtype=float)
    return constant(player, action, when=lambda t, X: bool(np.any(np.abs(times - t) <= tol)))


def policy_hash(policies) -> str:
    h = hashlib.sha256()
    for p in policies:
        h.update(np.ascontiguousarray(p.labels).tobytes())
        h.update(np.ascontiguousarray(p.action_index).tobytes())
    return h.hexdigest()[:16]


def from_policy(policies, grid, player: int) -> FeedbackStrategy:
    """Nearest-slice, nearest-node lookup of a solved policy.

    Player I fires in impulse-I regions, player II in impulse-II regions,
    with the action stored in the slice.
    """
    lattice = grid.lattice
    K = len(policies) - 1
    dt = grid.T / K
    label = IMPULSE_I if player == PLAYER_I else IMPULSE_II
    labels = np.stack([p.labels for p in policies])
    vectors = np.stack([p.action_vectors() for p in policies])
    n = lattice.ndim

    def batch(t, X):
        k = int(np.clip(np.rint(t / dt), 0, K))
        idx = lattice.nearest_index(X)
        fire = labels[k][idx] == label
        act = vectors[k][idx]
        return fire, np.where(fire[:, None], act, 0.0)

    return FeedbackStrategy(player, batch, n, policy_hash(policies))


def restrict(strategy: FeedbackStrategy, window: RestrictionWindow) -> FeedbackStrategy:
    def batch(t, X):
        fire, act = strategy.batch(t, X)
        if window.contains(t):
            return fire, act
        return np.zeros(len(X), dtype=bool), np.zeros_like(act)

    return FeedbackStrategy(strategy.player, batch, strategy.n, f"restrict({strategy.source},[{window.a},{window.b}])")


def concat(first: FeedbackStrategy, second: FeedbackStrategy, switch_time: float) -> FeedbackStrategy:
    """``first`` strictly before ``switch_time``, ``second`` from it on."""
    if first.player != second.player:
        raise ValueError("cannot concatenate strategies of different players")

    def batch(t, X):
        return (first if t < switch_time else second).batch(t, X)

    return FeedbackStrategy(first.player, batch, first.n, f"concat({first.source},{second.source},{switch_time})")
