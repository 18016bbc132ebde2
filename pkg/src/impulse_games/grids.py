"""Space lattices, grid functions, discrete action grids and shift stencils."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

_SNAP = 1e-9


@dataclass(frozen=True)
class Lattice:
    """Uniform rectangular lattice ``x_min[i] + j * dx[i]``, ``j < N[i]``."""

    x_min: tuple
    x_max: tuple
    N: tuple

    def __post_init__(self):
        if not (len(self.x_min) == len(self.x_max) == len(self.N)):
            raise ValueError("lattice bounds and counts must have equal length")
        for lo, hi, n in zip(self.x_min, self.x_max, self.N):
            if not lo < hi:
                raise ValueError("x_min must be < x_max")
            if n < 2:
                raise ValueError("need at least 2 nodes per axis")

    @classmethod
    def for_spec(cls, spec, nodes) -> "Lattice":
        nodes = (nodes,) * spec.n if np.ndim(nodes) == 0 else tuple(nodes)
        return cls(tuple(map(float, spec.x_min)), tuple(map(float, spec.x_max)), tuple(int(k) for k in nodes))

    @property
    def ndim(self) -> int:
        return len(self.N)

    @property
    def shape(self) -> tuple:
        return tuple(self.N)

    @property
    def dx(self) -> tuple:
        return tuple((hi - lo) / (n - 1) for lo, hi, n in zip(self.x_min, self.x_max, self.N))

    @property
    def axes(self) -> tuple:
        return tuple(np.linspace(lo, hi, n) for lo, hi, n in zip(self.x_min, self.x_max, self.N))

    def points(self) -> np.ndarray:
        """Node coordinates, shape ``N + (ndim,)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def nearest_index(self, x) -> tuple:
        """Nearest-node index arrays for points ``x`` (state axis last), clipped to the lattice."""
        x = np.asarray(x, dtype=float)
        idx = []
        for i, (lo, h, n) in enumerate(zip(self.x_min, self.dx, self.N)):
            idx.append(np.clip(np.rint((x[..., i] - lo) / h).astype(int), 0, n - 1))
        return tuple(idx)

    def interpolate(self, values: np.ndarray, x) -> np.ndarray:
        """Multilinear interpolation of nodal ``values`` at points ``x``, clamped to the box."""
        x = np.asarray(x, dtype=float)
        base, frac = [], []
        for i, (lo, h, n) in enumerate(zip(self.x_min, self.dx, self.N)):
            q = np.clip((x[..., i] - lo) / h, 0.0, n - 1)
            j = np.minimum(np.floor(q).astype(int), n - 2)
            base.append(j)
            frac.append(q - j)
        out = np.zeros(x.shape[:-1])
        for corner in itertools.product((0, 1), repeat=self.ndim):
            w = np.ones(x.shape[:-1])
            idx = []
            for i, bit in enumerate(corner):
                w = w * (frac[i] if bit else 1.0 - frac[i])
                idx.append(base[i] + bit)
            out = out + w * values[tuple(idx)]
        return out

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for ax in range(self.ndim):
            sl = [slice(None)] * self.ndim
            sl[ax] = 0
            mask[tuple(sl)] = True
            sl[ax] = -1
            mask[tuple(sl)] = True
        return mask


@dataclass(frozen=True)
class GridFunction:
    """Values on a lattice at one time level."""

    lattice: Lattice
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.size != int(np.prod(self.lattice.N)):
            raise ValueError("value array size does not match the lattice")
        vals = vals.reshape(self.lattice.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid function values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def with_values(self, values, t=None) -> "GridFunction":
        return GridFunction(self.lattice, values, self.t if t is None else t)

    def __hash__(self):
        return id(self)


@dataclass(frozen=True)
class ActionGrid:
    """Finite action lists for player I (``U``) and player II (``V``); zero first."""

    player1: tuple
    player2: tuple

    def __post_init__(self):
        p1 = tuple(tuple(float(v) for v in a) for a in self.player1)
        p2 = tuple(tuple(float(v) for v in a) for a in self.player2)
        object.__setattr__(self, "player1", p1)
        object.__setattr__(self, "player2", p2)
        if not set(p2) <= set(p1):
            raise ValueError("player II actions must be a subset of player I actions")
        zero = tuple(0.0 for _ in p1[0])
        if zero not in p1 or zero not in p2:
            raise ValueError("both action lists must contain 0")

    @classmethod
    def from_space(cls, space) -> "ActionGrid":
        return cls(tuple(map(tuple, space.grid(1))), tuple(map(tuple, space.grid(2))))

    @classmethod
    def from_lists(cls, player1, player2=None) -> "ActionGrid":
        def norm(lst):
            return tuple(tuple(np.atleast_1d(np.asarray(a, dtype=float)).tolist()) for a in lst)

        return cls(norm(player1), norm(player1 if player2 is None else player2))

    def array(self, player: int) -> np.ndarray:
        return np.array(self.player1 if player == 1 else self.player2, dtype=float)


@dataclass(frozen=True)
class Shift:
    """Interpolation stencil reading ``V(x + a)`` on a lattice for a fixed action ``a``."""

    terms: tuple  # (weight, per-axis index arrays) pairs
    valid: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        out = None
        for w, idx in self.terms:
            part = w * values[np.ix_(*idx)]
            out = part if out is None else out + part
        return out


def _build_shift(lattice: Lattice, action) -> Shift:
    axis_terms = []
    valid = None
    for i, (n, h) in enumerate(zip(lattice.N, lattice.dx)):
        q = action[i] / h
        k = int(np.floor(q + _SNAP))
        theta = q - k
        if theta < _SNAP:
            theta = 0.0
        j = np.arange(n)
        pos = j + q
        ok = (pos >= -_SNAP) & (pos <= n - 1 + _SNAP)
        terms = [(1.0 - theta, np.clip(j + k, 0, n - 1))]
        if theta > 0.0:
            terms.append((theta, np.clip(j + k + 1, 0, n - 1)))
        axis_terms.append(terms)
        valid = ok if valid is None else np.logical_and.outer(valid, ok)
    combos = []
    for choice in itertools.product(*axis_terms):
        w = float(np.prod([c[0] for c in choice]))
        if w > 0.0:
            combos.append((w, tuple(c[1] for c in choice)))
    valid = np.asarray(valid).reshape(lattice.shape)
    valid.setflags(write=False)
    return Shift(tuple(combos), valid)


@lru_cache(maxsize=64)
def shift_table(lattice: Lattice, actions: tuple) -> tuple:
    """Stencils for every action in ``actions`` (a tuple of action tuples)."""
    return tuple(_build_shift(lattice, a) for a in actions)


@dataclass(frozen=True)
class Stencil:
    """All shifts of an action list stacked for one gather: ``(A, T, M)`` flat indices.

    Terms are padded with zero weights so every action has ``T`` terms; the
    summation order matches :meth:`Shift.apply`.
    """

    index: np.ndarray
    weight: np.ndarray
    valid: np.ndarray  # (A, M)

    def apply(self, values: np.ndarray) -> np.ndarray:
        """``(A, M)`` array of ``V(x + a)`` for every action ``a`` and flat node."""
        flat = np.asarray(values, dtype=float).reshape(-1)
        out = self.weight[:, 0, None] * flat[self.index[:, 0]]
        for j in range(1, self.index.shape[1]):
            out = out + self.weight[:, j, None] * flat[self.index[:, j]]
        return out


@lru_cache(maxsize=64)
def stencil_table(lattice: Lattice, actions: tuple) -> Stencil:
    shifts = shift_table(lattice, actions)
    T = max(len(s.terms) for s in shifts)
    M = int(np.prod(lattice.N))
    index = np.zeros((len(shifts), T, M), dtype=np.int64)
    weight = np.zeros((len(shifts), T))
    for a, sh in enumerate(shifts):
        for j, (w, idx) in enumerate(sh.terms):
            index[a, j] = np.ravel_multi_index(np.ix_(*idx), lattice.shape).reshape(-1)
            weight[a, j] = w
    valid = np.stack([s.valid.reshape(-1) for s in shifts])
    for arr in (index, weight, valid):
        arr.setflags(write=False)
    return Stencil(index, weight, valid)
