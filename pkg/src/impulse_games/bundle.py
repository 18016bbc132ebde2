"""Solver result bundles: a JSON index plus flat little-endian binary arrays.

Layout of a bundle directory::

    index.json          metadata, grid, spec hash, tolerances, array table
    values.f64          (K+1, *N) value slices, C order
    raw_terminal.f64    (*N) raw payoff g on the lattice
    labels.i8           (K+1, *N) regime labels, 0 continue / 1 player I / 2 player II
    action_index.i64    (K+1, *N) index into the owner's action list, -1 if none
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grids import ActionGrid, Lattice
from .intervention import PolicySlice
from .solver import SpaceTimeGrid, ValueField

FORMAT = "impulse-games-bundle/1"
_FILES = {
    "values": ("values.f64", "<f8"),
    "raw_terminal": ("raw_terminal.f64", "<f8"),
    "labels": ("labels.i8", "<i1"),
    "action_index": ("action_index.i64", "<i8"),
}


class BundleError(ValueError):
    pass


@dataclass
class Bundle:
    index: dict
    grid: SpaceTimeGrid
    field: ValueField
    policies: list

    @property
    def spec_hash(self) -> str:
        return self.index["spec_hash"]


def save_bundle(out_dir, spec, field: ValueField, policies, extra=None) -> list:
    """Write a bundle; returns the list of files written (relative names)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid = field.grid
    arrays = {
        "values": field.values,
        "raw_terminal": field.raw_terminal,
        "labels": np.stack([p.labels for p in policies]),
        "action_index": np.stack([p.action_index for p in policies]),
    }
    table = {}
    for name, arr in arrays.items():
        fname, dtype = _FILES[name]
        a = np.ascontiguousarray(arr, dtype=dtype)
        a.tofile(out / fname)
        table[name] = {"file": fname, "dtype": dtype, "shape": list(a.shape)}
    actions = policies[0].actions
    index = {
        "format": FORMAT,
        "spec_hash": spec.spec_hash(),
        "spec": spec.to_dict(),
        "grid": {
            "x_min": list(grid.lattice.x_min),
            "x_max": list(grid.lattice.x_max),
            "nodes": list(grid.lattice.N),
            "steps": grid.K,
            "T": grid.T,
        },
        "tolerances": [float(t) for t in field.tols],
        "iterations": [int(i) for i in field.iterations],
        "actions": {"player1": [list(a) for a in actions.player1], "player2": [list(a) for a in actions.player2]},
        "arrays": table,
    }
    if extra:
        index.update(extra)
    (out / "index.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return ["index.json"] + [t["file"] for t in table.values()]


def load_bundle(path) -> Bundle:
    root = Path(path)
    try:
        index = json.loads((root / "index.json").read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise BundleError(f"cannot read bundle index in {root}: {exc}") from exc
    if index.get("format") != FORMAT:
        raise BundleError(f"unsupported bundle format {index.get('format')!r}")
    arrays = {}
    for name, meta in index["arrays"].items():
        data = np.fromfile(root / meta["file"], dtype=meta["dtype"])
        shape = tuple(meta["shape"])
        if data.size != int(np.prod(shape)):
            raise BundleError(f"{meta['file']}: expected {int(np.prod(shape))} entries, found {data.size}")
        arrays[name] = data.reshape(shape)
    g = index["grid"]
    lattice = Lattice(tuple(g["x_min"]), tuple(g["x_max"]), tuple(g["nodes"]))
    grid = SpaceTimeGrid(lattice, int(g["steps"]), float(g["T"]))
    field = ValueField(grid, arrays["values"].astype(float), arrays["raw_terminal"].astype(float),
                       list(index["iterations"]), list(index["tolerances"]))
    actions = ActionGrid(tuple(map(tuple, index["actions"]["player1"])), tuple(map(tuple, index["actions"]["player2"])))
    policies = [
        PolicySlice(arrays["labels"][k].astype(np.int8), arrays["action_index"][k].astype(np.int64), actions, k * grid.dt,
                    int(index["iterations"][k]))
        for k in range(grid.K + 1)
    ]
    return Bundle(index, grid, field, policies)


def export_slice(bundle: Bundle, k: int, fh, regions: bool = False) -> int:
    """Write one slice as CSV rows (coordinates then value, or label and action)."""
    if not 0 <= k <= bundle.grid.K:
        raise IndexError(f"slice {k} out of range 0..{bundle.grid.K}")
    lattice = bundle.grid.lattice
    n = lattice.ndim
    pts = lattice.points().reshape(-1, n)
    w = csv.writer(fh)
    xs = [f"x{i + 1}" for i in range(n)]
    if regions:
        pol = bundle.policies[k]
        acts = pol.action_vectors().reshape(-1, n)
        w.writerow(xs + ["label"] + [f"a{i + 1}" for i in range(n)])
        for p, lab, a in zip(pts, pol.labels.reshape(-1), acts):
            w.writerow([repr(float(v)) for v in p] + [int(lab)] + [repr(float(v)) for v in a])
    else:
        w.writerow(xs + ["V"])
        for p, v in zip(pts, bundle.field.values[k].reshape(-1)):
            w.writerow([repr(float(u)) for u in p] + [repr(float(v))])
    return len(pts)
