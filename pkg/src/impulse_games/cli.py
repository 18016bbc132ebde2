"""Command-line entry point.

Exit codes: 0 success, 1 usage, 2 validation failure, 3 numerical failure
(CFL, non-convergence, invalid simulation), 4 check failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bundle import BundleError, export_slice, load_bundle, save_bundle
from .expr import ExprDomainError, ExprSyntaxError, UnknownIdentifierError
from .intervention import FixedPointError, NoAdmissibleActionError
from .problem import ProblemError, load_problem, validate_costs
from .sim import SimulationError, child_seeds, estimate_value, simulate_path, write_path_csv
from .solver import CFLError, DiagonalDominanceError, SpaceTimeGrid, cfl_number, solve
from .strategy import PLAYER_I, PLAYER_II, from_policy, silent
from .verify import ALL_CHECKS, run_checks

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_CHECK = 0, 1, 2, 3, 4
DEFAULT_NODES = 101


class UsageError(Exception):
    pass


class ValidationFailure(Exception):
    pass


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    subcommand: str
    config_path: str | None
    config_sha256: str | None
    grid: dict | None
    seeds: dict
    tolerances: dict
    output_dir: str
    argv: list
    spec_hash: str | None = None
    started: str = field(default_factory=_now)
    finished: str | None = None
    status: str = "running"
    outputs: list = field(default_factory=list)
    version: str = __version__

    @property
    def path(self) -> Path:
        return Path(self.output_dir) / f"manifest_{self.subcommand.replace('-', '_')}.json"

    def write(self) -> None:
        Path(self.output_dir).mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    def finalize(self, status: str) -> None:
        self.status = status
        self.finished = _now()
        self.write()


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", help="problem config (INI)")
    p.add_argument("--out", default=".", help="output directory (default: current)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=None, help="fixed-point / identity tolerance")
    p.add_argument("--grid", help="Nx,K  (Nx may be N1xN2 for several axes; K may be 'auto')")
    p.add_argument("--probe", nargs="+", metavar="X", help="probe points, coordinates comma-separated")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _global_flags()
    parser = _Parser(prog="impulse-games", description="Impulse-control stochastic differential games")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    sub.add_parser("solve", parents=[common], help="solve the value function and write a bundle")

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo estimate under the solved feedback policies")
    p.add_argument("--bundle", help="bundle directory (default: --out)")
    p.add_argument("--t0", type=float, default=0.0)
    p.add_argument("--x0", help="start state (default: first probe point or the origin)")
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--delta", type=float, default=None, help="simulation step (default: bundle dt / 4)")
    p.add_argument("--path-csv", type=int, default=0, metavar="M", help="also write the first M paths as CSV")
    p.add_argument("--player1", choices=("policy", "silent"), default="policy")
    p.add_argument("--player2", choices=("policy", "silent"), default="policy")

    p = sub.add_parser("check", parents=[common], help="run verification checks against a bundle")
    p.add_argument("--bundle", help="bundle directory (default: --out)")
    p.add_argument("--only", help="comma-separated subset of: " + ", ".join(ALL_CHECKS))
    p.add_argument("--paths", type=int, default=20_000)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--s", type=float, default=None, help="intermediate time for the DPP check")

    p = sub.add_parser("export", parents=[common], help="export value slices and region maps as CSV")
    p.add_argument("--bundle", help="bundle directory (default: --out)")
    p.add_argument("--slice", type=int, action="append", dest="slices", metavar="K", help="time index (repeatable)")
    p.add_argument("--format", choices=("csv",), default="csv")
    p.add_argument("--no-regions", action="store_true", help="skip the region maps")

    sub.add_parser("validate-costs", parents=[common], help="check the cost-structure conditions")
    return parser


def _read_config(args) -> tuple[str, str]:
    if not args.config:
        raise UsageError("--config is required")
    try:
        text = Path(args.config).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from exc
    return text, hashlib.sha256(text.encode()).hexdigest()


def _parse_point(s: str, n: int) -> np.ndarray:
    try:
        x = np.array([float(v) for v in s.split(",")])
    except ValueError as exc:
        raise UsageError(f"bad point {s!r}") from exc
    if len(x) != n:
        raise UsageError(f"point {s!r} has {len(x)} coordinates, expected {n}")
    return x


def _probes(args, spec) -> list:
    raw = args.probe
    if raw is None and "probe" in spec.extras and "x" in spec.extras["probe"]:
        raw = spec.extras["probe"]["x"].split()
    return [_parse_point(s, spec.n) for s in (raw or [])]


def _grid_request(args, spec) -> tuple[tuple, int | None]:
    nodes, steps = None, None
    if args.grid:
        parts = args.grid.split(",")
        if len(parts) != 2:
            raise UsageError("--grid expects Nx,K")
        nodes, steps = parts
    elif "grid" in spec.extras:
        nodes = spec.extras["grid"].get("nodes")
        steps = spec.extras["grid"].get("steps")
    try:
        if nodes is None:
            N = (DEFAULT_NODES,) * spec.n
        else:
            N = tuple(int(v) for v in str(nodes).replace(",", "x").split("x"))
            if len(N) == 1:
                N = N * spec.n
        K = None if steps in (None, "auto") else int(steps)
    except ValueError as exc:
        raise UsageError(f"bad grid specification: {exc}") from exc
    if len(N) != spec.n or min(N) < 3 or (K is not None and K < 1):
        raise UsageError(f"grid needs {spec.n} node counts >= 3 and K >= 1")
    return N, K


def _auto_steps(spec, N) -> int:
    """Smallest K meeting the CFL bound."""
    nu = cfl_number(spec, SpaceTimeGrid.for_spec(spec, N, 1, check=False))
    return max(1, math.ceil(nu / (1 + 1e-12)))


def _open_bundle(args, spec=None):
    path = args.bundle or args.out
    try:
        bundle = load_bundle(path)
    except (BundleError, OSError) as exc:
        raise ValidationFailure(f"cannot load bundle from {path}: {exc}") from exc
    if spec is not None and bundle.spec_hash != spec.spec_hash():
        raise ValidationFailure(
            f"bundle {path} was solved for spec {bundle.spec_hash[:12]}, config gives {spec.spec_hash()[:12]}"
        )
    return bundle


def _manifest(args, config_hash, grid=None, **tol) -> RunManifest:
    return RunManifest(
        subcommand=args.command,
        config_path=str(Path(args.config).resolve()) if args.config else None,
        config_sha256=config_hash,
        grid=grid,
        seeds={"seed": args.seed},
        tolerances={k: v for k, v in tol.items()},
        output_dir=str(Path(args.out).resolve()),
        argv=list(sys.argv[1:]),
    )


def cmd_solve(args) -> int:
    text, chash = _read_config(args)
    spec = load_problem(text)
    N, K = _grid_request(args, spec)
    probes = _probes(args, spec)
    if K is None:
        K = _auto_steps(spec, N)
    grid = SpaceTimeGrid.for_spec(spec, N, K)
    man = _manifest(args, chash, {"nodes": list(N), "steps": K}, fixed_point=args.tol)
    man.spec_hash = spec.spec_hash()
    man.write()
    field_, policies = solve(spec, grid, tol=args.tol)
    man.outputs = save_bundle(args.out, spec, field_, policies)
    for x in probes:
        v = float(field_.value_at(0.0, x)[0])
        print(f"V(0, {','.join(format(c, 'g') for c in x)}) = {v:.10g}")
    man.finalize("ok")
    print(f"bundle written to {args.out} ({grid.lattice.N} nodes, {K} steps)")
    return EXIT_OK


def _strategy(kind, bundle, player, n):
    if kind == "silent":
        return silent(player, n)
    return from_policy(bundle.policies, bundle.grid, player)


def cmd_simulate(args) -> int:
    text, chash = _read_config(args)
    spec = load_problem(text)
    bundle = _open_bundle(args, spec)
    if args.x0:
        x0 = _parse_point(args.x0, spec.n)
    else:
        probes = _probes(args, spec)
        x0 = probes[0] if probes else np.zeros(spec.n)
    delta = args.delta if args.delta is not None else bundle.grid.dt / 4
    if args.paths < 2:
        raise UsageError("--paths must be at least 2")
    man = _manifest(args, chash, dict(bundle.index["grid"]))
    man.spec_hash = spec.spec_hash()
    man.seeds.update({"n_paths": args.paths, "delta": delta, "t0": args.t0, "x0": x0.tolist()})
    man.write()
    sI = _strategy(args.player1, bundle, PLAYER_I, spec.n)
    sII = _strategy(args.player2, bundle, PLAYER_II, spec.n)
    try:
        est = estimate_value(spec, sI, sII, args.t0, x0, delta, args.paths, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    out = Path(args.out)
    (out / "estimate.json").write_text(est.to_json() + "\n", encoding="utf-8")
    outputs = ["estimate.json"]
    for i, ss in enumerate(child_seeds(args.seed, args.paths)[: args.path_csv]):
        path = simulate_path(spec, sI, sII, args.t0, x0, delta, ss)
        name = f"path_{i:04d}.csv"
        with open(out / name, "w", newline="", encoding="utf-8") as fh:
            write_path_csv(path, fh)
        outputs.append(name)
    man.outputs = outputs
    man.finalize("ok")
    print(f"mean = {est.mean:.10g}  stderr = {est.stderr:.3g}  paths = {est.n_paths}")
    return EXIT_OK


def cmd_check(args) -> int:
    text, chash = _read_config(args)
    # violations are reported as check failures here instead of aborting the load
    spec = load_problem(text, allow_invalid_costs=True)
    only = [s.strip() for s in args.only.split(",") if s.strip()] if args.only else None
    unknown = sorted(set(only or ()) - set(ALL_CHECKS))
    if unknown:
        raise UsageError(f"unknown checks {unknown}; choose from {', '.join(ALL_CHECKS)}")
    tol = args.tol if args.tol is not None else 1e-7
    man = _manifest(args, chash, None, identity=tol)
    man.spec_hash = spec.spec_hash()
    if only == ["costs"]:
        man.write()
        report = validate_costs(spec, seed=args.seed)
    else:
        bundle = _open_bundle(args, spec)
        man.grid = dict(bundle.index["grid"])
        man.write()
        probes = _probes(args, spec)
        x0 = probes[0] if probes else None
        report = run_checks(
            spec, bundle.field, bundle.policies, only=only, seed=args.seed, tol=tol, x0=x0, s=args.s,
            n_paths=args.paths, delta=args.delta,
        )
    Path(args.out, "report.json").write_text(report.to_json(), encoding="utf-8")
    man.outputs = ["report.json"]
    for line in report.summary_lines():
        print(line)
    man.finalize("ok" if report.ok else "checks failed")
    if not report.ok:
        print("failed: " + ", ".join(report.failures()), file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def cmd_export(args) -> int:
    chash = None
    spec = None
    if args.config:
        text, chash = _read_config(args)
        spec = load_problem(text, allow_invalid_costs=True)
    bundle = _open_bundle(args, spec)
    K = bundle.grid.K
    slices = args.slices if args.slices else [0, K]
    bad = [k for k in slices if not 0 <= k <= K]
    if bad:
        raise UsageError(f"slice index {bad[0]} out of range 0..{K}")
    man = _manifest(args, chash, dict(bundle.index["grid"]))
    man.spec_hash = bundle.spec_hash
    man.write()
    out = Path(args.out)
    for k in slices:
        names = [(f"value_{k:05d}.csv", False)]
        if not args.no_regions:
            names.append((f"regions_{k:05d}.csv", True))
        for name, regions in names:
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                export_slice(bundle, k, fh, regions=regions)
            man.outputs.append(name)
    man.finalize("ok")
    print(f"exported {len(man.outputs)} files to {out}")
    return EXIT_OK


def cmd_validate_costs(args) -> int:
    text, chash = _read_config(args)
    spec = load_problem(text, allow_invalid_costs=True)
    report = validate_costs(spec, seed=args.seed)
    for line in report.summary_lines():
        print(line)
    if args.out != ".":
        man = _manifest(args, chash)
        man.spec_hash = spec.spec_hash()
        man.write()
        Path(args.out, "costs.json").write_text(report.to_json(), encoding="utf-8")
        man.outputs = ["costs.json"]
        man.finalize("ok" if report.ok else "violations")
    return EXIT_OK if report.ok else EXIT_VALIDATION


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "check": cmd_check,
    "export": cmd_export,
    "validate-costs": cmd_validate_costs,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ProblemError, ExprSyntaxError, UnknownIdentifierError, ExprDomainError, ValidationFailure) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CFLError, DiagonalDominanceError, FixedPointError, NoAdmissibleActionError, SimulationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
