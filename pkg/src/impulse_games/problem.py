"""Game specifications: dynamics, gains, impulse costs, action cones, domain.

A specification is normally loaded from an INI-style config::

    [dynamics]
    n = 1
    b = 0
    sigma = 0.5

    [gains]
    f = 0
    g = max(0, 10 - abs(x1))

    [costs]
    c = 2
    chi = 1
    h_min = 0.5

    [actions]
    U = line
    V = line
    r_max = 12
    m_imp = 49

    [domain]
    x_min = -15
    x_max = 15

    [horizon]
    T = 1

For ``n > 1`` the drift is given as ``b1 .. bn`` and the diffusion matrix as
``sigma1_1 .. sigmaN_D``. Costs are expressions in ``t, y1..yn`` (player I)
and ``t, z1..zn`` (player II). Cone axes are ``line``, ``plus`` (``[0, inf)``)
or ``minus`` (``(-inf, 0]``); one word applies to every axis.
"""

from __future__ import annotations

import configparser
import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .expr import Expr, ExprDomainError, eval_expr, eval_on, parse_expr, to_source
from .report import CheckResult, VerificationReport

AXIS_KINDS = ("line", "plus", "minus")
_AXIS_ALIASES = {"line": "line", "r": "line", "plus": "plus", "nonneg": "plus", "minus": "minus", "nonpos": "minus"}


class ProblemError(ValueError):
    """Invalid game specification; ``field`` names the offending part."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def _axis_contains(outer: str, inner: str) -> bool:
    return outer == "line" or outer == inner


@dataclass(frozen=True)
class ActionSpace:
    U: tuple
    V: tuple
    r_max: float
    m_imp: int

    def __post_init__(self):
        if len(self.U) != len(self.V):
            raise ProblemError("actions", "U and V must have one descriptor per axis")
        for kind in self.U + self.V:
            if kind not in AXIS_KINDS:
                raise ProblemError("actions", f"unknown cone axis {kind!r}")
        if not all(_axis_contains(u, v) for u, v in zip(self.U, self.V)):
            raise ProblemError("actions", f"V-cone {self.V} is not contained in U-cone {self.U}")
        if not self.r_max > 0:
            raise ProblemError("actions", "r_max must be positive")
        if self.m_imp < 3 or self.m_imp % 2 == 0:
            raise ProblemError("actions", "m_imp must be an odd count >= 3 so that 0 is a grid point")

    @property
    def step(self) -> float:
        return 2.0 * self.r_max / (self.m_imp - 1)

    def axis_points(self, kind: str) -> np.ndarray:
        half = (self.m_imp - 1) // 2
        k = {"line": np.arange(-half, half + 1), "plus": np.arange(0, half + 1), "minus": np.arange(-half, 1)}[kind]
        return k * self.step

    def grid(self, player: int) -> np.ndarray:
        """Discrete actions of a player as an ``(m, n)`` array, zero first."""
        kinds = self.U if player == 1 else self.V
        pts = [tuple(p) for p in itertools.product(*(self.axis_points(k) for k in kinds))]
        zero = tuple(0.0 for _ in kinds)
        rest = sorted(p for p in pts if any(v != 0 for v in p))
        return np.array([zero] + rest, dtype=float)


@dataclass(frozen=True)
class CostSpec:
    c: Expr
    chi: Expr
    h_min: float

    def __post_init__(self):
        if not self.h_min > 0:
            raise ProblemError("costs", "h_min must be positive")

    def c_values(self, t, actions: np.ndarray) -> np.ndarray:
        return _eval_actions(self.c, "y", t, actions)

    def chi_values(self, t, actions: np.ndarray) -> np.ndarray:
        return _eval_actions(self.chi, "z", t, actions)


def _eval_actions(e: Expr, prefix: str, t, actions: np.ndarray) -> np.ndarray:
    actions = np.atleast_2d(actions)
    bindings = {"t": t}
    for i in range(actions.shape[1]):
        bindings[f"{prefix}{i + 1}"] = actions[:, i]
    return eval_on(e, bindings, (actions.shape[0],))


@dataclass(frozen=True)
class GameSpec:
    n: int
    T: float
    b: tuple
    sigma: tuple  # n rows of d expressions
    f: Expr
    g: Expr
    costs: CostSpec
    actions: ActionSpace
    x_min: tuple
    x_max: tuple
    allow_invalid_costs: bool = False
    extras: dict = field(default_factory=dict, compare=False, hash=False)

    @property
    def d(self) -> int:
        return len(self.sigma[0])

    def state_bindings(self, t, x) -> dict:
        """Bindings for ``t, x1..xn`` where ``x`` has the state axis last."""
        x = np.asarray(x, dtype=float)
        out = {"t": t}
        for i in range(self.n):
            out[f"x{i + 1}"] = x[..., i]
        return out

    def eval_state(self, e: Expr, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return eval_on(e, self.state_bindings(t, x), x.shape[:-1])

    def drift(self, t, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.stack([self.eval_state(e, t, x) for e in self.b], axis=-1)

    def diffusion(self, t, x) -> np.ndarray:
        """sigma(x) with shape ``x.shape[:-1] + (n, d)``."""
        x = np.asarray(x, dtype=float)
        rows = [np.stack([self.eval_state(e, t, x) for e in row], axis=-1) for row in self.sigma]
        return np.stack(rows, axis=-2)

    def running_gain(self, t, x) -> np.ndarray:
        return self.eval_state(self.f, t, x)

    def payoff(self, x) -> np.ndarray:
        return self.eval_state(self.g, self.T, x)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "T": self.T,
            "b": [to_source(e) for e in self.b],
            "sigma": [[to_source(e) for e in row] for row in self.sigma],
            "f": to_source(self.f),
            "g": to_source(self.g),
            "c": to_source(self.costs.c),
            "chi": to_source(self.costs.chi),
            "h_min": self.costs.h_min,
            "U": list(self.actions.U),
            "V": list(self.actions.V),
            "r_max": self.actions.r_max,
            "m_imp": self.actions.m_imp,
            "x_min": list(self.x_min),
            "x_max": list(self.x_max),
        }

    def spec_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _state_vars(n):
    return {"t"} | {f"x{i + 1}" for i in range(n)}


def build_spec(
    *,
    n=1,
    T=1.0,
    b="0",
    sigma="0",
    f="0",
    g="0",
    c="2",
    chi="1",
    h_min=0.5,
    U="line",
    V="line",
    r_max=1.0,
    m_imp=3,
    x_min=-1.0,
    x_max=1.0,
    allow_invalid_costs=False,
    validate=True,
    n_samples=2000,
    seed=0,
    extras=None,
) -> GameSpec:
    """Construct and validate a :class:`GameSpec` from expression strings.

    ``b`` may be a string (used for every axis) or a sequence of ``n``
    strings; ``sigma`` a string (``n == d == 1`` or a diagonal with that
    entry) or a nested sequence of rows.
    """
    n = int(n)
    if n < 1:
        raise ProblemError("dynamics", "n must be >= 1")
    T = float(T)
    if not T > 0:
        raise ProblemError("horizon", "T must be positive")
    svars = _state_vars(n)

    def p(src, name, variables):
        try:
            return parse_expr(str(src), variables)
        except ValueError as exc:
            raise ProblemError(name, str(exc)) from exc

    b_src = [b] * n if isinstance(b, (str, int, float)) else list(b)
    if len(b_src) != n:
        raise ProblemError("dynamics", f"need {n} drift components")
    if isinstance(sigma, (str, int, float)):
        sig_src = [[sigma if i == j else "0" for j in range(n)] for i in range(n)]
    else:
        sig_src = [list(row) if not isinstance(row, (str, int, float)) else [row] for row in sigma]
    if len(sig_src) != n or len({len(r) for r in sig_src}) != 1:
        raise ProblemError("dynamics", "sigma must be an n x d matrix")

    def axes(kind, name):
        parts = [kind] * n if isinstance(kind, str) and "," not in kind else (
            [k.strip() for k in kind.split(",")] if isinstance(kind, str) else list(kind)
        )
        if len(parts) == 1 and n > 1:
            parts = parts * n
        try:
            return tuple(_AXIS_ALIASES[k.lower()] for k in parts)
        except KeyError as exc:
            raise ProblemError("actions", f"unknown cone axis {exc.args[0]!r} for {name}") from None

    def bounds(v):
        vals = [float(s) for s in v.split(",")] if isinstance(v, str) else (
            [float(v)] if np.ndim(v) == 0 else [float(s) for s in v]
        )
        if len(vals) == 1:
            vals = vals * n
        if len(vals) != n:
            raise ProblemError("domain", f"need {n} bounds")
        return tuple(vals)

    lo, hi = bounds(x_min), bounds(x_max)
    if any(a >= z for a, z in zip(lo, hi)):
        raise ProblemError("domain", "x_min must be < x_max on every axis")

    actions = ActionSpace(axes(U, "U"), axes(V, "V"), float(r_max), int(m_imp))
    costs = CostSpec(
        p(c, "costs", {"t"} | {f"y{i + 1}" for i in range(n)}),
        p(chi, "costs", {"t"} | {f"z{i + 1}" for i in range(n)}),
        float(h_min),
    )
    spec = GameSpec(
        n=n,
        T=T,
        b=tuple(p(s, "dynamics", svars) for s in b_src),
        sigma=tuple(tuple(p(s, "dynamics", svars) for s in row) for row in sig_src),
        f=p(f, "gains", svars),
        g=p(g, "gains", svars),
        costs=costs,
        actions=actions,
        x_min=lo,
        x_max=hi,
        allow_invalid_costs=bool(allow_invalid_costs),
        extras=dict(extras or {}),
    )
    _smoke_check(spec)
    if validate:
        report = validate_costs(spec, n_samples=n_samples, seed=seed)
        if not report.ok and not spec.allow_invalid_costs:
            bad = ", ".join(f"{k} (margin {report[k].measured:.4g})" for k in report.failures())
            raise ProblemError("costs", f"cost conditions violated: {bad}")
    return spec


def _smoke_check(spec: GameSpec) -> None:
    lo, hi = np.array(spec.x_min), np.array(spec.x_max)
    corners = np.array(list(itertools.product(*zip(lo, hi))) + [(lo + hi) / 2])
    for name, fn in [
        ("dynamics", lambda: spec.drift(0.0, corners)),
        ("dynamics", lambda: spec.diffusion(0.0, corners)),
        ("gains", lambda: spec.running_gain(0.0, corners)),
        ("gains", lambda: spec.payoff(corners)),
    ]:
        try:
            vals = fn()
        except (ExprDomainError, ArithmeticError) as exc:
            raise ProblemError(name, f"evaluation failed on the domain: {exc}") from exc
        if not np.all(np.isfinite(vals)):
            raise ProblemError(name, "non-finite value on the domain corners/center")


def _sample_cone(rng, kinds, r, m):
    cols = []
    for kind in kinds:
        lo, hi = {"line": (-r, r), "plus": (0.0, r), "minus": (-r, 0.0)}[kind]
        cols.append(rng.uniform(lo, hi, m))
    return np.stack(cols, axis=-1)


def validate_costs(spec: GameSpec, n_samples: int = 2000, seed: int = 0) -> VerificationReport:
    """Sample the cost-structure conditions and report the worst margins.

    Margins are ``rhs - lhs`` of each inequality, so a condition passes iff
    its worst margin is ``>= 0`` (strictly ``> 0`` for the positivity checks).
    The time-Hölder quotient of the costs is reported as advisory only.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    A = spec.actions
    costs = spec.costs
    h = costs.h_min
    m = n_samples
    t = rng.uniform(0.0, spec.T, m)
    t2 = rng.uniform(0.0, spec.T, m)
    y1, y2 = _sample_cone(rng, A.U, A.r_max, m), _sample_cone(rng, A.U, A.r_max, m)
    z, z1, z2 = (_sample_cone(rng, A.V, A.r_max, m) for _ in range(3))
    # deterministic points: every grid action pairing with zero, at both ends of the horizon
    gu, gv = A.grid(1), A.grid(2)
    zu, zv = np.zeros_like(gu[:1]), np.zeros_like(gv[:1])
    for ends in (0.0, spec.T):
        t = np.concatenate([t, np.full(len(gu), ends)])
        t2 = np.concatenate([t2, np.full(len(gu), spec.T)])
        y1 = np.concatenate([y1, gu])
        y2 = np.concatenate([y2, np.repeat(zu, len(gu), 0)])
        vz = gv[np.arange(len(gu)) % len(gv)]
        z = np.concatenate([z, vz])
        z1 = np.concatenate([z1, vz])
        z2 = np.concatenate([z2, np.repeat(zv, len(gu), 0)])

    def cv(tt, y):
        return _eval_actions(costs.c, "y", tt, y)

    def xv(tt, zz):
        return _eval_actions(costs.chi, "z", tt, zz)

    report = VerificationReport()
    ctx = {"n_samples": n_samples, "seed": seed}
    c_all = np.concatenate([cv(t, y1), cv(t, y2)])
    x_all = np.concatenate([xv(t, z), xv(t, z1), xv(t, z2)])
    report.add("c_positive", CheckResult(bool(c_all.min() > 0), float(c_all.min()), 0.0, context=ctx))
    report.add("chi_positive", CheckResult(bool(x_all.min() > 0), float(x_all.min()), 0.0, context=ctx))

    margin_c = cv(t, y1) - xv(t, z) + cv(t, y2) - h - cv(t, y1 + z + y2)
    i = int(np.argmin(margin_c))
    report.add(
        "c_subadditive",
        CheckResult(
            bool(margin_c[i] >= 0),
            float(margin_c[i]),
            0.0,
            context=ctx,
            diagnostics=f"worst at t={t[i]:.4g} y1={y1[i].tolist()} z={z[i].tolist()} y2={y2[i].tolist()}",
        ),
    )
    margin_x = xv(t, z1) + xv(t, z2) - h - xv(t, z1 + z2)
    i = int(np.argmin(margin_x))
    report.add(
        "chi_subadditive",
        CheckResult(
            bool(margin_x[i] >= 0),
            float(margin_x[i]),
            0.0,
            context=ctx,
            diagnostics=f"worst at t={t[i]:.4g} z1={z1[i].tolist()} z2={z2[i].tolist()}",
        ),
    )
    early, late = np.minimum(t, t2), np.maximum(t, t2)
    mono = np.concatenate([cv(early, y1) - cv(late, y1), xv(early, z) - xv(late, z)])
    report.add("cost_time_monotone", CheckResult(bool(mono.min() >= 0), float(mono.min()), 0.0, context=ctx))

    gap = np.abs(t - t2)
    keep = gap > 1e-12
    quot = np.concatenate(
        [
            np.abs(cv(t, y1) - cv(t2, y1))[keep] / np.sqrt(gap[keep]),
            np.abs(xv(t, z) - xv(t2, z))[keep] / np.sqrt(gap[keep]),
        ]
    )
    q = float(quot.max()) if quot.size else 0.0
    report.add(
        "cost_time_holder",
        CheckResult(True, q, None, advisory=True, context=ctx, diagnostics="sampled 1/2-Hölder quotient in time"),
    )
    return report


def _get(section, key, default=None):
    if key in section:
        return section[key].strip().strip('"').strip("'")
    return default


def load_problem(config: str, allow_invalid_costs: bool | None = None, n_samples: int = 2000, seed: int = 0) -> GameSpec:
    """Parse config text into a validated :class:`GameSpec`.

    Cost violations abort loading unless ``allow_invalid_costs`` (argument or
    ``[costs] allow_invalid``) is set. Unknown sections are kept in
    ``spec.extras`` as string dictionaries.
    """
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(config)
    except configparser.Error as exc:
        raise ProblemError("config", str(exc)) from exc
    required = ["dynamics", "gains", "costs", "actions", "domain", "horizon"]
    for sec in required:
        if not cp.has_section(sec):
            raise ProblemError(sec, "missing section")
    dyn, gains, costs, acts, dom, hor = (cp[s] for s in required)
    try:
        n = int(_get(dyn, "n", "1"))
        d = int(_get(dyn, "d", str(n)))
    except ValueError as exc:
        raise ProblemError("dynamics", str(exc)) from exc
    if n == 1 and "b" in dyn:
        b = [_get(dyn, "b")]
    else:
        b = [_get(dyn, f"b{i + 1}", "0") for i in range(n)]
    if n == 1 and d == 1 and "sigma" in dyn:
        sigma = [[_get(dyn, "sigma")]]
    elif "sigma" in dyn:
        s = _get(dyn, "sigma")
        sigma = [[s if i == j else "0" for j in range(d)] for i in range(n)]
    else:
        sigma = [[_get(dyn, f"sigma{i + 1}_{j + 1}", "0") for j in range(d)] for i in range(n)]
    if allow_invalid_costs is None:
        allow_invalid_costs = _get(costs, "allow_invalid", "false").lower() in ("1", "true", "yes", "on")
    extras = {s: dict(cp[s]) for s in cp.sections() if s not in required}
    try:
        numeric = dict(
            T=float(_get(hor, "t", "nan")),
            h_min=float(_get(costs, "h_min", "nan")),
            r_max=float(_get(acts, "r_max", "nan")),
            m_imp=int(_get(acts, "m_imp", "0")),
        )
    except ValueError as exc:
        raise ProblemError("config", str(exc)) from exc
    if not np.isfinite(numeric["T"]):
        raise ProblemError("horizon", "T is required")
    try:
        x_min, x_max = _get(dom, "x_min"), _get(dom, "x_max")
        if x_min is None or x_max is None:
            raise ValueError("x_min and x_max are required")
        [float(v) for v in x_min.split(",") + x_max.split(",")]
    except ValueError as exc:
        raise ProblemError("domain", str(exc)) from exc
    return build_spec(
        n=n,
        b=b,
        sigma=sigma,
        f=_get(gains, "f", "0"),
        g=_get(gains, "g", "0"),
        c=_get(costs, "c"),
        chi=_get(costs, "chi"),
        U=_get(acts, "u", "line"),
        V=_get(acts, "v", "line"),
        x_min=x_min,
        x_max=x_max,
        allow_invalid_costs=allow_invalid_costs,
        n_samples=n_samples,
        seed=seed,
        extras=extras,
        **numeric,
    )


def load_problem_file(path) -> GameSpec:
    with open(path, encoding="utf-8") as fh:
        return load_problem(fh.read())


def spec_to_config(spec: GameSpec) -> str:
    """Render a spec back to config text (extras sections included)."""
    lines = ["[dynamics]", f"n = {spec.n}", f"d = {spec.d}"]
    for i, e in enumerate(spec.b):
        lines.append(f"b{i + 1} = {to_source(e)}")
    for i, row in enumerate(spec.sigma):
        for j, e in enumerate(row):
            lines.append(f"sigma{i + 1}_{j + 1} = {to_source(e)}")
    lines += ["", "[gains]", f"f = {to_source(spec.f)}", f"g = {to_source(spec.g)}"]
    lines += [
        "",
        "[costs]",
        f"c = {to_source(spec.costs.c)}",
        f"chi = {to_source(spec.costs.chi)}",
        f"h_min = {spec.costs.h_min!r}",
        f"allow_invalid = {str(spec.allow_invalid_costs).lower()}",
    ]
    lines += [
        "",
        "[actions]",
        f"U = {', '.join(spec.actions.U)}",
        f"V = {', '.join(spec.actions.V)}",
        f"r_max = {spec.actions.r_max!r}",
        f"m_imp = {spec.actions.m_imp}",
    ]
    lines += [
        "",
        "[domain]",
        f"x_min = {', '.join(repr(v) for v in spec.x_min)}",
        f"x_max = {', '.join(repr(v) for v in spec.x_max)}",
        "",
        "[horizon]",
        f"T = {spec.T!r}",
    ]
    for sec, items in spec.extras.items():
        lines += ["", f"[{sec}]"] + [f"{k} = {v}" for k, v in items.items()]
    return "\n".join(lines) + "\n"


CANONICAL_1D = """\
[dynamics]
n = 1
b = 0
sigma = 0.5

[gains]
f = 0
g = max(0, 10 - abs(x1))

[costs]
c = 2
chi = 1
h_min = 0.5

[actions]
U = line
V = line
r_max = 12
m_imp = 49

[domain]
x_min = -15
x_max = 15

[horizon]
T = 1

[grid]
nodes = 301
steps = 64

[probe]
x = 0
"""


def canonical_1d(**overrides) -> GameSpec:
    """The reference one-dimensional game used throughout the tests and demos."""
    kw = dict(
        n=1,
        T=1.0,
        b="0",
        sigma="0.5",
        f="0",
        g="max(0, 10 - abs(x1))",
        c="2",
        chi="1",
        h_min=0.5,
        U="line",
        V="line",
        r_max=12.0,
        m_imp=49,
        x_min=-15.0,
        x_max=15.0,
    )
    kw.update(overrides)
    return build_spec(**kw)


def eval_scalar(e: Expr, **bindings) -> float:
    return float(eval_expr(e, bindings))
