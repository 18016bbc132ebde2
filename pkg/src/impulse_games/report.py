"""Named pass/fail checks with measured values, serializable to JSON."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field


@dataclass
class CheckResult:
    passed: bool
    measured: float
    tolerance: float | None
    advisory: bool = False
    context: dict = field(default_factory=dict)
    diagnostics: str = ""


class VerificationReport:
    """Ordered mapping of check name to :class:`CheckResult`.

    Adding a name twice is an error. ``ok`` ignores advisory checks.
    """

    def __init__(self, checks=None):
        self.checks: dict[str, CheckResult] = {}
        for name, result in (checks or {}).items():
            self.add(name, result)

    def add(self, name: str, result: CheckResult) -> CheckResult:
        if name in self.checks:
            raise ValueError(f"check {name!r} already present")
        self.checks[name] = result
        return result

    def merge(self, other: "VerificationReport") -> None:
        for name, result in other.checks.items():
            self.add(name, result)

    def __getitem__(self, name):
        return self.checks[name]

    def __contains__(self, name):
        return name in self.checks

    def __iter__(self):
        return iter(self.checks)

    @property
    def ok(self) -> bool:
        return all(r.passed for r in self.checks.values() if not r.advisory)

    def failures(self) -> list[str]:
        return [n for n, r in self.checks.items() if not r.passed and not r.advisory]

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "checks": {name: asdict(r) for name, r in self.checks.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "VerificationReport":
        data = json.loads(text)
        return cls({name: CheckResult(**r) for name, r in data["checks"].items()})

    def __eq__(self, other):
        return isinstance(other, VerificationReport) and self.to_dict() == other.to_dict()

    def summary_lines(self) -> list[str]:
        lines = []
        for name, r in self.checks.items():
            status = "INFO" if r.advisory else ("PASS" if r.passed else "FAIL")
            tol = "-" if r.tolerance is None else format(r.tolerance, ".6g")
            lines.append(f"{status:8s} {name}: measured={r.measured:.6g} tol={tol} {r.diagnostics}".rstrip())
        return lines
