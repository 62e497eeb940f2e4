"""Verification reports: a list of checked inequalities plus run metadata."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

SCHEMA = "isocap-report/1"


@dataclass
class Leg:
    """One checked inequality ``lhs <= rhs`` (within ``tolerance``).

    ``kind`` is "numeric" for an ordinary check and "hypothesis" when the leg
    records whether the premise of a result holds; the CLI maps failures of
    the two kinds to different exit codes.
    """

    name: str
    reference: str
    lhs: float
    rhs: float
    tolerance: float = 0.0
    kind: str = "numeric"
    note: str = ""
    margin: float = field(init=False)
    passed: bool = field(init=False)

    def __post_init__(self):
        self.lhs = float(self.lhs)
        self.rhs = float(self.rhs)
        if math.isnan(self.lhs) or math.isnan(self.rhs):
            self.margin = math.nan
            self.passed = False
        else:
            self.margin = self.rhs - self.lhs if self.rhs != self.lhs else 0.0
            self.passed = bool(self.margin >= -self.tolerance)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return {k: _jsonable(v) for k, v in d.items()}


def skipped_leg(name: str, reference: str, note: str, kind: str = "hypothesis") -> Leg:
    leg = Leg(name, reference, math.nan, math.nan, kind=kind, note=note)
    return leg


def _jsonable(v):
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
    return v


@dataclass
class VerificationReport:
    title: str
    legs: list[Leg] = field(default_factory=list)
    environment: dict = field(default_factory=dict)

    def add(self, leg: Leg) -> Leg:
        self.legs.append(leg)
        return leg

    def extend(self, other: "VerificationReport") -> None:
        self.legs.extend(other.legs)
        for k, v in other.environment.items():
            self.environment.setdefault(k, v)

    @property
    def passed(self) -> bool:
        return all(leg.passed for leg in self.legs)

    @property
    def hypothesis_failed(self) -> bool:
        return any(leg.kind == "hypothesis" and not leg.passed for leg in self.legs)

    @property
    def verdict(self) -> str:
        if self.passed:
            return "pass"
        return "hypothesis-fail" if self.hypothesis_failed else "fail"

    @property
    def worst_margin(self) -> float:
        margins = [leg.margin for leg in self.legs if not math.isnan(leg.margin)]
        return min(margins) if margins else math.nan

    def exit_code(self) -> int:
        if self.passed:
            return 0
        return 2 if self.hypothesis_failed else 1

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA,
            "title": self.title,
            "verdict": self.verdict,
            "environment": {k: _jsonable(v) for k, v in self.environment.items()},
            "legs": [leg.to_dict() for leg in self.legs],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self) -> str:
        rows = [f"{'leg':<40} {'lhs':>14} {'rhs':>14} {'margin':>12}  pass"]
        for leg in self.legs:
            rows.append(f"{leg.name[:40]:<40} {leg.lhs:>14.6g} {leg.rhs:>14.6g} "
                        f"{leg.margin:>12.3g}  {'yes' if leg.passed else 'NO'}")
        rows.append(f"verdict: {self.verdict}")
        return "\n".join(rows)
