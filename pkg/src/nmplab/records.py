"""Verification records: one checked inequality ``lhs <= rhs``."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional

RATIO_FLOOR = 1e-300

# status values
PASS = "pass"
VIOLATION = "violation"
SHORTFALL = "estimator_shortfall"
NUMERICAL = "numerical_failure"


def slack_ratio(lhs: float, rhs: float) -> float:
    """``rhs / lhs``; infinite when the left side is nonpositive."""
    if lhs <= 0:
        return math.inf
    return rhs / max(lhs, RATIO_FLOOR)


def holds(lhs: float, rhs: float, rel_tol: float = 1e-12) -> bool:
    scale = max(abs(lhs), abs(rhs), 1.0)
    return lhs <= rhs + rel_tol * scale


@dataclass
class VerificationRecord:
    check: str
    model: str
    lhs: float
    rhs: float
    slack_ratio: float
    passed: bool
    seed: Optional[int] = None
    trial: Optional[int] = None
    cstar: Optional[float] = None
    cstar_source: Optional[str] = None
    status: str = PASS
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    @classmethod
    def from_sides(cls, check: str, model: str, lhs: float, rhs: float, **kw):
        ok = holds(lhs, rhs)
        kw.setdefault("status", PASS if ok else VIOLATION)
        return cls(check, model, float(lhs), float(rhs), slack_ratio(lhs, rhs), ok, **kw)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "VerificationRecord":
        return cls(**json.loads(line))

    def key(self):
        return (self.check, self.model, -1 if self.trial is None else self.trial)
