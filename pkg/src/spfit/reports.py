"""Small result records shared by the checkers."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{x:.6g}"
    return str(x)


@dataclass
class CheckReport:
    """Outcome of a pass/fail property check.

    ``observed`` and ``bound`` are the two sides of the inequality being
    checked; ``worst_margin`` is ``bound - observed`` at the worst sample
    (negative means violated).
    """

    name: str
    passed: bool
    observed: float = float("nan")
    bound: float = float("nan")
    worst_margin: float = float("nan")
    violations: int = 0
    samples: int = 0
    skipped: bool = False
    details: dict = field(default_factory=dict)

    @property
    def status(self) -> str:
        if self.skipped:
            return "SKIP"
        return "PASS" if self.passed else "FAIL"

    def line(self) -> str:
        parts = [f"[{self.status}] {self.name}"]
        if not self.skipped:
            parts.append(f"observed={_fmt(self.observed)} bound={_fmt(self.bound)}")
            parts.append(f"violations={self.violations}/{self.samples}")
        parts.extend(f"{k}={_fmt(v)}" for k, v in self.details.items())
        return " ".join(parts)


@dataclass
class BoundReport:
    """Per-sample margins of an analytic bound plus the constant it implies.

    ``passed`` is False iff some margin is negative beyond the tolerance, or
    the inferred constant drifts with the perturbation parameter.
    """

    name: str
    margins: np.ndarray
    constant: float
    passed: bool
    tolerance: float = 0.0
    details: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    @property
    def status(self) -> str:
        return "PASS" if self.passed else "FAIL"

    @property
    def worst_margin(self) -> float:
        return float(np.min(self.margins)) if np.size(self.margins) else float("nan")

    def line(self) -> str:
        parts = [f"[{self.status}] {self.name}", f"C={_fmt(self.constant)}",
                 f"worst_margin={_fmt(self.worst_margin)}"]
        parts.extend(f"{k}={_fmt(v)}" for k, v in self.details.items())
        text = " ".join(parts)
        for note in self.notes:
            text += f"\n    note: {note}"
        return text
