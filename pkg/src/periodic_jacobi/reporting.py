"""Assertion records and run reports."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import __version__


@dataclass
class Assertion:
    name: str
    measured: float
    threshold: float
    relation: str = "<="
    verdict: bool = field(init=False)

    def __post_init__(self):
        m, t = float(self.measured), float(self.threshold)
        if self.relation == "<=":
            self.verdict = m <= t
        elif self.relation == "<":
            self.verdict = m < t
        elif self.relation == ">=":
            self.verdict = m >= t
        else:
            raise ValueError(self.relation)
        self.verdict = bool(self.verdict and math.isfinite(m))

    def row(self):
        return [self.name, repr(float(self.measured)), self.relation, repr(float(self.threshold)),
                "pass" if self.verdict else "fail"]


@dataclass
class RunReport:
    task: str
    config: dict
    files: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)
    wall_time: float = 0.0
    version: str = __version__

    @property
    def passed(self):
        return all(a.verdict for a in self.assertions)

    def to_dict(self):
        # wall time is left out so that identical runs give identical files
        return {
            "version": self.version,
            "task": self.task,
            "config": self.config,
            "files": self.files,
            "results": self.results,
            "assertions": [
                {"name": a.name, "measured": float(a.measured), "relation": a.relation,
                 "threshold": float(a.threshold), "verdict": "pass" if a.verdict else "fail"}
                for a in self.assertions
            ],
            "passed": self.passed,
        }
