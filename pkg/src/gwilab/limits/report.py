"""Experiment reports: estimates with standard errors, named distances, exact checks."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = ["Estimate", "Distance", "Check", "ExperimentReport", "laplace_estimates"]


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


@dataclass(frozen=True)
class Estimate:
    key: str  # e.g. "lambda=0.5"
    value: float
    stderr: float
    n: int
    target: float | None = None
    discrete: float | None = None  # exact finite-p value when computable

    def as_dict(self) -> dict:
        out = {"key": self.key, "value": self.value, "stderr": self.stderr, "n": self.n}
        if self.target is not None:
            out["target"] = self.target
        if self.discrete is not None:
            out["discrete"] = self.discrete
        return out


@dataclass(frozen=True)
class Distance:
    name: str  # laplace_sup_gap, ks, tv
    value: float
    comparands: tuple[str, str]
    tolerance: float | None = None
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool | None:
        return None if self.tolerance is None else bool(self.value <= self.tolerance)

    def as_dict(self) -> dict:
        out = {"name": self.name, "value": self.value, "comparands": list(self.comparands)}
        if self.tolerance is not None:
            out["tolerance"] = self.tolerance
            out["passed"] = self.passed
        out.update(self.detail)
        return out


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"name": self.name, "passed": self.passed, **self.detail}


@dataclass
class ExperimentReport:
    experiment: str
    config: dict
    seed: int | None
    estimates: list[Estimate] = field(default_factory=list)
    distances: list[Distance] = field(default_factory=list)
    checks: list[Check] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(d.passed is not False for d in self.distances) and all(c.passed for c in self.checks)

    def distance(self, name: str) -> Distance:
        return next(d for d in self.distances if d.name == name)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def as_dict(self) -> dict:
        return _clean(
            {
                "experiment": self.experiment,
                "passed": self.passed,
                "seed": self.seed,
                "config": self.config,
                "estimates": [e.as_dict() for e in self.estimates],
                "distances": [d.as_dict() for d in self.distances],
                "checks": [c.as_dict() for c in self.checks],
            }
        )

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, allow_nan=False) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["key", "empirical", "target", "stderr", "n", "discrete"])
        for e in self.estimates:
            w.writerow([e.key, _num(e.value), _num(e.target), _num(e.stderr), int(e.n), _num(e.discrete)])
        return buf.getvalue()


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def laplace_estimates(samples: np.ndarray, lambdas, targets, discrete=None) -> tuple[list[Estimate], Distance]:
    """Empirical Laplace transform per lambda and the sup gap to the targets."""
    n = len(samples)
    estimates = []
    worst, worst_se, worst_key = 0.0, 0.0, None
    for i, lam in enumerate(lambdas):
        e = np.exp(-lam * samples)
        value = float(np.mean(e))
        se = float(np.std(e, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        est = Estimate(f"lambda={lam:g}", value, se, n, float(targets[i]), None if discrete is None else float(discrete[i]))
        estimates.append(est)
        gap = abs(value - targets[i])
        if worst_key is None or gap > worst:
            worst, worst_se, worst_key = gap, se, est.key
    dist = Distance(
        "laplace_sup_gap",
        worst,
        ("empirical Laplace transform", "CSBPI kernel"),
        detail={"argmax": worst_key, "stderr_at_argmax": worst_se},
    )
    return estimates, dist
