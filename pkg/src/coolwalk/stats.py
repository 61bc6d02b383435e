"""Empirical distributions, KS tests, Hill tail indices and power-law fits."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from scipy import stats as sps

from . import limitlaw


class InsufficientTail(ValueError):
    pass


class NonPositiveData(ValueError):
    pass


@dataclass(frozen=True)
class EmpiricalDistribution:
    sorted_samples: np.ndarray

    def __post_init__(self) -> None:
        x = np.sort(np.asarray(self.sorted_samples, dtype=float).ravel())
        if x.size < 2:
            raise ValueError("need at least two samples")
        object.__setattr__(self, "sorted_samples", x)

    @property
    def n(self) -> int:
        return int(self.sorted_samples.size)

    @classmethod
    def of(cls, samples: Iterable[float]) -> "EmpiricalDistribution":
        return cls(np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=float))

    def cdf(self, x: np.ndarray | float) -> np.ndarray:
        return np.searchsorted(self.sorted_samples, x, side="right") / self.n


@dataclass
class TestReport:
    __test__ = False  # not a pytest class

    test: str
    statistic: float
    p_value: float | None = None
    threshold: float | None = None
    passed: bool | None = None
    metadata: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.statistic < 0:
            raise ValueError("test statistic must be non-negative")
        if self.threshold is not None and self.passed is None:
            self.passed = bool(self.statistic < self.threshold)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=float)


def law_hash(law: limitlaw.LimitLaw) -> str:
    text = json.dumps(limitlaw.law_to_dict(law), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def _as_empirical(e: EmpiricalDistribution | Sequence[float] | np.ndarray) -> EmpiricalDistribution:
    return e if isinstance(e, EmpiricalDistribution) else EmpiricalDistribution(np.asarray(e, dtype=float))


def ks_distance(sorted_x: np.ndarray, F: np.ndarray) -> float:
    """One-sample KS distance given the law CDF at the sorted sample points."""
    n = sorted_x.size
    upper = np.arange(1, n + 1) / n
    lower = np.arange(0, n) / n
    return float(max(np.max(upper - F), np.max(F - lower), 0.0))


def ks_against_law(e: EmpiricalDistribution | Sequence[float], law: limitlaw.LimitLaw,
                   threshold: float | None = None) -> TestReport:
    """Exact sup-distance between the empirical CDF and ``law`` at the sample points."""
    e = _as_empirical(e)
    x = e.sorted_samples
    F = limitlaw.cdf(law, x)
    d = ks_distance(x, F)
    p = float(sps.kstwo.sf(d, e.n))
    return TestReport("ks_one_sample", d, p_value=p, threshold=threshold,
                      metadata={"n": e.n, "law": limitlaw.law_to_dict(law), "law_hash": law_hash(law)})


def ks_two_sample(e1: EmpiricalDistribution | Sequence[float], e2: EmpiricalDistribution | Sequence[float],
                  threshold: float | None = None) -> TestReport:
    a, b = _as_empirical(e1), _as_empirical(e2)
    res = sps.ks_2samp(a.sorted_samples, b.sorted_samples, method="asymp")
    return TestReport("ks_two_sample", float(res.statistic), p_value=float(res.pvalue),
                      threshold=threshold, metadata={"n1": a.n, "n2": b.n})


def hill_estimator(e: EmpiricalDistribution | Sequence[float], k_frac: float = 0.01) -> float:
    """Reciprocal mean log-excess over the top ``ceil(k_frac n)`` order statistics."""
    e = _as_empirical(e)
    k = math.ceil(k_frac * e.n)
    x = e.sorted_samples
    if k < 20 or k >= e.n or x[-k - 1] <= 0:
        raise InsufficientTail(f"need at least 20 positive top order statistics (k={k}, n={e.n})")
    top = x[-k:]
    return float(1.0 / np.mean(np.log(top) - math.log(x[-k - 1])))


def hill_sensitivity(e: EmpiricalDistribution | Sequence[float],
                     k_fracs: Sequence[float] = (0.005, 0.01, 0.02, 0.05)) -> dict[float, float]:
    out = {}
    for kf in k_fracs:
        try:
            out[kf] = hill_estimator(e, kf)
        except InsufficientTail:
            out[kf] = float("nan")
    return out


def power_fit(xs: Sequence[float], ys: Sequence[float]) -> dict[str, float]:
    """Least squares of ``log y`` on ``log x``."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 2:
        raise ValueError("need matching arrays with at least two points")
    if np.any(x <= 0) or np.any(y <= 0):
        raise NonPositiveData("power_fit needs positive data")
    lx, ly = np.log(x), np.log(y)
    res = sps.linregress(lx, ly)
    resid = ly - (res.intercept + res.slope * lx)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return {"slope": float(res.slope), "intercept": float(res.intercept), "r2": r2}


def median_over_seeds(values: Sequence[float]) -> float:
    return float(np.median(np.asarray(values, dtype=float)))


def batch_csv(reports: Sequence[TestReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["test", "statistic", "p_value", "threshold", "passed"])
    for r in reports:
        w.writerow([r.test, repr(r.statistic), "" if r.p_value is None else repr(r.p_value),
                    "" if r.threshold is None else repr(r.threshold),
                    "" if r.passed is None else int(r.passed)])
    return buf.getvalue()
