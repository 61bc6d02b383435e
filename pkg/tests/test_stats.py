from __future__ import annotations

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coolwalk.limitlaw import Gaussian
from coolwalk.stats import (EmpiricalDistribution, InsufficientTail, NonPositiveData, TestReport, batch_csv,
                            hill_estimator, hill_sensitivity, ks_against_law, ks_distance, ks_two_sample,
                            median_over_seeds, power_fit)
from coolwalk.streams import stream


def test_empirical_distribution():
    e = EmpiricalDistribution.of([3.0, 1.0, 2.0])
    assert e.n == 3 and list(e.sorted_samples) == [1, 2, 3]
    assert list(e.cdf([0.5, 1.0, 2.5, 3.0])) == pytest.approx([0, 1 / 3, 2 / 3, 1])
    with pytest.raises(ValueError):
        EmpiricalDistribution.of([1.0])


def test_ks_self_consistency_rate():
    # Kolmogorov asymptotic 99% quantile 1.63 / sqrt(n)
    n = 10**4
    hits = sum(ks_against_law(stream(s).standard_normal(n), Gaussian(1.0)).statistic < 1.63 / math.sqrt(n)
               for s in range(40))
    assert hits >= 37


def test_ks_constant_samples():
    assert ks_against_law(np.zeros(100), Gaussian(1.0)).statistic >= 0.5


def test_ks_distance_uniform():
    x = np.array([0.1, 0.5, 0.9])
    # the largest gap is 0.9 - 2/3 at the last point
    assert ks_distance(x, x) == pytest.approx(0.9 - 2 / 3)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.1, 10), st.floats(-5, 5), st.integers(0, 2**32))
def test_ks_affine_invariance(a, b, seed):
    x = stream(seed).standard_normal(500)
    d1 = ks_against_law(x, Gaussian(1.0)).statistic
    d2 = ks_against_law(a * x, Gaussian(a)).statistic
    assert d1 == pytest.approx(d2, abs=1e-7)
    y = stream(seed + 1).standard_normal(300)
    assert ks_two_sample(x, y).statistic == pytest.approx(ks_two_sample(a * x + b, a * y + b).statistic)


def test_ks_two_sample_identical():
    x = stream(0).standard_normal(100)
    assert ks_two_sample(x, x).statistic == 0.0


def test_ks_two_sample_calibration():
    rejects = sum(ks_two_sample(stream(i, 0).standard_normal(10**4), stream(i, 1).standard_normal(10**4)).p_value < 0.01
                  for i in range(200))
    assert rejects <= 8


def test_hill_pareto():
    x = stream(1).pareto(1.5, 10**5) + 1.0
    assert hill_estimator(x, 0.01) == pytest.approx(1.5, abs=0.1)
    sens = hill_sensitivity(x)
    assert set(sens) == {0.005, 0.01, 0.02, 0.05} and all(abs(v - 1.5) < 0.2 for v in sens.values())
    with pytest.raises(InsufficientTail):
        hill_estimator(x[:1000], 0.01)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(0, 2**32))
def test_hill_scale_invariance(c, seed):
    x = stream(seed).pareto(1.5, 5000) + 1.0
    assert hill_estimator(c * x) == pytest.approx(hill_estimator(x), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.floats(-3, 3), st.floats(1e-3, 1e3))
def test_power_fit_exact(slope, C):
    x = np.geomspace(1, 1e4, 9)
    fit = power_fit(x, C * x**slope)
    assert abs(fit["slope"] - slope) < 1e-12
    assert fit["intercept"] == pytest.approx(math.log(C), abs=1e-9)


def test_power_fit_errors():
    with pytest.raises(NonPositiveData):
        power_fit([1, 2], [1, -1])
    with pytest.raises(ValueError):
        power_fit([1], [1])


def test_report_and_batch_csv():
    r = TestReport("ks_one_sample", 0.02, p_value=0.4, threshold=0.05)
    assert r.passed is True
    assert json.loads(r.to_json())["statistic"] == 0.02
    assert TestReport("x", 0.1, threshold=0.05).passed is False
    with pytest.raises(ValueError):
        TestReport("x", -1.0)
    assert batch_csv([r]).splitlines() == ["test,statistic,p_value,threshold,passed", "ks_one_sample,0.02,0.4,0.05,1"]
    assert median_over_seeds([3, 1, 2, 5, 4]) == 3


def test_report_metadata_names_law():
    rep = ks_against_law(stream(0).standard_normal(100), Gaussian(2.0))
    assert rep.metadata["law"] == {"kind": "gaussian", "sigma": 2.0} and len(rep.metadata["law_hash"]) == 16
