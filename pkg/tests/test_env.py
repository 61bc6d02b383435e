from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coolwalk.env import (DomainError, EnvironmentLaw, env_constants, kappa_root, make_beta_env,
                          mean_log_rho_quad, mean_rho_quad, rho_moment_quad, sample_omega)
from coolwalk.streams import stream

laws = st.builds(make_beta_env, st.floats(1.05, 1.95), st.floats(0.2, 5.0))


def test_reference_derived_quantities(ref_law):
    assert ref_law.a == 2.5
    assert ref_law.mean_rho == pytest.approx(2.0 / 3.0, abs=1e-15)
    assert abs(ref_law.speed - 0.2) < 1e-10
    assert ref_law.mean_omega == pytest.approx(2.5 / 3.5)


def test_rho_moment_quadrature_matches_closed_form(ref_law):
    # quadrature of <rho^t> over the Beta(2.5, 1) density is the independent oracle
    assert abs(rho_moment_quad(ref_law, 1.5) - 1.0) < 1e-8
    assert abs(mean_rho_quad(ref_law) - 2.0 / 3.0) < 1e-10
    assert abs(ref_law.kappa(1.0) - 2.0 / 3.0) < 1e-14


def test_kappa_fixed_points(ref_law):
    assert ref_law.kappa(0.0) == pytest.approx(1.0, abs=1e-15)
    assert abs(ref_law.kappa(1.5) - 1.0) < 1e-12
    # Gamma(1.5) Gamma(2) / (Gamma(2.5) Gamma(1)) = 2/3
    assert ref_law.kappa(1.0) == pytest.approx(math.gamma(1.5) * math.gamma(2) / math.gamma(2.5))


def test_speed_limits():
    for b in (0.3, 1.0, 4.0):
        assert make_beta_env(2 - 1e-9, b).speed == pytest.approx(1 / (1 + 2 * b), rel=1e-7)
        assert 0 < make_beta_env(1 + 1e-9, b).speed < 1e-8


def test_invalid_parameters():
    for s, b in ((1.0, 1.0), (2.0, 1.0), (1.5, 0.0), (1.5, -1.0)):
        with pytest.raises(DomainError):
            make_beta_env(s, b)
    with pytest.raises(DomainError):
        EnvironmentLaw(1.5, 1.0, family="two_point")
    with pytest.raises(DomainError):
        make_beta_env(1.5, 1.0).kappa(2.5)


def test_sample_omega_mean_and_support(ref_law):
    w = ref_law.sample_omega(stream(1), 10**6)
    assert abs(w.mean() - 2.5 / 3.5) < 0.002
    assert np.all((w > 0) & (w < 1))


def test_sample_omega_deterministic(ref_law):
    a = [sample_omega(ref_law, r) for r in [stream(5)] for _ in range(10)]
    b = [sample_omega(ref_law, r) for r in [stream(5)] for _ in range(10)]
    assert a == b


def test_env_constants(ref_law):
    c = env_constants(ref_law)
    assert c["s"] == 1.5 and c["v_mu"] == pytest.approx(0.2)
    assert c["kappa"](1.0) == pytest.approx(2 / 3)


def test_json_round_trip_ignores_derived_fields(ref_law):
    assert EnvironmentLaw.from_json(ref_law.to_json()) == ref_law
    assert EnvironmentLaw.from_dict({"s": 1.5, "b": 1.0, "a": 99.0}) == ref_law
    with pytest.raises(DomainError):
        EnvironmentLaw.from_dict({"s": 1.5})


@settings(max_examples=25, deadline=None)
@given(laws)
def test_kappa_root_is_s(law):
    assert abs(kappa_root(law) - law.s) < 1e-8


@settings(max_examples=25, deadline=None)
@given(laws)
def test_transience_digamma_matches_quadrature(law):
    m = law.mean_log_rho()
    assert m < 0
    assert abs(m - mean_log_rho_quad(law)) < 1e-8


@settings(max_examples=25, deadline=None)
@given(laws, st.floats(-0.15, 0.95))
def test_kappa_closed_form_matches_quadrature(law, frac):
    t = frac * law.s
    if t <= -law.b:
        return
    assert law.kappa(t) == pytest.approx(rho_moment_quad(law, t), rel=1e-8)
