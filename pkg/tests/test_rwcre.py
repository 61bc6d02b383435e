from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coolwalk.budget import BudgetExceeded, SimBudget
from coolwalk.cooling import Explicit, Polynomial, SparseGeometric
from coolwalk.rwcre import (EmpiricalMean, EmpiricalSD, Ensemble, LinearSpeed, MissingConstant, NPowInvS, PolyBeta,
                            centering_from_dict, load_experiment, poly_beta, poly_beta_exponent, scaled_view,
                            scaling_from_dict, simulate_pieces, simulate_rwcre)
from coolwalk.rwre import sigma2_from_tc, simulate_endpoints
from coolwalk.stats import ks_two_sample


def test_rwre_reduction(ref_law):
    n = 4000
    x = simulate_rwcre(ref_law, Explicit((n,)), SimBudget(4000, n, master_seed=1)).samples
    z = simulate_endpoints(ref_law, n, 4000, 2)
    assert ks_two_sample(x, z).p_value > 0.01


def test_homogeneous_reduction(ref_law):
    n = 2000
    x = simulate_rwcre(ref_law, Polynomial(1, 0), SimBudget(4000, n, master_seed=3)).samples
    drift = (ref_law.a - ref_law.b) / (ref_law.a + ref_law.b)
    # i.i.d. +-1 steps with P(+1) = a/(a+b): Var = n (1 - drift^2)
    se = math.sqrt(n * (1 - drift**2) / x.size)
    assert abs(x.mean() - n * drift) < 4 * se
    assert x.var() / (n * (1 - drift**2)) == pytest.approx(1.0, abs=0.08)


def test_determinism(ref_law):
    b = SimBudget(50, 3000, master_seed=9)
    cmap = Polynomial(1, 1)
    a1 = simulate_rwcre(ref_law, cmap, b).samples
    assert np.array_equal(a1, simulate_rwcre(ref_law, cmap, b).samples)
    assert np.array_equal(a1, simulate_rwcre(ref_law, cmap, SimBudget(50, 3000, 9, parallelism=4)).samples)
    assert np.unique(a1).size > 10
    assert not np.array_equal(a1, simulate_rwcre(ref_law, cmap, SimBudget(50, 3000, master_seed=10)).samples)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 60), min_size=1, max_size=12), st.integers(0, 2**32))
def test_piece_matrix_rows_sum_to_endpoints(pieces, seed):
    from coolwalk.env import make_beta_env
    law = make_beta_env(1.5, 1.0)
    n = sum(pieces)
    b = SimBudget(5, n, master_seed=seed)
    mat = simulate_pieces(law, Explicit(tuple(pieces)), b)
    assert mat.shape == (5, len(pieces))
    assert np.array_equal(mat.sum(axis=1), simulate_rwcre(law, Explicit(tuple(pieces)), b).samples)
    assert np.all((mat - np.array(pieces)) % 2 == 0) and np.all(np.abs(mat) <= np.array(pieces))


def test_mean_and_variance_additivity(ref_law):
    cmap = Explicit((400, 900, 1600))
    n = 2900
    mat = simulate_pieces(ref_law, cmap, SimBudget(6000, n, master_seed=4)).astype(float)
    x = mat.sum(axis=1)
    # per-piece RWRE oracles from independent streams
    ref = [simulate_endpoints(ref_law, T, 6000, 5, key=(i,)).astype(float) for i, T in enumerate((400, 900, 1600))]
    mean_se = math.sqrt(sum(r.var() for r in ref) / 6000)
    assert abs(x.mean() - sum(r.mean() for r in ref)) < 4 * mean_se * math.sqrt(2)
    assert x.var() / sum(r.var() for r in ref) == pytest.approx(1.0, abs=0.25)
    c = np.corrcoef(mat.T)
    assert np.max(np.abs(c[np.triu_indices(3, 1)])) < 4 / math.sqrt(6000)


def test_scaled_view():
    e = Ensemble(np.array([1, 2, 3, 6]), 64)
    v = scaled_view(e)
    assert v.mean() == pytest.approx(0.0, abs=1e-15)
    assert np.std(v, ddof=1) == pytest.approx(1.0)
    assert scaled_view(e, LinearSpeed(0.05), NPowInvS(1.5)) == pytest.approx((np.array([1, 2, 3, 6]) - 3.2) / 16)
    assert scaled_view(e, scaling=PolyBeta(2.0, 0.5)) == pytest.approx((np.array([1, 2, 3, 6]) - 3) / 16)
    with pytest.raises(ValueError):
        scaled_view(Ensemble(np.array([1, 1]), 4))


def test_poly_beta():
    assert poly_beta_exponent(1.0, 1.5) == 0.625
    from coolwalk.env import make_beta_env
    law = make_beta_env(1.5, 1.0)
    pb = poly_beta(law, 1.0, 1.0, 0.64)
    # B^2 = sigma_Z^2 A^{(2-s)/(a+1)} (a+1)^{(a(3-s)+1)/(a+1)} / (a(3-s)+1)
    assert pb.B**2 == pytest.approx(sigma2_from_tc(0.64, 0.2, 1.5) * 2**1.25 / 2.5)
    with pytest.raises(MissingConstant):
        poly_beta(law, 1.0, 1.0, None)


def test_budget_enforced(ref_law, monkeypatch):
    monkeypatch.setenv("COOLWALK_STEP_BUDGET", "999")
    with pytest.raises(BudgetExceeded):
        simulate_rwcre(ref_law, SparseGeometric(2), SimBudget(10, 100))


def test_descriptors_round_trip(ref_law):
    assert centering_from_dict(None) == EmpiricalMean()
    assert centering_from_dict({"kind": "linear_speed", "v": 0.2}) == LinearSpeed(0.2)
    assert scaling_from_dict({"kind": "poly_beta", "B": 1.0, "beta": 0.6}) == PolyBeta(1.0, 0.6)
    assert scaling_from_dict({}) == EmpiricalSD()
    with pytest.raises(ValueError):
        scaling_from_dict({"kind": "mad"})
    law, cmap, b, c, sc = load_experiment({"env": {"s": 1.5, "b": 1}, "cooling": {"kind": "constant"},
                                           "budget": {"replicas": 3, "n": 10},
                                           "scaling": {"kind": "n_pow_inv_s", "s": 1.5}})
    assert law == ref_law and cmap == Polynomial(1, 0) and b.n == 10 and sc == NPowInvS(1.5)


def test_ensemble_csv_and_meta(ref_law):
    e = simulate_rwcre(ref_law, Polynomial(1, 1), SimBudget(3, 10, master_seed=1))
    assert e.to_csv().splitlines()[0] == "replica,x" and len(e.to_csv().splitlines()) == 4
    # tau(3) = 6, so n = 10 is three full pieces plus a partial piece of length 4
    assert e.meta["pieces"] == 4 and e.meta["last_piece"] == 4
