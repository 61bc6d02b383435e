from __future__ import annotations

import numpy as np
import pytest

from coolwalk.budget import STEP_BUDGET_ENV, BudgetExceeded, SimBudget, step_budget
from coolwalk.streams import map_replicas, stream


def test_budget_cap_from_environment(monkeypatch):
    monkeypatch.setenv(STEP_BUDGET_ENV, "1000")
    assert step_budget() == 1000
    SimBudget(replicas=10, n=100).check()
    with pytest.raises(BudgetExceeded):
        SimBudget(replicas=11, n=100).check()


def test_budget_counts_grid_steps():
    assert SimBudget(replicas=3, n=10, n_grid=(4, 8)).total_steps() == 66


def test_budget_round_trip():
    b = SimBudget(replicas=7, n=9, master_seed=2**63, parallelism=2, n_grid=(1, 2))
    assert SimBudget.from_dict(b.to_dict()) == b


@pytest.mark.parametrize("kw", [{"replicas": 0}, {"replicas": 1, "n": -1}, {"replicas": 1, "master_seed": 2**64}])
def test_budget_validation(kw):
    with pytest.raises(ValueError):
        SimBudget(**kw)


def test_streams_are_keyed():
    a = stream(3, 1, 2).random(4)
    assert np.array_equal(a, stream(3, 1, 2).random(4))
    assert not np.array_equal(a, stream(3, 1, 3).random(4))
    assert not np.array_equal(a, stream(4, 1, 2).random(4))
    with pytest.raises(ValueError):
        stream(-1)


def test_map_replicas_independent_of_threads():
    work = lambda rng, _: int(rng.integers(0, 2**40))  # noqa: E731
    one = map_replicas(work, 50, 9, key=(1,), threads=1)
    four = map_replicas(work, 50, 9, key=(1,), threads=4)
    assert np.array_equal(one, four)
    assert one[7] == int(stream(9, 1, 7).integers(0, 2**40))
