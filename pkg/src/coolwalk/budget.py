"""Simulation budgets and the global step cap."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Any

STEP_BUDGET_ENV = "COOLWALK_STEP_BUDGET"
DEFAULT_STEP_BUDGET = 10**12


class BudgetExceeded(RuntimeError):
    pass


def step_budget() -> int:
    raw = os.environ.get(STEP_BUDGET_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_STEP_BUDGET
    return int(float(raw))


@dataclass(frozen=True)
class SimBudget:
    """Replica count, global time ``n`` and seeding for one experiment.

    ``n_grid`` is only used by constant estimation.
    """

    replicas: int
    n: int = 0
    master_seed: int = 0
    parallelism: int = 1
    n_grid: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if self.n < 0:
            raise ValueError("n must be >= 0")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 bits")
        object.__setattr__(self, "n_grid", tuple(int(x) for x in self.n_grid))

    def total_steps(self) -> int:
        return self.replicas * (self.n + sum(self.n_grid))

    def check(self, cap: int | None = None) -> None:
        cap = step_budget() if cap is None else cap
        if self.total_steps() > cap:
            raise BudgetExceeded(
                f"{self.total_steps()} walk steps requested, budget is {cap} "
                f"(set {STEP_BUDGET_ENV} to raise it)")

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "replicas": self.replicas, "n": self.n,
            "master_seed": self.master_seed, "parallelism": self.parallelism,
        }
        if self.n_grid:
            d["n_grid"] = list(self.n_grid)
        return d

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "SimBudget":
        return cls(
            replicas=int(d["replicas"]), n=int(d.get("n", 0)),
            master_seed=int(d.get("master_seed", 0)), parallelism=int(d.get("parallelism", 1)),
            n_grid=tuple(d.get("n_grid", ())),
        )
