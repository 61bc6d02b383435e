"""Monte Carlo toolkit for random walks in cooling random environments."""
from __future__ import annotations

__version__ = "0.1.0"

from .budget import BudgetExceeded, SimBudget
from .env import DomainError, EnvironmentLaw, make_beta_env

__all__ = ["BudgetExceeded", "DomainError", "EnvironmentLaw", "SimBudget", "make_beta_env", "__version__"]
