"""Beta environment laws in the stable regime.

A site probability ``omega ~ Beta(a, b)`` has odds ratio ``rho = (1 - omega) / omega``
whose moments are Gamma ratios, ``<rho^t> = G(a-t) G(b+t) / (G(a) G(b))``.
Choosing ``a = s + b`` makes ``<rho^s> = 1`` exactly, so ``s`` is an input.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import integrate, optimize, special


class DomainError(ValueError):
    """Parameter outside the admissible range."""


@dataclass(frozen=True)
class EnvironmentLaw:
    """s-canonical Beta law for the site probabilities.

    Only ``s`` and ``b`` are stored; everything else is derived.
    """

    s: float
    b: float
    family: str = field(default="beta", repr=False)

    def __post_init__(self) -> None:
        if self.family != "beta":
            raise DomainError(f"unknown environment family {self.family!r}")
        if not (1.0 < self.s < 2.0):
            raise DomainError(f"s must lie in (1, 2), got {self.s}")
        if not self.b > 0.0:
            raise DomainError(f"b must be positive, got {self.b}")

    @property
    def a(self) -> float:
        return self.s + self.b

    @property
    def mean_rho(self) -> float:
        return self.b / (self.a - 1.0)

    @property
    def speed(self) -> float:
        return (self.s - 1.0) / (self.s - 1.0 + 2.0 * self.b)

    @property
    def mean_omega(self) -> float:
        return self.a / (self.a + self.b)

    def kappa(self, t: float | np.ndarray) -> float | np.ndarray:
        """``t -> <rho^t>`` in closed form, defined for ``-b < t < a``."""
        t_arr = np.asarray(t, dtype=float)
        if np.any(t_arr <= -self.b) or np.any(t_arr >= self.a):
            raise DomainError(f"kappa defined only on (-{self.b}, {self.a})")
        out = np.exp(
            special.gammaln(self.a - t_arr)
            + special.gammaln(self.b + t_arr)
            - special.gammaln(self.a)
            - special.gammaln(self.b)
        )
        return float(out) if np.ndim(t) == 0 else out

    def mean_log_rho(self) -> float:
        return float(special.digamma(self.b) - special.digamma(self.a))

    def sample_omega(self, rng: np.random.Generator, size: int | None = None):
        return rng.beta(self.a, self.b, size)

    def to_dict(self) -> dict[str, Any]:
        return {"family": "beta", "s": self.s, "b": self.b}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "EnvironmentLaw":
        # derived fields in the file are ignored on purpose
        family = data.get("family", "beta")
        if family != "beta":
            raise DomainError(f"unknown environment family {family!r}")
        try:
            return cls(s=float(data["s"]), b=float(data["b"]))
        except KeyError as exc:
            raise DomainError(f"environment descriptor missing field {exc.args[0]!r}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentLaw":
        return cls.from_dict(json.loads(text))


def make_beta_env(s: float, b: float) -> EnvironmentLaw:
    return EnvironmentLaw(s=float(s), b=float(b))


def sample_omega(law: EnvironmentLaw, rng: np.random.Generator) -> float:
    return float(rng.beta(law.a, law.b))


def env_constants(law: EnvironmentLaw) -> dict[str, Any]:
    return {
        "s": law.s,
        "v_mu": law.speed,
        "mean_rho": law.mean_rho,
        "kappa": law.kappa,
    }


# -- quadrature cross-checks -------------------------------------------------
# QAWS handles the algebraic endpoint singularities of the Beta density directly.

_QUAD_TOL = 1e-10


def rho_moment_quad(law: EnvironmentLaw, t: float) -> float:
    """``<rho^t>`` by adaptive quadrature over omega in (0, 1)."""
    if not (-law.b < t < law.a):
        raise DomainError(f"moment of order {t} diverges")
    log_beta = special.betaln(law.a, law.b)
    val, _ = integrate.quad(
        lambda w: math.exp(-log_beta),
        0.0,
        1.0,
        weight="alg",
        wvar=(law.a - t - 1.0, law.b + t - 1.0),
        epsabs=_QUAD_TOL,
        epsrel=1e-12,
        limit=200,
    )
    return val


def mean_log_rho_quad(law: EnvironmentLaw) -> float:
    """``<log rho>`` by quadrature, ``E log(1-w) - E log w``."""
    norm = math.exp(-special.betaln(law.a, law.b))
    wvar = (law.a - 1.0, law.b - 1.0)
    kw = dict(epsabs=_QUAD_TOL, epsrel=1e-12, limit=200)
    log_1mw, _ = integrate.quad(lambda w: norm, 0.0, 1.0, weight="alg-logb", wvar=wvar, **kw)
    log_w, _ = integrate.quad(lambda w: norm, 0.0, 1.0, weight="alg-loga", wvar=wvar, **kw)
    return log_1mw - log_w


def mean_rho_quad(law: EnvironmentLaw) -> float:
    return rho_moment_quad(law, 1.0)


def kappa_root(law: EnvironmentLaw, use_quadrature: bool = False) -> float:
    """Nonzero root of ``<rho^t> = 1`` located by bisection.

    ``kappa`` is strictly convex with ``kappa(0) = 1``, so the root sits to the
    right of the minimiser.
    """
    kappa = (lambda t: rho_moment_quad(law, t)) if use_quadrature else law.kappa
    upper = law.a - 1e-9
    res = optimize.minimize_scalar(kappa, bounds=(1e-9, upper), method="bounded",
                                   options={"xatol": 1e-12})
    t_min = float(res.x)
    # kappa blows up towards a, so the bracket [t_min, upper] changes sign
    return float(optimize.bisect(lambda t: kappa(t) - 1.0, t_min, upper, xtol=1e-13, maxiter=500))
