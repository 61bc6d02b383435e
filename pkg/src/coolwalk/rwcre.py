"""Random walk in a cooling random environment.

``X_n`` is the sum of independent RWRE endpoints, one per cooling piece, each
piece walking in its own fresh environment for ``T_k`` steps (the last piece
for the partial time ``Tbar_n``).
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Union

import numpy as np

from . import _kernels
from .budget import SimBudget
from .cooling import CoolingMap, map_from_dict, pieces_up_to
from .env import EnvironmentLaw
from .rwre import sigma2_from_tc
from .streams import map_replicas, stream


class MissingConstant(ValueError):
    pass


# -- centering and scaling ---------------------------------------------------

@dataclass(frozen=True)
class EmpiricalMean:
    pass


@dataclass(frozen=True)
class LinearSpeed:
    v: float


@dataclass(frozen=True)
class NPowInvS:
    s: float


@dataclass(frozen=True)
class PolyBeta:
    B: float
    beta: float

    def __post_init__(self) -> None:
        if not self.B > 0:
            raise ValueError("PolyBeta needs B > 0")


@dataclass(frozen=True)
class EmpiricalSD:
    pass


Centering = Union[EmpiricalMean, LinearSpeed]
Scaling = Union[NPowInvS, PolyBeta, EmpiricalSD]


def poly_beta_exponent(a_exp: float, s: float) -> float:
    return (a_exp * (3.0 - s) + 1.0) / (2.0 * (a_exp + 1.0))


def poly_beta(law: EnvironmentLaw, A: float, a_exp: float, tc_hat: float | None) -> PolyBeta:
    """Gaussian-regime normalisation ``B n^beta`` for ``T_k ~ A k^a``."""
    if tc_hat is None:
        raise MissingConstant("PolyBeta scaling needs an estimate of tc")
    s, v = law.s, law.speed
    e = a_exp * (3.0 - s) + 1.0
    B2 = (sigma2_from_tc(tc_hat, v, s) * A ** ((2.0 - s) / (a_exp + 1.0))
          * (a_exp + 1.0) ** (e / (a_exp + 1.0)) / e)
    return PolyBeta(math.sqrt(B2), poly_beta_exponent(a_exp, s))


def centering_to_dict(c: Centering) -> dict[str, Any]:
    if isinstance(c, LinearSpeed):
        return {"kind": "linear_speed", "v": c.v}
    return {"kind": "empirical_mean"}


def scaling_to_dict(sc: Scaling) -> dict[str, Any]:
    if isinstance(sc, NPowInvS):
        return {"kind": "n_pow_inv_s", "s": sc.s}
    if isinstance(sc, PolyBeta):
        return {"kind": "poly_beta", "B": sc.B, "beta": sc.beta}
    return {"kind": "empirical_sd"}


# -- ensembles ---------------------------------------------------------------

@dataclass(frozen=True)
class Ensemble:
    samples: np.ndarray
    n: int
    centering: Centering = EmpiricalMean()
    scaling: Scaling = EmpiricalSD()
    meta: dict[str, Any] = field(default_factory=dict, compare=False)

    def center(self, centering: Centering | None = None) -> float:
        c = self.centering if centering is None else centering
        if isinstance(c, LinearSpeed):
            return self.n * c.v
        return float(np.mean(self.samples))

    def scale(self, scaling: Scaling | None = None) -> float:
        sc = self.scaling if scaling is None else scaling
        if isinstance(sc, NPowInvS):
            val = self.n ** (1.0 / sc.s)
        elif isinstance(sc, PolyBeta):
            val = sc.B * self.n ** sc.beta
        else:
            val = float(np.std(self.samples, ddof=1))
        if not val > 0:
            raise ValueError("scaling value must be positive")
        return val

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["replica", "x"])
        for i, x in enumerate(self.samples.tolist()):
            w.writerow([i, x])
        return buf.getvalue()


def scaled_view(e: Ensemble, centering: Centering | None = None, scaling: Scaling | None = None) -> np.ndarray:
    """``(x - center) / scale`` per sample."""
    x = e.samples.astype(float)
    return (x - e.center(centering)) / e.scale(scaling)


def _buffer_for(pieces: np.ndarray) -> np.ndarray:
    longest = int(pieces.max()) if pieces.size else 0
    return np.empty(2 * longest + 1)


def simulate_rwcre(law: EnvironmentLaw, cmap: CoolingMap, budget: SimBudget,
                   centering: Centering = EmpiricalMean(), scaling: Scaling = EmpiricalSD(),
                   key: tuple[int, ...] = ()) -> Ensemble:
    """``X_n`` for ``budget.replicas`` independent replicas; replica ``i`` uses stream ``(seed, *key, i)``."""
    budget.check()
    pieces = pieces_up_to(cmap, budget.n)
    a, b = law.a, law.b
    no_store = np.empty(0, dtype=np.int64)
    samples = map_replicas(
        lambda rng, buf: _kernels.rwcre_endpoint(rng, pieces, a, b, buf, no_store),
        budget.replicas, budget.master_seed, key=key, threads=budget.parallelism,
        make_scratch=lambda: _buffer_for(pieces),
    )
    meta = {"pieces": int(pieces.size), "last_piece": int(pieces[-1]) if pieces.size else 0,
            "budget": budget.to_dict(), "cooling": cmap.to_dict(), "env": law.to_dict()}
    return Ensemble(samples, budget.n, centering, scaling, meta)


def simulate_pieces(law: EnvironmentLaw, cmap: CoolingMap, budget: SimBudget,
                    key: tuple[int, ...] = ()) -> np.ndarray:
    """``(replicas, pieces)`` matrix of per-piece endpoints; row sums equal ``simulate_rwcre``."""
    budget.check()
    pieces = pieces_up_to(cmap, budget.n)
    out = np.empty((budget.replicas, pieces.size), dtype=np.int64)
    buf = _buffer_for(pieces)
    for i in range(budget.replicas):
        _kernels.rwcre_endpoint(stream(budget.master_seed, *key, i), pieces, law.a, law.b, buf, out[i])
    return out


def experiment_descriptor(law: EnvironmentLaw, cmap: CoolingMap, budget: SimBudget,
                          centering: Centering, scaling: Scaling) -> dict[str, Any]:
    return {
        "env": law.to_dict(), "cooling": cmap.to_dict(), "budget": budget.to_dict(),
        "centering": centering_to_dict(centering), "scaling": scaling_to_dict(scaling),
    }


def centering_from_dict(d: dict[str, Any] | None) -> Centering:
    if not d or d.get("kind", "empirical_mean") == "empirical_mean":
        return EmpiricalMean()
    if d["kind"] == "linear_speed":
        return LinearSpeed(float(d["v"]))
    raise ValueError(f"centering.kind: unknown centering {d['kind']!r}")


def scaling_from_dict(d: dict[str, Any] | None) -> Scaling:
    if not d or d.get("kind", "empirical_sd") == "empirical_sd":
        return EmpiricalSD()
    kind = d["kind"]
    if kind == "n_pow_inv_s":
        return NPowInvS(float(d["s"]))
    if kind == "poly_beta":
        return PolyBeta(float(d["B"]), float(d["beta"]))
    raise ValueError(f"scaling.kind: unknown scaling {kind!r}")


def load_experiment(d: dict[str, Any]) -> tuple[EnvironmentLaw, CoolingMap, SimBudget, Centering, Scaling]:
    return (EnvironmentLaw.from_dict(d["env"]), map_from_dict(d["cooling"]), SimBudget.from_dict(d["budget"]),
            centering_from_dict(d.get("centering")), scaling_from_dict(d.get("scaling")))
