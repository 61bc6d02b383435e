"""Cooling increment sequences and their regularity diagnostics.

A cooling map is a deterministic sequence of integer increments ``T_k >= 1``;
``tau(k) = T_1 + ... + T_k`` are the resampling times of the environment.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np
from numba import njit

INT_LIMIT = 2**62


class CoolingOverflow(OverflowError):
    """Increments or cooling times left the integer range."""


class CoolingError(ValueError):
    pass


# -- selection rules ---------------------------------------------------------

@dataclass(frozen=True)
class Proportional:
    """Component ``i`` receives a fraction ``theta[i]`` of the increments."""

    theta: tuple[float, ...]

    def __post_init__(self) -> None:
        th = tuple(float(t) for t in self.theta)
        if not th or any(t <= 0 for t in th) or sum(th) > 1 + 1e-12:
            raise CoolingError(f"proportional weights must be positive with sum <= 1, got {th}")
        object.__setattr__(self, "theta", th)

    def weights(self, n_components: int) -> np.ndarray:
        th = list(self.theta)
        if len(th) == n_components - 1:
            th.append(1.0 - sum(th))
        if len(th) != n_components:
            raise CoolingError(f"{len(th)} weights for {n_components} components")
        th[-1] += 1.0 - sum(th)
        if th[-1] <= 0:
            raise CoolingError("remainder weight for the last component must be positive")
        return np.array(th)

    def select(self, n: int, n_components: int) -> np.ndarray:
        return _select_proportional(self.weights(n_components), n)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "proportional", "theta": list(self.theta)}


@dataclass(frozen=True)
class PowerSkewed:
    """Component ``i < last`` is selected while ``M_{k-1,i} < theta_i k^gamma_i``."""

    theta: tuple[float, ...]
    exponents: tuple[float, ...]

    def __post_init__(self) -> None:
        th = tuple(float(t) for t in self.theta)
        ex = tuple(float(e) for e in self.exponents)
        if len(th) != len(ex) or any(t <= 0 for t in th) or any(not 0 < e <= 1 for e in ex):
            raise CoolingError("power-skewed rule needs matching positive theta and exponents in (0, 1]")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "exponents", ex)

    def select(self, n: int, n_components: int) -> np.ndarray:
        if len(self.theta) != n_components - 1:
            raise CoolingError("power-skewed rule needs one (theta, exponent) per non-final component")
        return _select_power(np.array(self.theta), np.array(self.exponents), n)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "power_skewed", "theta": list(self.theta), "exponents": list(self.exponents)}


@njit(cache=True)
def _select_proportional(theta, n):
    counts = np.zeros(theta.shape[0], np.int64)
    out = np.empty(n, np.int64)
    for k in range(1, n + 1):
        best = 0
        best_def = -1e300
        for i in range(theta.shape[0]):
            deficit = theta[i] * k - counts[i]
            if deficit > best_def + 1e-12:
                best = i
                best_def = deficit
        counts[best] += 1
        out[k - 1] = best
    return out


@njit(cache=True)
def _select_power(theta, exponents, n):
    m = theta.shape[0]
    counts = np.zeros(m + 1, np.int64)
    out = np.empty(n, np.int64)
    for k in range(1, n + 1):
        pick = m
        for i in range(m):
            if counts[i] < theta[i] * k ** exponents[i]:
                pick = i
                break
        counts[pick] += 1
        out[k - 1] = pick
    return out


# -- maps --------------------------------------------------------------------

class CoolingMap:
    """Base class. Subclasses implement ``_generate(n) -> float64 array``."""

    def _generate(self, n: int) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def values(self, n: int) -> np.ndarray:
        """``T_1..T_n`` as floats; never overflows, used for diagnostics."""
        if n < 0:
            raise CoolingError("n must be >= 0")
        return self._generate(n)

    def to_dict(self) -> dict[str, Any]:  # pragma: no cover - abstract
        raise NotImplementedError


@dataclass(frozen=True)
class Explicit(CoolingMap):
    increments: tuple[int, ...]

    def __post_init__(self) -> None:
        inc = tuple(int(t) for t in self.increments)
        if not inc or any(t < 1 for t in inc):
            raise CoolingError("explicit increments must be integers >= 1")
        object.__setattr__(self, "increments", inc)

    def _generate(self, n: int) -> np.ndarray:
        if n > len(self.increments):
            raise CoolingError(f"explicit map has only {len(self.increments)} increments, {n} requested")
        return np.array(self.increments[:n], dtype=float)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "explicit", "increments": list(self.increments)}


@dataclass(frozen=True)
class Polynomial(CoolingMap):
    """``T_k = max(1, round(A k^a))``; ``a = 0`` gives a constant map."""

    A: float
    a_exp: float

    def __post_init__(self) -> None:
        if not self.A > 0 or not self.a_exp >= 0:
            raise CoolingError("polynomial map needs A > 0 and a >= 0")

    def _generate(self, n: int) -> np.ndarray:
        k = np.arange(1, n + 1, dtype=float)
        return np.maximum(1.0, np.round(self.A * k ** self.a_exp))

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "polynomial", "A": self.A, "a": self.a_exp}


@dataclass(frozen=True)
class SparseGeometric(CoolingMap):
    """``T_{2^j} = floor(r^j)`` for ``j >= 1``, all other increments equal 1."""

    r: float

    def __post_init__(self) -> None:
        if not self.r > 1:
            raise CoolingError("sparse geometric map needs r > 1")

    def _generate(self, n: int) -> np.ndarray:
        out = np.ones(n)
        j = 1
        while 2**j <= n:
            out[2**j - 1] = max(1.0, math.floor(self.r ** j))
            j += 1
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "sparse_geometric", "r": self.r}


def dyadic_level(j: int) -> int:
    """``n_j = 2^(2^j)``."""
    return 2 ** (2**j)


@dataclass(frozen=True)
class DyadicExotic(CoolingMap):
    """``T_k = ceil(k n_j^((2-s)/(s-1)))`` for ``n_{j-1} < k <= n_j``, ``n_j = 2^(2^j)``."""

    s: float

    def __post_init__(self) -> None:
        if not 1 < self.s < 2:
            raise CoolingError("dyadic exotic map needs s in (1, 2)")

    def _generate(self, n: int) -> np.ndarray:
        e = (2.0 - self.s) / (self.s - 1.0)
        out = np.empty(n)
        lo, j = 0, 0
        while lo < n:
            nj = dyadic_level(j)
            hi = min(nj, n)
            k = np.arange(lo + 1, hi + 1, dtype=float)
            out[lo:hi] = np.ceil(k * float(nj) ** e)
            lo, j = nj, j + 1
        return out

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "dyadic_exotic", "s": self.s}


@dataclass(frozen=True)
class Interweave(CoolingMap):
    """``T_k = T^{(sigma(k))}_{M_{k, sigma(k)}}`` with ``M`` counting past selections."""

    components: tuple[CoolingMap, ...]
    selection: Proportional | PowerSkewed

    def __post_init__(self) -> None:
        object.__setattr__(self, "components", tuple(self.components))
        if len(self.components) < 1:
            raise CoolingError("interweave needs at least one component")

    def selection_sequence(self, n: int) -> np.ndarray:
        return self.selection.select(n, len(self.components))

    def counts(self, n: int) -> np.ndarray:
        """``M_{n,i}`` for each component."""
        return np.bincount(self.selection_sequence(n), minlength=len(self.components))

    def _generate(self, n: int) -> np.ndarray:
        sigma = self.selection_sequence(n)
        out = np.empty(n)
        for i, comp in enumerate(self.components):
            mask = sigma == i
            out[mask] = comp.values(int(mask.sum()))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": "interweave",
            "components": [c.to_dict() for c in self.components],
            "selection": self.selection.to_dict(),
        }


def map_from_dict(d: dict[str, Any], path: str = "cooling") -> CoolingMap:
    """Parse a JSON map descriptor; errors name the offending field path."""
    if not isinstance(d, dict):
        raise CoolingError(f"{path}: expected an object")
    kind = d.get("kind")
    try:
        if kind == "explicit":
            return Explicit(tuple(d["increments"]))
        if kind == "polynomial":
            return Polynomial(float(d["A"]), float(d["a"]))
        if kind == "constant":
            return Polynomial(float(d.get("T", 1)), 0.0)
        if kind == "sparse_geometric":
            return SparseGeometric(float(d["r"]))
        if kind == "dyadic_exotic":
            return DyadicExotic(float(d["s"]))
        if kind == "interweave":
            comps = tuple(map_from_dict(c, f"{path}.components[{i}]") for i, c in enumerate(d["components"]))
            sel = d["selection"]
            skind = sel.get("kind")
            if skind == "proportional":
                rule: Proportional | PowerSkewed = Proportional(tuple(sel["theta"]))
            elif skind == "power_skewed":
                rule = PowerSkewed(tuple(sel["theta"]), tuple(sel["exponents"]))
            else:
                raise CoolingError(f"{path}.selection.kind: unknown selection {skind!r}")
            return Interweave(comps, rule)
    except KeyError as exc:
        raise CoolingError(f"{path}.{exc.args[0]}: missing field") from None
    except CoolingError as exc:
        if str(exc).startswith(path):
            raise
        raise CoolingError(f"{path}: {exc}") from None
    raise CoolingError(f"{path}.kind: unknown cooling kind {kind!r}")


# -- prefixes ----------------------------------------------------------------

@dataclass(frozen=True)
class CoolingPrefix:
    """Increments ``T_1..T_n`` and cooling times ``tau[0..n]`` (``tau[0] = 0``)."""

    increments: np.ndarray
    tau: np.ndarray

    @property
    def n(self) -> int:
        return int(self.increments.shape[0])

    @property
    def tau_n(self) -> int:
        return int(self.tau[-1])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["k", "T_k", "tau_k"])
        for k in range(1, self.n + 1):
            w.writerow([k, int(self.increments[k - 1]), int(self.tau[k])])
        return buf.getvalue()


def _to_int(values: np.ndarray) -> np.ndarray:
    if values.size and (values.max() >= INT_LIMIT or values.sum() >= INT_LIMIT):
        raise CoolingOverflow("cooling times exceed the 62-bit integer budget")
    return values.astype(np.int64)


def increments(cmap: CoolingMap, n: int) -> CoolingPrefix:
    if n < 1:
        raise CoolingError("n must be >= 1")
    T = _to_int(cmap.values(n))
    tau = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(T, out=tau[1:])
    return CoolingPrefix(T, tau)


def prefix_covering(cmap: CoolingMap, m: int) -> CoolingPrefix:
    """Shortest power-of-two prefix with ``tau_n >= m``."""
    if isinstance(cmap, Explicit):
        prefix = increments(cmap, len(cmap.increments))
        if prefix.tau_n < m:
            raise CoolingError(f"explicit map covers only {prefix.tau_n} steps, {m} requested")
        return prefix
    n = 1
    while True:
        prefix = increments(cmap, n)
        if prefix.tau_n >= m:
            return prefix
        n *= 2


def locate(prefix: CoolingPrefix, m: int) -> tuple[int, int]:
    """``(ell_m, Tbar_m)`` with ``tau(ell) <= m < tau(ell + 1)``."""
    if not 0 <= m <= prefix.tau_n:
        raise CoolingError(f"time {m} outside [0, {prefix.tau_n}]")
    ell = int(np.searchsorted(prefix.tau, m, side="right")) - 1
    return ell, int(m - prefix.tau[ell])


def pieces_up_to(cmap: CoolingMap, m: int) -> np.ndarray:
    """Walk lengths of the pieces making up global time ``m``: full pieces then the partial one."""
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    prefix = prefix_covering(cmap, m)
    ell, tbar = locate(prefix, m)
    pieces = prefix.increments[:ell]
    if tbar > 0:
        pieces = np.append(pieces, tbar)
    return np.ascontiguousarray(pieces, dtype=np.int64)


# -- empirical g and condition diagnostics ------------------------------------

def empirical_g(values: CoolingPrefix | np.ndarray, x_grid: Iterable[float], s: float) -> np.ndarray:
    """Mass fraction ``sum T_k 1{T_k < x tau^(1/s)} / tau`` for each ``x``."""
    T = values.increments if isinstance(values, CoolingPrefix) else np.asarray(values)
    if T.size == 0:
        raise CoolingError("empty prefix")
    T = np.sort(T.astype(float))
    cs = np.concatenate([[0.0], np.cumsum(T)])
    tau = cs[-1]
    x = np.asarray(list(x_grid), dtype=float)
    idx = np.searchsorted(T, x * tau ** (1.0 / s), side="left")
    return cs[idx] / tau


def critical_K(A: float, s: float) -> float:
    """Scale ``K`` of ``g(x) = min(1, (x/K)^s)`` for ``T_k ~ A k^(1/(s-1))``."""
    return A ** ((s - 1.0) / s) * (s / (s - 1.0)) ** (1.0 / s)


def _slope(n: np.ndarray, y: np.ndarray) -> float:
    ok = y > 0
    if ok.sum() < 2:
        return float("-inf")
    return float(np.polyfit(np.log(n[ok]), np.log(y[ok]), 1)[0])


VERDICTS = ("GaussianCondition", "S1Condition", "S2Condition", "None")


@dataclass
class ConditionReport:
    n_grid: list[int]
    s: float
    G: list[float]
    S1a: list[float]
    S1b: dict[int, list[float]]
    S2: list[float]
    g_probe: list[list[float]]
    x_probe: list[float]
    slopes: dict[str, float]
    verdict: str
    g_class: str
    deadband: float = 0.05
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["S1b"] = {str(m): v for m, v in self.S1b.items()}
        return d


def check_conditions(cmap: CoolingMap, n_grid: Sequence[int], s: float,
                     m_values: Sequence[int] = (2, 16), deadband: float = 0.05,
                     x_probe: Sequence[float] = (0.5, 1.0, 2.0, 4.0, 8.0)) -> ConditionReport:
    """Finite-n diagnostics for the Gaussian, (S1) and (S2) conditions.

    Verdicts come from log-log trend slopes; slopes inside ``+-deadband`` count
    as flat. Gaussian is tested first, then (S1), then (S2).
    """
    n_grid = sorted(int(n) for n in n_grid)
    if len(n_grid) < 2 or n_grid[0] < 1:
        raise CoolingError("need an increasing grid of at least two positive n")
    T = cmap.values(n_grid[-1])
    run_max = np.maximum.accumulate(T)
    cs_T = np.cumsum(T)
    cs_var = np.cumsum(T ** (3.0 - s))
    root = T ** (1.0 / s)
    cs_root = np.cumsum(root)
    logT = np.log(T)
    s2_term = np.maximum.accumulate(T * logT ** (4.0 * s))
    idx = np.array(n_grid) - 1
    tau = cs_T[idx]
    G = run_max[idx] / np.sqrt(cs_var[idx])
    S1a = cs_root[idx] / tau ** (1.0 / s)
    S1b = {int(m): (np.cumsum(np.where(T < m, root, 0.0))[idx] / tau ** (1.0 / s)) for m in m_values}
    S2 = s2_term[idx] / tau
    g_probe = np.array([empirical_g(T[:n], x_probe, s) for n in n_grid])

    ns = np.array(n_grid, dtype=float)
    slopes = {"G": _slope(ns, G), "S1a": _slope(ns, S1a), "S2": _slope(ns, S2)}
    for m, vals in S1b.items():
        slopes[f"S1b_{m}"] = _slope(ns, vals)
    g_top = g_probe[:, -1]
    slopes["g_probe"] = _slope(ns, g_top)

    if slopes["G"] < -deadband:
        verdict = "GaussianCondition"
    elif slopes["S1a"] <= deadband and all(slopes[f"S1b_{m}"] < -deadband for m in S1b):
        verdict = "S1Condition"
    elif slopes["S2"] < -deadband:
        verdict = "S2Condition"
    else:
        verdict = "None"

    last = g_probe[-1]
    if slopes["g_probe"] < -deadband or last.max() < 0.05:
        g_class = "zero"
    elif last.min() > 0.95:
        g_class = "one"
    else:
        g_class = "nontrivial"

    return ConditionReport(
        n_grid=n_grid, s=s, G=G.tolist(), S1a=S1a.tolist(),
        S1b={m: v.tolist() for m, v in S1b.items()}, S2=S2.tolist(),
        g_probe=g_probe.tolist(), x_probe=list(x_probe), slopes=slopes,
        verdict=verdict, g_class=g_class, deadband=deadband,
    )


# -- finite interweavings of critical maps -----------------------------------

def finmix_parameters(pieces: Sequence[tuple[float, float]], s: float, v_mu: float) -> tuple[np.ndarray, np.ndarray]:
    """Selection weights and polynomial prefactors realising ``a(x) = sum (g_i x + h_i)_+``."""
    g = np.array([p[0] for p in pieces], dtype=float)
    h = np.array([p[1] for p in pieces], dtype=float)
    if g.size == 0 or np.any(g <= 0) or np.any(h <= 0) or abs(h.sum() - 1.0) > 1e-9:
        raise CoolingError("pieces need g_i > 0, h_i > 0 and sum h_i = 1")
    theta = g / g.sum()
    e = s / (s - 1.0)
    A = ((s - 1.0) / s) ** (1.0 / (s - 1.0)) * h / (v_mu ** e * g ** e)
    return theta, A


def finmix_map(pieces: Sequence[tuple[float, float]], s: float, v_mu: float) -> CoolingMap:
    theta, A = finmix_parameters(pieces, s, v_mu)
    comps = tuple(Polynomial(float(Ai), 1.0 / (s - 1.0)) for Ai in A)
    if len(comps) == 1:
        return comps[0]
    return Interweave(comps, Proportional(tuple(theta.tolist())))
