"""Gaussian, totally left-skewed stable and tempered stable limit laws.

Every law is mean zero. Tempered laws are given by a Levy density on the
negative half line, ``lambda(-t) = t^(-s-1) h(t)`` for ``t > 0``, where the
profile ``h`` is stored piecewise as ``alpha + beta t + gamma t log t`` on a
finite knot grid. All supported profiles vanish beyond the last knot.
"""
from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass
from typing import Any, Sequence, Union

import numpy as np
from numba import njit
from scipy import special
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, isotonic_regression

from .env import DomainError
from .streams import RandomStream


class LawError(DomainError):
    pass


class QuadratureError(RuntimeError):
    pass


class InversionError(RuntimeError):
    pass


# -- Levy density shapes -----------------------------------------------------

@dataclass(frozen=True)
class LinearRamp:
    """``a(x) = (1 + x/r)_+``."""

    r: float

    def __post_init__(self) -> None:
        if not self.r > 0:
            raise LawError("ramp width r must be positive")


@dataclass(frozen=True)
class PiecewiseLinear:
    """``a(x) = sum_i (g_i x + h_i)_+`` with ``sum h_i = 1``."""

    pieces: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        pieces = tuple((float(g), float(h)) for g, h in self.pieces)
        if not pieces or any(g <= 0 or h <= 0 for g, h in pieces):
            raise LawError("pieces need g_i > 0 and h_i > 0")
        if abs(sum(h for _, h in pieces) - 1.0) > 1e-9:
            raise LawError("the h_i must sum to 1")
        object.__setattr__(self, "pieces", pieces)


@dataclass(frozen=True)
class FromG:
    """Levy density generated by a tabulated g-function (piecewise-linear interpolation)."""

    x: tuple[float, ...]
    g: tuple[float, ...]
    tc: float
    v_mu: float
    s: float

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=float)
        g = np.asarray(self.g, dtype=float)
        if x.ndim != 1 or x.shape != g.shape or x.size < 2:
            raise LawError("g table needs matching x and g arrays with at least two points")
        if np.any(np.diff(x) <= 0) or x[0] < 0:
            raise LawError("g table x grid must be strictly increasing and non-negative")
        if np.any(np.diff(g) < -1e-12):
            raise LawError("g must be non-decreasing")
        if g[0] < 0 or g[-1] > 1 + 1e-12:
            raise LawError("g must take values in [0, 1]")
        if x[0] == 0 and abs(g[0]) > 1e-12:
            raise LawError("g(0) must be 0")
        if abs(g[-1] - g[-2]) > 1e-3:
            raise LawError("g table is not flat at its right end; g(inf) is undetermined")
        if not (self.tc > 0 and self.v_mu > 0 and 1 < self.s < 2):
            raise LawError("FromG needs tc > 0, v_mu > 0 and s in (1, 2)")
        object.__setattr__(self, "x", tuple(x.tolist()))
        object.__setattr__(self, "g", tuple(g.tolist()))

    @property
    def g_inf(self) -> float:
        return self.g[-1]


AShape = Union[LinearRamp, PiecewiseLinear, FromG]


@dataclass(frozen=True)
class LambdaDescriptor:
    """``lambda(x) = c |x|^(-s-1) a(x)`` on ``x < 0``."""

    c: float
    s: float
    a_fn: AShape

    def __post_init__(self) -> None:
        if not 1 < self.s < 2:
            raise LawError("s must lie in (1, 2)")
        if isinstance(self.a_fn, FromG):
            if abs(self.a_fn.s - self.s) > 1e-12:
                raise LawError("FromG s differs from the descriptor s")
            want = self.a_fn.tc * self.a_fn.v_mu * self.s * self.a_fn.g_inf
            if abs(self.c - want) > 1e-9 * max(1.0, want):
                raise LawError(f"FromG descriptor needs c = tc v s g(inf) = {want}")
        elif not self.c > 0:
            raise LawError("c must be positive")

    def profile(self) -> "Profile":
        return _profile(self)

    def lam(self, x: np.ndarray | float) -> np.ndarray:
        """Levy density at ``x`` (zero for ``x >= 0``)."""
        x = np.asarray(x, dtype=float)
        t = -x
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = self.profile().h(t[pos]) * t[pos] ** (-self.s - 1.0)
        return out

    def a(self, x: np.ndarray | float) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.c == 0:
            return np.zeros_like(x)
        t = np.maximum(-x, 0.0)
        return self.profile().h(t) / self.c


@dataclass(frozen=True)
class Profile:
    """``h(t) = alpha_j + beta_j t + gamma_j t log t`` on ``[knots[j], knots[j+1]]``."""

    s: float
    knots: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray

    @property
    def t_end(self) -> float:
        return float(self.knots[-1])

    def piece(self, t: np.ndarray) -> np.ndarray:
        j = np.searchsorted(self.knots, t, side="right") - 1
        return np.clip(j, 0, self.alpha.size - 1)

    def h(self, t: np.ndarray | float) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        j = self.piece(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            tlog = np.where(t > 0, t * np.log(np.where(t > 0, t, 1.0)), 0.0)
        out = self.alpha[j] + self.beta[j] * t + self.gamma[j] * tlog
        return np.where((t >= 0) & (t <= self.t_end), out, 0.0)

    def _antideriv(self, t: np.ndarray, j: np.ndarray, p: float) -> np.ndarray:
        """Antiderivative of ``t^p h_j(t)``; at ``t = 0`` the limit (finite only for p > -1)."""
        q1, q2 = p + 1.0, p + 2.0
        t = np.asarray(t, dtype=float)
        safe = np.where(t > 0, t, 1.0)
        val = (self.alpha[j] * safe ** q1 / q1 + self.beta[j] * safe ** q2 / q2
               + self.gamma[j] * safe ** q2 * (np.log(safe) / q2 - 1.0 / q2 ** 2))
        if q1 > 0:
            return np.where(t > 0, val, 0.0)
        return np.where(t > 0, val, -np.inf)

    def moment(self, m: float, lo: float, hi: float) -> float:
        """``int_lo^hi t^m lambda(-t) dt``."""
        hi = min(hi, self.t_end)
        if hi <= lo:
            return 0.0
        p = m - self.s - 1.0
        k = self.knots
        total = 0.0
        for j in range(self.alpha.size):
            a, b = max(lo, k[j]), min(hi, k[j + 1])
            if b > a:
                jj = np.array([j])
                total += float(self._antideriv(np.array([b]), jj, p)[0] - self._antideriv(np.array([a]), jj, p)[0])
        return total


def _ramp_profile(c: float, s: float, slopes: np.ndarray, heights: np.ndarray) -> Profile:
    """Profile of ``c sum_i (h_i - g_i t)_+``."""
    ends = np.unique(heights / slopes)
    knots = np.concatenate([[0.0], ends])
    mids = 0.5 * (knots[:-1] + knots[1:])
    active = (heights[None, :] - slopes[None, :] * mids[:, None]) > 0
    alpha = c * (active * heights[None, :]).sum(axis=1)
    beta = -c * (active * slopes[None, :]).sum(axis=1)
    return Profile(s, knots, alpha, beta, np.zeros_like(alpha))


def _from_g_profile(fg: FromG) -> Profile:
    x = np.asarray(fg.x)
    g = np.asarray(fg.g)
    if x[0] > 0:
        x = np.concatenate([[0.0], x])
        g = np.concatenate([[0.0], g])
    s, tc, v = fg.s, fg.tc, fg.v_mu
    g_inf = g[-1]
    q = np.diff(g) / np.diff(x)
    p = g[:-1] - q * x[:-1]
    # R_j = int_{x_j}^inf g(y)/y^2 dy, for j >= 1
    seg = np.zeros(x.size - 1)
    seg[1:] = p[1:] * (1.0 / x[1:-1] - 1.0 / x[2:]) + q[1:] * np.log(x[2:] / x[1:-1])
    R = np.zeros(x.size)
    R[-1] = g_inf / x[-1]
    R[1:-1] = np.cumsum(seg[1:][::-1])[::-1] + R[-1]
    xr = x[1:]
    alpha = tc * v * s * (g_inf - p)
    beta = tc * (-q + (s - 1.0) * (p / xr - q * np.log(v * xr) - R[1:]))
    gamma = tc * (s - 1.0) * q
    flat = (q == 0) & (p == g_inf)
    alpha[flat] = beta[flat] = gamma[flat] = 0.0
    # trim trailing zero pieces so the support ends where g reaches g(inf)
    nz = np.nonzero(~flat)[0]
    last = nz[-1] + 1 if nz.size else 1
    knots = v * x[: last + 1]
    return Profile(s, knots, alpha[:last], beta[:last], gamma[:last])


@functools.lru_cache(maxsize=64)
def _profile(desc: LambdaDescriptor) -> Profile:
    a = desc.a_fn
    if isinstance(a, LinearRamp):
        return _ramp_profile(desc.c, desc.s, np.array([1.0 / a.r]), np.array([1.0]))
    if isinstance(a, PiecewiseLinear):
        g = np.array([pc[0] for pc in a.pieces])
        h = np.array([pc[1] for pc in a.pieces])
        return _ramp_profile(desc.c, desc.s, g, h)
    if isinstance(a, FromG):
        return _from_g_profile(a)
    raise LawError(f"unknown a-function {a!r}")


def lambda_from_g(x: Sequence[float], g: Sequence[float], tc: float, v_mu: float, s: float) -> LambdaDescriptor:
    """Levy density induced by a tabulated g; ``g(inf)`` is the last table value."""
    fg = FromG(tuple(x), tuple(g), tc, v_mu, s)
    return LambdaDescriptor(tc * v_mu * s * fg.g_inf, s, fg)


def profile_values(desc: LambdaDescriptor, t: np.ndarray) -> np.ndarray:
    """``t^(s+1) lambda(-t)``."""
    return desc.profile().h(np.asarray(t, dtype=float))


def matched_stable_b(c: float, s: float) -> float:
    """Stable scale of the ``r -> inf`` limit of a linear-ramp tempered law."""
    return -c * special.gamma(-s) * math.cos(math.pi * s / 2.0)


# -- laws --------------------------------------------------------------------

@dataclass(frozen=True)
class Gaussian:
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0:
            raise LawError("sigma must be positive")


@dataclass(frozen=True)
class Stable:
    """CF ``exp[-b |u|^s (1 + i sgn(u) tan(pi s / 2))]``, totally skewed to the left."""

    s: float
    b: float

    def __post_init__(self) -> None:
        if not 1 < self.s < 2 or not self.b > 0:
            raise LawError("stable law needs s in (1, 2) and b > 0")


@dataclass(frozen=True)
class TemperedStable:
    lam: LambdaDescriptor


@dataclass(frozen=True)
class Mixture:
    """Law of ``a1 N + a2 W + a3 S`` with independent components."""

    a1: float
    a2: float
    a3: float
    w: LambdaDescriptor
    stable: Stable

    def __post_init__(self) -> None:
        coeffs = (self.a1, self.a2, self.a3)
        if any(a < 0 for a in coeffs) or not any(a > 0 for a in coeffs):
            raise LawError("mixture coefficients must be >= 0 and not all zero")


LimitLaw = Union[Gaussian, Stable, TemperedStable, Mixture]


# -- characteristic functions ------------------------------------------------

W_CUT = 30.0
_GL12 = np.polynomial.legendre.leggauss(12)
_GL24 = np.polynomial.legendre.leggauss(24)
_GL16 = np.polynomial.legendre.leggauss(16)
_LAG = np.polynomial.laguerre.laggauss(48)
_LADDER = 2.0 ** -np.arange(0, 21)
_LINEAR = np.arange(1, int(W_CUT) + 1, dtype=float)


def _kernel(w: np.ndarray) -> np.ndarray:
    """``exp(-i w) - 1 + i w`` without cancellation for small ``w``."""
    small = np.abs(w) < 1e-2
    im = w - np.sin(w)
    w2 = w[small]
    im[small] = w2 ** 3 / 6.0 - w2 ** 5 / 120.0 + w2 ** 7 / 5040.0
    return -2.0 * np.sin(0.5 * w) ** 2 + 1j * im


def _h_complex(prof: Profile, t: np.ndarray, j: np.ndarray) -> np.ndarray:
    return prof.alpha[j] + prof.beta[j] * t + prof.gamma[j] * t * np.log(t)


def _exponent_chunk(prof: Profile, u: np.ndarray, order: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    s = prof.s
    knots = prof.knots
    t_end = prof.t_end
    nu = u.size
    t_cut = np.minimum(W_CUT / u, t_end)
    out = np.zeros(nu, dtype=complex)

    # breakpoints in the directly integrated region [0, t_cut]
    cand = np.concatenate([
        _LADDER[None, :] / u[:, None],
        _LINEAR[None, :] / u[:, None],
        np.broadcast_to(knots[1:], (nu, knots.size - 1)),
    ], axis=1)
    cand = np.minimum(cand, t_cut[:, None])
    cand = np.sort(cand, axis=1)
    t_a = cand[:, 0]

    # [0, t_a] via t = t_a sigma^(1/(2-s)), which makes the integrand smooth
    k = 1.0 / (2.0 - s)
    xs, ws = _GL24
    sig = 0.5 * (xs + 1.0)
    tt = t_a[:, None] * sig[None, :] ** k
    jj = prof.piece(tt)
    hh = prof.alpha[jj] + prof.beta[jj] * tt + prof.gamma[jj] * tt * np.log(tt)
    w = u[:, None] * tt
    kw = _kernel(w)
    # kernel / t^2 * h * t^(1-s) dt/dsigma with t^(1-s) dt = k t_a^(2-s) dsigma
    integrand = kw / tt ** 2 * hh * k * t_a[:, None] ** (2.0 - s)
    out += 0.5 * (integrand * ws[None, :]).sum(axis=1)

    # remaining panels
    xn, wn = order
    lo = cand[:, :-1]
    hi = cand[:, 1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    tt = mid[:, :, None] + half[:, :, None] * xn[None, None, :]
    tt = np.maximum(tt, 1e-300)
    jj = prof.piece(tt)
    hh = prof.alpha[jj] + prof.beta[jj] * tt + prof.gamma[jj] * tt * np.log(tt)
    vals = _kernel(u[:, None, None] * tt) * tt ** (-s - 1.0) * hh
    out += (vals * wn[None, None, :] * half[:, :, None]).sum(axis=(1, 2))

    # oscillatory tail [t_cut, t_end] by contour rotation, per profile piece
    far = t_cut < t_end
    if np.any(far):
        uf = u[far]
        tc_f = t_cut[far]
        npieces = prof.alpha.size
        j = np.arange(npieces)
        p = np.maximum(tc_f[:, None], knots[None, :-1])
        q = np.broadcast_to(knots[None, 1:], p.shape)
        active = p < q
        zl, wl = _LAG

        def endpoint(A: np.ndarray) -> np.ndarray:
            # -i e^{-iuA}/u * sum w_k f(A - i z_k / u)
            tz = A[:, :, None] - 1j * zl[None, None, :] / uf[:, None, None]
            jb = np.broadcast_to(j[None, :, None], tz.shape)
            f = tz ** (-s - 1.0) * _h_complex(prof, tz, jb)
            return (-1j * np.exp(-1j * uf[:, None] * A) / uf[:, None]) * (f * wl).sum(axis=2)

        jb2 = np.broadcast_to(j[None, :], p.shape)
        osc = endpoint(p) - endpoint(q)
        nonosc = (-(prof._antideriv(q, jb2, -s - 1.0) - prof._antideriv(p, jb2, -s - 1.0))
                  + 1j * uf[:, None] * (prof._antideriv(q, jb2, -s) - prof._antideriv(p, jb2, -s)))
        out[far] += np.where(active, osc + nonosc, 0.0).sum(axis=1)
    return out


def tempered_exponent(desc: LambdaDescriptor, u: np.ndarray | float, check: bool = False,
                      tol: float = 1e-10) -> np.ndarray:
    """``int_{-inf}^0 (e^{iux} - 1 - iux) lambda(x) dx``.

    With ``check=True`` the panel rule is compared against a refined rule and
    a QuadratureError is raised if they differ by more than ``tol``.
    """
    u = np.asarray(u, dtype=float)
    shape = u.shape
    u = u.ravel()
    out = np.zeros(u.size, dtype=complex)
    if desc.c == 0:
        return out.reshape(shape)
    prof = desc.profile()
    au = np.abs(u)
    nz = np.nonzero(au > 0)[0]
    per = max(1, 2_000_000 // (12 * (prof.knots.size + 60) + 48 * prof.alpha.size))
    for lo in range(0, nz.size, per):
        idx = nz[lo:lo + per]
        val = _exponent_chunk(prof, au[idx], _GL12)
        if check:
            ref = _exponent_chunk(prof, au[idx], _GL24)
            err = np.abs(ref - val)
            bad = err > tol * np.maximum(1.0, np.abs(ref))
            if np.any(bad):
                i = int(np.argmax(err))
                raise QuadratureError(
                    f"tempered exponent not converged at u={au[idx][i]:.6g}: "
                    f"difference {err[i]:.3g} between 12- and 24-point rules")
            val = ref
        out[idx] = np.where(u[idx] > 0, val, np.conj(val))
    return out.reshape(shape)


def cf(law: LimitLaw, u: np.ndarray | float) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if isinstance(law, Gaussian):
        return np.exp(-0.5 * (law.sigma * u) ** 2) + 0j
    if isinstance(law, Stable):
        au = np.abs(u) ** law.s
        return np.exp(-law.b * au * (1.0 + 1j * np.sign(u) * math.tan(math.pi * law.s / 2.0)))
    if isinstance(law, TemperedStable):
        return np.exp(tempered_exponent(law.lam, u))
    if isinstance(law, Mixture):
        out = cf(Gaussian(1.0), law.a1 * u)
        if law.a2 > 0:
            out = out * cf(TemperedStable(law.w), law.a2 * u)
        if law.a3 > 0:
            out = out * cf(law.stable, law.a3 * u)
        return out
    raise LawError(f"unknown law {law!r}")


# -- scales and moments ------------------------------------------------------

def tempered_variance(desc: LambdaDescriptor) -> float:
    if desc.c == 0:
        return 0.0
    prof = desc.profile()
    return prof.moment(2.0, 0.0, prof.t_end)


def variance(law: LimitLaw) -> float:
    """Variance (infinite for laws with a stable component)."""
    if isinstance(law, Gaussian):
        return law.sigma ** 2
    if isinstance(law, Stable):
        return math.inf
    if isinstance(law, TemperedStable):
        return tempered_variance(law.lam)
    if law.a3 > 0:
        return math.inf
    return law.a1 ** 2 + law.a2 ** 2 * tempered_variance(law.w)


def _scale(law: LimitLaw) -> float:
    if isinstance(law, Gaussian):
        return law.sigma
    if isinstance(law, Stable):
        return law.b ** (1.0 / law.s)
    if isinstance(law, TemperedStable):
        return math.sqrt(tempered_variance(law.lam))
    sc = math.sqrt(law.a1 ** 2 + law.a2 ** 2 * tempered_variance(law.w))
    if law.a3 > 0:
        sc += law.a3 * law.stable.b ** (1.0 / law.stable.s)
    return sc


def _heavy_left(law: LimitLaw) -> float | None:
    """Stable index if the law has a power-law left tail."""
    if isinstance(law, Stable):
        return law.s
    if isinstance(law, Mixture) and law.a3 > 0:
        return law.stable.s
    return None


def _is_closed_form(law: LimitLaw) -> bool:
    if isinstance(law, (Gaussian, Stable)):
        return True
    if isinstance(law, Mixture):
        return law.a2 == 0
    return False


# -- CDF by Gil-Pelaez inversion ---------------------------------------------

TABLE_HALF_WIDTH = 40.0
TABLE_STEP = 0.01
DIRECT_LIMIT = 1000.0


def _u_max(law: LimitLaw, scale: float) -> float:
    u = 1.0 / scale
    while abs(cf(law, u)) > 1e-13 or abs(cf(law, 1.5 * u)) > 1e-13:
        u *= 1.5
        if u * scale > 1e6:
            raise InversionError("characteristic function does not decay; cannot invert")
    return u


def _u_nodes(u_max: float, x_max: float, coarse: bool = False) -> tuple[np.ndarray, np.ndarray]:
    width = min(u_max / 64.0, 2.0 / max(x_max, 1e-300))
    if coarse:
        width *= 2.0
    first = min(width, u_max)
    edges = [first * 2.0 ** -np.arange(40, 0, -1), [first]]
    uniform = np.arange(first, u_max, width)[1:]
    edges = np.concatenate([[0.0], *edges, uniform, [u_max]])
    xs, ws = _GL16
    lo, hi = edges[:-1], edges[1:]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * xs[None, :]
    weights = half[:, None] * ws[None, :]
    return nodes.ravel(), weights.ravel()


def _gil_pelaez(x: np.ndarray, nodes: np.ndarray, wphi: tuple[np.ndarray, np.ndarray]) -> np.ndarray:
    wr, wi = wphi
    out = np.empty(x.size)
    step = max(1, 4_000_000 // max(1, nodes.size))
    for lo in range(0, x.size, step):
        xx = x[lo:lo + step, None] * nodes[None, :]
        out[lo:lo + step] = 0.5 - (np.cos(xx) @ wi - np.sin(xx) @ wr) / math.pi
    return out


def _gp_weights(law: LimitLaw, nodes: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    phi = cf(law, nodes)
    return weights * phi.real / nodes, weights * phi.imag / nodes


@dataclass(frozen=True)
class CdfTable:
    x: np.ndarray
    F: np.ndarray
    scale: float
    u_max: float
    interp: PchipInterpolator


def _is_degenerate(law: LimitLaw) -> bool:
    if isinstance(law, TemperedStable):
        return law.lam.c == 0
    if isinstance(law, Mixture):
        return law.a1 == 0 and law.a3 == 0 and (law.a2 == 0 or law.w.c == 0)
    return False


@functools.lru_cache(maxsize=32)
def cdf_table(law: LimitLaw) -> CdfTable:
    """CDF on ``[-40, 40]`` law scales, isotonically projected, with a PCHIP interpolant."""
    scale = _scale(law)
    u_max = _u_max(law, scale)
    x = scale * np.arange(-TABLE_HALF_WIDTH, TABLE_HALF_WIDTH + TABLE_STEP / 2, TABLE_STEP)
    nodes, weights = _u_nodes(u_max, float(np.abs(x).max()))
    F = _gil_pelaez(x, nodes, _gp_weights(law, nodes, weights))
    tol = 1e-7 if _is_closed_form(law) else 1e-5
    cn, cw = _u_nodes(u_max, float(np.abs(x).max()), coarse=True)
    probe = x[::97]
    Fc = _gil_pelaez(probe, cn, _gp_weights(law, cn, cw))
    err = float(np.max(np.abs(Fc - F[::97])))
    if err > tol:
        raise InversionError(f"Gil-Pelaez inversion unstable: refinement changed the CDF by {err:.2e}")
    F = np.clip(isotonic_regression(F).x, 0.0, 1.0)
    return CdfTable(x, F, scale, u_max, PchipInterpolator(x, F, extrapolate=False))


def cdf(law: LimitLaw, x: np.ndarray | float) -> np.ndarray:
    """Distribution function; monotone by construction."""
    x = np.asarray(x, dtype=float)
    shape = x.shape
    x = x.ravel()
    if _is_degenerate(law):
        return (x >= 0).astype(float).reshape(shape)
    tab = cdf_table(law)
    lo, hi = tab.x[0], tab.x[-1]
    out = np.empty(x.size)
    inside = (x >= lo) & (x <= hi)
    out[inside] = tab.interp(x[inside])
    out[x > hi] = 1.0
    left = x < lo
    if np.any(left):
        alpha = _heavy_left(law)
        if alpha is None:
            out[left] = 0.0
        else:
            edge = -DIRECT_LIMIT * tab.scale
            mid = left & (x >= edge)
            if np.any(mid):
                xm = x[mid]
                nodes, weights = _u_nodes(tab.u_max, float(np.abs(xm).max()))
                out[mid] = np.clip(_gil_pelaez(xm, nodes, _gp_weights(law, nodes, weights)), 0.0, tab.F[0])
            far = left & (x < edge)
            if np.any(far):
                F_edge = float(np.clip(_gil_pelaez(np.array([edge]), *_edge_nodes(law, tab, edge)), 0.0, 1.0)[0])
                out[far] = F_edge * (edge / x[far]) ** alpha
    out = np.clip(out, 0.0, 1.0)
    return out.reshape(shape)


def _edge_nodes(law: LimitLaw, tab: CdfTable, edge: float):
    nodes, weights = _u_nodes(tab.u_max, abs(edge))
    return nodes, _gp_weights(law, nodes, weights)


# -- samplers ----------------------------------------------------------------

def _cms_stable(rng: RandomStream, s: float, b: float, size: int) -> np.ndarray:
    """Chambers-Mallows-Stuck with skewness -1, scale b^(1/s)."""
    V = rng.uniform(-math.pi / 2.0, math.pi / 2.0, size)
    W = rng.standard_exponential(size)
    t = -math.tan(math.pi * s / 2.0)
    B = math.atan(t) / s
    S = (1.0 + t * t) ** (1.0 / (2.0 * s))
    X = (S * np.sin(s * (V + B)) / np.cos(V) ** (1.0 / s)
         * (np.cos(V - s * (V + B)) / W) ** ((1.0 - s) / s))
    return b ** (1.0 / s) * X


@njit(cache=True)
def _h_scalar(t, knots, alpha, beta, gamma):
    n = alpha.shape[0]
    j = np.searchsorted(knots, t, side="right") - 1
    if j < 0:
        j = 0
    if j > n - 1:
        j = n - 1
    tl = t * math.log(t) if t > 0 else 0.0
    return alpha[j] + beta[j] * t + gamma[j] * tl


@njit(cache=True)
def _tempered_kernel(gen, size, rate, eps, t_end, s, knots, alpha, beta, gamma, h_max, comp, small_sd, out):
    e_lo = eps ** (-s)
    e_hi = t_end ** (-s)
    for i in range(size):
        n = gen.poisson(rate)
        total = 0.0
        k = 0
        while k < n:
            # truncated Pareto proposal on [eps, t_end], thinned by h / h_max
            t = (e_lo - gen.random() * (e_lo - e_hi)) ** (-1.0 / s)
            if gen.random() * h_max <= _h_scalar(t, knots, alpha, beta, gamma):
                total += t
                k += 1
        out[i] = comp - total + small_sd * gen.standard_normal()


@dataclass(frozen=True)
class JumpPlan:
    eps: float
    rate: float
    compensator: float
    small_var: float
    edgeworth: float


SAMPLER_TOL = 2e-4
SAMPLER_MAX_RATE = 2000.0


@functools.lru_cache(maxsize=64)
def jump_plan(desc: LambdaDescriptor, eps: float | None = None,
              tol: float = SAMPLER_TOL, max_rate: float = SAMPLER_MAX_RATE) -> JumpPlan:
    """Small-jump cut for the compound Poisson sampler.

    Without an explicit ``eps`` the cut is the largest one whose neglected third
    cumulant, relative to ``6 sd^3``, stays below ``tol``, unless that needs
    more than ``max_rate`` jumps per draw.
    """
    prof = desc.profile()
    t_end = prof.t_end
    sd3 = tempered_variance(desc) ** 1.5

    def edgeworth(e: float) -> float:
        return prof.moment(3.0, 0.0, e) / (6.0 * sd3)

    def rate(e: float) -> float:
        return prof.moment(0.0, e, t_end)

    if eps is None:
        lo, hi = t_end * 1e-12, t_end * (1 - 1e-12)
        if edgeworth(hi) <= tol:
            eps_acc = hi
        else:
            eps_acc = math.exp(brentq(lambda y: math.log(edgeworth(math.exp(y)) / tol),
                                      math.log(lo), math.log(hi), xtol=1e-6))
        if rate(eps_acc) <= max_rate:
            eps = eps_acc
        else:
            eps = math.exp(brentq(lambda y: math.log(rate(math.exp(y)) / max_rate),
                                  math.log(lo), math.log(eps_acc), xtol=1e-6))
    eps = float(min(eps, t_end))
    return JumpPlan(eps=eps, rate=rate(eps), compensator=prof.moment(1.0, eps, t_end),
                    small_var=prof.moment(2.0, 0.0, eps), edgeworth=edgeworth(eps))


def _sample_tempered(desc: LambdaDescriptor, rng: RandomStream, size: int, eps: float | None) -> np.ndarray:
    if desc.c == 0:
        return np.zeros(size)
    prof = desc.profile()
    plan = jump_plan(desc, eps)
    h_max = float(max(prof.h(np.array([plan.eps]))[0], prof.h(prof.knots[:-1]).max())) * (1 + 1e-12)
    out = np.empty(size)
    _tempered_kernel(rng, size, plan.rate, plan.eps, prof.t_end, prof.s, prof.knots,
                     prof.alpha, prof.beta, prof.gamma, h_max, plan.compensator,
                     math.sqrt(plan.small_var), out)
    return out


def sample(law: LimitLaw, rng: RandomStream, size: int | None = None, eps: float | None = None):
    """Draw from ``law``; returns a float when ``size`` is None."""
    n = 1 if size is None else int(size)
    if isinstance(law, Gaussian):
        out = law.sigma * rng.standard_normal(n)
    elif isinstance(law, Stable):
        out = _cms_stable(rng, law.s, law.b, n)
    elif isinstance(law, TemperedStable):
        out = _sample_tempered(law.lam, rng, n, eps)
    elif isinstance(law, Mixture):
        out = law.a1 * rng.standard_normal(n)
        if law.a2 > 0:
            out = out + law.a2 * _sample_tempered(law.w, rng, n, eps)
        if law.a3 > 0:
            out = out + law.a3 * _cms_stable(rng, law.stable.s, law.stable.b, n)
    else:
        raise LawError(f"unknown law {law!r}")
    return float(out[0]) if size is None else out


# -- serialization -------------------------------------------------------------

def lambda_to_dict(d: LambdaDescriptor) -> dict[str, Any]:
    a = d.a_fn
    if isinstance(a, LinearRamp):
        shape: dict[str, Any] = {"kind": "linear_ramp", "r": a.r}
    elif isinstance(a, PiecewiseLinear):
        shape = {"kind": "piecewise_linear", "pieces": [list(p) for p in a.pieces]}
    else:
        shape = {"kind": "from_g", "x": list(a.x), "g": list(a.g), "tc": a.tc, "v_mu": a.v_mu}
    return {"c": d.c, "s": d.s, "a": shape}


def lambda_from_dict(d: dict[str, Any], path: str = "lambda") -> LambdaDescriptor:
    try:
        s = float(d["s"])
        a = d["a"]
        kind = a.get("kind")
        if kind == "linear_ramp":
            return LambdaDescriptor(float(d["c"]), s, LinearRamp(float(a["r"])))
        if kind == "piecewise_linear":
            return LambdaDescriptor(float(d["c"]), s, PiecewiseLinear(tuple(tuple(p) for p in a["pieces"])))
        if kind == "from_g":
            return lambda_from_g(a["x"], a["g"], float(a["tc"]), float(a["v_mu"]), s)
    except KeyError as exc:
        raise LawError(f"{path}.{exc.args[0]}: missing field") from None
    except (TypeError, AttributeError):
        raise LawError(f"{path}: malformed descriptor") from None
    raise LawError(f"{path}.a.kind: unknown shape {kind!r}")


def law_to_dict(law: LimitLaw) -> dict[str, Any]:
    if isinstance(law, Gaussian):
        return {"kind": "gaussian", "sigma": law.sigma}
    if isinstance(law, Stable):
        return {"kind": "stable", "s": law.s, "b": law.b}
    if isinstance(law, TemperedStable):
        return {"kind": "tempered", "lambda": lambda_to_dict(law.lam)}
    return {"kind": "mixture", "a1": law.a1, "a2": law.a2, "a3": law.a3,
            "w": lambda_to_dict(law.w), "stable": law_to_dict(law.stable)}


def law_from_dict(d: dict[str, Any], path: str = "law") -> LimitLaw:
    if not isinstance(d, dict):
        raise LawError(f"{path}: expected an object")
    kind = d.get("kind")
    try:
        if kind == "gaussian":
            return Gaussian(float(d.get("sigma", 1.0)))
        if kind == "stable":
            return Stable(float(d["s"]), float(d["b"]))
        if kind == "tempered":
            return TemperedStable(lambda_from_dict(d["lambda"], f"{path}.lambda"))
        if kind == "mixture":
            st = law_from_dict(d["stable"], f"{path}.stable")
            if not isinstance(st, Stable):
                raise LawError(f"{path}.stable: must be a stable law")
            return Mixture(float(d["a1"]), float(d["a2"]), float(d["a3"]),
                           lambda_from_dict(d["w"], f"{path}.w"), st)
    except KeyError as exc:
        raise LawError(f"{path}.{exc.args[0]}: missing field") from None
    raise LawError(f"{path}.kind: unknown law kind {kind!r}")


def cdf_csv(law: LimitLaw, x: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "cdf"])
    for xi, Fi in zip(x, cdf(law, x)):
        w.writerow([repr(float(xi)), repr(float(Fi))])
    return buf.getvalue()


def cf_csv(law: LimitLaw, u: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "re_cf", "im_cf"])
    for ui, ci in zip(u, cf(law, u)):
        w.writerow([repr(float(ui)), repr(float(ci.real)), repr(float(ci.imag))])
    return buf.getvalue()
