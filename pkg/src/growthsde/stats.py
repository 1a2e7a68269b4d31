"""Quantiles, medians and the bridge-average transition density for general fields.

Quantiles use the left-continuous convention ``Q(p) = inf{x : p <= F(x)}``.
The median segment is the set of ``m`` with ``P(X <= m) >= 1/2`` and
``P(X >= m) >= 1/2``; its left end is ``Q(1/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .bridges import conditional_bridge_nodes
from .core import AnalyticLaw, GrowthSdeError, WienerConfig
from .transforms import CoefficientField, to_smoluchowsky

__all__ = [
    "QuantileFunction",
    "MedianResult",
    "quantile",
    "median",
    "median_bound_check",
    "monotone_median_transport",
    "semi_explicit_pdf_general",
]

_TIE = 1e-12


@dataclass(frozen=True)
class QuantileFunction:
    """Left-continuous quantile function with its upper companion ``inf{x : F(x) > p}``.

    Build with :meth:`from_law`, :meth:`from_sample`, :meth:`from_discrete` or
    :meth:`from_cdf`.
    """

    lower: Callable[[float], float]
    upper: Callable[[float], float]
    cdf: Callable
    label: str = ""

    def __call__(self, p):
        return quantile(self, p)

    @classmethod
    def from_law(cls, law: AnalyticLaw) -> "QuantileFunction":
        return cls(law.ppf, law.ppf, law.cdf, law.family)

    @classmethod
    def from_sample(cls, sample) -> "QuantileFunction":
        x = np.sort(np.asarray(sample, dtype=float))
        n = x.size
        if n == 0:
            raise GrowthSdeError("empty sample")

        def lower(p):
            return float(x[max(math.ceil(n * p - _TIE), 1) - 1])

        def upper(p):
            return float(x[min(math.floor(n * p + _TIE), n - 1)])

        return cls(lower, upper, lambda v: np.searchsorted(x, v, side="right") / n, "empirical")

    @classmethod
    def from_discrete(cls, values, probs) -> "QuantileFunction":
        v = np.asarray(values, dtype=float)
        order = np.argsort(v)
        v = v[order]
        pr = np.asarray(probs, dtype=float)[order]
        if np.any(pr < 0) or abs(pr.sum() - 1) > 1e-12:
            raise ValueError("probabilities must be nonnegative and sum to 1")
        cum = np.cumsum(pr)

        def lower(p):
            return float(v[min(np.searchsorted(cum, p - _TIE, side="left"), v.size - 1)])

        def upper(p):
            return float(v[min(np.searchsorted(cum, p + _TIE, side="right"), v.size - 1)])

        def cdf(xv):
            idx = np.searchsorted(v, xv, side="right")
            return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

        return cls(lower, upper, cdf, "discrete")

    @classmethod
    def from_cdf(cls, cdf: Callable, bracket: tuple[float, float], xtol: float = 1e-12) -> "QuantileFunction":
        """Continuous cdf, possibly with flat parts, inverted by bisection inside ``bracket``."""
        lo0, hi0 = bracket

        def search(pred):
            lo, hi = lo0, hi0
            while hi - lo > xtol * max(1.0, abs(lo) + abs(hi)):
                mid = 0.5 * (lo + hi)
                if pred(float(cdf(mid))):
                    hi = mid
                else:
                    lo = mid
            return hi

        return cls(
            lambda p: search(lambda c: c >= p - _TIE),
            lambda p: search(lambda c: c > p + _TIE),
            cdf,
            "cdf",
        )


@dataclass(frozen=True)
class MedianResult:
    """Median point (left end) and median segment ``(lo, hi)``."""

    point: float
    segment: tuple[float, float]

    def __post_init__(self):
        if self.point != self.segment[0] or self.segment[1] < self.segment[0]:
            raise ValueError("point must be the left end of a nonempty segment")


def quantile(qf: QuantileFunction, p):
    """``Q(p) = inf{x : p <= F(x)}`` for ``0 < p < 1``."""
    ps = np.atleast_1d(np.asarray(p, dtype=float))
    if np.any((ps <= 0) | (ps >= 1)):
        raise ValueError("p must lie in (0, 1)")
    out = np.array([float(qf.lower(pi)) for pi in ps])
    return float(out[0]) if np.ndim(p) == 0 else out


def _as_qf(source) -> QuantileFunction:
    if isinstance(source, QuantileFunction):
        return source
    if isinstance(source, AnalyticLaw):
        return QuantileFunction.from_law(source)
    return QuantileFunction.from_sample(source)


def median(source) -> MedianResult:
    """Median point and segment of a law, a sample or a :class:`QuantileFunction`.

    A sample's point is the order statistic at ``ceil(n/2)``.
    """
    qf = _as_qf(source)
    lo = float(qf.lower(0.5))
    hi = max(lo, float(qf.upper(0.5)))
    return MedianResult(lo, (lo, hi))


def median_bound_check(x_sample, a: float, p_order: float = 2.0) -> bool:
    """``|MED - a| <= (2 E|X - a|^p)^{1/p}`` on the empirical law."""
    if p_order < 1:
        raise ValueError("p_order must be at least 1")
    x = np.asarray(x_sample, dtype=float)
    m = median(x).point
    bound = (2 * np.mean(np.abs(x - a) ** p_order)) ** (1 / p_order)
    return bool(abs(m - a) <= bound * (1 + 1e-12))


def monotone_median_transport(T: Callable, med: MedianResult, probe=None) -> MedianResult:
    """Median of ``T(X)`` from the median of ``X`` for monotone ``T``.

    Monotonicity is checked on ``probe`` (default: points spanning the
    segment and a wide neighbourhood).  A decreasing ``T`` swaps the segment
    ends.

    Raises
    ------
    GrowthSdeError
        If ``T`` is not monotone on the probe points.
    """
    lo, hi = med.segment
    if probe is None:
        c, w = 0.5 * (lo + hi), max(1.0, hi - lo, abs(lo), abs(hi))
        probe = np.concatenate([np.linspace(c - 4 * w, c + 4 * w, 201), np.linspace(lo, hi, 21)])
    probe = np.unique(np.asarray(probe, dtype=float))
    vals = np.array([T(v) for v in probe], dtype=float)
    d = np.diff(vals)
    if np.all(d >= 0):
        a, b = float(T(lo)), float(T(hi))
    elif np.all(d <= 0):
        a, b = float(T(hi)), float(T(lo))
    else:
        raise GrowthSdeError("T is not monotone on the probe points")
    return MedianResult(a, (a, b))


def semi_explicit_pdf_general(
    field: CoefficientField,
    x,
    t: float,
    y: float,
    s: float,
    diffusion_d: float,
    n_bridges: int = 10_000,
    seed: int = 0,
    n_nodes: int = 129,
    stream: int = 0,
):
    """Transition density of a time-independent field by bridge Monte Carlo.

    With ``h = int dx / b`` the process ``h(X)`` has unit noise and drift
    ``ah``.  The density is::

        |b(x)|^{-1} sqrt(b(y)/b(x)) exp{int_y^x a/(2 D b^2) - (h(x) - h(y))^2 / (4 D tau)} / sqrt(4 pi D tau)
        * E[exp(tau int_0^1 beta(Wbar(r) + r h(x) + (1 - r) h(y)) dr)]

    where ``beta = -ah^2 / (4D) - ah' / 2`` and ``Wbar`` is the pinned bridge
    on ``[s, t]``.

    Returns
    -------
    value, stderr : float or ndarray
    """
    if not t > s:
        raise GrowthSdeError("need t > s")
    if not field.time_independent:
        raise GrowthSdeError("field must be time independent")
    D = diffusion_d
    if not D > 0:
        raise ValueError("diffusion_d must be positive")
    tau = t - s
    tmap, unit = to_smoluchowsky(field, D)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    r = np.linspace(0.0, 1.0, n_nodes)
    wb = conditional_bridge_nodes(s, t, r, WienerConfig(D, seed), n_bridges, stream=stream)
    hy = float(tmap.h(y, 0.0))
    by = abs(float(field.b(y, 0.0)))
    vals, errs = np.empty(xs.size), np.empty(xs.size)
    for i, xi in enumerate(xs):
        hx = float(tmap.h(xi, 0.0))
        path = wb + (r * hx + (1 - r) * hy)[None, :]
        ah = unit.a(path, 0.0)
        beta = -ah * ah / (4 * D) - 0.5 * unit.da(path, 0.0)
        z = tau * integrate.simpson(beta, x=r, axis=1)
        zmax = z.max()
        e = np.exp(z - zmax)
        bx = abs(float(field.b(xi, 0.0)))
        drift_int = integrate.quad(lambda u: float(field.a(u, 0.0) / field.b(u, 0.0) ** 2), y, xi,
                                   epsabs=1e-12, epsrel=1e-10, limit=200)[0]
        log_pref = (
            drift_int / (2 * D) - (hx - hy) ** 2 / (4 * D * tau) - 0.5 * math.log(4 * math.pi * D * tau)
            + 0.5 * math.log(by / bx) - math.log(bx) + zmax
        )
        pref = math.exp(log_pref)
        vals[i] = pref * e.mean()
        errs[i] = pref * e.std(ddof=1) / math.sqrt(n_bridges)
    if np.ndim(x) == 0:
        return float(vals[0]), float(errs[0])
    return vals, errs
