"""Coefficient fields of ``dX = a dt + b dW`` and the Itô change-of-variables engine.

All maps here act on the pair ``(a, b)``.  Under a monotone map ``y = h(x, t)``
with inverse ``x = g(y, t)`` the new coefficients are::

    a_new = [h_t + h_x a + D h_xx b^2] o g
    b_new = [h_x b] o g

with ``D`` the diffusion coefficient of the driving Wiener process
(``E[W^2] = 2 D t``).  Built-in fields are the dimensionless Gompertz,
logistic, theta-logistic and harmonic-oscillator forward-velocity fields.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from .core import AnalyticLaw, DensityCurve, GrowthSdeError, PathEnsemble, TimeGrid, WienerConfig
from .core import map_path_blocks, normal_increments

__all__ = [
    "CoefficientField",
    "TransformMap",
    "LinearSdeCoefficients",
    "NoStationaryLaw",
    "derivative",
    "probe_grid",
    "gompertz_field",
    "logistic_field",
    "theta_logistic_field",
    "qho_field",
    "named_field",
    "ito_transform",
    "inverse_map",
    "to_smoluchowsky",
    "check_constant_coeff",
    "check_space_independent",
    "space_independent_transform",
    "check_time_compatibility",
    "check_linearizable",
    "check_process_linear",
    "linearize",
    "solve_linear_sde",
    "log_stationary_weight",
    "boltzmann_stationary",
]

Func = Callable[[np.ndarray, float], np.ndarray]


def derivative(f: Callable, x, order: int = 1, t: float = 0.0, rel_step: float = 1e-3):
    """Five-point central difference of ``f(x, t)`` in ``x``.

    The step is ``rel_step * max(1, |x|)``; truncation error is fourth order.
    """
    x = np.asarray(x, dtype=float)
    h = rel_step * np.maximum(1.0, np.abs(x))
    f2p, f1p = f(x + 2 * h, t), f(x + h, t)
    f1m, f2m = f(x - h, t), f(x - 2 * h, t)
    if order == 1:
        return (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h)
    if order == 2:
        return (-f2p + 16 * f1p - 30 * f(x, t) + 16 * f1m - f2m) / (12 * h * h)
    raise ValueError("order must be 1 or 2")


def probe_grid(lo: float, hi: float, n: int = 257) -> np.ndarray:
    """Chebyshev-spaced probe points strictly inside ``[lo, hi]``."""
    k = np.arange(n)
    u = np.cos(np.pi * (2 * k + 1) / (2 * n))[::-1]
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * u


@dataclass(frozen=True)
class CoefficientField:
    """Drift ``a(x, t)`` and diffusion ``b(x, t)`` with optional analytic partials.

    Missing partials fall back to five-point finite differences.  ``inv_b_antideriv``
    is an optional closed form of ``p(x) = int dx / b(x)`` (time-independent
    fields only), with ``inv_b_antideriv_inverse`` its inverse.
    """

    a: Func
    b: Func
    domain: tuple[float, float] = (-math.inf, math.inf)
    a_x: Func | None = None
    b_x: Func | None = None
    b_xx: Func | None = None
    b_t: Func | None = None
    time_independent: bool = True
    name: str = "field"
    inv_b_antideriv: Callable | None = None
    inv_b_antideriv_inverse: Callable | None = None
    anchor: float | None = None
    bracket: tuple[float, float] | None = None

    def da(self, x, t=0.0):
        return self.a_x(x, t) if self.a_x else derivative(self.a, x, 1, t)

    def db(self, x, t=0.0):
        return self.b_x(x, t) if self.b_x else derivative(self.b, x, 1, t)

    def d2b(self, x, t=0.0):
        return self.b_xx(x, t) if self.b_xx else derivative(self.b, x, 2, t)

    def probe_bracket(self) -> tuple[float, float]:
        if self.bracket is not None:
            return self.bracket
        lo, hi = self.domain
        lo = lo if math.isfinite(lo) else -5.0
        hi = hi if math.isfinite(hi) else lo + 10.0
        pad = 0.05 * (hi - lo)
        return (lo + pad, hi - pad)

    def anchor_point(self) -> float:
        if self.anchor is not None:
            return self.anchor
        lo, hi = self.probe_bracket()
        return 0.5 * (lo + hi)

    def p(self, x):
        """``int dx / b`` from the anchor (closed form when available)."""
        if self.inv_b_antideriv is not None:
            return self.inv_b_antideriv(np.asarray(x, dtype=float))
        x0 = self.anchor_point()
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.array([integrate.quad(lambda z: 1.0 / self.b(z, 0.0), x0, xi, epsabs=1e-13, epsrel=1e-12)[0] for xi in xs])
        return out.reshape(np.shape(x))

    def check_partials(self, points=None, rtol: float = 1e-5) -> bool:
        """True when supplied analytic partials agree with finite differences."""
        xs = probe_grid(*self.probe_bracket(), 17) if points is None else np.asarray(points)
        pairs = [(self.a_x, self.a, 1), (self.b_x, self.b, 1), (self.b_xx, self.b, 2)]
        for given, f, order in pairs:
            if given is None:
                continue
            ref = derivative(f, xs, order)
            if not np.allclose(given(xs, 0.0), ref, rtol=rtol, atol=rtol * max(1.0, float(np.max(np.abs(ref))))):
                return False
        return True


@dataclass(frozen=True)
class TransformMap:
    """Monotone map ``y = h(x, t)`` with spatial inverse ``x = g(y, t)``."""

    h: Func
    g: Func
    h_x: Func | None = None
    h_xx: Func | None = None
    h_t: Func | None = None

    def dh(self, x, t):
        return self.h_x(x, t) if self.h_x else derivative(self.h, x, 1, t)

    def d2h(self, x, t):
        return self.h_xx(x, t) if self.h_xx else derivative(self.h, x, 2, t)

    def dht(self, x, t):
        if self.h_t:
            return self.h_t(x, t)
        eps = 1e-5 * max(1.0, abs(t))
        return (self.h(x, t + eps) - self.h(x, t - eps)) / (2 * eps)

    def check_inverse(self, xs, t: float = 0.0, tol: float = 1e-10) -> bool:
        xs = np.asarray(xs, dtype=float)
        back = self.g(self.h(xs, t), t)
        return bool(np.all(np.abs(back - xs) <= tol * np.maximum(1.0, np.abs(xs))))


@dataclass(frozen=True)
class LinearSdeCoefficients:
    """``a(y, t) = a0 + a1 y`` and ``b(y, t) = b0 + b1 y``; constants or callables of t."""

    a0: float | Callable = 0.0
    a1: float | Callable = 0.0
    b0: float | Callable = 0.0
    b1: float | Callable = 0.0

    def on_grid(self, times: np.ndarray) -> dict:
        out = {}
        for name in ("a0", "a1", "b0", "b1"):
            v = getattr(self, name)
            out[name] = np.asarray(v(times), float) * np.ones_like(times) if callable(v) else np.full_like(times, float(v))
        return out

    @property
    def is_constant(self) -> bool:
        return not any(callable(getattr(self, n)) for n in ("a0", "a1", "b0", "b1"))


@dataclass(frozen=True)
class NoStationaryLaw:
    """The stationary weight is not integrable; ``endpoint`` is where it blows up."""

    endpoint: float
    reason: str


# ---------------------------------------------------------------------------
# built-in fields
# ---------------------------------------------------------------------------


def _log(x):
    return np.log(x)


def _exp(y):
    return np.exp(y)


def gompertz_field(alpha: float) -> CoefficientField:
    """Dimensionless Gompertz field ``a = x (1 - alpha ln x)``, ``b = x``."""
    return CoefficientField(
        a=lambda x, t: x * (1.0 - alpha * np.log(x)),
        b=lambda x, t: np.asarray(x, dtype=float) * 1.0,
        a_x=lambda x, t: 1.0 - alpha * np.log(x) - alpha,
        b_x=lambda x, t: np.ones_like(np.asarray(x, dtype=float)),
        b_xx=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        domain=(0.0, math.inf),
        name=f"gompertz({alpha:g})",
        inv_b_antideriv=_log,
        inv_b_antideriv_inverse=_exp,
        anchor=1.0,
        bracket=(0.05, 20.0),
    )


def theta_logistic_field(theta: float) -> CoefficientField:
    """Dimensionless theta-logistic field ``a = x (1 - x**theta)``, ``b = x``."""
    return CoefficientField(
        a=lambda x, t: x * (1.0 - np.power(x, theta)),
        b=lambda x, t: np.asarray(x, dtype=float) * 1.0,
        a_x=lambda x, t: 1.0 - (1.0 + theta) * np.power(x, theta),
        b_x=lambda x, t: np.ones_like(np.asarray(x, dtype=float)),
        b_xx=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        domain=(0.0, math.inf),
        name="logistic" if theta == 1 else f"theta-logistic({theta:g})",
        inv_b_antideriv=_log,
        inv_b_antideriv_inverse=_exp,
        anchor=1.0,
        bracket=(0.05, 5.0),
    )


def logistic_field() -> CoefficientField:
    """Dimensionless logistic field ``a = x (1 - x)``, ``b = x``."""
    return theta_logistic_field(1.0)


def qho_field(n: int, omega: float = 1.0, sigma: float = 1.0, sub_interval: tuple | None = None) -> CoefficientField:
    """Forward-velocity field of the ``n``-th oscillator state, unit diffusion coefficient.

    The domain is the nodal sub-interval ``sub_interval`` (default: the one
    containing the largest positive values).
    """
    from . import stochmech

    state = stochmech.QhoState(n, omega, sigma)
    walls = stochmech.nodes(state)
    if sub_interval is None:
        lo = walls[-1] if len(walls) else -math.inf
        sub_interval = (lo, math.inf)
    lo, hi = sub_interval
    mid = 0.5 * (lo + hi) if math.isfinite(lo) and math.isfinite(hi) else (
        lo + 2 * sigma if math.isfinite(lo) else (hi - 2 * sigma if math.isfinite(hi) else 0.0))
    one = lambda x, t: np.ones_like(np.asarray(x, dtype=float))
    zero = lambda x, t: np.zeros_like(np.asarray(x, dtype=float))
    return CoefficientField(
        a=lambda x, t: stochmech.forward_velocity(state, x, check_nodes=False),
        b=one,
        a_x=lambda x, t: stochmech.forward_velocity_derivative(state, x),
        b_x=zero,
        b_xx=zero,
        domain=(lo, hi),
        name=f"qho({n},{omega:g},{sigma:g})",
        inv_b_antideriv=lambda x: np.asarray(x, dtype=float) - mid,
        inv_b_antideriv_inverse=lambda y: np.asarray(y, dtype=float) + mid,
        anchor=mid,
        bracket=(
            (lo if math.isfinite(lo) else mid - 4 * sigma) + 0.05 * sigma,
            (hi if math.isfinite(hi) else mid + 4 * sigma) - 0.05 * sigma,
        ),
    )


_NAME_RE = re.compile(r"^\s*([a-z\-]+)\s*(?:\((.*)\))?\s*$")


def named_field(spec: str) -> CoefficientField:
    """Parse ``gompertz(alpha)``, ``logistic``, ``theta-logistic(theta)`` or ``qho(n,omega,sigma)``."""
    m = _NAME_RE.match(spec)
    if not m:
        raise ValueError(f"cannot parse field {spec!r}")
    name, args = m.group(1), m.group(2)
    vals = [float(v) for v in args.split(",")] if args else []
    if name == "gompertz" and len(vals) == 1:
        return gompertz_field(vals[0])
    if name == "logistic" and not vals:
        return logistic_field()
    if name == "theta-logistic" and len(vals) == 1:
        return theta_logistic_field(vals[0])
    if name == "qho" and len(vals) == 3:
        return qho_field(int(vals[0]), vals[1], vals[2])
    raise ValueError(f"unknown field {spec!r}")


# ---------------------------------------------------------------------------
# transformations
# ---------------------------------------------------------------------------


def _image_domain(tmap: TransformMap, domain, t=0.0):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ends = []
        for e in domain:
            v = float(tmap.h(np.float64(e), t))
            if not math.isnan(v):
                ends.append(v)
            else:
                ends.append(-math.inf if e < 0 else math.inf)
    return (min(ends), max(ends))


def ito_transform(field: CoefficientField, tmap: TransformMap, diffusion_d: float, probe: bool = True) -> CoefficientField:
    """Coefficients of ``Y = h(X, t)``.

    Raises
    ------
    GrowthSdeError
        If ``g(h(x)) != x`` at the probe points.
    """
    D = diffusion_d
    if probe and not tmap.check_inverse(probe_grid(*field.probe_bracket(), 33)):
        raise GrowthSdeError("map is not invertible on the probe grid")

    def a_new(y, t):
        x = tmap.g(y, t)
        return tmap.dht(x, t) + tmap.dh(x, t) * field.a(x, t) + D * tmap.d2h(x, t) * field.b(x, t) ** 2

    def b_new(y, t):
        x = tmap.g(y, t)
        return tmap.dh(x, t) * field.b(x, t)

    lo, hi = field.probe_bracket()
    blo, bhi = sorted((float(tmap.h(lo, 0.0)), float(tmap.h(hi, 0.0))))
    return CoefficientField(
        a=a_new, b=b_new, domain=_image_domain(tmap, field.domain),
        time_independent=field.time_independent and tmap.h_t is None,
        name=f"transformed {field.name}", bracket=(blo, bhi),
        anchor=float(tmap.h(field.anchor_point(), 0.0)),
    )


def inverse_map(tmap: TransformMap) -> TransformMap:
    """The map ``x = g(y, t)`` viewed as a forward transformation."""
    return TransformMap(h=tmap.g, g=tmap.h)


def _p_inverse(field: CoefficientField):
    if field.inv_b_antideriv_inverse is not None:
        return field.inv_b_antideriv_inverse
    lo, hi = field.domain

    def inv(y):
        ys = np.atleast_1d(np.asarray(y, dtype=float)).ravel()
        out = np.empty_like(ys)
        for i, yi in enumerate(ys):
            a, b = field.probe_bracket()
            span = b - a
            while field.p(a) > yi and (a - span > lo or not math.isfinite(lo)):
                a = a - span if not math.isfinite(lo) else lo + 0.5 * (a - lo)
            while field.p(b) < yi:
                b = b + span if not math.isfinite(hi) else hi - 0.5 * (hi - b)
            f = lambda z: float(field.p(z)) - yi
            sgn = np.sign(float(field.b(field.anchor_point(), 0.0)))
            out[i] = optimize.brentq(f, a, b, xtol=1e-14, rtol=1e-13) if sgn > 0 else optimize.brentq(lambda z: -f(z), b, a)
        return out.reshape(np.shape(y))

    return inv


def to_smoluchowsky(field: CoefficientField, diffusion_d: float) -> tuple[TransformMap, CoefficientField]:
    """Map ``h = int dx / b`` giving unit diffusion and drift ``a/b - D b'``."""
    if not field.time_independent:
        raise GrowthSdeError("unit-diffusion reduction needs a time-independent field")
    xs = probe_grid(*field.probe_bracket(), 65)
    bs = field.b(xs, 0.0)
    if np.any(bs == 0) or np.any(np.sign(bs) != np.sign(bs[0])):
        raise GrowthSdeError("b vanishes or changes sign in the domain")
    D = diffusion_d
    ginv = _p_inverse(field)
    tmap = TransformMap(
        h=lambda x, t: field.p(x),
        g=lambda y, t: ginv(y),
        h_x=lambda x, t: 1.0 / field.b(x, t),
        h_xx=lambda x, t: -field.db(x, t) / field.b(x, t) ** 2,
        h_t=None,
    )

    def a_new(y, t):
        x = ginv(y)
        return field.a(x, t) / field.b(x, t) - D * field.db(x, t)

    def a_new_y(y, t):
        # chain rule: d/dy = b(x) d/dx
        x = ginv(y)
        b = field.b(x, t)
        q_x = (field.da(x, t) * b - field.a(x, t) * field.db(x, t)) / b**2 - D * field.d2b(x, t)
        return b * q_x

    lo, hi = field.probe_bracket()
    one = lambda y, t: np.ones_like(np.asarray(y, dtype=float))
    zero = lambda y, t: np.zeros_like(np.asarray(y, dtype=float))
    new = CoefficientField(
        a=a_new, b=one, a_x=a_new_y, b_x=zero, b_xx=zero,
        domain=_image_domain(tmap, field.domain), name=f"unit-diffusion {field.name}",
        inv_b_antideriv=lambda y: np.asarray(y, dtype=float),
        inv_b_antideriv_inverse=lambda y: np.asarray(y, dtype=float),
        anchor=float(field.p(field.anchor_point())),
        bracket=tuple(sorted((float(field.p(lo)), float(field.p(hi))))),
    )
    return tmap, new


def _is_constant(values: np.ndarray, rtol: float) -> bool:
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        return False
    scale = max(1.0, float(np.max(np.abs(v))))
    return float(np.max(v) - np.min(v)) <= rtol * scale


def check_constant_coeff(field: CoefficientField, diffusion_d: float, bracket=None) -> tuple[bool, float]:
    """Whether ``a - D b b'`` is constant; returns ``(flag, sup deviation from its mean)``."""
    xs = probe_grid(*(bracket or field.probe_bracket()))
    v = field.a(xs, 0.0) - diffusion_d * field.b(xs, 0.0) * field.db(xs, 0.0)
    resid = float(np.max(np.abs(v - np.mean(v))))
    return _is_constant(v, 1e-8), resid


def _q(field, D):
    return lambda x, t=0.0: field.a(x, t) / field.b(x, t) - D * field.db(x, t)


def _q_x(field, D):
    def qx(x, t=0.0):
        b = field.b(x, t)
        return (field.da(x, t) * b - field.a(x, t) * field.db(x, t)) / b**2 - D * field.d2b(x, t)

    return qx


def check_space_independent(field: CoefficientField, diffusion_d: float, bracket=None, rtol: float = 1e-8) -> float | None:
    """Constant ``c = b [D b'' - (a/b)']`` if it is constant on the probe grid, else None."""
    xs = probe_grid(*(bracket or field.probe_bracket()))
    b = field.b(xs, 0.0)
    ab_x = (field.da(xs, 0.0) * b - field.a(xs, 0.0) * field.db(xs, 0.0)) / b**2
    v = b * (diffusion_d * field.d2b(xs, 0.0) - ab_x)
    return float(np.mean(v)) if _is_constant(v, rtol) else None


@dataclass(frozen=True)
class SpaceIndependentResult:
    """Map ``z = e^{ct} p(x)`` and the resulting time-only coefficients."""

    tmap: TransformMap
    c: float
    drift_const: float

    def a_hat(self, t):
        return self.drift_const * np.exp(self.c * np.asarray(t, dtype=float))

    def b_hat(self, t):
        return np.exp(self.c * np.asarray(t, dtype=float))

    def solution_law(self, z0: float, t: float, diffusion_d: float) -> AnalyticLaw:
        """Normal law of ``Z(t)`` started at ``z0`` (``Z`` has time-only coefficients)."""
        c, k = self.c, self.drift_const
        if c == 0:
            return AnalyticLaw.normal(z0 + k * t, 2 * diffusion_d * t)
        mean = z0 + k * math.expm1(c * t) / c
        var = 2 * diffusion_d * math.expm1(2 * c * t) / (2 * c)
        return AnalyticLaw.normal(mean, var)


def space_independent_transform(field: CoefficientField, c: float, diffusion_d: float, bracket=None) -> SpaceIndependentResult:
    """Map to a process with coefficients depending on time only.

    Raises
    ------
    GrowthSdeError
        If ``c`` does not make the new drift space independent.
    """
    D = diffusion_d
    xs = probe_grid(*(bracket or field.probe_bracket()), 65)
    k = c * field.p(xs) + field.a(xs, 0.0) / field.b(xs, 0.0) - D * field.db(xs, 0.0)
    if not _is_constant(k, 1e-8):
        raise GrowthSdeError(f"c = {c} does not give a space-independent drift")
    ginv = _p_inverse(field)
    tmap = TransformMap(
        h=lambda x, t: np.exp(c * t) * field.p(x),
        g=lambda z, t: ginv(np.exp(-c * t) * z),
        h_x=lambda x, t: np.exp(c * t) / field.b(x, t),
        h_xx=lambda x, t: -np.exp(c * t) * field.db(x, t) / field.b(x, t) ** 2,
        h_t=lambda x, t: c * np.exp(c * t) * field.p(x),
    )
    return SpaceIndependentResult(tmap, c, float(np.mean(k)))


def check_time_compatibility(field: CoefficientField, diffusion_d: float, t: float, bracket=None) -> float:
    """Residual of the time-dependent space-independence condition at time ``t``.

    The quantity ``b [ (b_t / b^2) - (a/b)' + D b'' ]`` must be x-independent;
    returns its spread over the probe grid.
    """
    xs = probe_grid(*(bracket or field.probe_bracket()), 65)
    b = field.b(xs, t)
    bt = field.b_t(xs, t) if field.b_t else (field.b(xs, t + 1e-5) - field.b(xs, t - 1e-5)) / 2e-5
    ab_x = (field.da(xs, t) * b - field.a(xs, t) * field.db(xs, t)) / b**2
    v = b * (bt / b**2 - ab_x + diffusion_d * field.d2b(xs, t))
    return float(np.max(v) - np.min(v))


def check_linearizable(field: CoefficientField, diffusion_d: float, bracket=None, rtol: float = 1e-8):
    """Constant ``b1 = -(1/q') d/dx[b q']`` with ``q = a/b - D b'``, or None.

    Points where ``q'`` vanishes are skipped and reported through the second
    return value.

    Returns
    -------
    b1 : float or None
    indeterminate : ndarray
        Probe points where ``q'`` is numerically zero.
    """
    xs = probe_grid(*(bracket or field.probe_bracket()))
    qx = _q_x(field, diffusion_d)
    bq = lambda x, t: field.b(x, t) * qx(x, t)
    num = derivative(bq, xs, 1)
    den = qx(xs)
    small = np.abs(den) <= 1e-12 * max(1.0, float(np.max(np.abs(den))))
    v = -num[~small] / den[~small]
    if v.size == 0:
        return None, xs[small]
    return (float(np.mean(v)) if _is_constant(v, rtol) else None), xs[small]


def check_process_linear(field: CoefficientField, diffusion_d: float, bracket=None, rtol: float = 1e-8) -> bool:
    """Predicate for reducibility with ``b1 = 0``: ``d/dx[b q'] = 0`` on the probe grid."""
    xs = probe_grid(*(bracket or field.probe_bracket()))
    qx = _q_x(field, diffusion_d)
    v = derivative(lambda x, t: field.b(x, t) * qx(x, t), xs, 1)
    scale = max(1.0, float(np.max(np.abs(qx(xs)))))
    return bool(np.max(np.abs(v)) <= rtol * scale)


def linearize(field: CoefficientField, b1: float, diffusion_d: float, bracket=None) -> tuple[TransformMap, LinearSdeCoefficients]:
    """Map ``h = exp(b1 p(x))`` (integration constant 1) and the linear coefficients it yields."""
    ginv = _p_inverse(field)
    tmap = TransformMap(
        h=lambda x, t: np.exp(b1 * field.p(x)),
        g=lambda y, t: ginv(np.log(y) / b1),
        h_x=lambda x, t: b1 * np.exp(b1 * field.p(x)) / field.b(x, t),
        h_xx=lambda x, t: np.exp(b1 * field.p(x)) * (b1**2 - b1 * field.db(x, t)) / field.b(x, t) ** 2,
    )
    new = ito_transform(field, tmap, diffusion_d)
    lo, hi = new.probe_bracket()
    ys = probe_grid(lo, hi, 33)
    av, bv = new.a(ys, 0.0), new.b(ys, 0.0)
    a1, a0 = np.polyfit(ys, av, 1)
    bb1, b0 = np.polyfit(ys, bv, 1)
    scale = max(1.0, float(np.max(np.abs(av))))
    if np.max(np.abs(a0 + a1 * ys - av)) > 1e-7 * scale or np.max(np.abs(b0 + bb1 * ys - bv)) > 1e-7 * scale:
        raise GrowthSdeError("transformed coefficients are not linear")
    clean = lambda v: 0.0 if abs(v) < 1e-10 * scale else float(v)
    return tmap, LinearSdeCoefficients(clean(a0), clean(a1), clean(b0), clean(bb1))


def solve_linear_sde(
    coeffs: LinearSdeCoefficients,
    y0: float,
    grid: TimeGrid,
    cfg: WienerConfig,
    n_paths: int,
    stream: int = 0,
    workers: int | None = None,
) -> PathEnsemble:
    """Closed-form solution of the linear SDE driven by the ``(seed, stream)`` noise.

    With ``Zbar(t) = int (a1 - D b1^2) du + int b1 dW``::

        Y(t) = e^{Zbar(t)} [ y0 + int (a0 - 2 D b0 b1) e^{-Zbar} ds + int b0 e^{-Zbar} dW ]

    Deterministic integrals use the trapezoid rule and stochastic ones
    left-point (Itô) sums on the grid.
    """
    D = cfg.diffusion_d
    times = grid.times
    c = coeffs.on_grid(times)
    dt = grid.dt
    drift_z = c["a1"] - D * c["b1"] ** 2
    drift_z_int = np.concatenate([[0.0], np.cumsum(0.5 * (drift_z[1:] + drift_z[:-1]) * dt)])
    src = c["a0"] - 2 * D * c["b0"] * c["b1"]

    def block(start, stop):
        dw = normal_increments(grid, cfg, start, stop, stream)
        m = stop - start
        zbar = np.zeros((m, grid.n_steps + 1))
        zbar[:, 1:] = np.cumsum(c["b1"][None, :-1] * dw, axis=1)
        zbar += drift_z_int[None, :]
        emz = np.exp(-zbar)
        ds_int = np.zeros_like(zbar)
        ds_int[:, 1:] = np.cumsum(0.5 * (src[None, 1:] * emz[:, 1:] + src[None, :-1] * emz[:, :-1]) * dt, axis=1)
        dw_int = np.zeros_like(zbar)
        dw_int[:, 1:] = np.cumsum(c["b0"][None, :-1] * emz[:, :-1] * dw, axis=1)
        return np.exp(zbar) * (y0 + ds_int + dw_int)

    vals = map_path_blocks(n_paths, block, grid.n_steps, workers=workers)
    return PathEnsemble(grid, vals, cfg.master_seed, "linear-sde")


# ---------------------------------------------------------------------------
# stationary laws
# ---------------------------------------------------------------------------


def log_stationary_weight(field: CoefficientField, diffusion_d: float, x):
    """``log w(x) = (1/D) int a / b^2 dx - 2 ln|b|`` measured from the field's anchor."""
    x0 = field.anchor_point()
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    f = lambda z: float(field.a(z, 0.0) / field.b(z, 0.0) ** 2)
    ints = np.empty_like(xs)
    # integrate sequentially along sorted points to keep quadrature intervals short
    order = np.argsort(xs)
    for direction in (1, -1):
        prev, acc = x0, 0.0
        seq = order if direction == 1 else order[::-1]
        for i in seq:
            xi = xs[i]
            if (xi - x0) * direction < 0:
                continue
            acc += integrate.quad(f, prev, xi, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
            ints[i] = acc
            prev = xi
    out = ints / diffusion_d - 2.0 * np.log(np.abs(field.b(xs, 0.0)))
    return out.reshape(np.shape(x))


def _fit(basis, xs, lw):
    A = np.column_stack([f(xs) for f in basis])
    coef, *_ = np.linalg.lstsq(A, lw, rcond=None)
    resid = float(np.max(np.abs(A @ coef - lw)))
    return coef, resid


def _family_candidates(lo, hi):
    if not math.isfinite(lo) and not math.isfinite(hi):
        return ["normal", "log_gamma"]
    if lo == 0 and not math.isfinite(hi):
        return ["lognormal", "gamma", "inverse_gamma", "generalized_gamma"]
    return []


# Fitted shape exponents this close to zero are the non-integrable boundary case.
_SHAPE_FLOOR = 1e-8


def _recognize(field, D, xs, lw):
    lo, hi = field.domain
    scale = max(1.0, float(np.max(np.abs(lw))))
    tol = 1e-7 * scale
    one = lambda x: np.ones_like(x)
    for fam in _family_candidates(lo, hi):
        if fam == "normal":
            c, r = _fit([one, lambda x: x, lambda x: x**2], xs, lw)
            if r < tol:
                if c[2] >= 0:
                    return NoStationaryLaw(math.inf, "weight grows at infinity")
                var = -1.0 / (2 * c[2])
                return AnalyticLaw.normal(c[1] * var, var)
        elif fam == "log_gamma":
            c, r = _fit([one, lambda x: x, np.exp], xs, lw)
            if r < tol:
                if c[2] >= 0:
                    return NoStationaryLaw(math.inf, "weight grows at +infinity")
                if c[1] <= 0:
                    return NoStationaryLaw(-math.inf, "weight not integrable at -infinity")
                return AnalyticLaw.log_gamma(c[1], -c[2])
        elif fam == "lognormal":
            c, r = _fit([one, np.log, lambda x: np.log(x) ** 2], xs, lw)
            if r < tol:
                if c[2] >= 0:
                    return NoStationaryLaw(0.0, "weight not integrable")
                var = -1.0 / (2 * c[2])
                return AnalyticLaw.lognormal((c[1] + 1.0) * var, var)
        elif fam == "gamma":
            c, r = _fit([one, np.log, lambda x: x], xs, lw)
            if r < tol:
                if c[1] + 1.0 <= _SHAPE_FLOOR:
                    return NoStationaryLaw(0.0, "weight not integrable at 0")
                if c[2] >= 0:
                    return NoStationaryLaw(math.inf, "weight not integrable at infinity")
                return AnalyticLaw.gamma(c[1] + 1.0, -c[2])
        elif fam == "inverse_gamma":
            c, r = _fit([one, np.log, lambda x: 1.0 / x], xs, lw)
            if r < tol:
                if c[2] >= 0:
                    return NoStationaryLaw(0.0, "weight not integrable at 0")
                if -c[1] - 1.0 <= _SHAPE_FLOOR:
                    return NoStationaryLaw(math.inf, "weight not integrable at infinity")
                return AnalyticLaw.inverse_gamma(-c[1] - 1.0, -c[2])
        elif fam == "generalized_gamma":
            def resid(th):
                return _fit([one, np.log, lambda x: x**th], xs, lw)[1]

            res = optimize.minimize_scalar(resid, bounds=(0.05, 10.0), method="bounded", options={"xatol": 1e-12})
            th = float(res.x)
            c, r = _fit([one, np.log, lambda x: x**th], xs, lw)
            if r < 1e-6 * scale:
                # log pdf = (theta k - 1) ln x - (x/s)^theta
                if c[2] >= 0:
                    return NoStationaryLaw(math.inf, "weight not integrable at infinity")
                if c[1] + 1.0 <= _SHAPE_FLOOR:
                    return NoStationaryLaw(0.0, "weight not integrable at 0")
                k = (c[1] + 1.0) / th
                s = (-c[2]) ** (-1.0 / th)
                return AnalyticLaw.generalized_gamma(th, k, s)
    return None


def boltzmann_stationary(field: CoefficientField, diffusion_d: float, n_grid: int = 2001):
    """Stationary density ``w(x) / Z`` of a time-independent field.

    Returns an ``AnalyticLaw`` when the log-weight matches one of the named
    families, a ``NoStationaryLaw`` when the weight is not integrable, and a
    normalised ``DensityCurve`` otherwise.
    """
    xs = probe_grid(*field.probe_bracket(), 129)
    lw = log_stationary_weight(field, diffusion_d, xs)
    found = _recognize(field, diffusion_d, xs, lw)
    if found is not None:
        return found
    lo, hi = field.domain
    x0 = field.anchor_point()
    lw0 = float(log_stationary_weight(field, diffusion_d, x0))
    w = lambda z: math.exp(float(log_stationary_weight(field, diffusion_d, z)) - lw0)
    parts = []
    for a, b, end in ((lo, x0, lo), (x0, hi, hi)):
        val, err = integrate.quad(w, a, b, limit=400)
        if not math.isfinite(val) or val > 1e12:
            return NoStationaryLaw(end, "weight integral diverges")
        parts.append(val)
    z = sum(parts)
    a, b = field.probe_bracket()
    grid = np.linspace(a, b, n_grid)
    f = np.exp(log_stationary_weight(field, diffusion_d, grid) - lw0) / z
    return DensityCurve(grid, f, label=f"stationary {field.name}")


def unit_field(a_of_y: Callable, a_y: Callable | None = None, domain=(-math.inf, math.inf), name="unit", bracket=None) -> CoefficientField:
    """Field with drift ``a(y)`` and ``b = 1``."""
    one = lambda y, t: np.ones_like(np.asarray(y, dtype=float))
    zero = lambda y, t: np.zeros_like(np.asarray(y, dtype=float))
    return CoefficientField(
        a=lambda y, t: a_of_y(y), b=one, a_x=(lambda y, t: a_y(y)) if a_y else None,
        b_x=zero, b_xx=zero, domain=domain, name=name,
        inv_b_antideriv=lambda y: np.asarray(y, dtype=float),
        inv_b_antideriv_inverse=lambda y: np.asarray(y, dtype=float),
        anchor=0.0 if bracket is None else 0.5 * (bracket[0] + bracket[1]), bracket=bracket,
    )


__all__.append("unit_field")
__all__.append("SpaceIndependentResult")
