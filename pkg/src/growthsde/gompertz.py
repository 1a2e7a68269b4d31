"""Stochastic Gompertz growth: exact paths, transition and stationary laws.

The dimensionless Gompertz SDE is ``dX = X (1 - alpha ln X) dt + X dW`` with
``E[W^2] = 2 D t``.  Its logarithm is an Ornstein-Uhlenbeck process, so every
law here is log-normal.  The parametric variant lets the rate depend on time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate

from .core import (
    AnalyticLaw,
    GrowthSdeError,
    PathEnsemble,
    TimeGrid,
    WienerConfig,
    map_path_blocks,
    normal_increments,
    path_generator,
    _stride_for,
)
from .transforms import CoefficientField, gompertz_field

__all__ = [
    "GompertzParams",
    "RateFunction",
    "deterministic_path",
    "exact_paths",
    "transition_law",
    "stationary_law",
    "parametric_ou_moments",
    "parametric_transition",
    "parametric_gompertz_field",
    "parametric_ou_field",
]

# substream used to draw random initial states
_INIT_SUB = 1 << 62


@dataclass(frozen=True)
class GompertzParams:
    """Rate ``alpha > 0`` and diffusion coefficient ``D > 0``."""

    alpha: float
    diffusion_d: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if not self.diffusion_d >= 0:
            raise ValueError(f"diffusion_d must be nonnegative, got {self.diffusion_d}")

    def field(self) -> CoefficientField:
        return gompertz_field(self.alpha)


@dataclass(frozen=True)
class RateFunction:
    """Deterministic time-dependent rate ``alpha(t)``.

    Parameters
    ----------
    alpha_t : callable
        Rate as a function of time.
    antiderivative : callable, optional
        Exact ``int_0^t alpha(u) du``; otherwise adaptive quadrature is used.
    """

    alpha_t: Callable[[float], float]
    antiderivative: Callable[[float], float] | None = None

    @classmethod
    def constant(cls, alpha: float) -> "RateFunction":
        return cls(lambda t: alpha + 0.0 * np.asarray(t, dtype=float), lambda t: alpha * t)

    def integral(self, s: float, t: float) -> float:
        """``int_s^t alpha(u) du``."""
        if self.antiderivative is not None:
            return float(self.antiderivative(t) - self.antiderivative(s))
        return integrate.quad(lambda u: float(self.alpha_t(u)), s, t, epsabs=1e-12, epsrel=1e-12, limit=200)[0]

    def check_antiderivative(self, points, tol: float = 1e-8) -> bool:
        if self.antiderivative is None:
            return True
        for t in points:
            num = integrate.quad(lambda u: float(self.alpha_t(u)), 0.0, t, epsabs=1e-13, epsrel=1e-13)[0]
            if abs(num - (self.antiderivative(t) - self.antiderivative(0.0))) > tol * max(1.0, abs(num)):
                return False
        return True


def deterministic_path(alpha: float, x0: float, t):
    """Noise-free Gompertz trajectory ``x0^{e^{-alpha t}} e^{(1 - e^{-alpha t}) / alpha}``."""
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    t = np.asarray(t, dtype=float)
    decay = np.exp(-alpha * t)
    return np.exp(decay * math.log(x0) + (-np.expm1(-alpha * t)) / alpha)


def _initial_logs(x0, seed, stream, start, stop):
    if isinstance(x0, AnalyticLaw):
        out = np.empty(stop - start)
        for j, i in enumerate(range(start, stop)):
            out[j] = x0.sample(path_generator(seed, stream, i, sub=_INIT_SUB), 1)[0]
        if np.any(out <= 0):
            raise ValueError("initial law must be supported on (0, inf)")
        return np.log(out)
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    return np.full(stop - start, math.log(x0))


def exact_paths(
    params: GompertzParams,
    x0,
    grid: TimeGrid,
    n_paths: int,
    seed: int = 0,
    stream: int = 0,
    scheme: str = "exact",
    record_points: int | None = None,
    workers: int | None = None,
) -> PathEnsemble:
    """Gompertz paths from the closed-form solution.

    ``X(t) = X0^{e^{-a t}} e^{(1-D)(1-e^{-a t})/a} exp(I(t))`` with
    ``I(t) = int_0^t e^{-a (t-u)} dW(u)``.

    Parameters
    ----------
    x0 : float or AnalyticLaw
        Degenerate start, or a law sampled per path.
    scheme : {"exact", "left_point"}
        ``left_point`` accumulates ``I`` with left-point Itô sums.  ``exact``
        rescales each increment so that the Gaussian recursion of ``I`` is
        exact in law at any step size.
    """
    a, D = params.alpha, params.diffusion_d
    if scheme not in ("exact", "left_point"):
        raise ValueError(f"unknown scheme {scheme!r}")
    cfg = WienerConfig(D if D > 0 else 1.0, seed)
    dt = grid.dt
    decay = math.exp(-a * dt)
    if scheme == "exact":
        gain = math.sqrt(-math.expm1(-2 * a * dt) / (2 * a * dt))
    else:
        gain = 1.0
    stride = _stride_for(grid, record_points)
    tau = grid.times - grid.t0
    mean_part = (1.0 - D) * (-np.expm1(-a * tau)) / a
    fade = np.exp(-a * tau)

    def block(start, stop):
        lx0 = _initial_logs(x0, seed, stream, start, stop)
        m = stop - start
        out = np.empty((m, grid.n_steps // stride + 1))
        if D == 0:
            dw = np.zeros((m, grid.n_steps))
        else:
            dw = normal_increments(grid, cfg, start, stop, stream)
        ii = np.zeros(m)
        out[:, 0] = lx0
        col = 1
        for k in range(grid.n_steps):
            if scheme == "exact":
                ii = decay * ii + gain * dw[:, k]
            else:
                ii = decay * (ii + dw[:, k])
            if (k + 1) % stride == 0:
                j = k + 1
                out[:, col] = fade[j] * lx0 + mean_part[j] + ii
                col += 1
        return np.exp(out)

    vals = map_path_blocks(n_paths, block, grid.n_steps, workers=workers)
    return PathEnsemble(grid.coarsen(stride), vals, seed, f"gompertz({a:g},{D:g})")


def transition_law(params: GompertzParams, y: float, s: float, t: float) -> AnalyticLaw:
    """Log-normal law of ``X(t)`` given ``X(s) = y``."""
    if not t > s:
        raise GrowthSdeError("transition needs t > s")
    if not y > 0:
        raise ValueError("y must be positive")
    a, D = params.alpha, params.diffusion_d
    tau = t - s
    mean = math.exp(-a * tau) * math.log(y) + (1 - D) * (-math.expm1(-a * tau)) / a
    var = D * (-math.expm1(-2 * a * tau)) / a
    if var == 0:
        return AnalyticLaw.degenerate(math.exp(mean))
    return AnalyticLaw.lognormal(mean, var)


def stationary_law(params: GompertzParams) -> AnalyticLaw:
    """``LN((1 - D)/alpha, D/alpha)``; its mean is ``e^{(2-D)/(2 alpha)}``."""
    a, D = params.alpha, params.diffusion_d
    return AnalyticLaw.lognormal((1 - D) / a, D / a)


def _cov_integral(rate: RateFunction, s, t, t2, D):
    if min(t, t2) <= s:
        return 0.0
    f = lambda r: math.exp(-rate.integral(r, t) - rate.integral(r, t2))
    return 2 * D * integrate.quad(f, s, min(t, t2), epsabs=1e-12, epsrel=1e-10, limit=200)[0]


def parametric_ou_moments(
    rate: RateFunction, y0: float, sigma0_sq: float, s: float, t: float, t2: float, diffusion_d: float
) -> tuple[float, float]:
    """Mean at ``t`` and covariance between ``t`` and ``t2`` of ``dY = -alpha(t) Y dt + dW``.

    ``Y(s)`` has mean ``y0`` and variance ``sigma0_sq``.
    """
    if t < s or t2 < s:
        raise GrowthSdeError("need t, t2 >= s")
    if sigma0_sq < 0:
        raise ValueError("sigma0_sq must be nonnegative")
    mean = y0 * math.exp(-rate.integral(s, t))
    cov = sigma0_sq * math.exp(-rate.integral(s, t) - rate.integral(s, t2))
    cov += _cov_integral(rate, s, t, t2, diffusion_d)
    return mean, cov


def parametric_transition(rate: RateFunction, y: float, s: float, t: float, diffusion_d: float) -> AnalyticLaw:
    """Log-normal law of ``X = e^Y`` given ``X(s) = y`` for the parametric process.

    Mean, variance and median follow from the log-normal family; in particular
    the median is ``y^{e^{-int alpha}}``.
    """
    if not t > s:
        raise GrowthSdeError("transition needs t > s")
    if not y > 0:
        raise ValueError("y must be positive")
    mean = math.exp(-rate.integral(s, t)) * math.log(y)
    var = _cov_integral(rate, s, t, t, diffusion_d)
    return AnalyticLaw.lognormal(mean, var)


def parametric_ou_field(rate: RateFunction) -> CoefficientField:
    """``a = -alpha(t) y``, ``b = 1``."""
    one = lambda y, t: np.ones_like(np.asarray(y, dtype=float))
    zero = lambda y, t: np.zeros_like(np.asarray(y, dtype=float))
    return CoefficientField(
        a=lambda y, t: -rate.alpha_t(t) * y, b=one, b_x=zero, b_xx=zero,
        a_x=lambda y, t: -rate.alpha_t(t) + 0.0 * y,
        time_independent=False, name="parametric-ou", anchor=0.0, bracket=(-3.0, 3.0),
    )


def parametric_gompertz_field(rate: RateFunction, diffusion_d: float) -> CoefficientField:
    """Field of ``X = e^Y`` with ``Y`` the parametric OU process.

    The Itô rule gives ``a = x (D - alpha(t) ln x)`` and ``b = x``.  At
    ``D = 1`` this is the unit-growth form ``x (1 - alpha(t) ln x)``.
    """
    D = diffusion_d
    return CoefficientField(
        a=lambda x, t: x * (D - rate.alpha_t(t) * np.log(x)),
        b=lambda x, t: np.asarray(x, dtype=float) * 1.0,
        b_x=lambda x, t: np.ones_like(np.asarray(x, dtype=float)),
        b_xx=lambda x, t: np.zeros_like(np.asarray(x, dtype=float)),
        domain=(0.0, math.inf), time_independent=False, name="parametric-gompertz",
        anchor=1.0, bracket=(0.05, 20.0),
    )
