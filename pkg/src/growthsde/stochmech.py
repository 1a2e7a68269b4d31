"""Diffusions attached to the stationary states of the quantum harmonic oscillator.

State ``n`` with frequency ``omega`` and length scale ``sigma`` defines a
diffusion with coefficient ``D = omega sigma^2`` and forward velocity::

    v_n(x) = omega sigma sqrt(2) (2 n H_{n-1}(z) / H_n(z) - z),   z = x / (sigma sqrt(2))

The velocity has poles at the zeros of ``H_n``; these act as impenetrable
walls, so each nodal interval carries its own process whose invariant
density is proportional to ``phi_n^2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

from .core import AnalyticLaw, GrowthSdeError, PathEnsemble, TimeGrid, WienerConfig, euler_maruyama
from .transforms import CoefficientField, qho_field

__all__ = [
    "QhoState",
    "PoleError",
    "hermite",
    "nodes",
    "forward_velocity",
    "forward_velocity_derivative",
    "closed_form_velocity",
    "phi_sq",
    "ground_transition",
    "excited1_transition",
    "excited1_conditional_mean",
    "asymptotic_mixture",
    "attractors",
    "deterministic_trajectory",
    "combination_pdf",
    "signed_square_field",
    "signed_square_paths",
    "qho_problem",
]


class PoleError(GrowthSdeError):
    """Velocity evaluated at a node of the wave function."""


@dataclass(frozen=True)
class QhoState:
    """Quantum number ``n`` (0..8), frequency ``omega`` and length scale ``sigma``."""

    n: int
    omega: float = 1.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (isinstance(self.n, (int, np.integer)) and 0 <= self.n <= 8):
            raise ValueError("n must be an integer in 0..8")
        if not (self.omega > 0 and self.sigma > 0):
            raise ValueError("omega and sigma must be positive")

    @property
    def D(self) -> float:
        return self.omega * self.sigma**2


def hermite(n: int, z):
    """Physicists' Hermite polynomial by the three-term recurrence."""
    z = np.asarray(z, dtype=float)
    h_prev, h = np.zeros_like(z), np.ones_like(z)
    for k in range(n):
        h_prev, h = h, 2 * z * h - 2 * k * h_prev
    return h


def _hermite_pair(n, z):
    return hermite(n - 1, z) if n > 0 else np.zeros_like(z), hermite(n, z)


def nodes(state: QhoState) -> np.ndarray:
    """Sorted zeros of ``phi_n`` in ``x``."""
    if state.n == 0:
        return np.array([])
    roots = np.polynomial.hermite.hermroots([0] * state.n + [1])
    roots = np.sort(np.real(roots))
    roots[np.abs(roots) < 1e-14] = 0.0
    return state.sigma * math.sqrt(2) * roots


def _z(state, x):
    return np.asarray(x, dtype=float) / (state.sigma * math.sqrt(2))


def forward_velocity(state: QhoState, x, check_nodes: bool = True):
    """Forward velocity ``v_n(x)``.

    Raises
    ------
    PoleError
        If ``check_nodes`` and some ``x`` sits on a node.
    """
    n = state.n
    z = _z(state, x)
    hm, h = _hermite_pair(n, z)
    if check_nodes and n > 0:
        nd = nodes(state)
        xa = np.atleast_1d(np.asarray(x, dtype=float))
        hit = np.min(np.abs(xa[:, None] - nd[None, :]), axis=1) <= 1e-12 * state.sigma
        if np.any(hit):
            raise PoleError(f"velocity pole at node x = {xa[hit][0]:.12g}")
    with np.errstate(divide="ignore", invalid="ignore"):
        u = 2 * n * hm / h if n > 0 else np.zeros_like(z)
    return state.omega * state.sigma * math.sqrt(2) * (u - z)


def forward_velocity_derivative(state: QhoState, x):
    """``dv_n/dx = omega (2 z u - 2 n - u^2 - 1)`` with ``u = 2 n H_{n-1} / H_n``."""
    n = state.n
    z = _z(state, x)
    hm, h = _hermite_pair(n, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = 2 * n * hm / h if n > 0 else np.zeros_like(z)
    return state.omega * (2 * z * u - 2 * n - u * u - 1)


def closed_form_velocity(state: QhoState, x):
    """Velocities for ``n <= 4`` written out as rational functions of ``x``."""
    w, s2 = state.omega, state.sigma**2
    x = np.asarray(x, dtype=float)
    forms = {
        0: lambda: -w * x,
        1: lambda: -w * x + 2 * w * s2 / x,
        2: lambda: -w * x + 4 * w * s2 * x / (x**2 - s2),
        3: lambda: -w * x + 6 * w * s2 * (x**2 - s2) / (x * (x**2 - 3 * s2)),
        4: lambda: -w * x + 8 * w * s2 * x * (x**2 - 3 * s2) / (x**4 - 6 * s2 * x**2 + 3 * s2**2),
    }
    if state.n not in forms:
        raise ValueError("closed forms exist for n <= 4")
    with np.errstate(divide="ignore", invalid="ignore"):
        return forms[state.n]()


def phi_sq(state: QhoState, x):
    """Normalised ``|phi_n(x)|^2``."""
    n, s = state.n, state.sigma
    z = _z(state, x)
    norm = 2.0**n * math.factorial(n) * math.sqrt(math.pi) * s * math.sqrt(2)
    return hermite(n, z) ** 2 * np.exp(-z * z) / norm


def _ab(state, y, tau):
    a = y * math.exp(-state.omega * tau)
    b2 = state.sigma**2 * -math.expm1(-2 * state.omega * tau)
    return a, b2


def ground_transition(state: QhoState, y: float, s: float, t: float) -> AnalyticLaw:
    """``N(y e^{-omega tau}, sigma^2 (1 - e^{-2 omega tau}))`` for the ground state."""
    if not t > s:
        raise GrowthSdeError("need t > s")
    a, b2 = _ab(state, y, t - s)
    return AnalyticLaw.normal(a, b2) if b2 > 0 else AnalyticLaw.degenerate(a)


def excited1_transition(state: QhoState, x, y: float, s: float, t: float):
    """Transition density of the first excited state, zero on the half-line not containing ``y``.

    For ``y = 0`` the ``alpha -> 0`` limit ``x^2 e^{-x^2/2 beta^2} / (beta^3 sqrt(2 pi))``
    is returned on the whole line.
    """
    if not t > s:
        raise GrowthSdeError("need t > s")
    x = np.asarray(x, dtype=float)
    a, b2 = _ab(state, y, t - s)
    b = math.sqrt(b2)
    c = 1.0 / (b * math.sqrt(2 * math.pi))
    if a == 0.0:
        return x * x / b2 * np.exp(-x * x / (2 * b2)) * c
    # e^{-(x-a)^2/2b^2} - e^{-(x+a)^2/2b^2} = e^{-(x-a)^2/2b^2} (1 - e^{-2ax/b^2})
    diff = np.exp(-((x - a) ** 2) / (2 * b2)) * -np.expm1(-2 * a * x / b2)
    return np.where(x * y > 0, x / a * diff * c, 0.0)


def excited1_conditional_mean(state: QhoState, y: float, t: float) -> float:
    """``E[X(t) | X(0) = y]`` for the first excited state (odd in ``y``)."""
    if y == 0:
        raise ValueError("y must be nonzero")
    if t == 0:
        return float(y)
    a, b2 = _ab(state, abs(y), t)
    b = math.sqrt(b2)
    m = math.sqrt(2 / math.pi) * b * math.exp(-a * a / (2 * b2)) + (a * a + b2) / a * math.erf(a / (b * math.sqrt(2)))
    return math.copysign(m, y)


def asymptotic_mixture(state: QhoState, q: float) -> Callable:
    """Long-time density ``(q Theta(x) + (2 - q) Theta(-x)) phi_1^2(x)``; ``q`` is twice the positive mass."""
    if state.n != 1:
        raise ValueError("the mixture is defined for n = 1")
    if not 0 <= q <= 2:
        raise ValueError("q must lie in [0, 2]")

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, q, np.where(x < 0, 2 - q, 1.0)) * phi_sq(state, x)

    return f


def attractors(state: QhoState) -> np.ndarray:
    """Stable zeros of ``v_n``: one per nodal interval."""
    nd = nodes(state)
    s = state.sigma
    edges = [-12 * s * (1 + state.n), *nd, 12 * s * (1 + state.n)]
    out = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        eps = 1e-9 * s
        f = lambda x: float(forward_velocity(state, x, check_nodes=False))
        out.append(optimize.brentq(f, lo + eps, hi - eps, xtol=1e-15))
    out = np.array(out)
    out[np.abs(out) < 1e-12 * s] = 0.0
    return out


def _log_abs(v):
    return math.log(abs(v)) if v != 0 else -math.inf


def _log_conserved(state):
    """``L(x)`` with ``L(x(t)) = L(y) - k t`` along deterministic trajectories, and ``k``."""
    s2, w = state.sigma**2, state.omega
    if state.n == 2:
        return lambda x: _log_abs(x) + 2 * _log_abs(x * x - 5 * s2), 5 * w
    if state.n == 3:
        r = math.sqrt(57)
        up, um = (9 + r) / 2 * s2, (9 - r) / 2 * s2
        ea = (up - 3 * s2) / (up - um)
        return lambda x: ea * _log_abs(x * x - up) + (1 - ea) * _log_abs(x * x - um), 2 * w
    raise ValueError("conserved quantity tabulated for n = 2, 3")


def deterministic_trajectory(state: QhoState, y: float, t):
    """Noise-free trajectory ``dx/dt = v_n(x)`` from ``y`` for ``n <= 3``.

    ``n = 2, 3`` solve ``L(x) = L(y) - k t`` by bracketing between ``y`` and the
    attractor of its nodal interval.
    """
    w, s = state.omega, state.sigma
    t_arr = np.asarray(t, dtype=float)
    if state.n == 0:
        return y * np.exp(-w * t_arr)
    if state.n == 1:
        if y == 0:
            raise PoleError("y = 0 is a node")
        return math.copysign(1.0, y) * np.sqrt(2 * s * s + (y * y - 2 * s * s) * np.exp(-2 * w * t_arr))
    if state.n > 3:
        raise ValueError("trajectories implemented for n <= 3")
    nd = nodes(state)
    if np.any(np.abs(nd - y) < 1e-12 * s):
        raise PoleError(f"y = {y} is a node")
    att = attractors(state)
    target_att = att[np.searchsorted(nd, y)]
    L, k = _log_conserved(state)
    ly = L(y)

    def solve(tt):
        if tt == 0 or y == target_att:
            return y
        goal = ly - k * tt
        g = lambda x: L(x) - goal
        # approach the attractor until the bracket closes
        gap = target_att - y
        far = y
        for j in range(1, 64):
            near = target_att - gap * 2.0**-j
            if near == target_att:
                break
            if g(near) < 0:
                return optimize.brentq(g, far, near, xtol=1e-15 * max(1.0, abs(target_att)))
            far = near
        # closer to the attractor than float resolution
        return target_att

    out = np.array([solve(float(tt)) for tt in np.atleast_1d(t_arr)])
    return out.reshape(t_arr.shape) if t_arr.ndim else float(out[0])


def combination_pdf(p: Callable, alpha: float | None = None, probe: np.ndarray | None = None):
    """Densities ``f = Theta(x) (x/alpha)(p(x) - p(-x))`` and ``fbar = (x / 2 alpha)(p(x) - p(-x))``.

    Parameters
    ----------
    p : callable
        Density with ``p(x) >= p(-x)`` for ``x >= 0``.
    alpha : float, optional
        Mean of ``p``; computed by quadrature when omitted.

    Raises
    ------
    GrowthSdeError
        If ``alpha == 0`` (symmetric ``p``), the dominance condition fails or
        the results do not integrate to 1.
    """
    if alpha is None:
        alpha = integrate.quad(lambda x: x * p(x), -np.inf, np.inf, epsabs=1e-13, limit=200)[0]
    if abs(alpha) < 1e-12:
        raise GrowthSdeError("alpha = 0: the combination densities are not defined")
    probe = np.linspace(0, 10, 401) if probe is None else np.asarray(probe, dtype=float)
    if np.any(p(probe) < p(-probe) - 1e-14):
        raise GrowthSdeError("p(x) >= p(-x) fails on the probe grid")

    def f(x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, x / alpha * (p(x) - p(-x)), 0.0)

    def fbar(x):
        x = np.asarray(x, dtype=float)
        return x / (2 * alpha) * (p(x) - p(-x))

    mass = integrate.quad(f, 0, np.inf, epsabs=1e-12, limit=200)[0]
    if abs(mass - 1) > 1e-6:
        raise GrowthSdeError(f"f integrates to {mass}, not 1")
    return f, fbar


def signed_square_field(state: QhoState, positive: bool = True) -> CoefficientField:
    """Field of ``Y = X|X|``: ``a = 6 omega sigma^2 sign(y) - 2 omega y``, ``b = 2 sqrt|y|``."""
    w, s2 = state.omega, state.sigma**2
    sg = 1.0 if positive else -1.0
    return CoefficientField(
        a=lambda y, t: 6 * w * s2 * sg - 2 * w * np.asarray(y, dtype=float),
        b=lambda y, t: 2 * np.sqrt(np.abs(y)),
        a_x=lambda y, t: -2 * w + 0 * np.asarray(y, dtype=float),
        b_x=lambda y, t: sg / np.sqrt(np.abs(y)),
        b_xx=lambda y, t: -0.5 / np.abs(y) ** 1.5,
        domain=(0.0, math.inf) if positive else (-math.inf, 0.0),
        name="signed-square",
        anchor=sg * 2 * s2,
        bracket=(0.05 * s2, 20 * s2) if positive else (-20 * s2, -0.05 * s2),
    )


def signed_square_paths(
    state: QhoState, y0: float, grid: TimeGrid, seed: int, n_paths: int, stream: int = 0, workers=None,
    record_points=None,
) -> tuple[PathEnsemble, PathEnsemble]:
    """``Y = X|X|`` two ways: direct simulation of the ``Y`` equation and mapped ``X`` paths.

    Both routes share the seed; each uses reject-and-halve stepping that keeps
    paths on the starting side of 0.

    Returns
    -------
    direct, mapped : PathEnsemble
    """
    if state.n != 1:
        raise ValueError("signed square defined for n = 1")
    if y0 == 0:
        raise PoleError("y0 = 0 is a node")
    cfg = WienerConfig(state.D, seed)
    pos = y0 > 0
    side = (0.0, math.inf) if pos else (-math.inf, 0.0)
    direct = euler_maruyama(signed_square_field(state, pos), y0, grid, cfg, n_paths, stream=stream,
                            workers=workers, record_points=record_points)
    x0 = math.copysign(math.sqrt(abs(y0)), y0)
    xs = euler_maruyama(qho_field(1, state.omega, state.sigma, side), x0, grid, cfg, n_paths, stream=stream,
                        workers=workers, record_points=record_points)
    mapped = PathEnsemble(xs.grid, xs.values * np.abs(xs.values), seed, "signed-square(mapped)",
                          invalid_step=xs.invalid_step)
    return direct, mapped


def qho_problem(state: QhoState, interval: tuple[float, float], edge_gap: float = 1e-6):
    """Fokker-Planck problem on one nodal interval, truncated ``edge_gap * sigma`` from nodes
    and at ``+-(8 + 2 sqrt n) sigma`` for infinite ends."""
    from .fokkerplanck import FpeProblem

    s = state.sigma
    reach = (8 + 2 * math.sqrt(state.n)) * s
    lo, hi = interval
    lo = -reach if not math.isfinite(lo) else lo + edge_gap * s
    hi = reach if not math.isfinite(hi) else hi - edge_gap * s
    D = state.D
    return FpeProblem(
        drift=lambda x: forward_velocity(state, x, check_nodes=False),
        diffusion=lambda x: D + 0 * np.asarray(x, dtype=float),
        domain=(lo, hi),
        drift_x=lambda x: forward_velocity_derivative(state, x),
        diffusion_x=lambda x: 0 * np.asarray(x, dtype=float),
        diffusion_xx=lambda x: 0 * np.asarray(x, dtype=float),
        name=f"qho({state.n})",
    )
