"""Radial reduction for spherically symmetric data.

A family is described by a metric a(r)^2 dr^2 + b(r)^2 dOmega^2 and by
the orthonormal components of p: P_nn (radial-radial) and P_T (each
tangential direction). These give the sphere scalars

    H(r) = (n - 1) b'(r) / (a b),    T(r) = tr_S p = (n - 1) P_T(r).

Radial graphs u(r) are integrated in arc-length form with the state
(r, u, beta), beta the angle of the graph against the horizontal:

    r' = cos(beta) / a,   u' = sin(beta),
    beta' = F - (n - 1) (b' / (a b)) sin(beta),

where F is the prescribed mean curvature of the graph.
"""
from __future__ import annotations

from dataclasses import dataclass

import math

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.optimize import bisect, brentq

from .errors import DomainError, NoHorizon, OracleError


@dataclass(frozen=True)
class RadialProfile:
    tag: str
    dim: int
    m: float = 1.0
    sign: int = -1
    r_min: float = 1e-6
    r_max: float = 1e6

    def _check(self, r):
        r = np.asarray(r, float)
        if np.any(r <= self.r_min) or np.any(r > self.r_max):
            raise DomainError(f"radius outside ({self.r_min}, {self.r_max}]")
        return r

    def metric_factors(self, r):
        """Return a, b, db/dr."""
        r = self._check(r)
        if self.tag == "isotropic-schwarzschild":
            psi = 1 + self.m / (2 * r)
            dpsi = -self.m / (2 * r ** 2)
            return psi ** 2, r * psi ** 2, psi ** 2 + 2 * r * psi * dpsi
        one = np.ones_like(r)
        return one, r, one

    def tensor_components(self, r):
        """Return (P_nn, P_T) in an orthonormal frame."""
        r = self._check(r)
        if self.tag == "painleve-gullstrand":
            amp = self.sign * np.sqrt(2 * self.m / r ** 3)
            return -0.5 * amp, amp
        zero = np.zeros_like(r)
        return zero, zero

    def scalar_terms(self, r):
        """Fast float path: (a, (n-1) b'/(a b), P_nn, P_T) at one radius."""
        k = self.dim - 1
        if self.tag == "isotropic-schwarzschild":
            psi = 1 + self.m / (2 * r)
            a = psi * psi
            db = a - self.m * psi / r
            return a, k * db / (a * r * a), 0.0, 0.0
        if self.tag == "painleve-gullstrand":
            amp = self.sign * math.sqrt(2 * self.m / r ** 3)
            return 1.0, k / r, -0.5 * amp, amp
        return 1.0, k / r, 0.0, 0.0

    def area_factor(self, r):
        a, b, _ = self.metric_factors(r)
        return b ** (self.dim - 1)


def radial_profile(tag, m=1.0, dim=3, sign=-1):
    tag = {"pg": "painleve-gullstrand", "iso": "isotropic-schwarzschild",
           "schwarzschild": "isotropic-schwarzschild"}.get(tag, tag)
    if tag not in ("flat", "painleve-gullstrand", "isotropic-schwarzschild"):
        raise DomainError(f"family {tag!r} is not spherically symmetric")
    if not m > 0:
        raise DomainError("mass must be positive")
    return RadialProfile(tag, dim, m, sign)


def radial_scalars(profile: RadialProfile, r):
    """Mean curvature of the coordinate sphere (outward normal) and tr_S p."""
    a, b, db = profile.metric_factors(r)
    _, p_t = profile.tensor_components(r)
    k = profile.dim - 1
    return k * db / (a * b), k * p_t


def expansion(profile, r, mode="generalized"):
    H, T = radial_scalars(profile, r)
    return H - np.abs(T) if mode == "generalized" else H + T


def horizon_radius(profile: RadialProfile, mode="generalized", bracket=None, xtol=1e-13):
    """Outermost root of the horizon condition on coordinate spheres."""
    f = lambda r: float(expansion(profile, r, mode))
    if bracket is None:
        scale = profile.m
        rs = scale * np.geomspace(1e-3, 1e3, 2001)
        vals = expansion(profile, rs, mode)
        change = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
        if len(change) == 0:
            raise NoHorizon(f"no horizon for {profile.tag}")
        i = change[-1]
        bracket = (rs[i], rs[i + 1])
    lo, hi = bracket
    if np.sign(f(lo)) == np.sign(f(hi)):
        raise NoHorizon("bracket has no sign change")
    return bisect(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=400)


def graph_trace(profile, r, slope_angle):
    """tr(p)(u) for a radial graph with angle beta against the horizontal."""
    p_nn, p_t = profile.tensor_components(r)
    return (profile.dim - 1) * p_t + p_nn * np.cos(slope_angle) ** 2


def prescribed_curvature(profile, r, u, beta, t, eps, mode="generalized"):
    tr = graph_trace(profile, r, beta)
    if mode == "generalized":
        return np.sqrt(tr * tr + eps * eps) + t * u
    return -tr + t * u


@dataclass
class RadialSolution:
    r: np.ndarray
    u: np.ndarray
    beta: np.ndarray
    t: float
    eps: float
    outer_angle: float
    inner: str
    _spline: CubicSpline

    def __call__(self, r):
        return self._spline(r)

    def slope(self, r):
        return self._spline(r, 1)


def _rhs(profile, t, eps, mode):
    k = profile.dim - 1
    generalized = mode == "generalized"

    def f(s, y):
        r, u, beta = y
        a, curv, p_nn, p_t = profile.scalar_terms(r)
        c, sn = math.cos(beta), math.sin(beta)
        tr = k * p_t + p_nn * c * c
        F = (math.sqrt(tr * tr + eps * eps) if generalized else -tr) + t * u
        return [-c / a, -sn, -(F - curv * sn)]
    return f


def _shoot(profile, t, eps, r_in, r_out, angle, mode, rtol):
    """Integrate inward from r_out with u = 0 and the given outer angle."""
    f = _rhs(profile, t, eps, mode)
    hit_inner = lambda s, y: y[0] - r_in
    hit_inner.terminal = True
    vertical = lambda s, y: np.pi / 2 - y[2]
    vertical.terminal = True
    backward = lambda s, y: y[2] + np.pi / 2
    backward.terminal = True
    span = 50 * (r_out - r_in) + 50 / max(t, 1e-3)
    return solve_ivp(f, (0, span), [r_out, 0.0, angle], method="DOP853",
                     events=[hit_inner, vertical, backward], rtol=rtol, atol=rtol * 1e-2,
                     dense_output=True, max_step=(r_out - r_in) / 200)


def radial_capillary_solve(profile: RadialProfile, t, eps, r_in, r_out, inner="vertical",
                           mode="generalized", rtol=1e-10):
    """Solve the radial capillary problem with u(r_out) = 0.

    ``inner='vertical'`` asks the graph to meet r = r_in vertically
    (downward), ``inner='neumann'`` asks for a horizontal tangent there.
    The outer angle is found by bisection on the shooting outcome.
    """
    if not 0 < r_in < r_out:
        raise DomainError("need 0 < r_in < r_out")
    if eps <= 0 or t < 0:
        raise DomainError("need eps > 0 and t >= 0")

    def outcome(angle):
        sol = _shoot(profile, t, eps, r_in, r_out, angle, mode, rtol)
        if inner == "vertical":
            # +1: the curve reached r_in before turning vertical
            return 1.0 if len(sol.t_events[0]) else -1.0, sol
        if len(sol.t_events[0]):
            return float(sol.y_events[0][0][2]), sol
        if len(sol.t_events[1]):
            return 1.0, sol
        return -1.0, sol

    angles = np.linspace(-np.pi / 2, np.pi / 2, 25)[1:-1]
    signs = [np.sign(outcome(a)[0]) for a in angles]
    change = [i for i in range(len(angles) - 1)
              if signs[i] != signs[i + 1] and (signs[i] > 0 or inner != "vertical")]
    if not change:
        raise OracleError("shooting interval has no sign change")
    lo, hi = angles[change[-1]], angles[change[-1] + 1]
    if inner == "vertical":
        for _ in range(56):
            mid = 0.5 * (lo + hi)
            if outcome(mid)[0] > 0:
                lo = mid
            else:
                hi = mid
        angle = lo
    elif inner == "neumann":
        angle = brentq(lambda a: outcome(a)[0], lo, hi, xtol=1e-14)
    else:
        raise DomainError(f"unknown inner condition {inner!r}")
    _, sol = outcome(angle)
    s_end = sol.t[-1]
    s = np.linspace(0, s_end, 4000)
    r, u, beta = sol.sol(s)
    order = np.argsort(r)
    r, u, beta = r[order], u[order], beta[order]
    keep = np.concatenate([[True], np.diff(r) > 1e-12])
    r, u, beta = r[keep], u[keep], beta[keep]
    if r[0] > r_in + 1e-3 * (r_out - r_in) and inner == "neumann":
        raise OracleError("shooting did not reach the inner radius")
    return RadialSolution(r, u, beta, t, eps, angle, inner, CubicSpline(r, u))


def scalar_table(profile, radii, mode="generalized"):
    """Rows (r, H, T) for CSV emission."""
    H, T = radial_scalars(profile, np.asarray(radii, float))
    return np.column_stack([radii, H, T])
