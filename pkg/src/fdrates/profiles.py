"""Barenblatt solutions, generalized stationary profiles, and rescaling maps.

The stationary profiles of the rescaled flow are V_D(x) = (D+|x|^2)^(1/(m-1)),
D > 0.  In original variables the Barenblatt solutions are obtained from V_D
by the time-dependent rescaling r(tau) = R(tau) whose form depends on the
regime (global growth for m > m_c, finite-time extinction for m < m_c,
exponential for m = m_c).  This module also provides the truncated mass
defect int (v - V_D) dx and the bisection that matches D to initial data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exponents import ExponentSet
from .numerics import RadialField, cell_volumes, sphere_area

__all__ = [
    "Profile",
    "WeightedMeasure",
    "RescalingMap",
    "ExtinctionError",
    "MassDefect",
    "eval_profile",
    "eval_barenblatt",
    "to_selfsimilar",
    "from_selfsimilar",
    "mass_defect",
    "solve_D",
]


class ExtinctionError(ValueError):
    """Evaluation requested at or past the extinction time (m < m_c)."""

    def __init__(self, tau, T):
        super().__init__(f"tau = {tau} is not before the extinction time T = {T}")
        self.tau = tau
        self.T = T


@dataclass(frozen=True)
class Profile:
    """Generalized Barenblatt profile V_D(x) = (D+|x|^2)^(1/(m-1))."""

    exponents: ExponentSet
    D: float

    def __post_init__(self):
        if not self.D > 0:
            raise ValueError(f"D must be positive, got {self.D}")

    def __call__(self, r):
        return eval_profile(self, r)


def eval_profile(p: Profile, r):
    """V_D at radius r >= 0 (scalar or array): (D + r^2)^(1/(m-1))."""
    r = np.asarray(r, dtype=float)
    out = (p.D + r**2) ** float(p.exponents.alpha)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WeightedMeasure:
    """Measure (D+|x|^2)^power dx on R^d; power = alpha-1 and alpha are the
    two weights of the Hardy-Poincare inequality."""

    exponents: ExponentSet
    power: float
    D: float = 1.0

    def weight(self, r):
        r = np.asarray(r, dtype=float)
        out = (self.D + r**2) ** float(self.power)
        return float(out) if out.ndim == 0 else out

    @property
    def is_finite(self) -> bool:
        """Total mass finite iff 2*power + d < 0; for power = alpha-1 this is
        exactly alpha < alpha_star, the condition for the mean-zero constraint."""
        return 2.0 * float(self.power) + self.exponents.d < 0

    def integral(self, f: RadialField) -> float:
        w = cell_volumes(f.grid)
        phi = f.values * self.weight(f.grid.nodes)
        return sphere_area(f.grid.d) * float(np.sum(w * phi))


@dataclass(frozen=True)
class RescalingMap:
    """Self-similar change of variables between original (tau, y, u) and
    rescaled (t, x, v) coordinates, with v = R(tau)^d u."""

    exponents: ExponentSet
    T: float = 1.0

    def __post_init__(self):
        if self.T < 0:
            raise ValueError(f"time origin T must be nonnegative, got {self.T}")

    def _regime_data(self):
        e = self.exponents
        return float(e.m), float(e.m_c), e.d

    def R(self, tau: float) -> float:
        """Regime-resolved rescaling radius R(tau)."""
        m, m_c, d = self._regime_data()
        if m > m_c:
            if self.T + tau <= 0:
                raise ValueError(f"T + tau must be positive, got {self.T + tau}")
            return (self.T + tau) ** (1.0 / (d * (m - m_c)))
        if m < m_c:
            if tau >= self.T:
                raise ExtinctionError(tau, self.T)
            return (self.T - tau) ** (-1.0 / (d * (m_c - m)))
        return math.exp(tau)

    def space_factor(self) -> float:
        """sqrt((1-m)/(2d|m-m_c|)), the x = c*y/R coefficient; 1/sqrt(d) at m=m_c."""
        m, m_c, d = self._regime_data()
        if m == m_c:
            return 1.0 / math.sqrt(d)
        return math.sqrt((1.0 - m) / (2.0 * d * abs(m - m_c)))


def eval_barenblatt(map: RescalingMap, D: float, tau: float, y) -> float:
    """Barenblatt solution U_(D,T)(tau, y) in original variables.

    Satisfies R(tau)^d * U = V_D(x) with x from to_selfsimilar; the positive
    part truncation of the m > 1 family is never active for m < 1.
    """
    R = map.R(tau)
    y = np.asarray(y, dtype=float)
    rho = math.sqrt(float(np.sum(y**2)))
    x = map.space_factor() * rho / R
    v = eval_profile(Profile(exponents=map.exponents, D=D), x)
    return float(v) / R ** map.exponents.d


def to_selfsimilar(map: RescalingMap, tau: float, y, u_value: float):
    """Map original variables (tau, y, u) to rescaled (t, x, v).

    t = ((1-m)/2) log(R(tau)/R(0)); x = space_factor * y/R(tau); v = R^d u.
    For m = m_c these reduce to t = tau/d and x = e^(-tau) y/sqrt(d).
    """
    m = float(map.exponents.m)
    R = map.R(tau)
    R0 = map.R(0.0)
    t = 0.5 * (1.0 - m) * math.log(R / R0)
    x = map.space_factor() * np.asarray(y, dtype=float) / R
    v = R ** map.exponents.d * u_value
    return t, x, v


def from_selfsimilar(map: RescalingMap, t: float, x, v_value: float):
    """Inverse of to_selfsimilar; round-trips to 1e-12 relative error."""
    m, m_c, d = float(map.exponents.m), float(map.exponents.m_c), map.exponents.d
    R0 = map.R(0.0)
    R = R0 * math.exp(2.0 * t / (1.0 - m))
    if m > m_c:
        tau = R ** (d * (m - m_c)) - map.T
    elif m < m_c:
        tau = map.T - R ** (-(d * (m_c - m)))
    else:
        tau = d * t
    y = np.asarray(x, dtype=float) * R / map.space_factor()
    u = v_value / R**d
    return tau, y, u


@dataclass(frozen=True)
class MassDefect:
    """Truncated mass defect with an estimated truncation-tail bound."""

    value: float
    tail_bound: float

    def __float__(self):
        return self.value


def mass_defect(v: RadialField, p: Profile) -> MassDefect:
    """int over the ball of radius R_max of (v - V_D) dx, by trapezoidal
    quadrature, with a tail bound estimated from the last-cell decay rate.

    The difference v - V_D is integrated directly (never each term alone),
    which stays meaningful for m < m_c where V_D itself is not integrable.
    """
    grid = v.grid
    r = grid.nodes
    diff = v.values - eval_profile(p, r)
    w = cell_volumes(grid)
    sd = sphere_area(grid.d)
    value = sd * float(np.sum(w * diff))

    phi = np.abs(diff) * r ** (grid.d - 1)
    tail = math.inf
    if phi[-1] == 0.0:
        tail = 0.0
    elif phi[-2] > phi[-1] > 0.0 and r[-2] > 0.0:
        q = math.log(phi[-2] / phi[-1]) / math.log(r[-1] / r[-2])
        if q > 1.0:
            tail = sd * phi[-1] * r[-1] / (q - 1.0)
    return MassDefect(value=value, tail_bound=tail)


def solve_D(v0: RadialField, exponents: ExponentSet, D0: float, D1: float,
            tol: float = 1e-10, maxit: int = 200) -> float:
    """Unique D in [D1, D0] with zero truncated mass defect, by bisection.

    The defect is strictly increasing in D (V_D is pointwise decreasing in D),
    so bisection on the bracket is unconditionally safe; raises ValueError if
    the defect has the same sign at both endpoints (the data violates the
    sandwich hypothesis).
    """
    if not D0 > D1 > 0:
        raise ValueError(f"need D0 > D1 > 0, got D0 = {D0}, D1 = {D1}")

    def g(D):
        return mass_defect(v0, Profile(exponents=exponents, D=D)).value

    lo, hi = D1, D0
    glo, ghi = g(lo), g(hi)
    if glo == 0.0:
        return lo
    if ghi == 0.0:
        return hi
    if glo * ghi > 0:
        raise ValueError(
            f"mass defect has the same sign at D1 = {D1} ({glo:.3e}) and "
            f"D0 = {D0} ({ghi:.3e}); no root in the bracket"
        )
    for _ in range(maxit):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if abs(gm) <= tol:
            return mid
        if gm * glo < 0:
            hi = mid
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)
