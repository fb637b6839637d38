"""Closed-form spectrum of the linearized fast-diffusion operator.

The operator L f = -(D+|x|^2)^(1-alpha) div((D+|x|^2)^alpha grad f) on
L^2((D+|x|^2)^(alpha-1) dx) has continuous spectrum [lambda_cont, inf) with
lambda_cont = (d+2*alpha-2)^2/4 and a finite family of discrete eigenvalues

    lambda_(l,k) = -2*alpha*(l+2k) - 4k(k+l+d/2-1)

indexed by the spherical-harmonic sector l and radial index k, admissible for
(l,k) != (0,0) and l+2k-1 < -(d+2*alpha)/2.  Eigenfunctions are
r^l * (polynomial in r^2) obtained from hypergeometric series termination.
All arithmetic stays in exact rationals when alpha is rational.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np

from .exponents import lambda_continuum, sharp_rate
from .numerics import RadialField, RadialGrid

__all__ = [
    "EigenMode",
    "SpectralReport",
    "ImprovedConstant",
    "sharp_constant",
    "continuum_bottom",
    "discrete_mode",
    "improved_constant",
    "spectrum_report",
    "multiplicity",
    "mode_field",
    "ode_residual",
]


def sharp_constant(d: int, alpha):
    """Sharp Hardy-Poincare constant Lambda(alpha, d) (piecewise closed form)."""
    return sharp_rate(d, alpha)


def continuum_bottom(d: int, alpha):
    """Bottom of the continuous spectrum, (d+2*alpha-2)^2/4."""
    return lambda_continuum(d, alpha)


def multiplicity(d: int, l: int) -> int:
    """Dimension M_l of the sector-l spherical harmonics.

    M_l = (d+l-3)! (d+2l-2) / (l! (d-2)!) for d >= 2, with M_0 = 1; in
    dimension one the only sectors are the even/odd parities, M_0 = M_1 = 1.
    """
    if l < 0:
        raise ValueError(f"l must be nonnegative, got {l}")
    if l == 0:
        return 1
    if d == 1:
        return 1 if l == 1 else 0
    return (math.factorial(d + l - 3) * (d + 2 * l - 2)) // (
        math.factorial(l) * math.factorial(d - 2)
    )


def _rational(x):
    return Fraction(x) if isinstance(x, Rational) else None


@dataclass(frozen=True)
class EigenMode:
    """One discrete mode (l, k) with its eigenvalue and radial polynomial.

    radial_poly lists the k+1 coefficients (c_0, ..., c_k) of the radial part
    v(r) = r^l * (c_0 + c_1 r^2 + ... + c_k r^(2k)); coefficients are exact
    Fractions when alpha is rational.
    """

    d: int
    alpha: object
    l: int
    k: int
    lam: object
    admissible: bool
    below_continuum: bool
    multiplicity: int
    radial_poly: tuple


def discrete_mode(d: int, alpha, l: int, k: int) -> EigenMode:
    """Eigenvalue, admissibility, multiplicity and radial polynomial of (l, k).

    The polynomial comes from the termination of the hypergeometric series
    with parameters a = -k, b = l + alpha + d/2 - 1 + k, c = l + d/2 in the
    variable s = -r^2: coefficients obey
    c_(j+1) = c_j (j+a)(j+b) / ((j+1)(j+c)).
    """
    if l < 0 or k < 0:
        raise ValueError("l and k must be nonnegative")
    ae = _rational(alpha)
    a = ae if ae is not None else float(alpha)
    if not a < 0:
        raise ValueError(f"alpha must be negative, got {alpha}")
    half_d = Fraction(d, 2) if ae is not None else d / 2.0
    n = l + 2 * k
    lam = -2 * a * n - 4 * k * (k + l + half_d - 1)

    if d >= 2:
        admissible = (l, k) != (0, 0) and (n - 1) < -(d + 2 * a) / 2
    else:
        admissible = l <= 1 and n >= 1 and n <= Fraction(1, 2) - a if ae is not None \
            else (l <= 1 and n >= 1 and n <= 0.5 - a)
    below = lam < lambda_continuum(d, a)

    # hypergeometric termination recurrence, then s = -r^2 sign flip
    ha = -k if ae is not None else float(-k)
    hb = l + a + half_d - 1 + k
    hc = l + half_d
    coeffs = [Fraction(1) if ae is not None else 1.0]
    for j in range(k):
        coeffs.append(coeffs[-1] * (j + ha) * (j + hb) / ((j + 1) * (j + hc)))
    radial = tuple(c * (-1) ** j for j, c in enumerate(coeffs))

    return EigenMode(d=d, alpha=a, l=l, k=k, lam=lam, admissible=bool(admissible),
                     below_continuum=bool(below), multiplicity=multiplicity(d, l),
                     radial_poly=radial)


@dataclass(frozen=True)
class ImprovedConstant:
    """Constant of the unconstrained (improved) inequality, with a flag marking
    alpha in (-d, -(d+2)/2) where the (0,1) eigenvalue sits strictly below the
    reported value (the definition keeps the continuum bottom there)."""

    value: object
    discrepancy_flag: bool

    def __float__(self):
        return float(self.value)


def improved_constant(d: int, alpha) -> ImprovedConstant:
    """Unconstrained sharp constant: -4*alpha-2d for alpha < -d, else the
    continuum bottom; requires d >= 2 and alpha < -d/2."""
    if d < 2:
        raise ValueError("improved constant defined for d >= 2")
    ae = _rational(alpha)
    a = ae if ae is not None else float(alpha)
    if not a < -Fraction(d, 2):
        raise ValueError(f"requires alpha < -d/2, got alpha = {alpha}")
    if a < -d:
        value = -4 * a - 2 * d
    else:
        value = lambda_continuum(d, a)
    flag = -d < a < -Fraction(d + 2, 2)
    return ImprovedConstant(value=value, discrepancy_flag=bool(flag))


@dataclass(frozen=True)
class SpectralReport:
    """Spectral summary for one (d, alpha): sharp constant, continuum bottom,
    improved constant, gap source, mode table, and the constraint flag."""

    d: int
    alpha: object
    sharp_constant: object
    continuum_bottom: object
    improved_constant: object  # None when alpha >= -d/2 or d < 2
    gap_source: tuple  # ("continuum",) or ("mode", l, k)
    modes: tuple
    constraint_needed: bool


def spectrum_report(d: int, alpha, l_max: int = 3, k_max: int = 3) -> SpectralReport:
    """Enumerate modes with l <= l_max, k <= k_max and locate the spectral gap.

    When l_max, k_max >= 1 the minimum of the continuum bottom and the
    admissible below-continuum eigenvalues is checked against the closed-form
    sharp constant (the gap source is always the continuum, the translation
    mode (1,0), or the dilation mode (0,1)).
    """
    ae = _rational(alpha)
    a = ae if ae is not None else float(alpha)
    sharp = sharp_constant(d, a)
    cont = lambda_continuum(d, a)
    modes = tuple(
        discrete_mode(d, a, l, k)
        for l in range(l_max + 1)
        for k in range(k_max + 1)
    )
    best = ("continuum",)
    best_lam = cont
    for mo in modes:
        if mo.admissible and mo.below_continuum and mo.lam < best_lam:
            best_lam = mo.lam
            best = ("mode", mo.l, mo.k)
    a_star = Fraction(-(d - 2), 2)
    constraint_needed = a < a_star
    if l_max >= 1 and k_max >= 1 and d >= 2:
        if abs(float(best_lam) - float(sharp)) > 1e-9 * max(1.0, abs(float(sharp))):
            raise AssertionError(
                f"spectral minimum {best_lam} disagrees with the closed form {sharp}"
            )
    try:
        improved = improved_constant(d, a)
    except ValueError:
        improved = None
    return SpectralReport(d=d, alpha=a, sharp_constant=sharp, continuum_bottom=cont,
                          improved_constant=improved, gap_source=best, modes=modes,
                          constraint_needed=constraint_needed)


def mode_field(mode: EigenMode, grid: RadialGrid) -> RadialField:
    """Sample the radial eigenfunction r^l * poly(r^2) on a grid."""
    r = grid.nodes
    poly = np.zeros_like(r)
    for j, c in enumerate(reversed(mode.radial_poly)):
        poly = poly * r**2 + float(c)
    values = r ** mode.l * poly
    return RadialField(grid=grid, values=values, l=mode.l)


def ode_residual(d: int, alpha, l: int, k: int, radii=None, dps: int = 50) -> float:
    """Max absolute residual of the radial eigen-ODE at sample radii (D = 1):

        v'' + ((d-1)/r + 2 alpha r/(1+r^2)) v' + (lam/(1+r^2) - l(l+d-2)/r^2) v = 0

    evaluated in mpmath arithmetic with exact polynomial coefficients.
    """
    import mpmath as mp

    mode = discrete_mode(d, alpha, l, k)
    ae = _rational(alpha)
    if ae is None:
        raise ValueError("ode_residual requires rational alpha for exact coefficients")

    # exact coefficients of v, v', v'' as polynomials sum c_j r^(l+2j-shift)
    pv = {l + 2 * j: Fraction(c) for j, c in enumerate(mode.radial_poly)}

    def deriv(p):
        return {e - 1: e * c for e, c in p.items() if e != 0}

    pv1 = deriv(pv)
    pv2 = deriv(pv1)

    if radii is None:
        radii = [Fraction(i, 10) for i in range(1, 51)]

    with mp.workdps(dps):
        lam = mp.mpf(mode.lam.numerator) / mp.mpf(mode.lam.denominator)
        al = mp.mpf(ae.numerator) / mp.mpf(ae.denominator)

        def pev(p, r):
            return mp.fsum(
                (mp.mpf(c.numerator) / mp.mpf(c.denominator)) * r**e
                for e, c in p.items()
            )

        worst = mp.mpf(0)
        for rq in radii:
            r = mp.mpf(Fraction(rq).numerator) / mp.mpf(Fraction(rq).denominator)
            v, v1, v2 = pev(pv, r), pev(pv1, r), pev(pv2, r)
            res = (
                v2
                + ((d - 1) / r + 2 * al * r / (1 + r**2)) * v1
                + (lam / (1 + r**2) - l * (l + d - 2) / r**2) * v
            )
            worst = max(worst, abs(res))
        return float(worst)
