"""Exponents and thresholds for the fast diffusion equation u_t = div(u^(m-1) grad u).

Everything here is closed-form arithmetic in the dimension d and the
diffusion exponent m < 1.  The central quantity is alpha = 1/(m-1) < 0, the
decay exponent of the stationary profile (D + |x|^2)^alpha.  Inputs given as
:class:`fractions.Fraction` (or int) are propagated exactly; floats are
propagated in double precision.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

__all__ = [
    "Regime",
    "ExponentSet",
    "derive_exponents",
    "alpha_to_m",
    "lambda_continuum",
    "sharp_rate",
    "sharp_rate_unconstrained",
]


class Regime(enum.Enum):
    """Range of m relative to the mass-conservation threshold m_c = (d-2)/d.

    VERY_FAST: m < m_c, solutions extinguish in finite time.
    GOOD:      m >= m_c, solutions exist globally (m = m_c included).
    CRITICAL:  m = m_star = (d-4)/(d-2), the borderline where the spectral
               gap of the linearized operator closes.
    """

    VERY_FAST = "very_fast"
    GOOD = "good"
    CRITICAL = "critical"


def _exact(x):
    """Return a Fraction if x is exactly representable as one, else None."""
    if isinstance(x, Rational):
        return Fraction(x)
    return None


@dataclass(frozen=True)
class ExponentSet:
    """All thresholds attached to a pair (d, m), m < 1.

    Attributes
    ----------
    alpha : 1/(m-1), profile decay exponent (negative).
    m_c : (d-2)/d, below which mass is lost in finite time.
    m_star : (d-4)/(d-2), spectral-gap threshold (-inf when d <= 2).
    m_1 : (d-1)/d and m_2 : d/(d+2), thresholds where the sharp constrained
        rate changes analytic form.
    alpha_star, alpha_1, alpha_2 : images of m_star, m_1, m_2 under
        m -> 1/(m-1), i.e. -(d-2)/2, -d, -(d+2)/2.
    regime : classification of m against m_c / m_star.
    log_limit : True when m == 0 (logarithmic diffusion).
    """

    d: int
    m: float
    alpha: float
    m_c: float
    m_star: float
    m_1: float
    m_2: float
    alpha_star: float
    alpha_1: float
    alpha_2: float
    regime: Regime
    log_limit: bool

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d}")
        if not self.m < 1:
            raise ValueError(f"fast diffusion requires m < 1, got m = {self.m}")


def derive_exponents(d: int, m, tol: float = 1e-12) -> ExponentSet:
    """Compute the full exponent/threshold set for dimension d and exponent m < 1.

    m may be a float, int, or Fraction; exact inputs give exact thresholds
    (as Fractions) and exact regime classification.  For float m the critical
    case m == m_star is detected up to the relative tolerance ``tol``.
    """
    d = int(d)
    if d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    me = _exact(m)
    mv = me if me is not None else float(m)
    if not mv < 1:
        raise ValueError(f"fast diffusion requires m < 1, got m = {m}")

    one = Fraction(1)
    alpha = one / (mv - 1) if me is not None else 1.0 / (mv - 1.0)
    m_c = Fraction(d - 2, d)
    if d > 2:
        m_star = Fraction(d - 4, d - 2)
        alpha_star = Fraction(-(d - 2), 2)
    else:
        m_star = -math.inf
        alpha_star = Fraction(0)
    m_1 = Fraction(d - 1, d)
    m_2 = Fraction(d, d + 2)
    alpha_1 = Fraction(-d)
    alpha_2 = Fraction(-(d + 2), 2)

    if me is not None:
        is_critical = d > 2 and mv == m_star
    else:
        is_critical = d > 2 and abs(mv - float(m_star)) <= tol * max(1.0, abs(float(m_star)))
    if is_critical:
        regime = Regime.CRITICAL
    elif mv < m_c:
        regime = Regime.VERY_FAST
    else:
        regime = Regime.GOOD
    log_limit = mv == 0

    def out(x):
        return x if me is not None else float(x)

    return ExponentSet(
        d=d,
        m=mv if me is not None else float(mv),
        alpha=out(alpha) if me is not None else float(alpha),
        m_c=out(m_c),
        m_star=m_star if isinstance(m_star, float) else out(m_star),
        m_1=out(m_1),
        m_2=out(m_2),
        alpha_star=out(alpha_star),
        alpha_1=out(alpha_1),
        alpha_2=out(alpha_2),
        regime=regime,
        log_limit=log_limit,
    )


def alpha_to_m(d: int, alpha):
    """Invert alpha = 1/(m-1): return m = 1 + 1/alpha.  Requires alpha < 0."""
    ae = _exact(alpha)
    av = ae if ae is not None else float(alpha)
    if not av < 0:
        raise ValueError(f"alpha must be negative (m < 1), got alpha = {alpha}")
    if ae is not None:
        return 1 + Fraction(1) / ae
    return 1.0 + 1.0 / av


def lambda_continuum(d: int, alpha):
    """Bottom (d + 2 alpha - 2)^2 / 4 of the continuous spectrum of the
    linearized operator on L^2(d mu_alpha)."""
    ae = _exact(alpha)
    if ae is not None:
        return (d + 2 * ae - 2) ** 2 / Fraction(4)
    return (d + 2.0 * float(alpha) - 2.0) ** 2 / 4.0


def sharp_rate(d: int, alpha):
    """Sharp Hardy-Poincare constant Lambda(alpha, d) for alpha < 0.

    This is the constant in  Lambda * int f^2 dmu_{alpha-1} <= int |grad f|^2 dmu_alpha,
    with the mean-zero constraint int f dmu_{alpha-1} = 0 imposed exactly when
    that measure is finite (alpha < alpha_star = -(d-2)/2).  Raises ValueError
    at the excluded point alpha = alpha_star for d >= 3 (the constant vanishes
    and no gap survives).
    """
    d = int(d)
    ae = _exact(alpha)
    av = ae if ae is not None else float(alpha)
    if not av < 0:
        raise ValueError(f"alpha must be negative, got {alpha}")

    def q(x):  # arithmetic in the input's exactness
        return x if ae is not None else float(x)

    if d >= 3:
        a_star = Fraction(-(d - 2), 2)
        if av == a_star:
            raise ValueError(
                f"alpha = -(d-2)/2 = {a_star} is excluded: the spectral gap closes"
            )
        if av > -Fraction(d + 2, 2):
            if ae is not None:
                return (d - 2 + 2 * ae) ** 2 / Fraction(4)
            return (d - 2.0 + 2.0 * av) ** 2 / 4.0
        if av >= -d:
            return q(-4 * (ae if ae is not None else av) - 2 * d)
        return q(-2 * (ae if ae is not None else av))
    if d == 2:
        if av >= -2:
            return (ae**2 if ae is not None else av * av)
        return q(-2 * (ae if ae is not None else av))
    # d == 1
    if av >= Fraction(-1, 2):
        if ae is not None:
            return (ae - Fraction(1, 2)) ** 2
        return (av - 0.5) ** 2
    return q(-2 * (ae if ae is not None else av))


def sharp_rate_unconstrained(d: int, alpha):
    """Sharp constant Lambda~ without the mean-zero constraint, for alpha < -d/2.

    Equals -4 alpha - 2 d for alpha < -d (where a discrete eigenvalue sits
    below the continuum) and the continuum bottom (d + 2 alpha - 2)^2 / 4 on
    [-d, -d/2).
    """
    d = int(d)
    ae = _exact(alpha)
    av = ae if ae is not None else float(alpha)
    if not av < -Fraction(d, 2):
        raise ValueError(
            f"unconstrained rate requires alpha < -d/2, got alpha = {alpha}"
        )
    if av < -d:
        r = -4 * (ae if ae is not None else av) - 2 * d
        return r if ae is not None else float(r)
    return lambda_continuum(d, alpha)
