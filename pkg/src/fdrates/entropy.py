"""Entropy-method functionals and estimates.

Relative entropy F, relative Fisher information I, the relative bounds
h1/h2/h, the X/Y comparison functions with their root h_star, the
linear-nonlinear sandwich bounds, exponential/algebraic rate fitting, the
Gronwall comparison ODE, and the variational sharpness quotient.

All functionals are evaluated in the relative variable x = v/V_D - 1; the
identity V_D^(m-1) = D + r^2 (exact, since alpha(m-1) = 1) makes every weight
a plain power of D + r^2.  Working in x instead of v keeps the integrands
accurate when v - V_D underflows relative to V_D far in the tail, which is
essential on the very large domains of critical-case runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .exponents import ExponentSet
from .numerics import RadialField, RadialGrid, cell_volumes, face_geometry, sphere_area
from .profiles import Profile

__all__ = [
    "EntropyTrace",
    "FitResult",
    "GronwallParams",
    "SandwichReport",
    "relative_entropy",
    "fisher_information",
    "h_statistics",
    "xy_functions",
    "h_star",
    "check_sandwich_bounds",
    "fit_rate",
    "gronwall_bound",
    "calibrate_uniform_constant",
    "variational_quotient",
    "entropy_from_x",
    "fisher_from_x",
    "sandwich_from_x",
    "mass_defect_from_x",
]


# ---------------------------------------------------------------------------
# functionals in the relative variable x = v/V_D - 1


def _phi(x, m):
    """Entropy integrand factor: F = int phi(x) V_D^m dx.

    phi(x) = (x - ((1+x)^m - 1)/m)/(1-m), with the m = 0 limit x - log1p(x)
    and a cubic Taylor branch for small x to avoid cancellation.
    """
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-4
    xs = np.where(small, 0.0, x)
    if m == 0.0:
        gen = xs - np.log1p(xs)
    else:
        gen = (xs - np.expm1(m * np.log1p(xs)) / m) / (1.0 - m)
    ser = 0.5 * x * x * (1.0 + (m - 2.0) * x / 3.0)
    return np.where(small, ser, gen)


def _pressure(x, w2, m):
    """p = V^(m-1) ((1+x)^(m-1) - 1)/(m-1) with V^(m-1) = w2 = D + r^2."""
    return w2 * np.expm1((m - 1.0) * np.log1p(x)) / (m - 1.0)


def entropy_from_x(x: np.ndarray, grid: RadialGrid, p: Profile) -> float:
    """Relative entropy F[v] with v = V_D (1 + x)."""
    m = float(p.exponents.m)
    alpha = float(p.exponents.alpha)
    w = cell_volumes(grid)
    w2 = p.D + grid.nodes**2
    return sphere_area(grid.d) * float(np.sum(w * w2 ** (alpha * m) * _phi(x, m)))


def fisher_from_x(x: np.ndarray, grid: RadialGrid, p: Profile) -> float:
    """Relative Fisher information I[v] = int |grad p|^2 v dx, face quadrature."""
    m = float(p.exponents.m)
    alpha = float(p.exponents.alpha)
    r = grid.nodes
    g, h = face_geometry(grid)
    w2 = p.D + r**2
    V = w2**alpha
    pr = _pressure(x, w2, m)
    vbar = 0.5 * (V[:-1] * (1.0 + x[:-1]) + V[1:] * (1.0 + x[1:]))
    return sphere_area(grid.d) * float(np.sum(g * vbar * np.diff(pr) ** 2 / h))


def mass_defect_from_x(x: np.ndarray, grid: RadialGrid, p: Profile) -> float:
    """Truncated mass defect int (v - V_D) dx = int V_D x dx."""
    alpha = float(p.exponents.alpha)
    w = cell_volumes(grid)
    V = (p.D + grid.nodes**2) ** alpha
    return sphere_area(grid.d) * float(np.sum(w * V * x))


@dataclass(frozen=True)
class SandwichReport:
    """Slacks of the linear-nonlinear comparison bounds (all >= 0 when the
    bounds hold): h^(m-2) J <= 2F <= h^(2-m) J and
    grad-norm <= (1+X(h)) I + Y(h) J, where J = int f^2 dmu_(alpha-1) and
    f = (v/V_D - 1) V_D^(m-1)."""

    entropy: float
    fisher: float
    f_norm: float
    grad_norm: float
    h1: float
    h2: float
    h: float
    slack_entropy_lower: float
    slack_entropy_upper: float
    slack_fisher: float

    @property
    def all_nonnegative(self) -> bool:
        return (self.slack_entropy_lower >= 0 and self.slack_entropy_upper >= 0
                and self.slack_fisher >= 0)


def sandwich_from_x(x: np.ndarray, grid: RadialGrid, p: Profile) -> SandwichReport:
    """Evaluate both sandwich bounds at the state v = V_D (1 + x)."""
    exps = p.exponents
    m = float(exps.m)
    alpha = float(exps.alpha)
    r = grid.nodes
    w = cell_volumes(grid)
    g, hf = face_geometry(grid)
    w2 = p.D + r**2

    f = x * w2  # (w-1) V^(m-1)
    J = sphere_area(grid.d) * float(np.sum(w * f**2 * w2 ** (alpha - 1.0)))
    mid = 0.5 * (r[:-1] + r[1:])
    grad = sphere_area(grid.d) * float(
        np.sum(g * np.diff(f) ** 2 / hf * (p.D + mid**2) ** alpha)
    )
    F = entropy_from_x(x, grid, p)
    I = fisher_from_x(x, grid, p)

    h1 = float(1.0 + np.min(x))
    h2 = float(1.0 + np.max(x))
    h = max(h2, 1.0 / h1)
    X, Y = xy_functions(h, exps)
    return SandwichReport(
        entropy=F, fisher=I, f_norm=J, grad_norm=grad, h1=h1, h2=h2, h=h,
        slack_entropy_lower=2.0 * F - h ** (m - 2.0) * J,
        slack_entropy_upper=h ** (2.0 - m) * J - 2.0 * F,
        slack_fisher=(1.0 + X) * I + Y * J - grad,
    )


# ---------------------------------------------------------------------------
# public functionals on absolute fields


def _to_x(v: RadialField, p: Profile):
    V = (p.D + v.grid.nodes**2) ** float(p.exponents.alpha)
    if np.any(v.values <= 0):
        raise ValueError("field must be strictly positive")
    return v.values / V - 1.0


def relative_entropy(v: RadialField, p: Profile) -> float:
    """Relative entropy F[v] >= 0, zero iff v = V_D on the grid."""
    return entropy_from_x(_to_x(v, p), v.grid, p)


def fisher_information(v: RadialField, p: Profile) -> float:
    """Relative Fisher information I[v] >= 0, zero iff v = V_D on the grid."""
    return fisher_from_x(_to_x(v, p), v.grid, p)


def h_statistics(v: RadialField, p: Profile):
    """(h1, h2, h) = (inf w, sup w, max(h2, 1/h1)) with w = v/V_D."""
    x = _to_x(v, p)
    h1 = float(1.0 + np.min(x))
    h2 = float(1.0 + np.max(x))
    return h1, h2, max(h2, 1.0 / h1)


def check_sandwich_bounds(v: RadialField, p: Profile) -> SandwichReport:
    """Evaluate the entropy and Fisher sandwich bounds at a state."""
    return sandwich_from_x(_to_x(v, p), v.grid, p)


def xy_functions(h: float, exponents: ExponentSet):
    """Comparison functions X(h) = h^(5-2m) - 1 and
    Y(h) = d(1-m)(h^(4(2-m)) - 1); X(1) = Y(1) = 0."""
    if h < 1.0:
        raise ValueError(f"h must be >= 1, got {h}")
    m = float(exponents.m)
    d = exponents.d
    X = h ** (5.0 - 2.0 * m) - 1.0
    Y = d * (1.0 - m) * (h ** (4.0 * (2.0 - m)) - 1.0)
    return X, Y


def h_star(exponents: ExponentSet, Lambda: float) -> float:
    """Unique h > 1 with Y(h) = Lambda (Y is strictly increasing, Y(1) = 0)."""
    if not Lambda > 0:
        raise ValueError(f"Lambda must be positive, got {Lambda}")

    def g(h):
        return xy_functions(h, exponents)[1] - Lambda

    hi = 2.0
    while g(hi) < 0:
        hi *= 2.0
        if hi > 1e12:
            raise RuntimeError("failed to bracket h_star")
    return brentq(g, 1.0, hi, xtol=1e-13)


# ---------------------------------------------------------------------------
# traces and rate fitting


@dataclass(frozen=True)
class FitResult:
    rate: float
    r2: float
    window: tuple
    kind: str
    n_samples: int


@dataclass
class EntropyTrace:
    """Time series (t, F, I, h1, h2, mass defect) from a flow run."""

    t: np.ndarray
    entropy: np.ndarray
    fisher: np.ndarray
    h1: np.ndarray
    h2: np.ndarray
    mass_defect: np.ndarray
    exponents: Optional[ExponentSet] = None
    D: Optional[float] = None
    fitted: Optional[FitResult] = None
    sandwich: tuple = field(default_factory=tuple)

    COLUMNS = ("t", "entropy", "fisher", "h1", "h2", "mass_defect")

    def rows(self):
        return zip(self.t, self.entropy, self.fisher, self.h1, self.h2,
                   self.mass_defect)


def fit_rate(trace: EntropyTrace, window, kind: str = "exp",
             floor: float = 0.0) -> FitResult:
    """Fit the entropy decay over a time window.

    kind "exp" fits log F = a - rate*t and returns the decay rate (positive
    for decaying F); kind "loglog" fits log F = a + slope*log t and returns
    the algebraic slope (negative for decaying F).  Windows with fewer than
    10 positive samples, or samples within 10x of the quadrature floor, are
    refused.
    """
    t0, t1 = window
    mask = (trace.t >= t0) & (trace.t <= t1) & (trace.entropy > 0)
    t = trace.t[mask]
    F = trace.entropy[mask]
    if len(t) < 10:
        raise ValueError(f"window {window} has {len(t)} usable samples; need >= 10")
    if floor > 0 and np.any(F < 10.0 * floor):
        raise ValueError("window reaches within 10x of the quadrature floor")
    y = np.log(F)
    if kind == "exp":
        xcol = t
    elif kind == "loglog":
        if np.any(t <= 0):
            raise ValueError("loglog fit needs strictly positive times")
        xcol = np.log(t)
    else:
        raise ValueError(f"unknown fit kind {kind!r}")
    M = np.column_stack([xcol, np.ones_like(xcol)])
    coef, *_ = np.linalg.lstsq(M, y, rcond=None)
    resid = y - M @ coef
    ss_res = float(np.sum(resid**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    slope = float(coef[0])
    rate = -slope if kind == "exp" else slope
    return FitResult(rate=rate, r2=r2, window=(float(t0), float(t1)), kind=kind,
                     n_samples=int(len(t)))


# ---------------------------------------------------------------------------
# Gronwall comparison ODE


@dataclass(frozen=True)
class GronwallParams:
    """Parameters of the comparison ODE
    dG/dt = -2 (Lambda - Y(h)) / ((1+X(h)) h^(2-m)) G with h = 1 + C G^e."""

    exponents: ExponentSet
    Lambda: float
    C_unif: float = 0.0

    def __post_init__(self):
        if self.C_unif < 0:
            raise ValueError("C_unif must be nonnegative")

    @property
    def e_unif(self) -> float:
        m, d = float(self.exponents.m), self.exponents.d
        return (1.0 - m) / (d + 2.0 - (d + 1.0) * m)

    @property
    def h_star(self) -> float:
        return h_star(self.exponents, self.Lambda)


def calibrate_uniform_constant(trace: EntropyTrace,
                               exponents: ExponentSet) -> float:
    """Smallest C with h(t) <= 1 + C F(t)^e along the whole trace:
    max over rows of (h - 1) F^(-e)."""
    e = GronwallParams(exponents=exponents, Lambda=1.0).e_unif
    h = np.maximum(trace.h2, 1.0 / trace.h1)
    mask = trace.entropy > 0
    if not np.any(mask):
        raise ValueError("trace has no rows with positive entropy")
    return float(np.max((h[mask] - 1.0) * trace.entropy[mask] ** (-e)))


def gronwall_bound(F0: float, h0: float, params: GronwallParams,
                   t_end: float, dt: float):
    """Integrate the comparison ODE by classical RK4 from G(0) = F0.

    Requires h0 < h_star (the regime where Lambda - Y(h) > 0); with C = 0 the
    solution is exactly F0 e^(-2 Lambda t).  Returns (t, G) arrays.
    """
    if F0 < 0:
        raise ValueError("F0 must be nonnegative")
    hs = params.h_star
    if not h0 < hs:
        raise ValueError(f"h0 = {h0} must be below h_star = {hs}")
    m = float(params.exponents.m)
    e = params.e_unif
    Lam, C = params.Lambda, params.C_unif

    def rhs(G):
        if G <= 0.0:
            return 0.0
        h = 1.0 + C * G**e
        X, Y = xy_functions(h, params.exponents)
        return -2.0 * (Lam - Y) / ((1.0 + X) * h ** (2.0 - m)) * G

    n = int(round(t_end / dt))
    t = np.linspace(0.0, n * dt, n + 1)
    G = np.empty(n + 1)
    G[0] = F0
    g = F0
    for i in range(n):
        k1 = rhs(g)
        k2 = rhs(g + 0.5 * dt * k1)
        k3 = rhs(g + 0.5 * dt * k2)
        k4 = rhs(g + dt * k3)
        g = g + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        G[i + 1] = g
    return t, G


# ---------------------------------------------------------------------------
# variational sharpness quotient


def variational_quotient(f: RadialField, n: int, p: Profile) -> float:
    """Fisher/entropy ratio of the perturbed profile v_n = V_D (1 + f V^(1-m)/n).

    f is first projected to mean zero in dmu_(alpha-1); as n grows the
    quotient converges (at rate O(1/n)) to a multiple of the Rayleigh quotient
    of f, the multiple being the same for every f.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    grid = f.grid
    exps = p.exponents
    alpha = float(exps.alpha)
    w2 = p.D + grid.nodes**2
    w = cell_volumes(grid)
    mu = w * w2 ** (alpha - 1.0)
    vals = f.values - np.sum(mu * f.values) / np.sum(mu)
    # V^(1-m) = (D+r^2)^(alpha(1-m)) = 1/(D+r^2)
    x = vals / (n * w2)
    if np.any(1.0 + x <= 0):
        raise ValueError(f"perturbation not positive at n = {n}; increase n")
    F = entropy_from_x(x, grid, p)
    I = fisher_from_x(x, grid, p)
    if F == 0.0:
        raise ZeroDivisionError("zero entropy for nonzero perturbation")
    return I / F
