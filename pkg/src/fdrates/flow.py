"""Time integration of the rescaled fast-diffusion flow.

Nonlinear: the radial flux-form equation dv/dt = r^(1-d) d/dr(r^(d-1) v dp/dr)
with pressure p = (v^(m-1) - V_D^(m-1))/(m-1), advanced by backward Euler with
Newton iteration (kernel in fdrates._kernels), no-flux at r = 0 and r = R_max.
Every profile V_D is an exact steady state of the truncated problem and the
truncated mass defect is conserved exactly by the scheme.

The evolving unknown is the relative variable x = v/V_D - 1: on very large
domains (critical-case runs reach R_max ~ e^90) the difference v - V_D is far
below the rounding floor of v, so the conserved defect and the entropy are
only representable in x.

Linear: sector evolution df/dt = -L f discretized by the same P1 forms,
B (df/dt) = -A f with backward Euler.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_banded

from . import _kernels
from .entropy import (EntropyTrace, entropy_from_x, fisher_from_x,
                      mass_defect_from_x, sandwich_from_x)
from .exponents import ExponentSet
from .numerics import (RadialField, RadialGrid, assemble_sector_forms,
                       cell_volumes, face_geometry, sphere_area)
from .profiles import Profile, solve_D

__all__ = [
    "NonlinearState",
    "LinearState",
    "FlowError",
    "make_initial_data",
    "evolve_nonlinear",
    "evolve_linear_sector",
]


class FlowError(RuntimeError):
    """Newton divergence or positivity loss during time stepping."""


@dataclass
class NonlinearState:
    """State of a radial nonlinear run: x = v/V_D - 1 relative to the target
    profile, plus the sandwich bracket (D0, D1) when one is declared."""

    grid: RadialGrid
    exponents: ExponentSet
    profile: Profile
    x: np.ndarray
    t: float = 0.0
    D0: Optional[float] = None
    D1: Optional[float] = None

    @property
    def v(self) -> RadialField:
        """Absolute values v = V_D (1 + x) as a RadialField."""
        V = (self.profile.D + self.grid.nodes**2) ** float(self.exponents.alpha)
        return RadialField(grid=self.grid, values=V * (1.0 + self.x))


@dataclass
class LinearState:
    """State of a linear sector run: nodal values of f in sector l."""

    grid: RadialGrid
    alpha: float
    D: float
    l: int
    f: np.ndarray
    t: float = 0.0


def _profile_ratio_minus_one(D_from: float, D_to: float, alpha: float, r):
    """V_(D_from)/V_(D_to) - 1 evaluated without cancellation."""
    return np.expm1(alpha * np.log1p((D_from - D_to) / (D_to + r**2)))


def make_initial_data(grid: RadialGrid, exponents: ExponentSet, kind: str, *,
                      D: float = 1.0, D0: Optional[float] = None,
                      D1: Optional[float] = None, epsilon: float = 0.05,
                      mode=None, amplitude: float = 0.1,
                      seed: Optional[int] = None, clip: bool = True,
                      match_D: bool = True) -> NonlinearState:
    """Build initial data v0 from a named family, relative to profile D.

    Kinds:
      "profile-blend": v0 = (V_D0 + V_D1)/2 (inside the sandwich by convexity);
      "eigen":  v0 = V_D (1 + epsilon g V_D^(1-m)) with g a spectral mode
                (mode=(l, k), default the dilation mode (0, 1)); clipped to the
                sandwich when (D0, D1) are given;
      "bump":   v0 = V_D (1 + amplitude exp(-((r-c)/s)^2)); c = 0, s = 1 when
                seed is None, otherwise drawn reproducibly from the seed.

    When match_D is True the profile parameter is re-matched by bisection so
    the truncated mass defect of v0 vanishes, and x is re-expressed relative
    to the matched profile (requires D0 > D1 bracketing the root).
    """
    alpha = float(exponents.alpha)
    r = grid.nodes
    if kind == "profile-blend":
        if D0 is None or D1 is None:
            raise ValueError("profile-blend needs D0 and D1")
        q0 = _profile_ratio_minus_one(D0, D, alpha, r)
        q1 = _profile_ratio_minus_one(D1, D, alpha, r)
        x = 0.5 * (q0 + q1)
    elif kind == "eigen":
        from .spectral import discrete_mode, mode_field

        l, k = mode if mode is not None else (0, 1)
        mo = discrete_mode(grid.d, alpha, l, k)
        g = mode_field(mo, grid).values
        # V^(1-m) = (D+r^2)^(alpha(1-m)) = 1/(D+r^2)
        x = epsilon * g / (D + r**2)
    elif kind == "bump":
        if seed is None:
            c, s = 0.0, 1.0
        else:
            rng = np.random.default_rng(seed)
            c = float(rng.uniform(0.0, 1.0))
            s = float(rng.uniform(0.5, 1.5))
        x = amplitude * np.exp(-(((r - c) / s) ** 2))
    else:
        raise ValueError(f"unknown initial-data kind {kind!r}")

    if clip and D0 is not None and D1 is not None and kind != "profile-blend":
        xlo = _profile_ratio_minus_one(D0, D, alpha, r)
        xhi = _profile_ratio_minus_one(D1, D, alpha, r)
        x = np.clip(x, xlo, xhi)

    state = NonlinearState(grid=grid, exponents=exponents,
                           profile=Profile(exponents=exponents, D=D),
                           x=x, t=0.0, D0=D0, D1=D1)
    if match_D:
        if D0 is None or D1 is None:
            raise ValueError("match_D needs the bracket D0 > D1")
        Dm = solve_D(state.v, exponents, D0, D1)
        q = _profile_ratio_minus_one(D, Dm, alpha, r)
        x_new = q + (1.0 + q) * x
        state = replace(state, profile=Profile(exponents=exponents, D=Dm),
                        x=x_new)
    if state.D0 is not None and state.D1 is not None:
        xlo = _profile_ratio_minus_one(state.D0, state.profile.D, alpha, r)
        xhi = _profile_ratio_minus_one(state.D1, state.profile.D, alpha, r)
        if np.any(state.x < xlo - 1e-8) or np.any(state.x > xhi + 1e-8):
            raise ValueError("initial data violates the sandwich after clipping")
    return state


def _advance(x, V, Vm1, w, g, h, m, dt, depth=0):
    """One backward-Euler step, bisecting dt on Newton failure (depth <= 12)."""
    x_new, _ = _kernels.newton_step(x, V, Vm1, w, g, h, m, dt)
    if x_new is not None:
        return x_new
    if depth >= 12:
        raise FlowError(
            f"Newton iteration diverged at dt = {dt}; use a smaller time step"
        )
    half = _advance(x, V, Vm1, w, g, h, m, dt / 2.0, depth + 1)
    return _advance(half, V, Vm1, w, g, h, m, dt / 2.0, depth + 1)


def evolve_nonlinear(state: NonlinearState, t_end: float, dt: float,
                     cadence: Optional[float] = None,
                     observer: Optional[Callable] = None,
                     track_sandwich: bool = False) -> EntropyTrace:
    """Advance the state to t_end, recording the entropy trace.

    Rows (t, F, I, h1, h2, mass defect) are recorded every `cadence` time
    units (default: ~200 rows), cadence being an integer multiple of dt.  The
    observer, when given, receives (t, state) at each recorded row.  With
    track_sandwich=True a SandwichReport is attached per row.  The state is
    advanced in place and also reflected in state.t.
    """
    if dt <= 0 or t_end <= state.t:
        raise ValueError("need dt > 0 and t_end beyond the current time")
    span = t_end - state.t
    if cadence is None:
        cadence = max(dt, span / 200.0)
        cadence = round(cadence / dt) * dt
    n_sub = int(round(cadence / dt))
    if n_sub < 1 or abs(n_sub * dt - cadence) > 1e-9 * cadence:
        raise ValueError(f"cadence {cadence} is not an integer multiple of dt {dt}")
    n_rec = int(round(span / cadence))
    if abs(n_rec * cadence - span) > 1e-9 * max(span, 1.0):
        raise ValueError("t_end - t must be an integer multiple of the cadence")

    grid = state.grid
    p = state.profile
    m = float(state.exponents.m)
    alpha = float(state.exponents.alpha)
    r = grid.nodes
    Vm1 = p.D + r**2
    V = Vm1**alpha
    w = cell_volumes(grid)
    g, h = face_geometry(grid)

    rows = []
    sandwiches = []

    def record():
        F = entropy_from_x(state.x, grid, p)
        I = fisher_from_x(state.x, grid, p)
        md = mass_defect_from_x(state.x, grid, p)
        h1 = float(1.0 + np.min(state.x))
        h2 = float(1.0 + np.max(state.x))
        rows.append((state.t, F, I, h1, h2, md))
        if track_sandwich:
            sandwiches.append(sandwich_from_x(state.x, grid, p))
        if observer is not None:
            observer(state.t, state)

    record()
    t0 = state.t
    for j in range(1, n_rec + 1):
        for _ in range(n_sub):
            state.x = _advance(state.x, V, Vm1, w, g, h, m, dt)
        state.t = t0 + j * cadence
        record()

    arr = np.array(rows)
    return EntropyTrace(t=arr[:, 0], entropy=arr[:, 1], fisher=arr[:, 2],
                        h1=arr[:, 3], h2=arr[:, 4], mass_defect=arr[:, 5],
                        exponents=state.exponents, D=p.D,
                        sandwich=tuple(sandwiches))


def evolve_linear_sector(state: LinearState, t_end: float, dt: float,
                         cadence: Optional[float] = None) -> EntropyTrace:
    """Advance the linear sector equation B df/dt = -A f by backward Euler.

    The trace records the linearized entropy F = (1/2) int f^2 dmu_(alpha-1)
    and Fisher term I = A(f, f) (so dF/dt = -I holds in the continuum limit);
    h1/h2 are undefined for the linear flow and recorded as NaN; the
    mass-defect column holds int f dmu_(alpha-1).
    """
    if dt <= 0 or t_end <= state.t:
        raise ValueError("need dt > 0 and t_end beyond the current time")
    span = t_end - state.t
    if cadence is None:
        cadence = max(dt, span / 200.0)
        cadence = round(cadence / dt) * dt
    n_sub = int(round(cadence / dt))
    if n_sub < 1 or abs(n_sub * dt - cadence) > 1e-9 * cadence:
        raise ValueError(f"cadence {cadence} is not an integer multiple of dt {dt}")
    n_rec = int(round(span / cadence))

    forms = assemble_sector_forms(state.grid, state.alpha, state.D, state.l)
    f = forms.restrict(np.asarray(state.f, dtype=float))
    n = forms.n
    ab = np.zeros((3, n))
    ab[0, 1:] = forms.b_off + dt * forms.a_off
    ab[1] = forms.b_diag + dt * forms.a_diag
    ab[2, :-1] = forms.b_off + dt * forms.a_off
    sd = sphere_area(state.grid.d)

    rows = []

    def record(t, fvec):
        bf = forms.apply_b(fvec)
        rows.append((t, 0.5 * sd * float(fvec @ bf), sd * float(fvec @ forms.apply_a(fvec)),
                     math.nan, math.nan, sd * float(np.sum(bf))))

    record(state.t, f)
    t0 = state.t
    for j in range(1, n_rec + 1):
        for _ in range(n_sub):
            f = solve_banded((1, 1), ab, forms.apply_b(f))
        record(t0 + j * cadence, f)
    state.f = forms.pad(f)
    state.t = t0 + n_rec * cadence

    arr = np.array(rows)
    from .exponents import alpha_to_m, derive_exponents

    exps = derive_exponents(state.grid.d, alpha_to_m(state.grid.d, state.alpha))
    return EntropyTrace(t=arr[:, 0], entropy=arr[:, 1], fisher=arr[:, 2],
                        h1=arr[:, 3], h2=arr[:, 4], mass_defect=arr[:, 5],
                        exponents=exps, D=state.D)
