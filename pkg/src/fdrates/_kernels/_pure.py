"""Pure-numpy implementation of the implicit flow step.

Semantics are mirrored exactly by the compiled twin (_speedups.pyx): one
backward-Euler step of the radial flux-form equation

    w_i V_i dx_i/dt = net flux of  G_(i+1/2) = g v_bar (p_(i+1)-p_i)/h

in the relative variable x = v/V_D - 1, solved by damped Newton iteration
with the analytic tridiagonal Jacobian.  The pressure is
p = V^(m-1) expm1((m-1) log1p(x))/(m-1), which is exact for every m < 1
including m = 0 and stays accurate when x underflows far in the tail.
"""

import numpy as np
from scipy.linalg import solve_banded

BACKEND = "pure"


def newton_step(x_old, V, Vm1, w, g, h, m, dt, tol=1e-11, maxit=30):
    """Advance x by one implicit step; returns (x_new, iterations).

    Returns (None, maxit) if Newton fails to converge (caller decides how to
    subdivide the step).  When w[0] == 0 (d >= 2) the origin row is replaced
    by the algebraic regularity closure p_1 = p_0.
    """
    x = x_old.copy()
    n = len(x)
    wV = w * V
    closure = w[0] == 0.0
    for it in range(maxit):
        lx = np.log1p(x)
        p = Vm1 * np.expm1((m - 1.0) * lx) / (m - 1.0)
        dp = Vm1 * np.exp((m - 2.0) * lx)
        vl = V[:-1] * (1.0 + x[:-1])
        vr = V[1:] * (1.0 + x[1:])
        vbar = 0.5 * (vl + vr)
        Dp = p[1:] - p[:-1]
        flux = g * vbar * Dp / h
        resid = wV * (x - x_old)
        resid[:-1] -= dt * flux
        resid[1:] += dt * flux
        dG_l = g / h * (-vbar * dp[:-1] + 0.5 * V[:-1] * Dp)
        dG_r = g / h * (vbar * dp[1:] + 0.5 * V[1:] * Dp)
        diag = wV.copy()
        diag[:-1] -= dt * dG_l
        diag[1:] += dt * dG_r
        upper = np.zeros(n)
        lower = np.zeros(n)
        upper[1:] = -dt * dG_r
        lower[:-1] = dt * dG_l
        if closure:
            resid[0] = p[1] - p[0]
            diag[0] = -dp[0]
            upper[1] = dp[1]
        ab = np.empty((3, n))
        ab[0] = upper
        ab[1] = diag
        ab[2] = lower
        dx = solve_banded((1, 1), ab, -resid)
        lam = 1.0
        while np.any(1.0 + x + lam * dx <= 0.0):
            lam *= 0.5
            if lam < 1e-18:
                return None, it + 1
        x = x + lam * dx
        if np.max(np.abs(dx) / (1.0 + np.abs(x))) < tol:
            return x, it + 1
    return None, maxit
