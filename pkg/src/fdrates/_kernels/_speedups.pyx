# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the implicit flow step.

Same semantics as _pure.newton_step: damped Newton on the backward-Euler
residual of the radial flux-form equation in the relative variable
x = v/V_D - 1, with a Thomas solve of the analytic tridiagonal Jacobian.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, expm1, fabs, log1p

cnp.import_array()

BACKEND = "compiled"


def newton_step(cnp.ndarray[double, ndim=1] x_old,
                cnp.ndarray[double, ndim=1] V,
                cnp.ndarray[double, ndim=1] Vm1,
                cnp.ndarray[double, ndim=1] w,
                cnp.ndarray[double, ndim=1] g,
                cnp.ndarray[double, ndim=1] h,
                double m, double dt, double tol=1e-11, int maxit=30):
    """Advance x by one implicit step; returns (x_new, iterations) or
    (None, iterations) on Newton failure."""
    cdef Py_ssize_t n = x_old.shape[0]
    cdef cnp.ndarray[double, ndim=1] x = x_old.copy()
    cdef cnp.ndarray[double, ndim=1] p = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] dp = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] resid = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] diag = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] upper = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] lower = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] dx = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] cp = np.empty(n)
    cdef cnp.ndarray[double, ndim=1] dd = np.empty(n)
    cdef bint closure = w[0] == 0.0
    cdef Py_ssize_t i, it
    cdef double lx, vbar, Dp, flux, dG_l, dG_r, lam, mm, piv, step, crit
    cdef int ok

    for it in range(maxit):
        for i in range(n):
            lx = log1p(x[i])
            p[i] = Vm1[i] * expm1((m - 1.0) * lx) / (m - 1.0)
            dp[i] = Vm1[i] * exp((m - 2.0) * lx)
            resid[i] = w[i] * V[i] * (x[i] - x_old[i])
            diag[i] = w[i] * V[i]
            upper[i] = 0.0
            lower[i] = 0.0
        for i in range(n - 1):
            vbar = 0.5 * (V[i] * (1.0 + x[i]) + V[i + 1] * (1.0 + x[i + 1]))
            Dp = p[i + 1] - p[i]
            flux = g[i] * vbar * Dp / h[i]
            resid[i] -= dt * flux
            resid[i + 1] += dt * flux
            dG_l = g[i] / h[i] * (-vbar * dp[i] + 0.5 * V[i] * Dp)
            dG_r = g[i] / h[i] * (vbar * dp[i + 1] + 0.5 * V[i + 1] * Dp)
            diag[i] -= dt * dG_l
            diag[i + 1] += dt * dG_r
            upper[i + 1] = -dt * dG_r
            lower[i] = dt * dG_l
        if closure:
            resid[0] = p[1] - p[0]
            diag[0] = -dp[0]
            upper[1] = dp[1]

        # Thomas solve; row i is lower[i-1] dx(i-1) + diag[i] dx(i)
        # + upper[i+1] dx(i+1) = -resid[i] (same banded layout as the pure twin)
        piv = diag[0]
        if piv == 0.0:
            return None, it + 1
        cp[0] = upper[1] / piv if n > 1 else 0.0
        dd[0] = -resid[0] / piv
        for i in range(1, n):
            piv = diag[i] - lower[i - 1] * cp[i - 1]
            if piv == 0.0:
                return None, it + 1
            if i < n - 1:
                cp[i] = upper[i + 1] / piv
            dd[i] = (-resid[i] - lower[i - 1] * dd[i - 1]) / piv
        dx[n - 1] = dd[n - 1]
        for i in range(n - 2, -1, -1):
            dx[i] = dd[i] - cp[i] * dx[i + 1]

        lam = 1.0
        ok = 0
        while ok == 0:
            ok = 1
            for i in range(n):
                if 1.0 + x[i] + lam * dx[i] <= 0.0:
                    ok = 0
                    break
            if ok == 0:
                lam *= 0.5
                if lam < 1e-18:
                    return None, it + 1
        crit = 0.0
        for i in range(n):
            x[i] = x[i] + lam * dx[i]
        for i in range(n):
            step = fabs(dx[i]) / (1.0 + fabs(x[i]))
            if step > crit:
                crit = step
        if crit < tol:
            return x, it + 1
    return None, maxit
