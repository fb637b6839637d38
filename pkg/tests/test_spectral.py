"""Tests for the closed-form discrete spectrum and eigenfunctions."""

import random
from fractions import Fraction

import numpy as np
import pytest

import fdrates.numerics as N
from fdrates.spectral import (discrete_mode, improved_constant, mode_field,
                              multiplicity, ode_residual, spectrum_report)


def test_mode_values_d5():
    a = Fraction(-10)
    m10 = discrete_mode(5, a, 1, 0)
    assert m10.lam == 20 and m10.admissible and m10.below_continuum
    assert m10.radial_poly == (Fraction(1),)
    assert m10.multiplicity == 5
    m01 = discrete_mode(5, a, 0, 1)
    assert m01.lam == 40 - 4 * Fraction(5, 2)  # -4*alpha - 2d = 30
    assert m01.admissible
    # dilation mode: 1 + (2*alpha + d)/d * r^2
    assert m01.radial_poly == (Fraction(1), Fraction(2 * (-10) + 5, 5))
    assert discrete_mode(5, a, 0, 0).admissible is False


def test_admissibility_cutoff():
    # d = 5, alpha = -4: admissible iff l + 2k - 1 < 3/2, i.e. l + 2k <= 2
    a = Fraction(-4)
    assert discrete_mode(5, a, 1, 0).admissible
    assert discrete_mode(5, a, 2, 0).admissible
    assert discrete_mode(5, a, 0, 1).admissible
    assert not discrete_mode(5, a, 3, 0).admissible
    assert not discrete_mode(5, a, 1, 1).admissible


def test_d1_ladder():
    # d = 1: lambda_n = n(1 - 2*alpha - n) for n = l + 2k, 1 <= n <= 1/2 - alpha
    a = Fraction(-5)
    for l, k in ((1, 0), (0, 1), (1, 1), (0, 2)):
        mode = discrete_mode(1, a, l, k)
        n = l + 2 * k
        assert mode.lam == n * (1 - 2 * a - n)
        assert mode.admissible
    assert not discrete_mode(1, a, 2, 0).admissible  # parity l <= 1 only
    assert not discrete_mode(1, a, 1, 3).admissible  # n = 7 > 1/2 + 5


def test_multiplicities():
    assert [multiplicity(3, l) for l in range(6)] == [2 * l + 1 for l in range(6)]
    assert multiplicity(2, 0) == 1
    assert [multiplicity(2, l) for l in (1, 2, 3)] == [2, 2, 2]
    assert multiplicity(5, 1) == 5
    assert multiplicity(5, 2) == 14
    assert multiplicity(1, 1) == 1 and multiplicity(1, 2) == 0
    with pytest.raises(ValueError):
        multiplicity(3, -1)


def test_continuum_dilation_identity_random_rationals():
    # lambda_cont - lambda_(0,1) = (alpha + (d+2)/2)^2 exactly, 100 samples
    rng = random.Random(20260826)
    for _ in range(100):
        d = rng.randint(2, 12)
        alpha = Fraction(-rng.randint(d + 3, 400), rng.randint(1, 9))
        if alpha >= Fraction(-(d + 2), 2):
            alpha -= Fraction(d + 2, 2)
        rep = spectrum_report(d, alpha, l_max=1, k_max=1)
        lam01 = discrete_mode(d, alpha, 0, 1).lam
        assert rep.continuum_bottom - lam01 == (alpha + Fraction(d + 2, 2)) ** 2


def test_gap_source_switches():
    # alpha just above -(d+2)/2: gap at the continuum
    rep = spectrum_report(5, Fraction(-3), l_max=3, k_max=3)
    assert rep.gap_source == ("continuum",)
    # -d <= alpha < -(d+2)/2: dilation mode (0,1), below the translation mode
    rep = spectrum_report(5, Fraction(-4), l_max=3, k_max=3)
    assert rep.gap_source == ("mode", 0, 1)
    assert float(rep.sharp_constant) == 6.0
    assert discrete_mode(5, Fraction(-4), 1, 0).lam == 8  # strictly above
    # alpha < -d: still the translation mode, at -2*alpha
    rep = spectrum_report(5, Fraction(-10), l_max=3, k_max=3)
    assert rep.gap_source == ("mode", 1, 0)
    assert rep.sharp_constant == 20
    assert rep.constraint_needed


def test_report_cross_check_runs_near_branch_points():
    # dense sweep across both branch boundaries; the internal consistency
    # assertion between the mode table and the closed form must never fire
    for num in range(20, 130, 3):
        alpha = Fraction(-num, 10)
        if alpha == Fraction(-3, 2):
            continue
        spectrum_report(5, alpha, l_max=4, k_max=4)


def test_improved_constant():
    ic = improved_constant(5, Fraction(-10))
    assert ic.value == 30 and not ic.discrepancy_flag
    ic = improved_constant(5, Fraction(-4))
    assert ic.value == Fraction(25, 4) and ic.discrepancy_flag
    assert float(ic) == 6.25
    with pytest.raises(ValueError):
        improved_constant(5, Fraction(-2))
    with pytest.raises(ValueError):
        improved_constant(1, Fraction(-3))


def test_mode_field_matches_polynomial():
    grid = N.build_grid(10.0, 100, 5)
    mode = discrete_mode(5, Fraction(-10), 0, 1)
    f = mode_field(mode, grid)
    r = grid.nodes
    assert np.allclose(f.values, 1.0 - 3.0 * r**2, rtol=1e-14, atol=1e-14)
    assert f.l == 0


def test_ode_residual_exact_modes():
    # residuals at 50 radii in high-precision arithmetic: essentially zero
    for (d, a, l, k) in ((5, Fraction(-10), 0, 1), (5, Fraction(-10), 2, 2),
                         (3, Fraction(-7, 2), 1, 1), (2, Fraction(-5), 0, 2)):
        assert ode_residual(d, a, l, k) < 1e-30


def test_ode_residual_detects_wrong_eigenvalue():
    # perturbing the polynomial (by using the wrong mode's coefficients)
    # cannot satisfy the ODE: sanity check that the residual is not trivially 0
    good = ode_residual(5, Fraction(-10), 0, 1)
    assert good < 1e-30
    with pytest.raises(ValueError):
        ode_residual(5, -10.0 + 1e-13, 0, 1)  # irrational alpha rejected


def test_rayleigh_consistency_with_fem():
    # analytic eigenfunction's P1 Rayleigh quotient reproduces the eigenvalue
    d, a = 5, Fraction(-10)
    grid = N.build_grid(30.0, 800, d)
    for (l, k) in ((1, 0), (0, 1), (2, 0)):
        mode = discrete_mode(d, a, l, k)
        forms = N.assemble_sector_forms(grid, float(a), 1.0, l)
        q = N.rayleigh_quotient(mode_field(mode, grid), forms)
        assert q == pytest.approx(float(mode.lam), rel=5e-4)
