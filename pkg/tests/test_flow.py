"""Tests for the nonlinear and linear flow integrators."""

import numpy as np
import pytest

import fdrates.flow as FL
import fdrates.numerics as N
from fdrates.entropy import fit_rate
from fdrates.exponents import derive_exponents
from fdrates.profiles import Profile

E59 = derive_exponents(5, 0.9)


def _grid(R=15.0, n=200):
    return N.build_grid(R, n, 5)


def test_profile_is_exact_steady_state():
    g = _grid()
    st = FL.NonlinearState(grid=g, exponents=E59,
                           profile=Profile(exponents=E59, D=1.0),
                           x=np.zeros(g.N + 1))
    tr = FL.evolve_nonlinear(st, 0.1, 0.01, cadence=0.05)
    assert np.max(np.abs(st.x)) < 1e-13
    assert np.all(tr.entropy <= 1e-25)
    assert st.t == pytest.approx(0.1)


def test_make_initial_data_kinds_and_rejections():
    g = _grid()
    st = FL.make_initial_data(g, E59, "profile-blend", D0=2.0, D1=0.5)
    # matched by bisection; closed form ((2^-7.5 + 0.5^-7.5)/2)^(-1/7.5)
    assert st.profile.D == pytest.approx(0.5484102583897682, abs=2e-3)
    assert st.D0 == 2.0 and st.D1 == 0.5
    st2 = FL.make_initial_data(g, E59, "eigen", D=1.0, D0=2.0, D1=0.5,
                               epsilon=0.05, mode=(0, 1))
    assert np.max(np.abs(st2.x)) < 0.2
    st3 = FL.make_initial_data(g, E59, "bump", amplitude=0.1, match_D=False)
    assert np.max(st3.x) == pytest.approx(0.1, rel=1e-12)  # centered at r = 0
    with pytest.raises(ValueError):
        FL.make_initial_data(g, E59, "wavelet", D0=2.0, D1=0.5)
    with pytest.raises(ValueError):
        FL.make_initial_data(g, E59, "profile-blend")  # missing bracket
    with pytest.raises(ValueError):
        FL.make_initial_data(g, E59, "bump")  # match_D without bracket


def test_bump_seed_reproducible():
    g = _grid()
    a = FL.make_initial_data(g, E59, "bump", seed=42, match_D=False)
    b = FL.make_initial_data(g, E59, "bump", seed=42, match_D=False)
    c = FL.make_initial_data(g, E59, "bump", seed=43, match_D=False)
    assert np.array_equal(a.x, b.x)
    assert not np.array_equal(a.x, c.x)


def test_mass_defect_conserved_and_entropy_monotone():
    g = _grid(15.0, 400)
    st = FL.make_initial_data(g, E59, "profile-blend", D0=1.5, D1=0.7)
    tr = FL.evolve_nonlinear(st, 0.2, 1e-3, cadence=0.01)
    # the scheme conserves the truncated defect to rounding
    assert np.max(np.abs(tr.mass_defect - tr.mass_defect[0])) < 1e-13
    assert np.all(np.diff(tr.entropy) < 0)
    assert np.all(np.diff(tr.fisher) < 0)


def test_sandwich_preserved_along_flow():
    g = _grid(15.0, 400)
    st = FL.make_initial_data(g, E59, "eigen", D=1.0, D0=2.0, D1=0.5,
                              epsilon=0.05, mode=(0, 1))
    tr = FL.evolve_nonlinear(st, 0.1, 1e-3, cadence=0.01, track_sandwich=True)
    assert len(tr.sandwich) == len(tr.t)
    for rep in tr.sandwich:
        assert rep.all_nonnegative
    # maximum principle: the band around the profile never widens
    assert np.all(tr.h1 <= 1.0 + 1e-12) and np.all(tr.h2 >= 1.0 - 1e-12)
    assert tr.h2[-1] - tr.h1[-1] < tr.h2[0] - tr.h1[0]


def test_trace_shape_and_observer():
    g = _grid()
    st = FL.make_initial_data(g, E59, "eigen", D=1.0, D0=2.0, D1=0.5)
    seen = []
    tr = FL.evolve_nonlinear(st, 0.05, 1e-3, cadence=0.01,
                             observer=lambda t, s: seen.append(t))
    assert len(tr.t) == 6  # includes t = 0
    assert seen == pytest.approx(list(tr.t))
    assert tr.D == st.profile.D and tr.exponents is E59


def test_evolve_rejects_bad_stepping():
    g = _grid()
    st = FL.make_initial_data(g, E59, "eigen", D=1.0, D0=2.0, D1=0.5)
    with pytest.raises(ValueError):
        FL.evolve_nonlinear(st, 0.05, -1e-3)
    with pytest.raises(ValueError):
        FL.evolve_nonlinear(st, 0.05, 2e-3, cadence=0.005)  # 2.5 steps/row
    with pytest.raises(ValueError):
        FL.evolve_nonlinear(st, 0.0, 1e-3)


def test_nonlinear_decay_rate_matches_spectrum():
    # dilation-mode perturbation decays at 2 * lambda_(0,1) = 2(-4a-2d) = 60
    g = N.build_grid(15.0, 800, 5)
    st = FL.make_initial_data(g, E59, "eigen", D=1.0, D0=2.0, D1=0.5,
                              epsilon=0.05, mode=(0, 1))
    tr = FL.evolve_nonlinear(st, 0.25, 2e-4, cadence=0.005)
    fit = fit_rate(tr, (0.1, 0.22))
    assert fit.rate == pytest.approx(60.0, rel=0.03)
    assert fit.r2 > 0.9999


def test_linear_sector_eigenmode_rate():
    # f = r e^{-r^2} in the l = 1 sector, alpha = -10: the sector bottom is
    # the translation mode at -2*alpha = 20, so F decays at rate 40
    g = N.build_grid(15.0, 800, 5)
    f0 = g.nodes * np.exp(-g.nodes**2)
    st = FL.LinearState(grid=g, alpha=-10.0, D=1.0, l=1, f=f0)
    tr = FL.evolve_linear_sector(st, 0.5, 1e-4, cadence=0.005)
    fit = fit_rate(tr, (0.2, 0.45))
    assert fit.rate == pytest.approx(40.0, rel=0.03)
    assert np.all(np.isnan(tr.h1)) and np.all(np.isnan(tr.h2))
    assert st.t == pytest.approx(0.5)
    assert st.f[0] == 0.0  # Dirichlet padding restored


def test_newton_failure_raises_flow_error(monkeypatch):
    g = _grid()
    st = FL.make_initial_data(g, E59, "eigen", D=1.0, D0=2.0, D1=0.5)
    monkeypatch.setattr(FL._kernels, "newton_step",
                        lambda *a, **k: (None, 0), raising=True)
    with pytest.raises(FL.FlowError):
        FL.evolve_nonlinear(st, 0.01, 1e-3)
