import math

import numpy as np
import pytest

from pdegames.errors import ConfigError
from pdegames.fields import Grid, QuadraticTest, ScalarField
from pdegames.levy import nonlocal_operator, uniform_measure
from pdegames.oracles import pide_reference
from pdegames.pide import (NONLINEARITIES, PideConfig, advection,
                           consistency_residual, helen_candidates,
                           linear_nonlocal, nonlinearity_by_name,
                           nonlocal_plus_quadratic, one_step,
                           scheme_lower_bound_gap, score_bound_check, solve)


def make_cfg(eps=0.1, n=21, lo=-1.0, hi=1.0, **kw):
    return PideConfig(eps=eps, alpha=0.5, trunc_R=1.0,
                      grid=Grid.line(lo, hi, n), **kw)


def test_registry():
    F = nonlinearity_by_name("linear_nonlocal")
    assert F(0.0, np.zeros(1), np.zeros(1), np.zeros((1, 1)), 2.0) == -2.0
    F = nonlinearity_by_name("advection", b=[2.0])
    assert F(0, np.zeros(1), np.array([3.0]), np.zeros((1, 1)), 0.0) == -6.0
    with pytest.raises(ConfigError):
        nonlinearity_by_name("burgers")


def test_alpha_guard():
    cfg = make_cfg()
    F = nonlocal_plus_quadratic()   # growth order 2 so alpha must be < 1/2
    with pytest.raises(ConfigError):
        cfg.validate_for(F)


def test_ellipticity_of_shipped_nonlinearities():
    rng = np.random.default_rng(7)
    for name in NONLINEARITIES:
        F = NONLINEARITIES[name]() if name != "advection" else NONLINEARITIES[name](b=[1.0, -0.5])
        for _ in range(500):
            d = 2
            p = rng.normal(size=d)
            A = rng.normal(size=(d, d))
            A = 0.5 * (A + A.T)
            Mh = rng.normal(size=(d, d))
            B = A + Mh @ Mh.T          # A <= B in the matrix order
            l = rng.normal()
            mm = l + abs(rng.normal())
            t, x = rng.normal(), rng.normal(size=d)
            assert F(t, x, p, A, l) >= F(t, x, p, B, mm) - 1e-10


def test_helen_family_contains_zero_and_root():
    cfg = make_cfg()
    zero = ScalarField.constant(cfg.grid, 0.0)
    cands = helen_candidates(zero, 0.0, cfg)
    sup = min(c.sup_abs_estimate(cfg.grid) for c in cands)
    assert sup <= 1e-12          # the zero function is present
    cap = cfg.cap
    for c in cands:
        assert c.sup_abs_estimate(cfg.grid) <= cap + 1e-9
        _, grad, hess = c.eval(np.zeros(1))
        assert np.linalg.norm(grad) <= cap + 1e-9
        assert np.linalg.norm(hess, 2) <= cap + 1e-9


def test_one_step_f_zero_returns_field_value():
    cfg = make_cfg()
    F = nonlinearity_by_name("advection", b=[0.0])   # F identically 0
    m = uniform_measure(1, 1.0)
    psi = QuadraticTest(x0=np.zeros(1), c=0.3, p=[0.2], gamma=[[0.5]])
    for x in (-0.4, 0.0, 0.55):
        val = one_step(psi, 0.5, x, F, m, cfg)
        assert val == pytest.approx(float(psi(x)), abs=1e-12)


def test_one_step_constant_field():
    cfg = make_cfg()
    F = linear_nonlocal()
    m = uniform_measure(1, 1.0)
    const = ScalarField.constant(cfg.grid, 2.5)
    val = one_step(const, 0.5, 0.1, F, m, cfg)
    assert val == pytest.approx(2.5, abs=1e-9)


def test_one_step_linear_gains_eps_I():
    # U_next = z^2/2, F = -l, nu = dz on [-1,1]: optimal bracket gains eps/3
    cfg = make_cfg(eps=0.05, n=41, lo=-2.0, hi=2.0)
    F = linear_nonlocal()
    m = uniform_measure(1, 1.0)
    psi = QuadraticTest(x0=np.zeros(1), gamma=[[1.0]])
    val = one_step(psi, 0.5, 0.0, F, m, cfg)
    assert val == pytest.approx(0.0 + cfg.eps / 3.0, rel=1e-6)


def test_one_step_decomposition_matches_direct_quadrature():
    # the base + second-moment decomposition equals the generic path
    cfg = make_cfg(n=21)
    m = uniform_measure(1, 1.0)
    rng = np.random.default_rng(3)
    base = ScalarField(cfg.grid, np.sin(3 * cfg.grid.axis(0)) * 0.5)
    x = np.array([0.2])
    cand = QuadraticTest(x0=x, c=0.1, p=[0.3], gamma=[[0.7]], base=base)
    I_direct = nonlocal_operator(m, cand, x)
    probe = QuadraticTest(x0=x, base=base)
    I_base = nonlocal_operator(m, probe, x)
    from pdegames.pide import _full_second_moment
    I_split = I_base + 0.5 * float(np.sum(cand.gamma * _full_second_moment(m)))
    assert I_direct == pytest.approx(I_split, abs=1e-6)


def _random_smooth_pair(grid, rng):
    xs = grid.axis(0)
    a, b, w1, w2 = rng.uniform(0.3, 1.5, size=4)
    u = a * np.sin(w1 * 2 * xs) + 0.3 * np.cos(w2 * 3 * xs)
    bump = b * np.exp(-4 * (xs - rng.uniform(-0.5, 0.5)) ** 2)
    U = ScalarField(grid, u)
    V = ScalarField(grid, u + bump)
    return U, V


def test_one_step_monotone_and_commutes():
    cfg = make_cfg(eps=0.1, n=21)
    F = linear_nonlocal()
    m = uniform_measure(1, 1.0)
    rng = np.random.default_rng(17)
    xs = cfg.grid.axis(0)
    for _ in range(12):
        U, V = _random_smooth_pair(cfg.grid, rng)
        c = rng.uniform(-2, 2)
        x = rng.choice(xs)
        su = one_step(U, 0.5, x, F, m, cfg)
        sv = one_step(V, 0.5, x, F, m, cfg)
        assert su <= sv + 1e-10
        su_c = one_step(U.with_values(U.values + c), 0.5, x, F, m, cfg)
        assert su_c == pytest.approx(su + c, abs=1e-9)


def test_solve_zero_steps_and_constant():
    cfg = make_cfg(eps=0.1, n=21)
    F = linear_nonlocal()
    m = uniform_measure(1, 1.0)
    u_T = ScalarField.constant(cfg.grid, 1.0)
    out = solve(F, m, u_T, T=1.0, t_start=1.0, cfg=cfg)
    assert len(out) == 1 and out[0] is u_T
    out = solve(F, m, u_T, T=1.0, t_start=0.7, cfg=cfg)
    assert len(out) == 4
    for sl in out:
        assert np.allclose(sl.values, 1.0, atol=1e-9)


def test_solve_matches_reference_on_bump():
    # smoke-scale version of the oracle comparison; the acceptance suite
    # runs the strict 5% criterion on the finer production grid
    cfg = make_cfg(eps=0.05, n=161, lo=-2.0, hi=2.0,
                   gamma_values=(-0.5, 0.0, 0.5), p_values=(0.0,))
    F = linear_nonlocal()
    m = uniform_measure(1, 1.0)
    u_T = ScalarField.from_function(cfg.grid, lambda p: np.exp(-4.0 * p[:, 0] ** 2))
    T, t = 1.0, 0.8
    game = solve(F, m, u_T, T, t, cfg)[-1]
    ref = pide_reference(m, u_T, T, t, fine_dt=cfg.eps**2)
    change = np.max(np.abs(ref.values - u_T.values))
    err = np.max(np.abs(game.values - ref.values))
    assert err <= 0.08 * change


def test_terminal_estimate_linear_growth():
    # |u(T - k eps) - u_T| <= C k eps with C stable across eps
    F = linear_nonlocal()
    m = uniform_measure(1, 1.0)
    cs = []
    for eps in (0.1, 0.05):
        cfg = make_cfg(eps=eps, n=41, lo=-2.0, hi=2.0)
        u_T = ScalarField.from_function(cfg.grid, lambda p: np.exp(-2.0 * p[:, 0] ** 2))
        slices = solve(F, m, u_T, T=1.0, t_start=1.0 - 4 * eps, cfg=cfg)
        worst = 0.0
        for k, sl in enumerate(slices[1:], start=1):
            worst = max(worst, np.max(np.abs(sl.values - u_T.values)) / (k * eps))
        cs.append(worst)
    assert cs[1] <= 1.5 * cs[0] + 1e-9


def test_consistency_lower_bound_exact():
    cfg = make_cfg(eps=0.16, n=41, lo=-2.0, hi=2.0)
    F = linear_nonlocal()
    m = uniform_measure(1, 1.0)
    psi = QuadraticTest(x0=np.array([0.1]), c=0.2, p=[0.4], gamma=[[0.8]])
    for eps in (0.16, 0.08, 0.04):
        from dataclasses import replace
        gap = scheme_lower_bound_gap(F, m, psi, 0.5, 0.0, replace(cfg, eps=eps))
        assert gap >= -1e-10


def test_consistency_residual_zero_f():
    cfg = make_cfg()
    F = nonlinearity_by_name("advection", b=[0.0])
    m = uniform_measure(1, 1.0)
    psi = QuadraticTest(x0=np.zeros(1), c=0.1, p=[0.3], gamma=[[0.6]])
    res = consistency_residual(F, m, psi, 0.5, 0.0, [0.16, 0.08], cfg)
    assert all(r == pytest.approx(0.0, abs=1e-9) for r in res)


def test_score_bound_check():
    m = uniform_measure(1, 1.0)
    F0 = nonlinearity_by_name("advection", b=[0.0])
    cfg = make_cfg(eps=0.1)
    assert score_bound_check(F0, m, cfg, trials=20) == pytest.approx(0.0, abs=1e-12)
    F = linear_nonlocal()
    rng = np.random.default_rng(5)
    c1 = score_bound_check(F, m, cfg, trials=50, rng=rng)
    assert 0.0 <= c1 < 20.0


def test_score_bound_scaling_quadratic_growth():
    # F = -l + |p|^2 with alpha = 0.25: gamma = 0.5; C stays bounded as eps halves
    m = uniform_measure(1, 1.0)
    F = nonlocal_plus_quadratic()
    cs = []
    for eps in (0.1, 0.05, 0.025):
        cfg = PideConfig(eps=eps, alpha=0.25, trunc_R=1.0, grid=Grid.line(-1, 1, 21))
        rng = np.random.default_rng(11)
        cs.append(score_bound_check(F, m, cfg, trials=40, rng=rng))
    assert max(cs[1:]) <= cs[0] * 1.05 + 1e-9
