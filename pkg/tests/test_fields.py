import numpy as np
import pytest

from pdegames.errors import InputError
from pdegames.fields import (Grid, QuadraticTest, ScalarField, eval_test,
                             interpolate, mollified_eval, mollified_values,
                             project_to_caps)


def test_grid_invariants():
    g = Grid.line(0.0, 1.0, 5)
    assert g.dim == 1
    assert g.h == (0.25,)
    with pytest.raises(InputError):
        Grid.line(0.0, 1.0, 2)
    with pytest.raises(InputError):
        Grid((0.0,), (-1.0,), (5,))


def test_interpolate_constant_field():
    g = Grid.line(-1.0, 1.0, 11)
    f = ScalarField.constant(g, 5.0)
    for x in (-2.0, -0.3, 0.0, 0.7, 3.1):
        assert f(x) == pytest.approx(5.0)


def test_interpolate_linear_reproduction():
    g = Grid.line(0.0, 1.0, 11)
    f = ScalarField(g, g.axis(0).copy())
    assert f(0.25) == pytest.approx(0.25, abs=1e-12)


def test_interpolate_boundary_continuation():
    g = Grid.line(0.0, 1.0, 3)
    f = ScalarField(g, np.array([0.0, 1.0, 0.0]))
    assert f(1.7) == pytest.approx(0.0)
    assert f(-0.2) == pytest.approx(0.0)


def test_interpolate_affine_exact_2d():
    g = Grid.box((-1.0, -1.0), (1.0, 1.0), (9, 7))
    f = ScalarField.from_function(g, lambda p: 0.3 + 1.2 * p[:, 0] - 0.7 * p[:, 1])
    rng = np.random.default_rng(0)
    pts = rng.uniform(-1, 1, size=(50, 2))
    expect = 0.3 + 1.2 * pts[:, 0] - 0.7 * pts[:, 1]
    assert np.allclose(f(pts), expect, atol=1e-12)


def test_interpolate_exact_at_nodes():
    g = Grid.box((-1.0, 0.0), (1.0, 2.0), (5, 5))
    rng = np.random.default_rng(1)
    f = ScalarField(g, rng.normal(size=g.shape))
    vals = interpolate(f, g.nodes())
    assert np.allclose(vals, f.values.ravel(), atol=1e-14)


def test_interpolate_rejects_nonfinite():
    g = Grid.line(0.0, 1.0, 3)
    f = ScalarField.constant(g, 1.0)
    with pytest.raises(InputError):
        f(np.nan)


def test_eval_test_zero_and_affine():
    q = QuadraticTest(x0=np.zeros(1))
    v, gr, he = eval_test(q, 0.7)
    assert v == 0.0 and gr[0] == 0.0 and he[0, 0] == 0.0

    q = QuadraticTest(x0=np.zeros(1), c=1.0, p=[2.0])
    v, gr, he = eval_test(q, 0.5)
    assert v == pytest.approx(2.0)
    assert gr[0] == pytest.approx(2.0)
    assert he[0, 0] == pytest.approx(0.0)


def test_eval_test_pure_quadratic():
    q = QuadraticTest(x0=np.zeros(1), gamma=[[2.0]])
    v, gr, he = eval_test(q, 3.0)
    assert v == pytest.approx(9.0)
    assert gr[0] == pytest.approx(6.0)
    assert he[0, 0] == pytest.approx(2.0)


def _fd_check(q, x, step=1e-4):
    x = np.atleast_1d(np.asarray(x, float))
    val, grad, hess = q.eval(x)
    d = x.size
    g_fd = np.zeros(d)
    h_fd = np.zeros((d, d))
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        g_fd[i] = (q(x + e) - q(x - e)) / (2 * step)
        h_fd[i, i] = (q(x + e) - 2 * val + q(x - e)) / step**2
        for j in range(i):
            e2 = np.zeros(d)
            e2[j] = step
            h_fd[i, j] = h_fd[j, i] = (
                q(x + e + e2) - q(x + e - e2) - q(x - e + e2) + q(x - e - e2)
            ) / (4 * step**2)
    return grad, g_fd, hess, h_fd


def test_gradient_hessian_match_finite_differences():
    g = Grid.line(-1.0, 1.0, 41)
    base = ScalarField.from_function(g, lambda p: np.sin(2.0 * p[:, 0]))
    q = QuadraticTest(x0=np.array([0.1]), c=0.3, p=[0.5], gamma=[[1.5]], base=base)
    for x in (-0.42, 0.0, 0.33):
        grad, g_fd, hess, h_fd = _fd_check(q, [x])
        assert np.allclose(grad, g_fd, rtol=1e-5, atol=1e-5)
        assert np.allclose(hess, h_fd, rtol=1e-4, atol=1e-3)


def test_gradient_hessian_fd_2d():
    g = Grid.box((-1.0, -1.0), (1.0, 1.0), (21, 21))
    base = ScalarField.from_function(g, lambda p: p[:, 0] ** 2 - 0.5 * p[:, 1])
    q = QuadraticTest(x0=np.zeros(2), p=[0.2, -0.1], gamma=[[1.0, 0.3], [0.3, -0.5]],
                      base=base)
    grad, g_fd, hess, h_fd = _fd_check(q, [0.15, -0.22])
    assert np.allclose(grad, g_fd, rtol=1e-5, atol=1e-5)
    assert np.allclose(hess, h_fd, rtol=1e-4, atol=1e-3)


def test_mollified_field_is_c2_across_cells():
    # finite-difference second derivatives stay bounded as the query moves
    g = Grid.line(-1.0, 1.0, 21)
    rng = np.random.default_rng(3)
    base = ScalarField(g, rng.normal(size=g.shape))
    w = 2.0 * g.h_max
    xs = np.linspace(-0.8, 0.8, 400)
    step = 1e-4
    d2 = (mollified_values(base, xs + step, w) - 2 * mollified_values(base, xs, w)
          + mollified_values(base, xs - step, w)) / step**2
    interior_scale = np.median(np.abs(d2)) + 1.0
    assert np.max(np.abs(np.diff(d2))) < 10.0 * interior_scale


def test_mollified_constant_is_exact():
    g = Grid.line(-1.0, 1.0, 11)
    base = ScalarField.constant(g, 3.5)
    xs = np.linspace(-1.5, 1.5, 40)
    assert np.allclose(mollified_values(base, xs, 2 * g.h_max), 3.5, atol=1e-12)
    v, gr, he = mollified_eval(base, 0.37, 2 * g.h_max)
    assert v == pytest.approx(3.5)
    assert abs(gr[0]) < 1e-12 and abs(he[0, 0]) < 1e-9


def test_mollify_commutes_with_constant_shift():
    g = Grid.line(-1.0, 1.0, 15)
    rng = np.random.default_rng(4)
    vals = rng.normal(size=g.shape)
    a = ScalarField(g, vals)
    b = ScalarField(g, vals + 2.5)
    xs = np.linspace(-1.2, 1.2, 33)
    w = 2 * g.h_max
    assert np.allclose(mollified_values(b, xs, w),
                       mollified_values(a, xs, w) + 2.5, atol=1e-12)


def test_project_to_caps_inactive_for_small_candidates():
    g = Grid.line(-1.0, 1.0, 11)
    q = QuadraticTest(x0=np.zeros(1), c=0.2, p=[0.3], gamma=[[0.4]])
    out = project_to_caps(q, cap=100.0, grid=g)
    # only a value shift is allowed to happen
    assert np.allclose(out.p, q.p)
    assert np.allclose(out.gamma, q.gamma)


def test_project_to_caps_clamps():
    g = Grid.line(-1.0, 1.0, 11)
    q = QuadraticTest(x0=np.zeros(1), c=50.0, p=[30.0], gamma=[[40.0]])
    cap = 2.0
    out = project_to_caps(q, cap=cap, grid=g)
    _, grad, hess = out.eval(out.x0)
    assert np.linalg.norm(grad) <= cap + 1e-9
    assert np.linalg.norm(hess, 2) <= cap + 1e-9
    assert out.sup_abs_estimate(g) <= cap + 1e-9


def test_field_csv_roundtrip():
    g = Grid.box((0.0, 0.0), (1.0, 2.0), (3, 4))
    rng = np.random.default_rng(5)
    f = ScalarField(g, rng.normal(size=g.shape))
    g2 = ScalarField.from_csv(f.to_csv(), f.json_header())
    assert np.allclose(g2.values, f.values)
    assert g2.grid == f.grid
