"""Independent reference solutions used by the acceptance runs.

None of these share quadrature or stepping code with the game solvers;
that independence is the point.  Each oracle is self-convergent under its
own refinement (checked in tests) before it is trusted as ground truth.

Sign conventions for the radial curvature-flow reference: with terminal
data positive inside a ball, the integral curvature of its level sets is
negative, and stepping backward from the terminal time (s = T - t
increasing) the radius shrinks:  d rho / d s = kappa_bar(rho) < 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quadutil import gauss_rule

from .curvature import ConeCap, Kernel
from .errors import ConfigError, InputError
from .fields import Grid, ScalarField, as_point
from .levy import SPHERE_MEASURE, LevyMeasure


# -- eikonal with constant speed -----------------------------------------------

def eikonal_exact(v_const: float, u_T, T: float, t: float, x,
                  samples: int = 4097) -> float:
    """Value of the constant-speed eikonal solution at (t, x).

    Positive speed propagates the running maximum of the terminal data over
    the reachable ball, negative speed the minimum; the ball extremum is
    located by dense sampling plus local ternary refinement.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t >= T or v_const == 0.0:
        return float(np.asarray(u_T(x[None, :])).ravel()[0])
    r = abs(v_const) * (T - t)
    sign = 1.0 if v_const > 0 else -1.0

    if x.size == 1:
        def g(pt: float) -> float:
            return sign * float(np.asarray(u_T(np.array([[pt]]))).ravel()[0])

        xs = np.linspace(x[0] - r, x[0] + r, samples)
        vals = sign * np.asarray(u_T(xs[:, None])).ravel()
        k = int(np.argmax(vals))
        lo = xs[max(k - 1, 0)]
        hi = xs[min(k + 1, samples - 1)]
        for _ in range(80):
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            if g(m1) < g(m2):
                lo = m1
            else:
                hi = m2
        return sign * max(g(0.5 * (lo + hi)), float(np.max(vals)))
    # dimension 2: dense polar sampling of the closed ball
    radii = np.linspace(0.0, r, 257)
    angles = np.linspace(0.0, 2 * math.pi, 256, endpoint=False)
    pts = np.concatenate([
        x[None, :],
        (x[None, None, :] + radii[1:, None, None]
         * np.stack([np.cos(angles), np.sin(angles)], axis=-1)[None, :, :]).reshape(-1, 2),
    ])
    vals = sign * np.asarray(u_T(pts)).ravel()
    return sign * float(np.max(vals))


# -- linear nonlocal parabolic reference -----------------------------------------

def _shift_with_edge(values: np.ndarray, offset, axis_sizes) -> np.ndarray:
    """values at index + offset with nearest-edge continuation."""
    if values.ndim == 1:
        idx = np.clip(np.arange(axis_sizes[0]) + offset, 0, axis_sizes[0] - 1)
        return values[idx]
    idx0 = np.clip(np.arange(axis_sizes[0]) + offset[0], 0, axis_sizes[0] - 1)
    idx1 = np.clip(np.arange(axis_sizes[1]) + offset[1], 0, axis_sizes[1] - 1)
    return values[np.ix_(idx0, idx1)]


def _pair_weights_1d(m: LevyMeasure, h: float):
    """Cell-averaged measure weights per positive grid offset."""
    J = int(math.floor(m.trunc_R / h + 0.5))
    gx, gw = gauss_rule(32)
    weights = []
    for j in range(1, J + 1):
        a = max((j - 0.5) * h, 0.0)
        b = min((j + 0.5) * h, m.trunc_R)
        if b <= a:
            weights.append(0.0)
            continue
        rr = 0.5 * (b - a) * gx + 0.5 * (a + b)
        ww = 0.5 * (b - a) * gw
        weights.append(float(np.sum(ww * m.density_vec(rr))))
    # innermost half-cell: exact second-order compensation via the first
    # symmetric difference
    if m.analytic_radial_m2 is not None:
        m2 = m.analytic_radial_m2(0.5 * h)
    else:
        rr = 0.5 * (0.5 * h) * (gx + 1.0)
        ww = 0.5 * (0.5 * h) * gw
        m2 = float(np.sum(ww * m.density_vec(rr) * rr**2 * SPHERE_MEASURE[1]))
    inner = 0.5 * m2 / h**2
    return np.array(weights), inner


def pide_reference(m: LevyMeasure, u_T: ScalarField, T: float, t: float,
                   fine_dt: float) -> ScalarField:
    """Fine explicit stepping of dw/ds = I_R[x, w] from w(0) = u_T, s = T - t.

    The operator is applied on grid-aligned offsets with cell-averaged
    measure weights, so no interpolation enters; outside the box the field
    continues constantly.  Raises ConfigError when the explicit step is
    unstable for the given measure.
    """
    grid = u_T.grid
    if t >= T:
        return u_T
    span = T - t
    n_steps = max(1, round(span / fine_dt))
    dt = span / n_steps

    if grid.dim == 1:
        h = grid.h[0]
        weights, inner = _pair_weights_1d(m, h)
        total = 2.0 * (float(np.sum(weights)) + inner)
        if dt * total >= 1.0:
            raise ConfigError(
                f"explicit step unstable: dt * nu-mass = {dt * total:.3f} >= 1")
        w = u_T.values.copy()
        n = grid.n
        for _ in range(n_steps):
            op = inner * (_shift_with_edge(w, +1, n) + _shift_with_edge(w, -1, n) - 2 * w)
            for j, cj in enumerate(weights, start=1):
                if cj == 0.0:
                    continue
                op += cj * (_shift_with_edge(w, +j, n) + _shift_with_edge(w, -j, n) - 2 * w)
            w = w + dt * op
        return ScalarField(grid, w)

    # dimension 2: midpoint weights on all half-plane offsets within R
    h = grid.h
    if abs(h[0] - h[1]) > 1e-12:
        raise ConfigError("2D reference requires square cells")
    hh = h[0]
    J = int(math.floor(m.trunc_R / hh))
    offs = []
    wts = []
    for i in range(-J, J + 1):
        for j in range(0, J + 1):
            if j == 0 and i <= 0:
                continue
            r = math.hypot(i * hh, j * hh)
            if 0 < r <= m.trunc_R:
                offs.append((i, j))
                wts.append(float(m.density_vec(np.array([r]))[0]) * hh * hh)
    total = 2.0 * sum(wts)
    if fine_dt * total >= 1.0:
        raise ConfigError(
            f"explicit step unstable: dt * nu-mass = {fine_dt * total:.3f} >= 1")
    w = u_T.values.copy()
    for _ in range(n_steps):
        op = np.zeros_like(w)
        for (o, wt) in zip(offs, wts):
            op += wt * (_shift_with_edge(w, o, grid.n)
                        + _shift_with_edge(w, (-o[0], -o[1]), grid.n) - 2 * w)
        w = w + dt * op
    return ScalarField(grid, w)


# -- brute-force integral curvature ----------------------------------------------

def curvature_bruteforce(x, U, K: Kernel, fine_n: int = 1024):
    """(value, self_error): fine independent quadrature of the curvature integral.

    Polar layout with Gauss-Legendre radial nodes on geometric shells and a
    golden-offset angular rule, nodes in exact (z, -z) pairs.  The inner
    exclusion shrinks with resolution and the remaining origin mass is
    extrapolated from the measured geometric decay of the excluded-ring
    increments.  The reported error combines half the extrapolated tail with
    the change against half resolution.
    """
    from .curvature import _level_values

    x0 = np.atleast_1d(np.asarray(x, dtype=float))
    u_x = float(_level_values(U, x0[None, :])[0])

    def contributions(n: int):
        R = K.support_R
        n_th = 4 * n if K.dim == 2 else 1
        delta = 4.0 * R / n_th if K.dim == 2 else R / (4.0 * n)
        # geometric shells, 8 Gauss nodes each
        edges = [delta]
        while edges[-1] < R:
            edges.append(min(edges[-1] * 1.35, R))
        gx, gw = gauss_rule(8)
        r_all, wr_all = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            r_all.append(0.5 * (b - a) * gx + 0.5 * (a + b))
            wr_all.append(0.5 * (b - a) * gw)
        r = np.concatenate(r_all)
        wr = np.concatenate(wr_all)
        if K.dim == 1:
            z = r[:, None]
            w = K.profile(r) * wr
        else:
            th = (np.arange(n_th) + 0.381966) * (math.pi / n_th)
            dth = math.pi / n_th
            z = np.stack([np.outer(r, np.cos(th)).ravel(),
                          np.outer(r, np.sin(th)).ravel()], axis=1)
            w = np.outer(K.profile(r) * r * wr, np.full(n_th, dth)).ravel()
        rr = np.sqrt(np.sum(z * z, axis=1))
        up = _level_values(U, x0[None, :] + z) - u_x
        dn = _level_values(U, x0[None, :] - z) - u_x
        s = np.where(up >= 0.0, 1.0, -1.0) + np.where(dn >= 0.0, 1.0, -1.0)
        return w * s, rr, delta

    def level(n: int) -> float:
        contrib, rr, delta = contributions(n)
        v4 = float(np.sum(contrib[rr >= 4.0 * delta]))
        v2 = float(np.sum(contrib[rr >= 2.0 * delta]))
        v1 = float(np.sum(contrib))
        i1, i2 = v2 - v4, v1 - v2
        scale = max(abs(v1), 1.0)
        tail = 0.0
        if abs(i1) > 1e-10 * scale and 0.0 < i2 / i1 < 0.95:
            rho = i2 / i1
            tail = i2 * rho / (1.0 - rho)
        return v1 + tail, abs(tail)

    v, tail = level(fine_n)
    v_half, _ = level(fine_n // 2)
    return v, abs(v - v_half) + 0.5 * tail


# -- radial curvature-flow reference ----------------------------------------------

@dataclass
class RadiusCurve:
    """Sampled radius-versus-time curve of a shrinking ball front."""

    ts: np.ndarray
    rhos: np.ndarray
    kernel_name: str
    rho_T: float
    truncated: bool = False

    def rho_at(self, t: float) -> float:
        order = np.argsort(self.ts)
        return float(np.interp(t, self.ts[order], self.rhos[order]))


def sphere_curvature_table(K: Kernel, rho_lo: float, rho_hi: float,
                           n_table: int = 17, fine_n: int = 1024):
    """kappa_bar(rho) for spheres, tabulated from the brute-force integral."""
    rhos = np.linspace(rho_lo, rho_hi, n_table)
    vals = []
    for rho in rhos:
        cap = ConeCap(center=np.zeros(K.dim), rho=float(rho))
        xs = np.zeros(K.dim)
        xs[0] = rho
        v, _ = curvature_bruteforce(xs, cap, K, fine_n=fine_n)
        vals.append(v)
    return rhos, np.asarray(vals)


def radius_ode(K: Kernel, rho_T: float, t_grid, T: float | None = None,
               n_steps: int = 512, fine_n: int = 1024) -> RadiusCurve:
    """Integrate d rho / d s = kappa_bar(rho), s = T - t, from rho(T) = rho_T.

    kappa_bar is tabulated once from the brute-force sphere curvature and
    linearly interpolated.  The curve truncates with a flag if the radius
    reaches the table floor.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    if T is None:
        T = float(np.max(t_grid))
    t_min = float(np.min(t_grid))
    if t_min > T:
        raise InputError("t_grid must contain times at or before T")
    rho_floor = 0.05 * rho_T
    tab_r, tab_k = sphere_curvature_table(K, rho_floor, 1.2 * rho_T, fine_n=fine_n)

    def kbar(rho: float) -> float:
        return float(np.interp(rho, tab_r, tab_k))

    s_end = T - t_min
    ds = s_end / n_steps
    rho = rho_T
    ss = [0.0]
    rr = [rho]
    truncated = False
    for k in range(n_steps):
        k1 = kbar(rho)
        k2 = kbar(rho + 0.5 * ds * k1)
        k3 = kbar(rho + 0.5 * ds * k2)
        k4 = kbar(rho + ds * k3)
        rho = rho + ds / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if rho <= rho_floor:
            truncated = True
            rho = rho_floor
            ss.append((k + 1) * ds)
            rr.append(rho)
            break
        ss.append((k + 1) * ds)
        rr.append(rho)
    ss = np.asarray(ss)
    rr = np.asarray(rr)
    ts = T - ss
    rhos_at = np.interp(T - t_grid, ss, rr)
    return RadiusCurve(ts=t_grid.copy(), rhos=rhos_at, kernel_name=K.name,
                       rho_T=rho_T, truncated=truncated)


def zero_level_radius(fld: ScalarField, center=None, n_angles: int = 64) -> float:
    """Mean radius of the zero level set around a center with positive value."""
    grid = fld.grid
    if center is None:
        center = [0.5 * (a + b) for a, b in zip(grid.lo, grid.hi)]
    c = as_point(center, grid.dim)
    if grid.dim == 1:
        r_max = min(c[0] - grid.lo[0], grid.hi[0] - c[0])
        dirs = np.array([[1.0], [-1.0]])
    else:
        r_max = min(min(c - np.asarray(grid.lo)), min(np.asarray(grid.hi) - c))
        th = (np.arange(n_angles) + 0.5) * (2 * math.pi / n_angles)
        dirs = np.stack([np.cos(th), np.sin(th)], axis=1)
    radii = np.linspace(0.0, r_max * 0.999, 400)
    out = []
    for d in dirs:
        pts = c[None, :] + radii[:, None] * d[None, :]
        vals = np.asarray(fld(pts)).ravel()
        below = np.nonzero(vals < 0.0)[0]
        if below.size == 0 or below[0] == 0:
            continue
        k = below[0]
        r0, r1 = radii[k - 1], radii[k]
        v0, v1 = vals[k - 1], vals[k]
        out.append(r0 + (r1 - r0) * v0 / (v0 - v1))
    if not out:
        raise InputError("no zero crossing found along any ray")
    return float(np.mean(out))
