"""Grids, grid-sampled scalar fields, and the smooth test-function family.

All three games manipulate two kinds of objects built here:

* ``ScalarField``: a function sampled on a box grid, evaluated anywhere by
  multilinear interpolation, with constant continuation of the nearest
  boundary value outside the box.

* ``QuadraticTest``: a twice-differentiable candidate function
  ``c + p.(z-x0) + 0.5 (z-x0)^T G (z-x0)`` optionally stacked on top of a
  mollified scalar field.  This finite-dimensional family stands in for
  the function choices the players make; the mollification (a normalized
  compactly supported C^2 kernel smoother of width ``2h``) turns a grid
  field into a C^2 object with analytic gradient and Hessian.

Fields are immutable after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError

Array = np.ndarray


def as_points(x, dim: int) -> Array:
    """Coerce scalars / sequences to an (m, dim) float array of query points."""
    pts = np.atleast_1d(np.asarray(x, dtype=float))
    if pts.ndim == 1:
        if dim == 1:
            pts = pts[:, None]
        else:
            pts = pts[None, :]
    if pts.shape[-1] != dim:
        raise InputError(f"expected points of dimension {dim}, got shape {pts.shape}")
    return pts


def as_point(x, dim: int) -> Array:
    """Coerce a single query point to shape (dim,)."""
    p = np.asarray(x, dtype=float).reshape(-1)
    if p.size != dim:
        raise InputError(f"expected a point of dimension {dim}, got {x!r}")
    return p


@dataclass(frozen=True)
class Grid:
    """Uniform box grid in dimension 1 or 2.

    ``lo``/``hi`` are per-axis bounds, ``n`` the node count per axis
    (at least 3).  Spacing ``h`` is derived.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)
        if not (len(lo) == len(hi) == len(n)):
            raise InputError("lo, hi, n must have equal length")
        if len(lo) not in (1, 2):
            raise InputError("only dimensions 1 and 2 are supported")
        if any(k < 3 for k in n):
            raise InputError("need at least 3 nodes per axis")
        if any(b <= a for a, b in zip(lo, hi)):
            raise InputError("hi must exceed lo componentwise")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def h(self) -> tuple[float, ...]:
        return tuple((b - a) / (k - 1) for a, b, k in zip(self.lo, self.hi, self.n))

    @property
    def h_max(self) -> float:
        return max(self.h)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.n

    @property
    def num_nodes(self) -> int:
        return int(np.prod(self.n))

    def axis(self, i: int) -> Array:
        return np.linspace(self.lo[i], self.hi[i], self.n[i])

    def nodes(self) -> Array:
        """All node coordinates, shape (num_nodes, dim), C-order of the value array."""
        axes = [self.axis(i) for i in range(self.dim)]
        if self.dim == 1:
            return axes[0][:, None]
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        return np.stack([X.ravel(), Y.ravel()], axis=1)

    def clamp(self, pts: Array) -> Array:
        return np.clip(pts, np.asarray(self.lo), np.asarray(self.hi))

    def contains(self, pts: Array) -> Array:
        lo = np.asarray(self.lo)
        hi = np.asarray(self.hi)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)

    @staticmethod
    def line(lo: float, hi: float, n: int) -> "Grid":
        return Grid((lo,), (hi,), (n,))

    @staticmethod
    def box(lo, hi, n) -> "Grid":
        return Grid(tuple(lo), tuple(hi), tuple(n))


@dataclass(frozen=True)
class ScalarField:
    """Grid-sampled real function with constant continuation outside the box.

    ``values`` is indexed [i] in 1D and [i, j] in 2D, matching
    ``Grid.axis(0)`` x ``Grid.axis(1)``.  An optional ``declared_bound``
    asserts |values| <= bound on construction (used for value functions
    that are bounded by their terminal data).
    """

    grid: Grid
    values: Array
    declared_bound: float | None = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise InputError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise InputError("field values must be finite")
        if self.declared_bound is not None and np.max(np.abs(vals)) > self.declared_bound + 1e-12:
            raise InputError("field values exceed the declared bound")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @staticmethod
    def from_function(grid: Grid, f, declared_bound: float | None = None) -> "ScalarField":
        pts = grid.nodes()
        vals = np.asarray(f(pts), dtype=float).reshape(grid.shape)
        return ScalarField(grid, vals, declared_bound)

    @staticmethod
    def constant(grid: Grid, value: float) -> "ScalarField":
        return ScalarField(grid, np.full(grid.shape, float(value)))

    def with_values(self, values: Array) -> "ScalarField":
        return ScalarField(self.grid, values, self.declared_bound)

    def __call__(self, x) -> Array | float:
        out = interpolate(self, as_points(x, self.grid.dim))
        if out.size == 1:
            return float(out[0])
        return out

    def min(self) -> float:
        return float(self.values.min())

    def max(self) -> float:
        return float(self.values.max())

    # -- serialization ------------------------------------------------------

    def json_header(self) -> str:
        meta = {
            "dim": self.grid.dim,
            "lo": list(self.grid.lo),
            "hi": list(self.grid.hi),
            "n": list(self.grid.n),
            "h": list(self.grid.h),
        }
        return json.dumps(meta, sort_keys=True)

    def to_csv(self) -> str:
        """Rows of index coordinates plus value; pair with ``json_header``."""
        lines = []
        if self.grid.dim == 1:
            lines.append("i,x,value")
            xs = self.grid.axis(0)
            for i, (x, v) in enumerate(zip(xs, self.values)):
                lines.append(f"{i},{float(x)!r},{float(v)!r}")
        else:
            lines.append("i,j,x,y,value")
            xs, ys = self.grid.axis(0), self.grid.axis(1)
            for i in range(self.grid.n[0]):
                for j in range(self.grid.n[1]):
                    lines.append(f"{i},{j},{float(xs[i])!r},{float(ys[j])!r},{float(self.values[i, j])!r}")
        return "\n".join(lines) + "\n"

    @staticmethod
    def from_csv(csv_text: str, header_json: str) -> "ScalarField":
        meta = json.loads(header_json)
        grid = Grid(tuple(meta["lo"]), tuple(meta["hi"]), tuple(meta["n"]))
        vals = np.empty(grid.shape)
        rows = csv_text.strip().splitlines()[1:]
        for row in rows:
            parts = row.split(",")
            if grid.dim == 1:
                vals[int(parts[0])] = float(parts[2])
            else:
                vals[int(parts[0]), int(parts[1])] = float(parts[4])
        return ScalarField(grid, vals)


def interpolate(fld: ScalarField, x) -> Array:
    """Multilinear interpolation, constant continuation outside the box.

    Exact at grid nodes and exact on affine functions inside the box.
    """
    grid = fld.grid
    pts = as_points(x, grid.dim)
    if not np.all(np.isfinite(pts)):
        raise InputError("interpolation query must be finite")
    pts = grid.clamp(pts)
    h = grid.h
    out_shape = pts.shape[0]
    if grid.dim == 1:
        t = (pts[:, 0] - grid.lo[0]) / h[0]
        i0 = np.clip(np.floor(t).astype(int), 0, grid.n[0] - 2)
        w = t - i0
        return (1 - w) * fld.values[i0] + w * fld.values[i0 + 1]
    tx = (pts[:, 0] - grid.lo[0]) / h[0]
    ty = (pts[:, 1] - grid.lo[1]) / h[1]
    i0 = np.clip(np.floor(tx).astype(int), 0, grid.n[0] - 2)
    j0 = np.clip(np.floor(ty).astype(int), 0, grid.n[1] - 2)
    wx = tx - i0
    wy = ty - j0
    v = fld.values
    out = ((1 - wx) * (1 - wy) * v[i0, j0]
           + wx * (1 - wy) * v[i0 + 1, j0]
           + (1 - wx) * wy * v[i0, j0 + 1]
           + wx * wy * v[i0 + 1, j0 + 1])
    return out.reshape(out_shape)


# -- mollification ----------------------------------------------------------
#
# Normalized kernel smoother with the compactly supported C^2 bump
# B(r) = (1 - r^2)^3 on r < 1.  As a function of z (r = |z|/w) this is a
# polynomial in |z|^2/w^2 inside the support and its first and second
# derivatives vanish at the support edge, so the smoothed field is C^2.

def _bump(r2: Array) -> Array:
    u = np.maximum(0.0, 1.0 - r2)
    return u * u * u


def _mollify_window(grid: Grid, pts: Array, width: float):
    """Node index window and squared scaled distances for each query point."""
    reach = int(np.ceil(width / min(grid.h))) + 1
    offs = np.arange(-reach, reach + 1)
    if grid.dim == 1:
        t = (pts[:, 0] - grid.lo[0]) / grid.h[0]
        i0 = np.floor(t).astype(int)
        idx = np.clip(i0[:, None] + offs[None, :], 0, grid.n[0] - 1)
        nx = grid.lo[0] + idx * grid.h[0]
        r2 = (pts[:, :1] - nx) ** 2 / width**2
        return (idx,), r2
    tx = (pts[:, 0] - grid.lo[0]) / grid.h[0]
    ty = (pts[:, 1] - grid.lo[1]) / grid.h[1]
    i0 = np.floor(tx).astype(int)
    j0 = np.floor(ty).astype(int)
    ii = np.clip(i0[:, None] + offs[None, :], 0, grid.n[0] - 1)
    jj = np.clip(j0[:, None] + offs[None, :], 0, grid.n[1] - 1)
    # tensor window: (m, W, W)
    nx = grid.lo[0] + ii * grid.h[0]
    ny = grid.lo[1] + jj * grid.h[1]
    dx = pts[:, 0:1, None] - nx[:, :, None]
    dy = pts[:, 1:2, None] - ny[:, None, :]
    r2 = (dx**2 + dy**2) / width**2
    return (ii, jj), r2


def mollified_values(fld: ScalarField, x, width: float) -> Array:
    """Smoothed field values at query points (clamped to the box)."""
    grid = fld.grid
    pts = grid.clamp(as_points(x, grid.dim))
    idx, r2 = _mollify_window(grid, pts, width)
    w = _bump(r2)
    if grid.dim == 1:
        vals = fld.values[idx[0]]
        num = np.sum(w * vals, axis=1)
        den = np.sum(w, axis=1)
    else:
        vals = fld.values[idx[0][:, :, None], idx[1][:, None, :]]
        num = np.sum(w * vals, axis=(1, 2))
        den = np.sum(w, axis=(1, 2))
    return num / den


def mollified_eval(fld: ScalarField, x0, width: float):
    """Value, gradient, and Hessian of the smoothed field at one point.

    Outside the box the query is clamped; derivative components along
    clamped axes are zero (constant continuation).
    """
    grid = fld.grid
    p_raw = as_point(x0, grid.dim)
    p = grid.clamp(p_raw[None, :])[0]
    outside = p_raw != p
    idx, r2 = _mollify_window(grid, p[None, :], width)
    if grid.dim == 1:
        nodes = (grid.lo[0] + idx[0] * grid.h[0])[0]
        z = (p[0] - nodes)[:, None]          # (W, 1)
        vals = fld.values[idx[0][0]]
    else:
        nx = (grid.lo[0] + idx[0] * grid.h[0])[0]
        ny = (grid.lo[1] + idx[1] * grid.h[1])[0]
        ZX, ZY = np.meshgrid(p[0] - nx, p[1] - ny, indexing="ij")
        z = np.stack([ZX.ravel(), ZY.ravel()], axis=1)   # (W*W, 2)
        vals = fld.values[idx[0][0][:, None], idx[1][0][None, :]].ravel()
    r2f = np.sum(z * z, axis=1) / width**2
    u = np.maximum(0.0, 1.0 - r2f)
    B = u**3
    # dB/dz = -(6/w^2) u^2 z ;  d2B/dz2 = -(6/w^2) u^2 I + (24/w^4) u z z^T
    dB = -(6.0 / width**2) * (u**2)[:, None] * z
    d2B = (-(6.0 / width**2) * (u**2)[:, None, None] * np.eye(grid.dim)
           + (24.0 / width**4) * u[:, None, None] * z[:, :, None] * z[:, None, :])
    D = np.sum(B)
    N = np.sum(B * vals)
    dD = np.sum(dB, axis=0)
    dN = np.sum(dB * vals[:, None], axis=0)
    d2D = np.sum(d2B, axis=0)
    d2N = np.sum(d2B * vals[:, None, None], axis=0)
    m = N / D
    dm = (dN - m * dD) / D
    d2m = (d2N - m * d2D - np.outer(dm, dD) - np.outer(dD, dm)) / D
    if np.any(outside):
        dm = np.where(outside, 0.0, dm)
        mask = np.outer(~outside, ~outside)
        d2m = np.where(mask, d2m, 0.0)
    return float(m), dm, d2m


@dataclass(frozen=True)
class QuadraticTest:
    """C^2 candidate: quadratic polynomial plus an optional mollified field.

    value(z) = c + p.(z - x0) + 0.5 (z - x0)^T gamma (z - x0)
               + base_scale * mollify(base)(z)

    ``gamma`` must be symmetric.  When used as a player's move the caller
    is responsible for the sup/gradient/Hessian caps; ``project_to_caps``
    enforces them by value-shifting and by clamping p and gamma.
    """

    x0: Array
    c: float = 0.0
    p: Array | None = None
    gamma: Array | None = None
    base: ScalarField | None = None
    mollify_width: float | None = None
    base_scale: float = 1.0

    def __post_init__(self):
        x0 = np.asarray(self.x0, dtype=float).reshape(-1)
        object.__setattr__(self, "x0", x0)
        d = x0.size
        p = np.zeros(d) if self.p is None else np.asarray(self.p, dtype=float).reshape(d)
        g = np.zeros((d, d)) if self.gamma is None else np.asarray(self.gamma, dtype=float).reshape(d, d)
        if not np.allclose(g, g.T, atol=1e-12):
            raise InputError("gamma must be symmetric")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "gamma", g)
        if self.base is not None and self.mollify_width is None:
            object.__setattr__(self, "mollify_width", 2.0 * self.base.grid.h_max)

    @property
    def dim(self) -> int:
        return self.x0.size

    def values(self, x) -> Array:
        pts = as_points(x, self.dim)
        d = pts - self.x0
        out = self.c + d @ self.p + 0.5 * np.einsum("mi,ij,mj->m", d, self.gamma, d)
        if self.base is not None:
            out = out + self.base_scale * mollified_values(self.base, pts, self.mollify_width)
        return out

    def __call__(self, x):
        out = self.values(as_points(x, self.dim))
        if out.size == 1:
            return float(out[0])
        return out

    def eval(self, x):
        """(value, gradient, Hessian) at a single point."""
        pt = as_point(x, self.dim)
        d = pt - self.x0
        val = self.c + d @ self.p + 0.5 * d @ self.gamma @ d
        grad = self.p + self.gamma @ d
        hess = self.gamma.copy()
        if self.base is not None:
            bv, bg, bh = mollified_eval(self.base, pt, self.mollify_width)
            val += self.base_scale * bv
            grad = grad + self.base_scale * bg
            hess = hess + self.base_scale * bh
        return float(val), grad, hess

    def shifted(self, dc: float) -> "QuadraticTest":
        return replace(self, c=self.c + dc)

    def sup_abs_estimate(self, grid: Grid) -> float:
        """Estimate of sup |value| over the box, sampled on grid nodes."""
        return float(np.max(np.abs(self.values(grid.nodes()))))


def eval_test(q: QuadraticTest, x):
    """Value, gradient proxy, and Hessian proxy of a test function at x."""
    return q.eval(x)


def project_to_caps(q: QuadraticTest, cap: float, grid: Grid,
                    at=None) -> QuadraticTest:
    """Enforce sup/gradient/Hessian caps by shift and clamp, not by discarding.

    The gradient and Hessian caps apply at the game's current point ``at``
    (default: the candidate's center).  The value range is centered by a
    pure shift (which no game score can see), then p and gamma are scaled
    down if the norms at ``at`` exceed the cap, and finally the whole
    candidate is scaled if its sup still exceeds the cap.  For bounded
    desk-scale data the caps are inactive.
    """
    at = q.x0 if at is None else as_point(at, q.dim)
    val, grad, hess = q.eval(at)
    out = q
    gn = float(np.linalg.norm(grad))
    hn = float(np.linalg.norm(hess, 2))
    if gn <= cap and hn <= cap:
        # cheap sufficient sup bound: the mollified part is a convex
        # combination of node values, the quadratic part is bounded by its
        # coefficients over the box
        corners = np.array(np.meshgrid(*[(lo, hi) for lo, hi in zip(grid.lo, grid.hi)],
                                       indexing="ij")).reshape(q.dim, -1).T
        reach = float(np.max(np.linalg.norm(corners - q.x0, axis=1)))
        bound = abs(q.c) + float(np.linalg.norm(q.p)) * reach \
            + 0.5 * float(np.linalg.norm(q.gamma, 2)) * reach**2
        if q.base is not None:
            bound += abs(q.base_scale) * float(np.max(np.abs(q.base.values)))
        if bound <= cap:
            return q
    if gn > cap:
        out = replace(out, p=out.p * (cap / gn),
                      base_scale=out.base_scale * (cap / gn) if out.base is not None else out.base_scale)
    if hn > cap:
        s = cap / hn
        out = replace(out, gamma=out.gamma * s,
                      base_scale=out.base_scale * s if out.base is not None else out.base_scale)
    nodes = grid.nodes()
    vals = out.values(nodes)
    mid = 0.5 * (float(vals.max()) + float(vals.min()))
    out = out.shifted(-mid)
    sup = float(np.max(np.abs(vals - mid)))
    if sup > cap:
        s = cap / sup
        out = replace(out, c=out.c * s, p=out.p * s, gamma=out.gamma * s,
                      base_scale=out.base_scale * s)
    return out
