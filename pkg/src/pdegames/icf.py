"""The hypersurface-choosing game for integral curvature flow.

One round from (t, x): the maximizer anchors a level-set shape at a point
of the eps-ball whose shape value dominates the current point; if the
shape has nonzero gradient and strictly positive upper curvature at the
anchor, the minimizer relocates anywhere in the kernel-radius half-region
where the shape is at least its anchor value, and the clock advances by
the clamped increment cutoff(eps / curvature); otherwise the round stays
put for eps^2.  The minimizer then plays the mirrored move.  The value
function is the backward fixed point of the composed round.

The shape family is finite and translation-anchored: paraboloids with
directions on an angle mesh and signed curvature scalars on a log grid,
spherical caps in both orientations, and the zero shape (the always-legal
stay choice).  Anchoring makes every shape's curvature pair, half-region
footprint, admissible anchor offsets, and slot increment precomputable
once per solve; each backward slot then costs one footprint min/max
filter per active shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cutoff import CutoffParams, icf_time_reset
from .curvature import Kernel, KappaResult, kappa
from .eikonal import TimeGrid
from .errors import ConfigError, InputError
from .fields import Grid, QuadraticTest, ScalarField, as_point, as_points
from .windows import footprint_runs, masked_filter


# -- analytic level-set shapes -----------------------------------------------------

class Paraboloid:
    """psi(o) = n.o + (k/2) |o - (n.o) n|^2: graph over the tangent plane."""

    def __init__(self, direction, k: float):
        n = np.atleast_1d(np.asarray(direction, dtype=float))
        self.n = n / np.linalg.norm(n)
        self.k = float(k)
        self.dim = self.n.size

    def values(self, pts) -> np.ndarray:
        o = as_points(pts, self.dim)
        t = o @ self.n
        perp2 = np.sum(o * o, axis=1) - t**2
        return t + 0.5 * self.k * perp2

    def __call__(self, pts):
        out = self.values(pts)
        return float(out[0]) if out.size == 1 else out

    def eval(self, x):
        o = as_point(x, self.dim)
        t = float(o @ self.n)
        perp = o - t * self.n
        val = t + 0.5 * self.k * float(perp @ perp)
        grad = self.n + self.k * perp
        hess = self.k * (np.eye(self.dim) - np.outer(self.n, self.n))
        return val, grad, hess


class CapShape:
    """Sphere through the origin: psi(o) = sign * (rho - |o - rho n|).

    sign +1 puts the ball on the super-level side (upper curvature < 0),
    sign -1 the complement (upper curvature > 0).  The gradient at the
    anchor is sign * n either way up to orientation.
    """

    def __init__(self, direction, rho: float, sign: int):
        n = np.atleast_1d(np.asarray(direction, dtype=float))
        self.n = n / np.linalg.norm(n)
        self.rho = float(rho)
        self.sign = int(sign)
        self.dim = self.n.size
        self.center = self.rho * self.n

    def values(self, pts) -> np.ndarray:
        o = as_points(pts, self.dim)
        d = np.sqrt(np.sum((o - self.center) ** 2, axis=1))
        return self.sign * (self.rho - d)

    def __call__(self, pts):
        out = self.values(pts)
        return float(out[0]) if out.size == 1 else out

    def eval(self, x):
        o = as_point(x, self.dim)
        v = o - self.center
        d = float(np.linalg.norm(v))
        if d < 1e-12:
            return self.sign * self.rho, np.zeros(self.dim), np.zeros((self.dim, self.dim))
        u = v / d
        grad = -self.sign * u
        hess = -self.sign * (np.eye(self.dim) - np.outer(u, u)) / d
        return self.sign * (self.rho - d), grad, hess


class ZeroShape:
    def __init__(self, dim: int):
        self.dim = dim

    def values(self, pts) -> np.ndarray:
        return np.zeros(as_points(pts, self.dim).shape[0])

    def __call__(self, pts):
        out = self.values(pts)
        return float(out[0]) if out.size == 1 else out

    def eval(self, x):
        return 0.0, np.zeros(self.dim), np.zeros((self.dim, self.dim))


class NegatedShape:
    def __init__(self, inner):
        self.inner = inner
        self.dim = inner.dim

    def values(self, pts) -> np.ndarray:
        return -self.inner.values(pts)

    def __call__(self, pts):
        out = self.values(pts)
        return float(out[0]) if out.size == 1 else out

    def eval(self, x):
        v, g, h = self.inner.eval(x)
        return -v, -g, -h


# -- configuration ------------------------------------------------------------------

@dataclass
class IcfConfig:
    """Step size, grids, and the finite shape family of both players."""

    eps: float
    grid: Grid
    time: TimeGrid
    cutoff: CutoffParams = None
    n_directions: int = 8
    curvature_scalars: tuple[float, ...] = (0.5, 1.0, 2.0, 4.0)
    cap_radii: tuple[float, ...] = (0.15, 0.3, 0.6)
    tol_grad: float = 1e-8
    kappa_n_r: int = 64
    kappa_n_th: int = 256

    def __post_init__(self):
        if self.cutoff is None:
            self.cutoff = CutoffParams(eps=self.eps)
        self.time.check_for(self.eps)
        self._tables: dict[str, "ShapeTables"] = {}

    def base_shapes(self, dim: int) -> list:
        shapes: list = []
        if dim == 1:
            dirs = [np.array([1.0]), np.array([-1.0])]
        else:
            angles = (np.arange(self.n_directions) + 0.5) * (2 * math.pi / self.n_directions)
            dirs = [np.array([math.cos(a), math.sin(a)]) for a in angles]
        if dim == 2:
            for n in dirs:
                for k in self.curvature_scalars:
                    shapes.append(Paraboloid(n, k))
        for n in dirs:
            for rho in self.cap_radii:
                shapes.append(CapShape(n, rho, +1))
        return shapes

    def tables(self, K: Kernel) -> "ShapeTables":
        if K.name not in self._tables:
            self._tables[K.name] = ShapeTables(self, K)
        return self._tables[K.name]


@dataclass(frozen=True)
class ShapeEntry:
    shape: object
    kappa_star: float
    kappa_sub: float
    grad_nonzero: bool
    plus_active: bool
    minus_active: bool
    plus_slots: int
    minus_slots: int
    plus_runs: tuple            # footprint runs of {psi >= 0} within B_R
    minus_runs: tuple           # footprint runs of {psi <= 0} within B_R
    plus_anchors: tuple         # index offsets a with psi(-a h) <= 0, |a h| <= eps
    minus_anchors: tuple        # index offsets a with psi(-a h) >= 0


class ShapeTables:
    """Per-shape precomputation for one (config, kernel, grid) combination."""

    def __init__(self, cfg: IcfConfig, K: Kernel):
        if K.dim != cfg.grid.dim:
            raise ConfigError("kernel dimension must match the grid")
        self.cfg = cfg
        self.kernel = K
        grid = cfg.grid
        dim = grid.dim
        h = grid.h
        dt = cfg.time.dt
        self.stay_slots = int(math.floor(cfg.cutoff.stay / dt + 1e-9))

        kr = [int(math.floor(K.support_R / hh + 1e-9)) for hh in h]
        ka = [int(math.floor(cfg.eps / hh + 1e-9)) for hh in h]
        if dim == 1:
            foot_pts = (np.arange(-kr[0], kr[0] + 1) * h[0])[:, None]
            foot_shape = (1, 2 * kr[0] + 1)
            anchor_offsets = [(a,) for a in range(-ka[0], ka[0] + 1)
                              if abs(a * h[0]) <= cfg.eps + 1e-12]
            anchor_pts = {o: np.array([o[0] * h[0]]) for o in anchor_offsets}
            rr = np.abs(foot_pts[:, 0])
        else:
            oy, ox = np.meshgrid(np.arange(-kr[0], kr[0] + 1),
                                 np.arange(-kr[1], kr[1] + 1), indexing="ij")
            foot_pts = np.stack([oy.ravel() * h[0], ox.ravel() * h[1]], axis=1)
            foot_shape = (2 * kr[0] + 1, 2 * kr[1] + 1)
            anchor_offsets = [(a, b) for a in range(-ka[0], ka[0] + 1)
                              for b in range(-ka[1], ka[1] + 1)
                              if (a * h[0]) ** 2 + (b * h[1]) ** 2 <= cfg.eps**2 + 1e-12]
            anchor_pts = {o: np.array([o[0] * h[0], o[1] * h[1]]) for o in anchor_offsets}
            rr = np.sqrt(np.sum(foot_pts**2, axis=1))
        in_ball = rr <= K.support_R + 1e-12

        entries = []
        base = cfg.base_shapes(dim)
        for s in base + [NegatedShape(b) for b in base]:
            res = kappa(np.zeros(dim), s, K, n_r=cfg.kappa_n_r, n_th=cfg.kappa_n_th)
            _, grad, _ = s.eval(np.zeros(dim))
            vals = s.values(foot_pts)
            scale = max(1.0, float(np.max(np.abs(vals))))
            grad_nonzero = float(np.linalg.norm(grad)) > cfg.tol_grad * scale
            plus_active = grad_nonzero and res.kappa_star > 0.0
            minus_active = grad_nonzero and res.kappa_sub < 0.0
            plus_mask = (vals >= 0.0) & in_ball
            minus_mask = (vals <= 0.0) & in_ball
            plus_runs = tuple(footprint_runs(plus_mask.reshape(foot_shape)))
            minus_runs = tuple(footprint_runs(minus_mask.reshape(foot_shape)))
            p_anch = tuple(o for o in anchor_offsets if float(s.values(-anchor_pts[o][None, :])[0]) <= 0.0)
            m_anch = tuple(o for o in anchor_offsets if float(s.values(-anchor_pts[o][None, :])[0]) >= 0.0)
            dtv = cfg.time.dt
            p_slots = int(math.floor(icf_time_reset(cfg.cutoff, grad_nonzero,
                                                    res.kappa_star, +1) / dtv + 1e-9))
            m_slots = int(math.floor(icf_time_reset(cfg.cutoff, grad_nonzero,
                                                    res.kappa_sub, -1) / dtv + 1e-9))
            entries.append(ShapeEntry(s, res.kappa_star, res.kappa_sub, grad_nonzero,
                                      plus_active, minus_active, p_slots, m_slots,
                                      plus_runs, minus_runs, p_anch, m_anch))
        self.entries = entries

    def plus_entries(self):
        return [e for e in self.entries if e.plus_active and e.plus_anchors]

    def minus_entries(self):
        return [e for e in self.entries if e.minus_active and e.minus_anchors]


# -- admissibility and half-space sets (single-choice public surface) ----------------

@dataclass(frozen=True)
class HypersurfaceChoice:
    """Anchor point plus a level-set shape; side +1 for the maximizer."""

    anchor: np.ndarray
    phi: object                 # QuadraticTest or any shape with values/eval
    side: int = +1

    def __post_init__(self):
        object.__setattr__(self, "anchor", np.atleast_1d(np.asarray(self.anchor, float)))
        if self.side not in (+1, -1):
            raise InputError("side must be +1 or -1")


def is_admissible(choice: HypersurfaceChoice, x, eps: float) -> bool:
    x = as_point(x, choice.anchor.size)
    if np.linalg.norm(choice.anchor - x) > eps + 1e-12:
        return False
    phi_y = float(choice.phi.values(choice.anchor[None, :])[0])
    phi_x = float(choice.phi.values(x[None, :])[0])
    return choice.side * phi_y >= choice.side * phi_x - 1e-12


def halfspace_set(x, choice: HypersurfaceChoice, K: Kernel, grid: Grid,
                  tol_grad: float = 1e-8):
    """Opponent node set of one choice: half-region nodes, or ({x}, inactive).

    Active requires a nonzero shape gradient at the anchor and the right
    curvature sign (positive upper curvature on the plus side, negative
    lower curvature on the minus side).
    """
    x = as_point(x, grid.dim)
    y = choice.anchor
    phi = choice.phi
    phi_y = float(phi.values(y[None, :])[0])
    if hasattr(phi, "eval"):
        _, grad, _ = phi.eval(y)
    else:
        raise InputError("choice.phi must expose eval for the gradient test")
    res = kappa(y, phi, K)
    nodes = grid.nodes()
    scale = max(1.0, abs(phi_y), float(np.linalg.norm(grad)))
    grad_ok = float(np.linalg.norm(grad)) > tol_grad * scale
    if choice.side == +1:
        active = grad_ok and res.kappa_star > 0.0
        sel = phi.values(nodes) >= phi_y
    else:
        active = grad_ok and res.kappa_sub < 0.0
        sel = phi.values(nodes) <= phi_y
    if not active:
        return x[None, :], False
    inside = np.sum((nodes - y) ** 2, axis=1) <= K.support_R**2 + 1e-12
    return nodes[sel & inside], True


# -- single-point step operators (general time-indexed fields) -----------------------

def _eval_phi(phi_val, t: float, pts: np.ndarray) -> np.ndarray:
    return np.asarray(phi_val(t, pts), dtype=float).ravel()


def _step_single(phi_val, t: float, x, K: Kernel, cfg: IcfConfig, side: int) -> float:
    grid = cfg.grid
    x = as_point(x, grid.dim)
    dt = cfg.time.dt
    tabs = cfg.tables(K)
    t_stay = math.floor((t + cfg.cutoff.stay) / dt + 1e-9) * dt
    best = float(_eval_phi(phi_val, t_stay, x[None, :])[0])
    entries = tabs.plus_entries() if side == +1 else tabs.minus_entries()
    h = grid.h
    for e in entries:
        slots = e.plus_slots if side == +1 else e.minus_slots
        runs = e.plus_runs if side == +1 else e.minus_runs
        anchors = e.plus_anchors if side == +1 else e.minus_anchors
        t_new = math.floor(t / dt + 1e-9) * dt + slots * dt
        for a in anchors:
            y = x + np.array(a, dtype=float) * np.array(h)
            if not bool(np.all((y >= np.asarray(grid.lo) - 1e-12)
                               & (y <= np.asarray(grid.hi) + 1e-12))):
                continue
            pts = []
            for dy, c0, c1 in runs:
                if grid.dim == 1:
                    for c in range(c0, c1 + 1):
                        pts.append([y[0] + c * h[0]])
                else:
                    for c in range(c0, c1 + 1):
                        pts.append([y[0] + dy * h[0], y[1] + c * h[1]])
            pts = grid.clamp(np.asarray(pts))
            vals = _eval_phi(phi_val, t_new, pts)
            inner = float(np.min(vals)) if side == +1 else float(np.max(vals))
            if side == +1:
                best = max(best, inner)
            else:
                best = min(best, inner)
    return best


def paul_step(phi_val, t: float, x, K: Kernel, cfg: IcfConfig) -> float:
    """sup over plus choices of the inf over the half-region of phi_val."""
    return _step_single(phi_val, t, x, K, cfg, +1)


def carol_step(phi_val, t: float, x, K: Kernel, cfg: IcfConfig) -> float:
    """inf over minus choices of the sup over the half-region of phi_val."""
    return _step_single(phi_val, t, x, K, cfg, -1)


def game_step(phi_val, t: float, x, K: Kernel, cfg: IcfConfig) -> float:
    """One composed round: the maximizer's step applied to the minimizer's."""

    def inner(s: float, pts: np.ndarray) -> np.ndarray:
        return np.array([carol_step(phi_val, s, p, K, cfg) for p in np.atleast_2d(pts)])

    return paul_step(inner, t, x, K, cfg)


# -- backward solver -----------------------------------------------------------------

def offsets_to_runs(anchors, dim: int) -> list[tuple[int, int, int]]:
    """Merge integer offsets into per-row runs for masked_filter."""
    by_row: dict[int, list[int]] = {}
    for a in anchors:
        dy = 0 if dim == 1 else a[0]
        dx = a[0] if dim == 1 else a[1]
        by_row.setdefault(dy, []).append(dx)
    runs = []
    for dy in sorted(by_row):
        xs = sorted(by_row[dy])
        start = prev = xs[0]
        for v in xs[1:]:
            if v == prev + 1:
                prev = v
                continue
            runs.append((dy, start, prev))
            start = prev = v
        runs.append((dy, start, prev))
    return runs


@dataclass
class IcfSolution:
    grid: Grid
    time: TimeGrid
    eps: float
    s_start: int
    u_rows: np.ndarray          # (n_slots - s_start, *grid.shape)
    u_T: ScalarField
    c_rows: np.ndarray | None = None
    c_term: np.ndarray | None = None

    def at_slot(self, s: int) -> ScalarField:
        S = self.time.n_slots
        if s >= S:
            return self.u_T
        s = max(s, self.s_start)
        return ScalarField(self.grid, self.u_rows[s - self.s_start])

    def at_time(self, t: float) -> ScalarField:
        return self.at_slot(self.time.slot_of(t))

    def carol_at_slot(self, s: int) -> np.ndarray:
        if self.c_rows is None:
            raise InputError("solution does not carry the inner-step rows")
        if s >= self.time.n_slots:
            return self.c_term
        return self.c_rows[max(s, self.s_start) - self.s_start]


def solve(K: Kernel, u_T: ScalarField, T: float, t_start: float,
          cfg: IcfConfig) -> IcfSolution:
    """Slot-by-slot backward recursion of the composed round.

    Every slot applies, per active shape, one footprint filter over the
    whole grid (the opponent's half-region reduction) followed by the
    anchor reduction over the eps-ball offsets; inactive choices contribute
    the stay branch.  Values at or beyond the horizon are the terminal data.
    """
    grid = cfg.grid
    if u_T.grid != grid:
        raise InputError("terminal data must live on the solver grid")
    tg = cfg.time
    S = tg.n_slots
    s_start = tg.slot_of(t_start)
    if s_start >= S:
        return IcfSolution(grid, tg, cfg.eps, S, np.empty((0,) + grid.shape), u_T)
    tabs = cfg.tables(K)
    d0 = tabs.stay_slots
    plus = tabs.plus_entries()
    minus = tabs.minus_entries()

    n_rows = S - s_start
    u_rows = np.empty((n_rows,) + grid.shape)
    c_rows = np.empty((n_rows,) + grid.shape)
    uT = u_T.values

    def u_at(s: int) -> np.ndarray:
        return uT if s >= S else u_rows[s - s_start]

    # Carol's value once every future lookup is terminal
    c_term = uT.copy()
    for e in minus:
        dil = masked_filter(uT, list(e.minus_runs), minimum=False)
        red = masked_filter(dil, offsets_to_runs(e.minus_anchors, grid.dim),
                            minimum=True, mode="drop")
        c_term = np.minimum(c_term, red)

    def c_at(s: int) -> np.ndarray:
        return c_term if s >= S else c_rows[s - s_start]

    for s in range(S - 1, s_start - 1, -1):
        row = u_at(s + d0).copy()
        for e in minus:
            dil = masked_filter(u_at(s + e.minus_slots), list(e.minus_runs), minimum=False)
            row = np.minimum(row, masked_filter(
                dil, offsets_to_runs(e.minus_anchors, grid.dim), minimum=True,
                mode="drop"))
        c_rows[s - s_start] = row

        urow = c_at(s + d0).copy()
        for e in plus:
            ero = masked_filter(c_at(s + e.plus_slots), list(e.plus_runs), minimum=True)
            urow = np.maximum(urow, masked_filter(
                ero, offsets_to_runs(e.plus_anchors, grid.dim), minimum=False,
                mode="drop"))
        u_rows[s - s_start] = urow

    return IcfSolution(grid, tg, cfg.eps, s_start, u_rows, u_T,
                       c_rows=c_rows, c_term=c_term)


# -- play recording (for the monotone score-chain property) ---------------------------

@dataclass
class PlayRecord:
    x: np.ndarray
    anchor: np.ndarray | None
    landing: np.ndarray | None
    shape: object | None
    active: bool
    phi_at_x: float
    phi_at_anchor: float
    phi_at_landing: float


def record_paul_branch(sol: IcfSolution, K: Kernel, cfg: IcfConfig,
                       t: float, x) -> PlayRecord:
    """Replay the maximizer's argmax choice at (t, x) and log the shape values.

    Uses the inner-step rows stored by solve, so the replayed choice is the
    one the backward recursion actually realized (first argmax wins).
    """
    grid = cfg.grid
    x = as_point(x, grid.dim)
    tabs = cfg.tables(K)
    tg = cfg.time
    s = tg.slot_of(t)
    d0 = tabs.stay_slots
    h = np.array(grid.h)

    def c_field(slot: int) -> ScalarField:
        return ScalarField(grid, sol.carol_at_slot(slot))

    best_val = float(c_field(s + d0)(x))
    best = PlayRecord(x, None, None, None, False, 0.0, 0.0, 0.0)
    for e in tabs.plus_entries():
        cfld = c_field(s + e.plus_slots)
        for a in e.plus_anchors:
            y = x + np.array(a, dtype=float) * h
            if not bool(np.all((y >= np.asarray(grid.lo) - 1e-12)
                               & (y <= np.asarray(grid.hi) + 1e-12))):
                continue
            offs = []
            for dy, c0, c1 in e.plus_runs:
                for c in range(c0, c1 + 1):
                    offs.append((dy, c) if grid.dim == 2 else (c,))
            pts = grid.clamp(y[None, :] + np.array(offs, dtype=float) * h)
            vals = np.asarray(cfld(pts)).ravel()
            k = int(np.argmin(vals))
            val = float(vals[k])
            if val > best_val:
                best_val = val
                z = pts[k]
                sh = e.shape
                best = PlayRecord(
                    x, y, z, sh, True,
                    float(sh.values((x - y)[None, :])[0]),
                    float(sh.values(np.zeros((1, grid.dim)))[0]),
                    float(sh.values((z - y)[None, :])[0]))
    return best
