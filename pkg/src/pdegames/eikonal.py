"""The two-mover game for eikonal front propagation with sign-changing speed.

One round from (t, x): the maximizer moves to any grid node of the
eps-ball where the speed is strictly positive (or stays, if there is
none), then the minimizer moves from there to any node of its eps-ball
where the speed is strictly negative (or stays).  A move at local speed v
advances the clock by the clamped increment cutoff(eps / |v|), staying
costs exactly eps^2.

Because the accumulated times are irrational, every reset is rounded down
to a micro time grid of step dt <= eps^2 / 4 and values are memoized per
(slot, node); each reset spans at least four micro slots, so the backward
recursion over slots is well founded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cutoff import CutoffParams, eikonal_time_reset
from .errors import ConfigError, InputError
from .fields import Grid, ScalarField, as_point, as_points


@dataclass(frozen=True)
class SpeedField:
    """Lipschitz speed x -> v(x); the constant is declared, spot-checked in tests."""

    v: Callable[[np.ndarray], np.ndarray]
    lipschitz_L: float
    name: str = "custom"

    def __call__(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            pts = pts[:, None]
        return np.asarray(self.v(pts), dtype=float)


def const_speed(c: float) -> SpeedField:
    return SpeedField(lambda p: np.full(p.shape[0], float(c)), 0.0, name=f"const({c})")


def linear_speed() -> SpeedField:
    return SpeedField(lambda p: p[:, 0].copy(), 1.0, name="linear")


def two_zone_speed(ramp: float = 0.25) -> SpeedField:
    """+1 on the left, -1 on the right, linear ramp of width 2*ramp."""
    a = float(ramp)
    return SpeedField(lambda p: -np.clip(p[:, 0] / a, -1.0, 1.0), 1.0 / a,
                      name=f"two_zone(ramp={a})")


SPEEDS = {
    "const": const_speed,
    "linear": linear_speed,
    "two_zone": two_zone_speed,
}


def speed_by_name(name: str, **params) -> SpeedField:
    if name not in SPEEDS:
        raise ConfigError(f"unknown speed field {name!r}; known: {sorted(SPEEDS)}")
    return SPEEDS[name](**params)


@dataclass(frozen=True)
class TimeGrid:
    """Micro time grid for memoization; dt must divide T and obey dt <= eps^2/4."""

    T: float
    dt: float

    def __post_init__(self):
        if self.dt <= 0 or self.T <= 0:
            raise ConfigError("T and dt must be positive")
        if abs(round(self.T / self.dt) * self.dt - self.T) > 1e-9 * max(1.0, self.T):
            raise ConfigError("dt must divide the horizon T")

    @property
    def n_slots(self) -> int:
        return int(round(self.T / self.dt))

    def slot_of(self, t: float) -> int:
        return int(math.floor(t / self.dt + 1e-9))

    def check_for(self, eps: float) -> None:
        if self.dt > eps**2 / 4.0 + 1e-12:
            raise ConfigError(f"dt={self.dt} must be <= eps^2/4 = {eps**2 / 4.0}")


@dataclass(frozen=True)
class EikonalConfig:
    eps: float
    grid: Grid
    time: TimeGrid
    cutoff: CutoffParams = None

    def __post_init__(self):
        if self.cutoff is None:
            object.__setattr__(self, "cutoff", CutoffParams(eps=self.eps))
        self.time.check_for(self.eps)
        if min(self.grid.h) > self.eps / 4.0 + 1e-12:
            raise ConfigError("grid spacing must be <= eps/4 so the move ball "
                              "contains at least three nodes per axis")


# -- move sets -------------------------------------------------------------------

def _ball_nodes(grid: Grid, x: np.ndarray, eps: float) -> np.ndarray:
    nodes = grid.nodes()
    keep = np.sum((nodes - x) ** 2, axis=1) <= eps**2 + 1e-12
    return nodes[keep]


def move_set_plus(x, v: SpeedField, eps: float, grid: Grid):
    """Grid nodes of the eps-ball where v > 0 strictly, else ({x}, not moved)."""
    x = as_point(x, grid.dim)
    ball = _ball_nodes(grid, x, eps)
    vals = v(ball)
    sel = ball[vals > 0.0]
    if sel.shape[0] == 0:
        return x[None, :], False
    return sel, True


def move_set_minus(x, v: SpeedField, eps: float, grid: Grid):
    """Grid nodes of the eps-ball where v < 0 strictly, else ({x}, not moved)."""
    x = as_point(x, grid.dim)
    ball = _ball_nodes(grid, x, eps)
    vals = v(ball)
    sel = ball[vals < 0.0]
    if sel.shape[0] == 0:
        return x[None, :], False
    return sel, True


# -- single-step operators on time-indexed fields ---------------------------------

def paul_step(phi, t: float, x, v: SpeedField, cfg: EikonalConfig) -> float:
    """max over the plus move set of phi(t + reset, new point); slot-rounded times.

    ``phi`` is any callable (time, points (m, dim)) -> values (m,).
    """
    nodes, moved = move_set_plus(x, v, cfg.eps, cfg.grid)
    dt = cfg.time.dt
    if not moved:
        t_new = math.floor((t + cfg.cutoff.stay) / dt) * dt
        return float(np.asarray(phi(t_new, nodes)).ravel()[0])
    speeds = v(nodes)
    best = -math.inf
    for node, s in zip(nodes, speeds):
        reset = eikonal_time_reset(cfg.cutoff, True, float(s))
        t_new = math.floor((t + reset) / dt) * dt
        val = float(np.asarray(phi(t_new, node[None, :])).ravel()[0])
        if val > best:
            best = val
    return best


def carol_step(phi, t: float, x, v: SpeedField, cfg: EikonalConfig) -> float:
    """min over the minus move set; mirror image of paul_step."""
    nodes, moved = move_set_minus(x, v, cfg.eps, cfg.grid)
    dt = cfg.time.dt
    if not moved:
        t_new = math.floor((t + cfg.cutoff.stay) / dt) * dt
        return float(np.asarray(phi(t_new, nodes)).ravel()[0])
    speeds = v(nodes)
    best = math.inf
    for node, s in zip(nodes, speeds):
        reset = eikonal_time_reset(cfg.cutoff, True, abs(float(s)))
        t_new = math.floor((t + reset) / dt) * dt
        val = float(np.asarray(phi(t_new, node[None, :])).ravel()[0])
        if val < best:
            best = val
    return best


# -- backward solver ---------------------------------------------------------------

@dataclass
class EikonalSolution:
    """Value function on the micro time grid times the space grid."""

    grid: Grid
    time: TimeGrid
    eps: float
    values: np.ndarray          # (n_slots + pad, n_nodes), slots >= n_slots hold u_T
    speed: SpeedField
    u_T: ScalarField

    def at_slot(self, s: int) -> ScalarField:
        s = min(max(s, 0), self.values.shape[0] - 1)
        return ScalarField(self.grid, self.values[s].reshape(self.grid.shape))

    def at_time(self, t: float) -> ScalarField:
        return self.at_slot(self.time.slot_of(t))

    def value(self, t: float, x) -> float:
        fld = self.at_time(t)
        return float(fld(as_point(x, self.grid.dim)))


def _ball_offsets(grid: Grid, eps: float):
    """Integer index offsets of the closed eps-ball on the grid lattice."""
    ks = [int(math.floor(eps / h + 1e-9)) for h in grid.h]
    offs = []
    if grid.dim == 1:
        for d in range(-ks[0], ks[0] + 1):
            if abs(d * grid.h[0]) <= eps + 1e-12:
                offs.append((d,))
    else:
        for di in range(-ks[0], ks[0] + 1):
            for dj in range(-ks[1], ks[1] + 1):
                if (di * grid.h[0]) ** 2 + (dj * grid.h[1]) ** 2 <= eps**2 + 1e-12:
                    offs.append((di, dj))
    return offs


def _shifted(arr: np.ndarray, off, fill: float) -> np.ndarray:
    """arr sampled at index + off, out-of-range entries set to fill."""
    out = np.full_like(arr, fill)
    if arr.ndim == 1:
        d = off[0]
        if d == 0:
            return arr.copy()
        if d > 0:
            out[:-d] = arr[d:]
        else:
            out[-d:] = arr[:d]
        return out
    di, dj = off
    src_i = slice(max(di, 0), arr.shape[0] + min(di, 0))
    dst_i = slice(max(-di, 0), arr.shape[0] + min(-di, 0))
    src_j = slice(max(dj, 0), arr.shape[1] + min(dj, 0))
    dst_j = slice(max(-dj, 0), arr.shape[1] + min(-dj, 0))
    out[dst_i, dst_j] = arr[src_i, src_j]
    return out


def _ball_reduce(arr: np.ndarray, offs, op, fill: float) -> np.ndarray:
    out = np.full_like(arr, fill)
    for off in offs:
        out = op(out, _shifted(arr, off, fill))
    return out


def solve(v: SpeedField, u_T: ScalarField, T: float, t_start: float,
          cfg: EikonalConfig) -> EikonalSolution:
    """Backward slot recursion for the composed round (max move, then min move).

    The value at slot s combines, per node, the best plus-move arrival into
    the minimizing player's intermediate value A, which itself reads the
    value buffer at strictly later slots; both move sets fall back to the
    stay branch (reset eps^2) when empty.
    """
    grid = cfg.grid
    if u_T.grid != grid:
        raise InputError("terminal data must live on the solver grid")
    tg = cfg.time
    dt = tg.dt
    shape = grid.shape
    v_nodes = v(grid.nodes()).reshape(shape)
    pos = v_nodes > 0.0
    neg = v_nodes < 0.0
    d0 = int(math.floor(cfg.cutoff.stay / dt + 1e-9))

    def reset_slots(speed_abs: np.ndarray) -> np.ndarray:
        out = np.full(shape, d0, dtype=int)
        idx = speed_abs > 0.0
        resets = np.minimum(np.maximum(cfg.eps / np.where(idx, speed_abs, 1.0),
                                       cfg.cutoff.floor), cfg.cutoff.ceil)
        out[idx] = np.floor(resets[idx] / dt + 1e-9).astype(int)
        return out

    dP = reset_slots(np.where(pos, v_nodes, 0.0))
    dC = reset_slots(np.where(neg, -v_nodes, 0.0))

    S = tg.n_slots
    s_start = tg.slot_of(t_start)
    pad = int(dP.max() + dC.max() + d0 + 2)
    n_rows = S + pad
    u = np.empty((n_rows,) + shape)
    A = np.empty((n_rows,) + shape)
    u[S:] = u_T.values

    offs = _ball_offsets(grid, cfg.eps)

    # terminal band: Carol still moves but every arrival lands at u_T
    term_fut = np.where(neg, u_T.values, math.inf)
    red = _ball_reduce(term_fut, offs, np.minimum, math.inf)
    A_term = np.where(red < math.inf, red, u_T.values)
    A[S:] = A_term

    idx = np.indices(shape)
    for s in range(S - 1, s_start - 1, -1):
        fut_c = u[(s + dC,) + tuple(idx)]
        cand_c = np.where(neg, fut_c, math.inf)
        red_c = _ball_reduce(cand_c, offs, np.minimum, math.inf)
        A[s] = np.where(red_c < math.inf, red_c, u[s + d0])

        fut_p = A[(s + dP,) + tuple(idx)]
        cand_p = np.where(pos, fut_p, -math.inf)
        red_p = _ball_reduce(cand_p, offs, np.maximum, -math.inf)
        u[s] = np.where(red_p > -math.inf, red_p, A[s + d0])

    return EikonalSolution(grid=grid, time=tg, eps=cfg.eps, values=u.reshape(n_rows, -1),
                           speed=v, u_T=u_T)


def optimal_trajectory(sol: EikonalSolution, t0: float, x0) -> list[tuple[float, np.ndarray, str]]:
    """Replay one greedy-optimal play from (t0, x0); first argmax/argmin wins ties.

    Returns [(time, position, kind)] with kind in {"start", "paul", "carol"};
    stops once the running time reaches the horizon.
    """
    grid = sol.grid
    tg = sol.time
    dt = tg.dt
    cutoff_p = CutoffParams(eps=sol.eps)
    x = as_point(x0, grid.dim)
    nodes = grid.nodes()
    i = int(np.argmin(np.sum((nodes - x) ** 2, axis=1)))
    x = nodes[i]
    s = tg.slot_of(t0)
    out = [(s * dt, x.copy(), "start")]
    S = tg.n_slots
    vals = sol.values
    d0 = int(math.floor(cutoff_p.stay / dt + 1e-9))

    def best_move(s_now, x_now, sign):
        ball = _ball_nodes(grid, x_now, sol.eps)
        speeds = sol.speed(ball)
        sel = speeds > 0 if sign > 0 else speeds < 0
        if not np.any(sel):
            return x_now, s_now + d0, False
        cand = ball[sel]
        cand_speeds = np.abs(speeds[sel])
        best_val = -math.inf if sign > 0 else math.inf
        best = None
        for node, sp in zip(cand, cand_speeds):
            reset = eikonal_time_reset(cutoff_p, True, float(sp))
            s_new = s_now + int(math.floor(reset / dt + 1e-9))
            j = int(np.argmin(np.sum((nodes - node) ** 2, axis=1)))
            val = vals[min(s_new, vals.shape[0] - 1), j]
            if (sign > 0 and val > best_val) or (sign < 0 and val < best_val):
                best_val = val
                best = (node, s_new)
        return best[0], best[1], True

    while s < S:
        x, s, _ = best_move(s, x, +1)
        out.append((s * dt, x.copy(), "paul"))
        if s >= S:
            break
        x, s, _ = best_move(s, x, -1)
        out.append((s * dt, x.copy(), "carol"))
    return out
