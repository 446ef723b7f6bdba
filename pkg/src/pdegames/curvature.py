"""Integral curvature of level sets and admissibility checks for kernels.

The curvature of the level set of U through x, weighted by an even kernel K
supported in a ball of radius R, is the difference of kernel masses of the
super- and sub-level sets:

    kappa_star = sum of K over {U(x+z) >= U(x)}  minus  K over {U(x+z) <  U(x)}
    kappa_sub  = same with strict / weak inequalities swapped

Both are computed on one deterministic node set with symmetric pairs
(z and -z evaluated together), so kappa_sub <= kappa_star holds exactly and
they differ only through nodes that land on the level set itself.

The kernel singularity at the origin is handled by exclusion, not
compensation: nodes inside a ball of radius delta0 are skipped and the
skipped contribution enters the reported error bar.  For inputs that expose
a gradient the excluded mass is bounded by the kernel mass of a paraboloid
wedge around the tangent plane (the same region whose integrability the
kernel admissibility conditions demand); without gradient information the
crude bound is the whole excluded-ball mass, which is infinite for
singular kernels and flags the result.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .quadutil import gauss_rule

from .errors import ConfigError, InputError
from .fields import Grid, QuadraticTest, ScalarField, as_point, as_points

SPHERE_MEASURE = {1: 2.0, 2: 2.0 * math.pi}


@dataclass(frozen=True)
class Kernel:
    """Even kernel with radial profile, supported in |z| <= support_R.

    ``profile`` maps radii to densities (vectorized).  ``singularity_exp``
    records the blow-up order at the origin (0 for bounded kernels) and is
    metadata only; all admissibility checks are numerical.
    """

    dim: int
    profile: Callable[[np.ndarray], np.ndarray]
    support_R: float
    singularity_exp: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError("kernel dimension must be 1 or 2")
        if self.support_R <= 0:
            raise ConfigError("support_R must be positive")

    def evaluate(self, z) -> np.ndarray:
        pts = as_points(z, self.dim)
        r = np.sqrt(np.sum(pts * pts, axis=1))
        return np.asarray(self.profile(r), dtype=float)


def smooth_cutoff(r: np.ndarray, R: float) -> np.ndarray:
    """C^2 even cutoff equal to 1 at 0 and vanishing at |z| = R."""
    u = np.maximum(0.0, 1.0 - (np.asarray(r, dtype=float) / R) ** 2)
    return u**3


def late_rolloff(r: np.ndarray, R: float, flat_until: float = 0.85) -> np.ndarray:
    """C^2 even cutoff that is exactly 1 up to flat_until * R, 0 beyond R.

    A quintic smoothstep bridges the roll-off band, so first and second
    derivatives vanish at both ends; keeping the cutoff flat over most of
    the support preserves the small-radius mass asymptotics of singular
    kernels.
    """
    r = np.asarray(r, dtype=float)
    a = flat_until * R
    t = np.clip((r - a) / (R - a), 0.0, 1.0)
    return 1.0 - t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def bump_kernel(dim: int, support_R: float = 1.0, amplitude: float = 1.0) -> Kernel:
    R = float(support_R)

    def prof(r):
        return amplitude * smooth_cutoff(r, R)

    return Kernel(dim, prof, R, singularity_exp=0.0, name=f"bump(R={R})")


def power_kernel(dim: int, alpha: float, support_R: float = 1.0,
                 amplitude: float | None = None) -> Kernel:
    """K(z) = C(z) / |z|^(dim+alpha) with a smooth even cutoff at support_R.

    Admissible for alpha in (0, 1); larger exponents are constructible so
    the validator has something to reject.  The cutoff amplitude defaults
    to (1 - alpha) / 4, which keeps desk-scale ball curvatures within the
    speed range the games can represent at moderate eps (the clamp caps
    representable curvature at eps^(-1/2)) and vanishes toward the
    classical-curvature limit exponent.
    """
    R = float(support_R)
    a = float(alpha)
    amp = float(amplitude) if amplitude is not None else max((1.0 - a) / 4.0, 0.025)

    def prof(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r > 0, r, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where((r > 0) & (r <= R),
                           amp * late_rolloff(r, R) * safe ** (-dim - a), 0.0)
        return out

    return Kernel(dim, prof, R, singularity_exp=a,
                  name=f"power(alpha={a},R={R},amp={amp})")


KERNELS = {
    "bump": bump_kernel,
    "power": power_kernel,
}


def kernel_by_name(name: str, dim: int, **params) -> Kernel:
    if name not in KERNELS:
        raise ConfigError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}")
    return KERNELS[name](dim, **params)


# -- kernel mass integrals -----------------------------------------------------

def mass_outside(K: Kernel, delta: float, n: int = 48) -> float:
    """Kernel mass over delta <= |z| <= support_R (dyadic shells, GL nodes)."""
    R = K.support_R
    if delta >= R:
        return 0.0
    total = 0.0
    edges = [delta]
    while edges[-1] < R:
        edges.append(min(edges[-1] * 2.0, R))
    gx, gw = gauss_rule(n)
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * gx + 0.5 * (a + b)
        w = 0.5 * (b - a) * gw
        total += float(np.sum(w * K.profile(r) * SPHERE_MEASURE[K.dim] * r ** (K.dim - 1)))
    return total


def mass_inside(K: Kernel, delta: float, shells: int = 40) -> float:
    """Kernel mass over |z| < delta; +inf when the origin mass diverges."""
    delta = min(delta, K.support_R)
    gx, gw = gauss_rule(16)
    total = 0.0
    b = delta
    increments = []
    for _ in range(shells):
        a = b / 2.0
        r = 0.5 * (b - a) * gx + 0.5 * (a + b)
        w = 0.5 * (b - a) * gw
        inc = float(np.sum(w * K.profile(r) * SPHERE_MEASURE[K.dim] * r ** (K.dim - 1)))
        increments.append(inc)
        total += inc
        b = a
    tail = increments[-6:]
    ratios = [tail[i + 1] / tail[i] for i in range(len(tail) - 1) if tail[i] > 1e-300]
    if ratios and float(np.median(ratios)) > 0.98 and increments[-1] > 1e-14 * max(increments):
        return math.inf
    if ratios:
        rho = float(np.median(ratios))
        if rho < 1.0:
            total += increments[-1] * rho / (1.0 - rho)
    return total


def paraboloid_mass(K: Kernel, r_param: float, e=None, outer: float | None = None,
                    n_w: int = 40, n_s: int = 16) -> float:
    """Kernel mass of the paraboloid region r |z.e| <= |z_perp|^2 inside B_outer.

    In one dimension the region degenerates to {0} and the mass is 0.  The
    kernel is radial, so the direction e only fixes the frame; it is kept in
    the signature for clarity.  Returns +inf if the shell sums near the
    origin fail to converge.
    """
    if K.dim == 1:
        return 0.0
    R = K.support_R if outer is None else min(outer, K.support_R)
    if r_param <= 0:
        return mass_inside(K, R)
    gx, gw = gauss_rule(n_s)
    w_hi = R
    total = 0.0
    increments = []
    for _ in range(60):
        w_lo = w_hi / 1.5
        wn, ww = gauss_rule(n_w // 4)
        wr = 0.5 * (w_hi - w_lo) * wn + 0.5 * (w_lo + w_hi)
        wwt = 0.5 * (w_hi - w_lo) * ww
        s_max = np.minimum(wr**2 / r_param, np.sqrt(np.maximum(R**2 - wr**2, 0.0)))
        # inner integral over s in [0, s_max] for each w, then 4x for symmetry
        s_nodes = 0.5 * s_max[:, None] * (gx[None, :] + 1.0)
        s_wts = 0.5 * s_max[:, None] * gw[None, :]
        rad = np.sqrt(wr[:, None] ** 2 + s_nodes**2)
        inner = np.sum(s_wts * K.profile(rad), axis=1)
        inc = 4.0 * float(np.sum(wwt * inner))
        increments.append(inc)
        total += inc
        w_hi = w_lo
        if w_hi < 1e-7 * R:
            break
    tail = increments[-6:]
    ratios = [tail[i + 1] / tail[i] for i in range(len(tail) - 1) if tail[i] > 1e-300]
    if ratios and float(np.median(ratios)) > 0.98 and increments[-1] > 1e-12 * max(increments):
        return math.inf
    if ratios:
        rho = float(np.median(ratios))
        if rho < 1.0:
            total += increments[-1] * rho / (1.0 - rho)
    return total


# -- kernel validation ----------------------------------------------------------

@dataclass
class KernelReport:
    ok: bool
    even_ok: bool
    support_ok: bool
    ball_sequence: list[float]
    paraboloid_sequences: dict[float, list[float]]
    messages: list[str] = field(default_factory=list)


def validate_kernel(K: Kernel, radii=(0.2, 0.1, 0.05, 0.025),
                    directions=(0.0, 0.5, 1.2)) -> KernelReport:
    """Check evenness, support, and the two smallness conditions.

    ``delta * mass(|z| between delta and R)`` and
    ``r * mass(paraboloid Q(r, e))`` must both decrease toward zero along
    the given radius sequence; any non-decreasing step rejects the kernel.
    """
    msgs: list[str] = []
    rng = np.random.default_rng(98421)
    pts = rng.uniform(-K.support_R, K.support_R, size=(64, K.dim))
    even_ok = bool(np.allclose(K.evaluate(pts), K.evaluate(-pts), rtol=1e-9, atol=1e-12))
    if not even_ok:
        msgs.append("kernel is not even")

    probe = np.linspace(1.001, 2.0, 9) * K.support_R
    support_ok = bool(np.all(K.profile(probe) == 0.0))
    if not support_ok:
        msgs.append("kernel has mass beyond support_R")

    ball_seq = [d * mass_outside(K, d) for d in radii]
    ball_ok = all(b < a * (1.0 + 1e-9) and math.isfinite(b)
                  for a, b in zip(ball_seq[:-1], ball_seq[1:]))
    if not ball_ok:
        msgs.append(f"delta * outside-ball mass fails to decrease: {ball_seq}")

    par_seqs: dict[float, list[float]] = {}
    par_ok = True
    if K.dim == 2:
        for th in directions:
            seq = [r * paraboloid_mass(K, r, e=th) for r in radii]
            par_seqs[float(th)] = seq
            ok = all(b < a * (1.0 + 1e-9) and math.isfinite(b)
                     for a, b in zip(seq[:-1], seq[1:]))
            par_ok = par_ok and ok
            if not ok:
                msgs.append(f"r * paraboloid mass fails to decrease (e={th}): {seq}")
    ok = even_ok and support_ok and ball_ok and par_ok
    return KernelReport(ok, even_ok, support_ok, ball_seq, par_seqs, msgs)


# -- level-set function adapters -------------------------------------------------

class ConeCap:
    """Signed distance-type cap  orientation * (rho - |z - center|).

    With orientation +1 the super-level set through a surface point is the
    closed ball; with -1 it is the closed complement.  Used both as a test
    shape and as the radial terminal data of the shrinking-ball runs.
    """

    def __init__(self, center, rho: float, orientation: int = +1):
        self.center = np.atleast_1d(np.asarray(center, dtype=float))
        self.rho = float(rho)
        self.orientation = int(orientation)
        if self.orientation not in (+1, -1):
            raise InputError("orientation must be +1 or -1")
        self.dim = self.center.size

    def values(self, pts) -> np.ndarray:
        pts = as_points(pts, self.dim)
        d = np.sqrt(np.sum((pts - self.center) ** 2, axis=1))
        return self.orientation * (self.rho - d)

    def __call__(self, pts):
        out = self.values(pts)
        return float(out[0]) if out.size == 1 else out

    def eval(self, x):
        x = as_point(x, self.dim)
        v = x - self.center
        d = float(np.linalg.norm(v))
        if d < 1e-12:
            return self.orientation * self.rho, np.zeros(self.dim), np.zeros((self.dim, self.dim))
        n = v / d
        grad = -self.orientation * n
        hess = -self.orientation * (np.eye(self.dim) - np.outer(n, n)) / d
        return self.orientation * (self.rho - d), grad, hess


def _level_values(U, pts: np.ndarray) -> np.ndarray:
    if isinstance(U, ScalarField):
        from .fields import interpolate
        return interpolate(U, pts)
    if hasattr(U, "values"):
        return np.asarray(U.values(pts), dtype=float)
    return np.asarray(U(pts), dtype=float)


def _gradient_info(U, x: np.ndarray, step: float):
    """(grad, hess_norm) analytically when available, else finite differences."""
    if hasattr(U, "eval"):
        _, g, H = U.eval(x)
        return np.asarray(g, float), float(np.linalg.norm(np.asarray(H), 2))
    d = x.size
    g = np.zeros(d)
    h_diag = np.zeros(d)
    u0 = float(_level_values(U, x[None, :])[0])
    for i in range(d):
        e = np.zeros(d)
        e[i] = step
        up = float(_level_values(U, (x + e)[None, :])[0])
        dn = float(_level_values(U, (x - e)[None, :])[0])
        g[i] = (up - dn) / (2 * step)
        h_diag[i] = (up - 2 * u0 + dn) / step**2
    return g, float(np.max(np.abs(h_diag))) if d else 0.0


# -- the curvature pair ----------------------------------------------------------

@dataclass(frozen=True)
class KappaResult:
    kappa_star: float
    kappa_sub: float
    error_bar: float
    flagged: bool = False

    def __iter__(self):
        return iter((self.kappa_star, self.kappa_sub))


def _pair_nodes(K: Kernel, delta0: float, n_r: int, n_th: int):
    """Half-space quadrature nodes (one per +-pair) with kernel weights."""
    R = K.support_R
    q = (R / delta0) ** (1.0 / n_r)
    i = np.arange(n_r)
    r_mid = delta0 * q ** (i + 0.5)
    dr = delta0 * (q ** (i + 1) - q**i)
    if K.dim == 1:
        z = r_mid[:, None]
        w = K.profile(r_mid) * dr
        return z, w
    th = (np.arange(n_th) + 0.5) * (math.pi / n_th)
    dth = math.pi / n_th
    Z = np.stack([np.outer(r_mid, np.cos(th)).ravel(),
                  np.outer(r_mid, np.sin(th)).ravel()], axis=1)
    W = np.outer(K.profile(r_mid) * r_mid * dr, np.full(n_th, dth)).ravel()
    return Z, W


def _kappa_sums(U, x: np.ndarray, z: np.ndarray, w: np.ndarray, u_x: float):
    up = _level_values(U, x[None, :] + z) - u_x
    dn = _level_values(U, x[None, :] - z) - u_x
    s_star = np.where(up >= 0.0, 1.0, -1.0) + np.where(dn >= 0.0, 1.0, -1.0)
    s_sub = np.where(up > 0.0, 1.0, -1.0) + np.where(dn > 0.0, 1.0, -1.0)
    return float(np.sum(w * s_star)), float(np.sum(w * s_sub))


def kappa(x, U, K: Kernel, delta0: float | None = None,
          n_r: int | None = None, n_th: int = 256,
          tolerance: float = math.inf) -> KappaResult:
    """Upper and lower integral curvature of {U = U(x)} at x.

    The error bar combines the excluded-origin bound with a quadrature
    self-estimate (value change under halved resolution).  A bar above
    ``tolerance`` flags the result; the values are still returned.
    """
    x = as_point(x, K.dim)
    if delta0 is None:
        if isinstance(U, ScalarField):
            delta0 = 2.0 * U.grid.h_max
        else:
            delta0 = K.support_R / 50.0
    delta0 = min(delta0, 0.5 * K.support_R)
    if n_r is None:
        n_r = 64 if K.dim == 2 else 512
    u_x = float(_level_values(U, x[None, :])[0])

    z, w = _pair_nodes(K, delta0, n_r, n_th)
    ks, ksub = _kappa_sums(U, x, z, w, u_x)
    z2, w2 = _pair_nodes(K, delta0, max(n_r // 2, 4), max(n_th // 2, 4))
    ks2, ksub2 = _kappa_sums(U, x, z2, w2, u_x)
    bar_quad = max(abs(ks - ks2), abs(ksub - ksub2))

    fd_step = U.grid.h_max if isinstance(U, ScalarField) else delta0 / 4.0
    g, h_norm = _gradient_info(U, x, fd_step)
    g_norm = float(np.linalg.norm(g))
    scale = max(abs(u_x), g_norm, h_norm, 1.0)
    if g_norm > 1e-8 * scale:
        r_hat = g_norm / (h_norm + 1e-300)
        if K.dim == 1:
            bar_excl = 0.0 if delta0 <= r_hat else mass_inside(K, delta0)
        else:
            bar_excl = 2.0 * paraboloid_mass(K, r_hat, outer=delta0)
    else:
        bar_excl = mass_inside(K, delta0)

    bar = bar_excl + bar_quad
    return KappaResult(ks, ksub, bar, flagged=bool(bar > tolerance))
