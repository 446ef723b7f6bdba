"""The function-choosing game for nonlocal parabolic equations.

One step of the scheme at (t, x) is a sup-inf: the maximizing player picks
a C^2 candidate from a finite family (the mollified interpolant of the next
time slice, quadratic perturbations of it, and standalone quadratics, all
projected to the eps^(-alpha) caps), the minimizing player picks a grid
node y inside the ball of radius trunc_R, and the score bracket is

    U_next(y) + Phi(x) - Phi(y) - eps * F(t, x, DPhi(x), D2Phi(x), I_R[x, Phi]).

The candidate integrals decompose linearly: one quadrature call for the
shared mollified base plus an exact second-moment identity for each pure
quadratic part (the symmetric-pair form of I_R maps any quadratic with
curvature G to 0.5 * <G, M> with M the full second-moment matrix of the
measure), which keeps the backward solver at one quadrature per node.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .cutoff import CutoffParams
from .errors import ConfigError, InputError, NumericalError
from .fields import (Grid, QuadraticTest, ScalarField, as_point, interpolate,
                     mollified_eval, mollified_values, project_to_caps)
from .levy import LevyMeasure, inner_second_moment, nonlocal_operator


@dataclass(frozen=True)
class Nonlinearity:
    """Right-hand side F(t, x, p, A, l) with its growth metadata.

    ``k1``/``k2`` are the gradient/Hessian growth exponents and
    ``lipschitz_l`` the Lipschitz constant in the nonlocal slot; they feed
    the admissible-alpha bound and the score-bound exponents.
    """

    name: str
    eval: Callable[[float, np.ndarray, np.ndarray, np.ndarray, float], float]
    k1: float = 0.0
    k2: float = 0.0
    lipschitz_l: float = 1.0

    @property
    def growth_order(self) -> float:
        return max(1.0, self.k1, self.k2)

    def __call__(self, t, x, p, A, l) -> float:
        return float(self.eval(t, x, p, A, l))


def linear_nonlocal() -> Nonlinearity:
    return Nonlinearity("linear_nonlocal", lambda t, x, p, A, l: -l,
                        k1=0.0, k2=0.0, lipschitz_l=1.0)


def advection(b) -> Nonlinearity:
    b = np.atleast_1d(np.asarray(b, dtype=float))

    def f(t, x, p, A, l):
        k = min(len(b), len(p))
        return -float(np.dot(b[:k], p[:k]))

    return Nonlinearity(f"advection(b={list(b)})", f,
                        k1=1.0, k2=0.0, lipschitz_l=0.0)


def nonlocal_plus_quadratic() -> Nonlinearity:
    return Nonlinearity("nonlocal_plus_quadratic",
                        lambda t, x, p, A, l: -l + float(np.dot(p, p)),
                        k1=2.0, k2=0.0, lipschitz_l=1.0)


NONLINEARITIES: dict[str, Callable[..., Nonlinearity]] = {
    "linear_nonlocal": linear_nonlocal,
    "advection": advection,
    "nonlocal_plus_quadratic": nonlocal_plus_quadratic,
}


def nonlinearity_by_name(name: str, **params) -> Nonlinearity:
    if name not in NONLINEARITIES:
        raise ConfigError(f"unknown nonlinearity {name!r}; known: {sorted(NONLINEARITIES)}")
    return NONLINEARITIES[name](**params)


@dataclass(frozen=True)
class PideConfig:
    """Step size, caps, and the finite family the maximizer searches."""

    eps: float
    alpha: float
    trunc_R: float
    grid: Grid
    p_values: tuple[float, ...] = (-0.5, 0.0, 0.5)
    gamma_values: tuple[float, ...] = (-1.0, 0.0, 1.0)
    pure_quadratics: bool = True

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ConfigError("eps must lie in (0, 1)")
        if self.alpha <= 0.0:
            raise ConfigError("alpha must be positive")
        if self.trunc_R <= 0.0:
            raise ConfigError("trunc_R must be positive")

    @property
    def cap(self) -> float:
        return self.eps ** (-self.alpha)

    def validate_for(self, F: Nonlinearity) -> None:
        bound = 1.0 / F.growth_order
        if not self.alpha < bound:
            raise ConfigError(
                f"alpha={self.alpha} must be below 1/max(1,k1,k2)={bound} for {F.name}")


def _axis_tuples(values: tuple[float, ...], dim: int):
    if dim == 1:
        return [np.array([v]) for v in values]
    return [np.array([a, b]) for a in values for b in values]


def _merge_quadratic(base_q: QuadraticTest, p: np.ndarray, gamma: np.ndarray,
                     center: np.ndarray) -> QuadraticTest:
    """base_q plus a quadratic centered elsewhere, as one QuadraticTest."""
    d = center - base_q.x0
    c_new = base_q.c + float(p @ (-d)) + 0.5 * float(d @ gamma @ d)
    p_new = base_q.p + p - gamma @ d
    return replace(base_q, c=c_new, p=p_new, gamma=base_q.gamma + gamma)


def helen_candidates(U_next, x, cfg: PideConfig) -> list[QuadraticTest]:
    """The maximizer's move family at x, every member projected to the caps.

    Contains the mollified interpolant of U_next (the formally optimal
    choice), quadratic perturbations of it on the configured parameter
    grids, and standalone quadratics.
    """
    x = as_point(x, cfg.grid.dim)
    dim = cfg.grid.dim
    cands: list[QuadraticTest] = []
    if isinstance(U_next, ScalarField):
        root = QuadraticTest(x0=x, base=U_next)
    elif isinstance(U_next, QuadraticTest):
        root = U_next
    else:
        raise InputError("U_next must be a ScalarField or a QuadraticTest")
    cands.append(root)
    p_list = _axis_tuples(cfg.p_values, dim)
    g_list = [np.diag(g) for g in _axis_tuples(cfg.gamma_values, dim)]
    for p in p_list:
        for g in g_list:
            if not (np.any(p) or np.any(g)):
                continue
            if root.base is not None:
                cands.append(replace(root, x0=x, c=0.0, p=p.copy(), gamma=g.copy()))
            else:
                cands.append(_merge_quadratic(root, p, g, x))
    if cfg.pure_quadratics:
        for p in p_list:
            for g in g_list:
                cands.append(QuadraticTest(x0=x, c=0.0, p=p.copy(), gamma=g.copy()))
    return [project_to_caps(c, cfg.cap, cfg.grid, at=x) for c in cands]


def _mark_nodes(grid: Grid, x: np.ndarray, R: float) -> np.ndarray:
    """Lattice nodes within the R-ball of x, continued beyond the box.

    The equation lives on the whole space; restricting the minimizer to the
    box would let candidates that grow outside it escape punishment near
    the boundary (the field itself continues constantly, so exterior nodes
    are still evaluable).  x itself is appended last.
    """
    axes = []
    for i in range(grid.dim):
        h = grid.h[i]
        k_lo = int(math.floor((x[i] - R - grid.lo[i]) / h))
        k_hi = int(math.ceil((x[i] + R - grid.lo[i]) / h))
        axes.append(grid.lo[i] + h * np.arange(k_lo, k_hi + 1))
    if grid.dim == 1:
        nodes = axes[0][:, None]
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        nodes = np.stack([X.ravel(), Y.ravel()], axis=1)
    keep = np.sum((nodes - x) ** 2, axis=1) <= R**2 + 1e-12
    return np.concatenate([nodes[keep], x[None, :]], axis=0)


def _full_second_moment(m: LevyMeasure) -> np.ndarray:
    if m.analytic_radial_m2 is not None:
        return (m.analytic_radial_m2(m.trunc_R) / m.dim) * np.eye(m.dim)
    # quadrature fallback: inner part up to 1 plus shells out to R
    M = inner_second_moment(m, min(1.0, m.trunc_R))
    if m.trunc_R > 1.0:
        from .levy import _radial_shell_integral
        extra = _radial_shell_integral(m, lambda r: r**2, 1.0, m.trunc_R)
        M = M + (extra / m.dim) * np.eye(m.dim)
    return M


def _evaluate_values(U_next, pts: np.ndarray) -> np.ndarray:
    if isinstance(U_next, ScalarField):
        return interpolate(U_next, pts)
    return U_next.values(pts)


def one_step(U_next, t: float, x, F: Nonlinearity, m: LevyMeasure,
             cfg: PideConfig, candidates: list[QuadraticTest] | None = None) -> float:
    """One backward step of the scheme at (t, x); deterministic tie-breaks.

    The sup scans the candidate family in order and keeps the first strict
    maximum; the inner inf scans mark nodes in grid order with x appended.
    """
    x = as_point(x, cfg.grid.dim)
    if candidates is None:
        candidates = helen_candidates(U_next, x, cfg)
    marks = _mark_nodes(cfg.grid, x, cfg.trunc_R)
    U_marks = _evaluate_values(U_next, marks)
    M_full = _full_second_moment(m)

    # shared mollified base, evaluated once
    shared_base = None
    for c in candidates:
        if c.base is not None:
            shared_base = c.base
            break
    if shared_base is not None:
        width = 2.0 * shared_base.grid.h_max
        base_marks = mollified_values(shared_base, marks, width)
        base_x, base_grad, base_hess = mollified_eval(shared_base, x, width)
        base_probe = QuadraticTest(x0=x, base=shared_base, mollify_width=width)
        base_I = nonlocal_operator(m, base_probe, x)

    best = -math.inf
    for cand in candidates:
        if cand.base is None:
            d = marks - cand.x0
            vals = cand.c + d @ cand.p + 0.5 * np.einsum("mi,ij,mj->m", d, cand.gamma, d)
            dx = x - cand.x0
            phi_x = cand.c + dx @ cand.p + 0.5 * dx @ cand.gamma @ dx
            grad = cand.p + cand.gamma @ dx
            hess = cand.gamma
            I_val = 0.5 * float(np.sum(cand.gamma * M_full))
        elif cand.base is shared_base and cand.mollify_width == width:
            s = cand.base_scale
            d = marks - cand.x0
            vals = (cand.c + d @ cand.p
                    + 0.5 * np.einsum("mi,ij,mj->m", d, cand.gamma, d)
                    + s * base_marks)
            dx = x - cand.x0
            phi_x = cand.c + dx @ cand.p + 0.5 * dx @ cand.gamma @ dx + s * base_x
            grad = cand.p + cand.gamma @ dx + s * base_grad
            hess = cand.gamma + s * base_hess
            I_val = s * base_I + 0.5 * float(np.sum(cand.gamma * M_full))
        else:
            vals = cand.values(marks)
            phi_x, grad, hess = cand.eval(x)
            I_val = nonlocal_operator(m, cand, x)
        f_val = F(t, x, grad, hess, I_val)
        if not math.isfinite(f_val):
            raise NumericalError(
                f"nonlinearity {F.name} returned non-finite value for a candidate at x={x}")
        bracket = float(np.min(U_marks - vals)) + float(phi_x) - cfg.eps * f_val
        if bracket > best:
            best = bracket
    return best


def solve(F: Nonlinearity, m: LevyMeasure, u_T: ScalarField, T: float,
          t_start: float, cfg: PideConfig, threads: int = 1) -> list[ScalarField]:
    """Backward induction from u_T; one slice per step t_k = T - k eps."""
    cfg.validate_for(F)
    slices = [u_T]
    n_steps = int(math.ceil((T - t_start) / cfg.eps - 1e-9))
    nodes = cfg.grid.nodes()
    for k in range(1, n_steps + 1):
        t_k = T - k * cfg.eps
        prev = slices[-1]

        def step_at(i: int) -> float:
            return one_step(prev, t_k, nodes[i], F, m, cfg)

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor
            with ThreadPoolExecutor(max_workers=threads) as ex:
                new_vals = list(ex.map(step_at, range(len(nodes))))
        else:
            new_vals = [step_at(i) for i in range(len(nodes))]
        slices.append(ScalarField(cfg.grid, np.asarray(new_vals).reshape(cfg.grid.shape)))
    return slices


def consistency_residual(F: Nonlinearity, m: LevyMeasure, psi: QuadraticTest,
                         t: float, x, eps_list, cfg: PideConfig) -> list[float]:
    """|S_eps[psi](t,x) - psi(x) + eps F(t,x,Dpsi,D2psi,I_R[x,psi])| / eps per eps.

    The scheme's one-sided bound (play the candidate psi itself) makes the
    quantity inside the absolute value nonnegative up to family slack.
    """
    x = as_point(x, cfg.grid.dim)
    psi_x, grad, hess = psi.eval(x)
    I_psi = nonlocal_operator(m, psi, x)
    out = []
    for eps in eps_list:
        cfg_e = replace(cfg, eps=float(eps))
        s_val = one_step(psi, t, x, F, m, cfg_e)
        f_val = F(t, x, grad, hess, I_psi)
        out.append(abs(s_val - psi_x + eps * f_val) / eps)
    return out


def scheme_lower_bound_gap(F: Nonlinearity, m: LevyMeasure, psi: QuadraticTest,
                           t: float, x, cfg: PideConfig) -> float:
    """S_eps[psi](t,x) - (psi(x) - eps F(...)); >= 0 when psi is admissible."""
    x = as_point(x, cfg.grid.dim)
    psi_x, grad, hess = psi.eval(x)
    I_psi = nonlocal_operator(m, psi, x)
    s_val = one_step(psi, t, x, F, m, cfg)
    return s_val - (psi_x - cfg.eps * F(t, x, grad, hess, I_psi))


def random_admissible_candidate(rng: np.random.Generator, cfg: PideConfig,
                                at=None) -> QuadraticTest:
    """A random quadratic respecting the three eps^(-alpha) caps at ``at``."""
    dim = cfg.grid.dim
    cap = cfg.cap
    c = rng.uniform(-cap, cap)
    p = rng.uniform(-1.0, 1.0, size=dim)
    nrm = np.linalg.norm(p)
    if nrm > 0:
        p = p * (rng.uniform(0, cap) / nrm)
    A = rng.uniform(-1.0, 1.0, size=(dim, dim))
    G = 0.5 * (A + A.T)
    spec = np.linalg.norm(G, 2)
    if spec > 0:
        G = G * (rng.uniform(0, cap) / spec)
    x0 = np.array([rng.uniform(lo, hi) for lo, hi in zip(cfg.grid.lo, cfg.grid.hi)])
    q = QuadraticTest(x0=x0, c=c, p=p, gamma=G)
    return project_to_caps(q, cap, cfg.grid, at=at)


def score_bound_check(F: Nonlinearity, m: LevyMeasure, cfg: PideConfig,
                      trials: int = 100, rng: np.random.Generator | None = None) -> float:
    """Smallest C with  -eps F(t,x,DPhi,D2Phi,I_R) <= C eps^gamma over samples.

    gamma = 1 - alpha * max(1, k1, k2); the one-round score increment of an
    admissible candidate cannot outgrow that rate.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    gamma = 1.0 - cfg.alpha * F.growth_order
    if gamma <= 0:
        raise ConfigError("alpha too large: the score-bound exponent is not positive")
    worst = 0.0
    for _ in range(trials):
        x = np.array([rng.uniform(lo, hi) for lo, hi in zip(cfg.grid.lo, cfg.grid.hi)])
        q = random_admissible_candidate(rng, cfg, at=x)
        t = rng.uniform(0.0, 1.0)
        _, grad, hess = q.eval(x)
        I_val = nonlocal_operator(m, q, x)
        inc = -cfg.eps * F(t, x, grad, hess, I_val)
        worst = max(worst, inc / cfg.eps**gamma)
    return worst
