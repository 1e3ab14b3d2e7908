"""Monotone wide-stencil discretization and damped fixed-point solvers.

The residual at a node combines extremal directional second differences
(Shortley-Weller corrected at boundary cuts), an upwinded drift term, the
gradient weight |grad u|^alpha (floored at eps_grad for alpha < 0, taken
as-is for alpha > 0 so the degenerate constant-test rule is recovered) and
the odd zero-order term (V + lambda)|u|^alpha u.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from .errors import BlowupError, InsufficientDataError, SchemeError, StagnationError
from .geometry import Grid
from .operators import EllipticParams

Field = Union[float, Callable]

_FAMILY_CODE = {"trace": 0, "pucci_sup": 1, "pucci_inf": 2}


@dataclass
class SolveConfig:
    """Solver knobs.

    tol is relative: the diagonally preconditioned residual must fall
    below tol * (1 + sup|u|).  Crossing blowup_threshold signals
    numerical nonexistence rather than an error in the scheme.
    """

    tol: float = 1e-8
    max_iter: int = 1_000_000
    damping: float = 0.8
    eps_grad: float = 1e-8
    blowup_threshold: float = 1e6
    outer_max: int = 200
    log_every: int = 1000

    def __post_init__(self):
        if not (self.tol > 0 and self.max_iter > 0 and 0 < self.damping <= 1
                and self.eps_grad > 0 and self.blowup_threshold > 0):
            raise ValueError("all solver parameters must be positive (damping in (0,1])")


@dataclass
class GridFunction:
    """Nodal values on a grid plus the boundary trace at cut points."""

    grid: Grid
    values: np.ndarray
    boundary_trace: np.ndarray  # (n, D), meaningful where grid.nbr < 0

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values), initial=0.0))

    def interpolate(self, pts: np.ndarray) -> np.ndarray:
        return self.grid.interpolate(self.values, pts)

    def to_csv(self, path):
        rows = np.column_stack([self.grid.pos, self.values])
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,y,value\n")
            for x, y, v in rows:
                fh.write(f"{float(x)!r},{float(y)!r},{float(v)!r}\n")

    @staticmethod
    def zeros(grid: Grid) -> "GridFunction":
        return GridFunction(grid=grid, values=np.zeros(grid.n_nodes),
                            boundary_trace=np.zeros_like(grid.rho))


def _eval_field(field: Field, pts: np.ndarray) -> np.ndarray:
    if callable(field):
        out = np.asarray(field(pts), dtype=float)
        if out.ndim == 0:
            out = np.full(len(pts), float(out))
        return out
    return np.full(len(pts), float(field))


def _boundary_values(grid: Grid, g: Field) -> np.ndarray:
    """Dirichlet data at the exact cut points of every crossed arm."""
    gcut = np.zeros_like(grid.rho)
    cut = grid.nbr < 0
    if np.any(cut):
        pts = grid.cutpt[cut]
        gcut[cut] = _eval_field(g, pts)
    return gcut


class _Problem:
    """Precomputed nodal arrays for one Dirichlet problem on a grid."""

    def __init__(self, grid: Grid, params: EllipticParams, lam: float,
                 f: Field, g: Field):
        self.grid = grid
        self.params = params
        self.lam = float(lam)
        pos = grid.pos
        drift = params.drift(pos)
        if drift.ndim == 1:
            drift = np.broadcast_to(drift, pos.shape)
        self.hx = np.ascontiguousarray(drift[:, 0], dtype=float)
        self.hy = np.ascontiguousarray(drift[:, 1], dtype=float)
        self.vv = np.ascontiguousarray(_eval_field(params.potential, pos)
                                       if params.V is not None else np.zeros(len(pos)))
        self.fv = np.ascontiguousarray(_eval_field(f, pos))
        self.gcut = np.ascontiguousarray(_boundary_values(grid, g))
        base = grid.dirs[0::2]
        ell = grid.h * np.hypot(base[:, 0], base[:, 1])
        self.inv_ell2 = np.ascontiguousarray(1.0 / ell ** 2)
        nbase = len(base)
        self.frames = np.ascontiguousarray(
            np.arange(nbase, dtype=np.int64).reshape(-1, 2))
        self.family = _FAMILY_CODE[params.family]

    def kernel_args(self):
        g = self.grid
        return (np.ascontiguousarray(g.nbr), np.ascontiguousarray(g.rho), self.gcut,
                self.inv_ell2, self.frames, self.hx, self.hy, self.vv, self.fv,
                self.params.a, self.params.A, self.params.alpha, self.lam)

    def residuals(self, u: np.ndarray, eps_grad: float):
        res = np.empty(len(u))
        ldiag = np.empty(len(u))
        nbr, rho, gcut, inv_ell2, frames, hx, hy, vv, fv, a, A, alpha, lam = self.kernel_args()
        _kernels.residual_sweep(u, nbr, rho, gcut, inv_ell2, frames, hx, hy, vv, fv,
                                a, A, alpha, lam, eps_grad, self.grid.h, self.family,
                                res, ldiag)
        return res, ldiag


def residual_field(grid: Grid, u: GridFunction, params: EllipticParams, lam: float,
                   f: Field = 0.0, eps_grad: float = 1e-8) -> np.ndarray:
    """Residual of the discrete operator at every node for the given state."""
    prob = _Problem(grid, params, lam, f, 0.0)
    prob.gcut = u.boundary_trace
    res, _ = prob.residuals(np.ascontiguousarray(u.values, dtype=float), eps_grad)
    return res


def discrete_operator(u: GridFunction, node: int, lam: float, f_value: float,
                      params: EllipticParams, eps_grad: float = 1e-8) -> float:
    """Pointwise discrete residual F_h[u] + drift + zero order - f at one node."""
    res = residual_field(u.grid, u, params, lam, 0.0, eps_grad)
    return float(res[node] - f_value)


@dataclass
class SolveInfo:
    iterations: int
    scaled_residual: float
    history: np.ndarray  # rows (iteration, scaled residual, sup norm)


def solve_dirichlet(grid: Grid, params: EllipticParams, lam: float, f: Field,
                    g: Field, cfg: Optional[SolveConfig] = None,
                    u0: Optional[np.ndarray] = None,
                    tol_override: Optional[float] = None,
                    return_info: bool = False):
    """Damped fixed-point solve of the lambda-shifted Dirichlet problem.

    Raises BlowupError when iterates cross the blow-up threshold (the
    numerical witness of nonexistence) and StagnationError when max_iter
    is exhausted at bounded norm.
    """
    cfg = cfg or SolveConfig()
    prob = _Problem(grid, params, lam, f, g)
    u = np.zeros(grid.n_nodes) if u0 is None else np.array(u0, dtype=float)
    tol = cfg.tol if tol_override is None else tol_override
    res_scale = max(1.0, float(np.max(np.abs(prob.fv))))
    hist = np.empty((512, 3))
    nbr, rho, gcut, inv_ell2, frames, hx, hy, vv, fv, a, A, alpha, lam_ = prob.kernel_args()
    status, iters, scaled, nhist = _kernels.damped_solve(
        u, nbr, rho, gcut, inv_ell2, frames, hx, hy, vv, fv,
        a, A, alpha, lam_, cfg.eps_grad, grid.h, prob.family,
        tol, res_scale, cfg.max_iter, cfg.damping, cfg.blowup_threshold,
        max(1, cfg.log_every), hist)
    history = hist[:nhist].copy()
    if status == _kernels.STATUS_BLOWUP:
        raise BlowupError(f"sup-norm crossed {cfg.blowup_threshold} after {iters} sweeps",
                          sup_norm=float(np.max(np.abs(u))), history=history)
    if status == _kernels.STATUS_MAX_ITER:
        raise StagnationError(f"no convergence within {cfg.max_iter} sweeps "
                              f"(scaled residual {scaled:.3e})",
                              residual=scaled, history=history)
    gf = GridFunction(grid=grid, values=u, boundary_trace=prob.gcut)
    if return_info:
        return gf, SolveInfo(iterations=iters, scaled_residual=scaled, history=history)
    return gf


def solve_u0(grid: Grid, params: EllipticParams, cfg: Optional[SolveConfig] = None,
             lower: bool = False) -> GridFunction:
    """Torsion-like function: f = -1, zero boundary data, no zero-order term.

    ``lower=True`` returns the nonpositive mirror (f = +1).
    """
    params_noV = dataclasses.replace(params, V=None)
    rhs = 1.0 if lower else -1.0
    sol = solve_dirichlet(grid, params_noV, 0.0, rhs, 0.0, cfg)
    tol_band = 10 * (cfg.tol if cfg else SolveConfig().tol)
    if lower:
        if sol.values.max() > tol_band:
            raise SchemeError("lower torsion function came out positive")
    else:
        if sol.values.min() < -tol_band:
            raise SchemeError("torsion-like function came out negative")
    return sol


def iterate_shifted(grid: Grid, params: EllipticParams, lam: float, f: Field,
                    cfg: Optional[SolveConfig] = None,
                    collect: Optional[list] = None,
                    classify_only: bool = False) -> GridFunction:
    """Shifted Dirichlet iteration with K = 2|V|_inf + |lambda| and u_1 = 0.

    Solves F[u_{n+1}] + drift + (V + lam - K)|u_{n+1}|^a u_{n+1}
    = f - K u_n^{1+a}; the iterates are nondecreasing and either converge
    (lambda admissible) or blow up (the witness used by the eigenvalue
    bisection).  Sustained geometric growth of the increments triggers the
    blow-up signal before the threshold itself is crossed; with
    ``classify_only`` a sustained contraction whose geometric tail stays
    below the threshold likewise returns early (the iterate is then only
    an under-resolved approximation of the limit).
    """
    cfg = cfg or SolveConfig()
    fv = _eval_field(f, grid.pos)
    if np.max(fv) > 1e-12:
        raise ValueError("iterate_shifted requires f <= 0 nodewise")
    vsup = float(np.max(np.abs(_eval_field(params.potential, grid.pos)))) \
        if params.V is not None else 0.0
    K = 2.0 * vsup + abs(lam)

    u = np.zeros(grid.n_nodes)
    gf = GridFunction.zeros(grid)
    inc_prev = None
    ratios = []
    inner_tol = max(cfg.tol, min(1e-3, 10.0 * cfg.tol))
    for n in range(cfg.outer_max):
        # |u|^alpha u = sign(u) |u|^(1+alpha), total for alpha > -1
        rhs_arr = fv - K * np.sign(u) * np.abs(u) ** (1.0 + params.alpha)
        rhs = lambda pts, arr=rhs_arr: arr  # nodal rhs, already evaluated
        gf_new = solve_dirichlet(grid, params, lam - K, rhs, 0.0, cfg,
                                 u0=u, tol_override=inner_tol)
        new = gf_new.values
        drop = float(np.min(new - u))
        scale = 1.0 + float(np.max(np.abs(new)))
        if drop < -10.0 * max(inner_tol, cfg.tol) * scale - 1e-12:
            raise SchemeError(f"shifted iterates decreased by {-drop:.3e}; "
                              "monotone structure violated")
        inc = float(np.max(np.abs(new - u)))
        u = new
        gf = gf_new
        supu = float(np.max(np.abs(u)))
        if collect is not None:
            collect.append((n, inc, supu))
        if supu > cfg.blowup_threshold:
            raise BlowupError(f"shifted iteration crossed {cfg.blowup_threshold}",
                              sup_norm=supu)
        if inc <= cfg.tol * scale:
            return gf
        if inc_prev is not None and inc_prev > 0:
            ratios.append(inc / inc_prev)
            if len(ratios) >= 8 and min(ratios[-5:]) >= 1.0 + 1e-3 and supu > 10.0 * cfg.tol:
                raise BlowupError("shifted increments grow geometrically "
                                  f"(ratio ~ {ratios[-1]:.4f}); extrapolated blow-up",
                                  sup_norm=supu, extrapolated=True)
            if classify_only and len(ratios) >= 8:
                r = max(ratios[-5:])
                if r <= 1.0 - 1e-3 and supu + inc * r / (1.0 - r) < 0.5 * cfg.blowup_threshold:
                    return gf  # contracting tail provably stays bounded
        inc_prev = inc
        # absolute increment resolution: the solver tolerance is relative
        # to max(1, |rhs|), which grows with the iterates
        rhs_scale = max(1.0, float(np.max(np.abs(rhs_arr))))
        inner_tol = max(cfg.tol, min(1e-3, 0.02 * inc / rhs_scale))

    # outer budget exhausted: decide by the trend of the increments
    tail = ratios[-8:] if len(ratios) >= 8 else ratios
    if tail and float(np.median(tail)) >= 1.0:
        raise BlowupError("shifted iteration still growing at outer_max",
                          sup_norm=float(np.max(np.abs(u))), extrapolated=True)
    if not classify_only:
        raise StagnationError(
            f"shifted iteration below tolerance trend but not converged in {cfg.outer_max} outer steps")
    return gf


def holder_estimate(u: GridFunction, corner: np.ndarray, rays: int = 7,
                    r_min: Optional[float] = None, r_max: Optional[float] = None,
                    angle_margin: float = 0.35):
    """Hoelder exponent at a corner by log-log regression along rays.

    Radii span [2 h, rbar/4] by default; each ray is fitted separately
    (the angular factor varies ray to ray) and the slopes are averaged.
    Returns (gamma_est, C_est) with C_est the largest per-ray intercept.
    """
    grid = u.grid
    dom = grid.domain
    corner = np.asarray(corner, dtype=float)
    r_lo = 2.0 * grid.h if r_min is None else r_min
    r_hi = dom.rbar / 4.0 if r_max is None else r_max
    if not r_hi > r_lo:
        raise InsufficientDataError("empty radial window for the corner fit")

    from .geometry import best_axis

    info = best_axis(dom, corner)
    base = np.arctan2(info.axis[1], info.axis[0])
    half = info.required
    angles = base + np.linspace(-(half - angle_margin), half - angle_margin, rays)

    radii = np.geomspace(r_lo, r_hi, 12)
    slopes = []
    intercepts = []
    for t in angles:
        pts = corner[None, :] + radii[:, None] * np.array([np.cos(t), np.sin(t)])[None, :]
        vals = u.interpolate(pts)
        keep = np.isfinite(vals) & (vals > 0.0)
        if np.sum(keep) < 5:
            continue
        lr = np.log(radii[keep])
        lv = np.log(vals[keep])
        slope, intercept = np.polyfit(lr, lv, 1)
        slopes.append(slope)
        intercepts.append(intercept)
    if len(slopes) < max(1, rays // 2):
        raise InsufficientDataError(
            f"only {len(slopes)} of {rays} rays had at least 5 usable samples")
    gamma_est = float(np.mean(slopes))
    c_est = float(np.exp(np.max(intercepts)))
    return gamma_est, c_est
