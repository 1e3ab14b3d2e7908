"""Closed-form cone barriers.

Local barrier: v(x) = r^gamma * phi(theta) in cone coordinates around a
boundary apex, where phi solves  a phi'' - beta phi' + gamma A (N-1) phi = 0
with phi'(0) = 0, phi(psi) = 1.  For admissible gamma the profile satisfies
phi >= 1, phi' <= 0, phi'' <= 0 on [0, psi] and v is a strict supersolution
with certified margin b.

Global barrier: W_z = min(G, w_z) / kappa with a pole function
G = c (1/r1^sigma - 1/|x-y|^sigma) anchored outside the domain; kappa is
normalized from the exact branch margins so that the residual is <= -1
everywhere in the domain.  The lower barrier is the mirrored construction
-W_z, certified through the extremal-operator duality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.stats import qmc

from .errors import GeometryError, InadmissibleGammaError
from .geometry import DomainSpec, best_axis
from .operators import EllipticParams, SymMatrix2, eval_F

_THETA_SAMPLES = 2001


def _beta(gamma: float, psi: float, a: float, A: float, N: int) -> float:
    cot_neg = max(0.0, -1.0 / math.tan(psi)) if psi != math.pi / 2 else 0.0
    return A * ((N - 1) * cot_neg + 2.0) + gamma * (A - a)


def _sigma_roots(gamma: float, psi: float, a: float, A: float, N: int):
    """Positive roots of a s^2 - beta s + gamma A (N-1) = 0, or None.

    For a = 1 these coincide with (beta +- sqrt(beta^2 - 4 gamma (N-1) A / a)) / 2.
    """
    beta = _beta(gamma, psi, a, A, N)
    disc = beta * beta - 4.0 * a * gamma * A * (N - 1)
    if disc <= 0.0:
        return None
    root = math.sqrt(disc)
    s1 = (beta + root) / (2.0 * a)
    s2 = (beta - root) / (2.0 * a)
    if s2 <= 0.0:
        return None
    return beta, s1, s2


@dataclass(frozen=True)
class LocalBarrierParams:
    """All derived constants of the local cone barrier plus evaluators.

    The apex z and axis n default to the origin / e1 and are re-anchored
    per boundary point by the global construction.
    """

    psi: float
    gamma: float
    sigma1: float
    sigma2: float
    C1: float
    C2: float
    beta: float
    C_psi: float
    r_o: float
    b: float
    params: EllipticParams
    N: int = 2
    z: np.ndarray = None
    n: np.ndarray = None

    def __post_init__(self):
        if self.z is None:
            object.__setattr__(self, "z", np.zeros(2))
        if self.n is None:
            object.__setattr__(self, "n", np.array([1.0, 0.0]))

    def phi(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.C1 * np.exp(self.sigma1 * theta) + self.C2 * np.exp(self.sigma2 * theta)

    def phi_prime(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (self.C1 * self.sigma1 * np.exp(self.sigma1 * theta)
                + self.C2 * self.sigma2 * np.exp(self.sigma2 * theta))

    def phi_second(self, theta):
        theta = np.asarray(theta, dtype=float)
        return (self.C1 * self.sigma1 ** 2 * np.exp(self.sigma1 * theta)
                + self.C2 * self.sigma2 ** 2 * np.exp(self.sigma2 * theta))

    def ode_residual(self, theta):
        """a phi'' - beta phi' + gamma A (N-1) phi, relative to the term scale."""
        a, A = self.params.a, self.params.A
        num = (a * self.phi_second(theta) - self.beta * self.phi_prime(theta)
               + self.gamma * A * (self.N - 1) * self.phi(theta))
        scale = (np.abs(a * self.phi_second(theta)) + np.abs(self.beta * self.phi_prime(theta))
                 + np.abs(self.gamma * A * (self.N - 1) * self.phi(theta)))
        return num / np.maximum(scale, 1e-300)

    def anchored(self, z, n) -> "LocalBarrierParams":
        return replace(self, z=np.asarray(z, dtype=float), n=np.asarray(n, dtype=float))


def _phi_coefficients(sigma1: float, sigma2: float, psi: float):
    """Solve C1 sigma1 + C2 sigma2 = 0, C1 e^{s1 psi} + C2 e^{s2 psi} = 1."""
    denom = math.exp(sigma2 * psi) - (sigma2 / sigma1) * math.exp(sigma1 * psi)
    if denom <= 0.0:
        return None
    C2 = 1.0 / denom
    C1 = -C2 * sigma2 / sigma1
    return C1, C2


def _profile_tables(gamma, psi, params, N):
    """phi / phi' tables on the theta grid, or None when gamma is inadmissible."""
    roots = _sigma_roots(gamma, psi, params.a, params.A, N)
    if roots is None:
        return None
    beta, s1, s2 = roots
    if math.exp((s2 - s1) * psi) < s2 / s1:
        return None
    coeffs = _phi_coefficients(s1, s2, psi)
    if coeffs is None:
        return None
    C1, C2 = coeffs
    theta = np.linspace(0.0, psi, _THETA_SAMPLES)
    e1 = np.exp(s1 * theta)
    e2 = np.exp(s2 * theta)
    phi = C1 * e1 + C2 * e2
    dphi = C1 * s1 * e1 + C2 * s2 * e2
    return beta, s1, s2, C1, C2, theta, phi, dphi


def _c_psi(phi, dphi, alpha):
    """sup of (phi^2 + phi'^2)^{alpha/2}; for alpha < 0 the conservative
    (min) side so every chained margin inequality still holds."""
    q = phi * phi + dphi * dphi
    if alpha == 0.0:
        return 1.0
    vals = q ** (alpha / 2.0)
    return float(vals.max()) if alpha > 0 else float(vals.min())


def _margin_ok(gamma, alpha, phi, dphi, c_psi):
    """Certified-supersolution condition: the exact residual chain yields a
    margin of at least b once inf (1-gamma) phi m^alpha >= gamma^{1+alpha} C_psi
    with m = sqrt(gamma^2 phi^2 + phi'^2)."""
    m = np.sqrt(gamma * gamma * phi * phi + dphi * dphi)
    lhs = (1.0 - gamma) * phi * m ** alpha
    return float(lhs.min()) >= gamma ** (1.0 + alpha) * c_psi


def _admissible(gamma, psi, params, N):
    if not 0.0 < gamma <= 1.0:
        return False
    tab = _profile_tables(gamma, psi, params, N)
    if tab is None:
        return False
    _, _, _, _, _, _, phi, dphi = tab
    return _margin_ok(gamma, params.alpha, phi, dphi, _c_psi(phi, dphi, params.alpha))


def choose_gamma(params: EllipticParams, psi: float, N: int = 2) -> float:
    """Largest workable barrier exponent, scaled back by 0.9 for slack.

    Bisects for the supremum of gamma in (0, 1] satisfying the
    discriminant condition, the solvability inequality and the certified
    margin condition; the returned value satisfies all three strictly.
    """
    if not 0.0 < psi < math.pi:
        raise ValueError("psi must lie in (0, pi)")
    lo = 1e-4
    while lo > 1e-14 and not _admissible(lo, psi, params, N):
        lo *= 0.1
    if not _admissible(lo, psi, params, N):
        raise InadmissibleGammaError("no admissible barrier exponent found")
    hi = 1.0
    if _admissible(hi, psi, params, N):
        gamma_star = 1.0
    else:
        while hi - lo > 1e-6:
            mid = 0.5 * (lo + hi)
            if _admissible(mid, psi, params, N):
                lo = mid
            else:
                hi = mid
        gamma_star = lo
    gamma = 0.9 * gamma_star
    for _ in range(60):
        if _admissible(gamma, psi, params, N):
            return gamma
        gamma *= 0.9
    raise InadmissibleGammaError("admissible set appears to be non-interval near the supremum")


def build_phi(gamma: float, psi: float, params: EllipticParams, N: int = 2,
              rbar: float = 1.0, h_inf: float = 0.0) -> LocalBarrierParams:
    """Solve the angular profile and assemble all barrier constants.

    ``rbar`` caps the admissible radius; ``h_inf`` is the sup of |h| used
    in the drift-domination radius and is 0 for drift-free operators.
    """
    tab = _profile_tables(gamma, psi, params, N)
    if tab is None:
        raise InadmissibleGammaError(f"gamma={gamma} violates the admissibility conditions")
    beta, s1, s2, C1, C2, theta, phi, dphi = tab
    if not (C1 < 0.0 < C2):
        raise InadmissibleGammaError("profile coefficients have the wrong signs")
    alpha = params.alpha
    c_psi = _c_psi(phi, dphi, alpha)
    if not _margin_ok(gamma, alpha, phi, dphi, c_psi):
        raise InadmissibleGammaError(f"gamma={gamma} violates the certified margin condition")

    m = np.sqrt(gamma * gamma * phi * phi + dphi * dphi)
    caps = [rbar]
    if h_inf > 0.0:
        if alpha == 0.0:
            # C_psi^(1/alpha) degenerates; the factor e dominates every
            # profile constant that can appear in the chained inequality
            caps.append(gamma * params.a / (math.e * h_inf))
        else:
            caps.append(gamma * params.a / (c_psi ** (1.0 / alpha) * h_inf))
        # exact drift-domination radius: |h| m r <= a gamma (1-gamma) phi / 2
        caps.append(float((params.a * gamma * (1.0 - gamma) * phi / (2.0 * h_inf * m)).min()))
    r_o = min(caps)
    if not r_o > 0.0:
        raise InadmissibleGammaError("admissible radius collapsed to zero")
    b = c_psi * r_o ** (gamma * (alpha + 1.0) - alpha - 2.0) * gamma ** (2.0 + alpha) * params.a / 2.0

    lb = LocalBarrierParams(psi=psi, gamma=gamma, sigma1=s1, sigma2=s2, C1=C1, C2=C2,
                            beta=beta, C_psi=c_psi, r_o=r_o, b=b, params=params, N=N)
    sign = np.concatenate([phi - 1.0, -dphi, -lb.phi_second(theta)])
    if sign.min() < -1e-9:
        raise InadmissibleGammaError("profile sign pattern violated")
    return lb


# ---------------------------------------------------------------------------
# local barrier evaluation (exact closed-form derivatives)
# ---------------------------------------------------------------------------

def _local_eval_arrays(lb: LocalBarrierParams, X: np.ndarray):
    """Exact (v, grad, hess) of the local barrier at points X (n, 2).

    Points must satisfy 0 < r and theta <= psi (callers pre-filter).
    Hessians are returned as (n, 3) rows (m11, m12, m22) in global frame.
    """
    z, n = lb.z, lb.n
    t = np.array([-n[1], n[0]])
    rel = np.atleast_2d(X) - z[None, :]
    xi = rel @ n
    eta = rel @ t
    s = np.where(eta >= 0.0, 1.0, -1.0)
    etab = np.abs(eta)
    r = np.hypot(xi, etab)
    theta = np.arctan2(etab, xi)

    g = lb.gamma
    phi = lb.phi(theta)
    dphi = lb.phi_prime(theta)
    ddphi = lb.phi_second(theta)
    rg = r ** g

    f_r = g * rg / r * phi
    f_t = rg * dphi
    f_rr = g * (g - 1.0) * rg / r ** 2 * phi
    f_rt = g * rg / r * dphi
    f_tt = rg * ddphi

    c = xi / r
    sn = etab / r
    v_xi = f_r * c - f_t * sn / r
    v_et = f_r * sn + f_t * c / r
    v_xx = (c * c * f_rr + sn * sn / r * f_r + sn * sn / r ** 2 * f_tt
            - 2.0 * c * sn / r * f_rt + 2.0 * c * sn / r ** 2 * f_t)
    v_yy = (sn * sn * f_rr + c * c / r * f_r + c * c / r ** 2 * f_tt
            + 2.0 * c * sn / r * f_rt - 2.0 * c * sn / r ** 2 * f_t)
    v_xy = (c * sn * f_rr - c * sn / r * f_r - c * sn / r ** 2 * f_tt
            + (c * c - sn * sn) / r * f_rt - (c * c - sn * sn) / r ** 2 * f_t)

    # reflect back to signed eta, then rotate the (n, t) frame to global axes
    grad_n = v_xi
    grad_t = s * v_et
    h_nn = v_xx
    h_tt = v_yy
    h_nt = s * v_xy

    grad = grad_n[:, None] * n[None, :] + grad_t[:, None] * t[None, :]
    # H = R Hl R^T with R = [n | t]
    m11 = n[0] * (h_nn * n[0] + h_nt * t[0]) + t[0] * (h_nt * n[0] + h_tt * t[0])
    m12 = n[0] * (h_nn * n[1] + h_nt * t[1]) + t[0] * (h_nt * n[1] + h_tt * t[1])
    m22 = n[1] * (h_nn * n[1] + h_nt * t[1]) + t[1] * (h_nt * n[1] + h_tt * t[1])
    hess = np.column_stack([m11, m12, m22])
    return rg * phi, grad, hess, r, theta


def eval_local_barrier(x, lb: LocalBarrierParams, N: int = 2):
    """Exact v, gradient and Hessian of the local barrier at a sector point."""
    if N != 2:
        raise ValueError("pointwise evaluation is implemented in dimension 2")
    x = np.asarray(x, dtype=float)
    rel = x - lb.z
    r = float(np.hypot(rel[0], rel[1]))
    if r == 0.0:
        raise ValueError("barrier derivatives are singular at the apex")
    if r >= lb.r_o:
        raise ValueError(f"point at r={r} outside the admissible radius {lb.r_o}")
    theta = math.acos(max(-1.0, min(1.0, float(rel @ lb.n) / r)))
    if theta > lb.psi + 1e-12:
        raise ValueError(f"point at angle {theta} outside the cone sector [0, {lb.psi}]")
    v, grad, hess, _, _ = _local_eval_arrays(lb, x[None, :])
    return float(v[0]), grad[0], SymMatrix2(hess[0, 0], hess[0, 1], hess[0, 2])


# ---------------------------------------------------------------------------
# global barrier
# ---------------------------------------------------------------------------

def estimate_drift_sup(domain: DomainSpec, params: EllipticParams, samples: int = 4096) -> float:
    """Sampled sup of |h| over the closure (boundary + Halton interior points)."""
    if params.h is None:
        return 0.0
    pts = [domain.sample_boundary(1024), domain.vertices]
    x0, y0, x1, y1 = domain.bbox
    halton = qmc.Halton(d=2, scramble=False).random(samples)
    cand = halton * np.array([x1 - x0, y1 - y0]) + np.array([x0, y0])
    inside = domain.contains_points(cand)
    if np.any(inside):
        pts.append(cand[inside])
    allpts = np.vstack(pts)
    hv = params.drift(allpts)
    return float(np.hypot(hv[:, 0], hv[:, 1]).max())


@dataclass(frozen=True)
class GlobalBarrier:
    """W_z = sign * min(G, w_z) / kappa and all its derived constants."""

    domain: DomainSpec
    local: LocalBarrierParams
    y: np.ndarray
    r1: float
    sigma: float
    kappa: float
    sign: int
    c_scale: float            # G = c_scale * (1/r1^sigma - 1/|x-y|^sigma)
    margin_local: float
    margin_pole: float
    R_min: float
    R_max: float
    h_inf: float

    @property
    def params(self) -> EllipticParams:
        return self.local.params

    @property
    def apex(self) -> np.ndarray:
        return self.local.z

    def pole_values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(X)
        R = np.hypot(X[:, 0] - self.y[0], X[:, 1] - self.y[1])
        return self.c_scale * (self.r1 ** -self.sigma - R ** -self.sigma)

    def cone_values(self, X: np.ndarray) -> np.ndarray:
        """Local-branch values; +inf outside the sector where the branch applies."""
        X = np.atleast_2d(X)
        lb = self.local
        rel = X - lb.z[None, :]
        r = np.hypot(rel[:, 0], rel[:, 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            ct = np.clip((rel @ lb.n) / np.where(r > 0, r, 1.0), -1.0, 1.0)
        theta = np.arccos(ct)
        w = np.full(len(X), np.inf)
        at_apex = r <= 1e-300
        ok = (~at_apex) & (r < lb.r_o) & (theta <= lb.psi + 1e-9)
        w[ok] = r[ok] ** lb.gamma * lb.phi(theta[ok])
        w[at_apex] = 0.0
        return w

    def values(self, X: np.ndarray) -> np.ndarray:
        v = np.minimum(self.pole_values(X), self.cone_values(X)) / self.kappa
        return self.sign * v

    def branch(self, X: np.ndarray) -> np.ndarray:
        """0 where the cone branch is active, 1 for the pole branch."""
        return (self.pole_values(X) < self.cone_values(X)).astype(int)

    def residuals(self, X: np.ndarray) -> np.ndarray:
        """Exact residual F[W] + h . grad W |grad W|^alpha at each point,
        evaluated on the active branch."""
        X = np.atleast_2d(X)
        p = self.params
        which = self.branch(X)
        out = np.empty(len(X))
        scale = self.sign / self.kappa

        cone = np.nonzero(which == 0)[0]
        if len(cone):
            _, grad, hess, _, _ = _local_eval_arrays(self.local, X[cone])
            out[cone] = self._residual_from_derivatives(X[cone], scale * grad, scale * hess, p)
        pole = np.nonzero(which == 1)[0]
        if len(pole):
            rel = X[pole] - self.y[None, :]
            R = np.hypot(rel[:, 0], rel[:, 1])
            gscale = self.c_scale * self.sigma
            grad = gscale * rel / (R ** (self.sigma + 2.0))[:, None]
            base = gscale / R ** (self.sigma + 2.0)
            quad = -(self.sigma + 2.0) * gscale / R ** (self.sigma + 4.0)
            hess = np.column_stack([
                base + quad * rel[:, 0] * rel[:, 0],
                quad * rel[:, 0] * rel[:, 1],
                base + quad * rel[:, 1] * rel[:, 1],
            ])
            out[pole] = self._residual_from_derivatives(X[pole], scale * grad, scale * hess, p)
        return out

    @staticmethod
    def _residual_from_derivatives(X, grad, hess, p: EllipticParams):
        res = np.empty(len(X))
        hvals = p.drift(X)
        for k in range(len(X)):
            g = grad[k]
            m = SymMatrix2(hess[k, 0], hess[k, 1], hess[k, 2])
            w = float(np.hypot(g[0], g[1])) ** p.alpha
            res[k] = eval_F(X[k], g, m, p) + float(hvals[k] @ g) * w
        return res


def build_global_barrier(domain: DomainSpec, z, params: EllipticParams, sign: int = 1,
                         profile: Optional[LocalBarrierParams] = None) -> GlobalBarrier:
    """Anchor the global barrier at boundary point z.

    The pole sits on the cone axis beyond the apex at distance 3 r1 with
    r1 = rbar/8 (halved until the clearance condition 2 r1 < d(y, dOmega)
    holds).  kappa is normalized from the smaller of the two certified
    branch margins, which makes the residual <= -1 on the whole domain.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 (upper barrier) or -1 (lower barrier)")
    z = np.asarray(z, dtype=float)
    info = best_axis(domain, z)
    if info.required > domain.psi + 1e-9:
        raise GeometryError(
            f"cone condition fails at apex {z}: needs half-opening {info.required:.6f} > psi"
        )
    h_inf = estimate_drift_sup(domain, params)
    if profile is None:
        gamma = choose_gamma(params, domain.psi, N=2)
        profile = build_phi(gamma, domain.psi, params, N=2, rbar=domain.rbar, h_inf=h_inf)
    lb = profile.anchored(z, info.axis)

    from shapely.geometry import Point  # local import keeps module load light

    r1 = domain.rbar / 8.0
    y = None
    for _ in range(6):
        cand = z - 3.0 * r1 * info.axis
        clearance = float(domain.polygon.distance(Point(cand)))
        if clearance > 2.0 * r1:
            y = cand
            break
        r1 *= 0.5
    if y is None:
        raise GeometryError(f"could not place the pole outside the domain near apex {z}")

    N = 2
    a, A, alpha = params.a, params.A, params.alpha
    R_min = float(domain.polygon.distance(Point(y)))
    R_max = float(np.max(np.hypot(domain.vertices[:, 0] - y[0], domain.vertices[:, 1] - y[1])))
    sigma = max(4.0 * A * N / a, 2.0 * h_inf * domain.diameter / a) - 1.0
    c = lb.r_o ** lb.gamma * r1 ** sigma / 2.0

    margin_pole = 0.0
    for _ in range(64):
        c = lb.r_o ** lb.gamma * r1 ** sigma / 2.0
        bracket = a * (sigma + 1.0) - A * (N - 1) - h_inf * R_max
        if bracket > 0.0:
            expo = (sigma + 1.0) * alpha + sigma + 2.0
            margin_pole = c ** (1.0 + alpha) * sigma ** (1.0 + alpha) * R_max ** -expo * bracket
            break
        sigma += 2.0
    if margin_pole <= 0.0:
        raise GeometryError("pole-branch margin did not become positive")

    kappa = min(lb.b, margin_pole) ** (1.0 / (1.0 + alpha))
    return GlobalBarrier(domain=domain, local=lb, y=y, r1=r1, sigma=sigma, kappa=kappa,
                         sign=sign, c_scale=c, margin_local=lb.b, margin_pole=margin_pole,
                         R_min=R_min, R_max=R_max, h_inf=h_inf)


@dataclass
class BarrierReport:
    passed: bool
    max_residual: float
    margin: float
    n_samples: int
    n_cone: int
    n_pole: int
    sign: int

    def as_dict(self):
        return {
            "passed": bool(self.passed),
            "max_residual": float(self.max_residual),
            "margin": float(self.margin),
            "n_samples": int(self.n_samples),
            "n_cone_branch": int(self.n_cone),
            "n_pole_branch": int(self.n_pole),
            "sign": int(self.sign),
        }


def _halton_points_inside(domain: DomainSpec, n: int) -> np.ndarray:
    x0, y0, x1, y1 = domain.bbox
    sampler = qmc.Halton(d=2, scramble=False)
    pts = []
    have = 0
    while have < n:
        cand = sampler.random(4 * n) * np.array([x1 - x0, y1 - y0]) + np.array([x0, y0])
        keep = domain.contains_points(cand)
        got = cand[keep]
        pts.append(got)
        have += len(got)
    return np.vstack(pts)[:n]


def certify_barrier(gb: GlobalBarrier, samples: int = 10000) -> BarrierReport:
    """Evaluate the exact residual at Halton points of the domain, skipping a
    1e-6 neighborhood of the apex and of the branch-switch set.

    A quarter of the budget is spent on log-radial samples of the apex
    sector so the (typically tiny) cone branch is always exercised.

    Upper barriers pass iff max residual <= -1 + 1e-8; lower barriers iff
    min residual >= 1 - 1e-8.
    """
    n_sector = samples // 4
    bulk = _halton_points_inside(gb.domain, samples - n_sector)
    lb = gb.local
    u = qmc.Halton(d=2, scramble=False, seed=None).random(4 * n_sector)
    radii = np.exp(np.log(1e-5 * lb.r_o) + u[:, 0] * np.log(0.999 * lb.r_o / (1e-5 * lb.r_o)))
    base = math.atan2(lb.n[1], lb.n[0])
    angles = base + (2.0 * u[:, 1] - 1.0) * lb.psi
    sector = lb.z[None, :] + radii[:, None] * np.column_stack([np.cos(angles), np.sin(angles)])
    sector = sector[gb.domain.contains_points(sector)][:n_sector]
    X = np.vstack([bulk, sector])
    r = np.hypot(X[:, 0] - gb.apex[0], X[:, 1] - gb.apex[1])
    gap = np.abs(gb.pole_values(X) - gb.cone_values(X))
    keep = (r > 1e-6) & (gap > 1e-6)
    X = X[keep]
    res = gb.residuals(X)
    which = gb.branch(X)
    if gb.sign > 0:
        worst = float(res.max())
        passed = worst <= -1.0 + 1e-8
        margin = -1.0 - worst
    else:
        worst = float(res.min())
        passed = worst >= 1.0 - 1e-8
        margin = worst - 1.0
    return BarrierReport(passed=passed, max_residual=worst, margin=margin,
                         n_samples=len(X), n_cone=int(np.sum(which == 0)),
                         n_pole=int(np.sum(which == 1)), sign=gb.sign)


def tail_compact_set(u_values: np.ndarray, points: np.ndarray,
                     barriers: list, delta: float):
    """Nodes guaranteed below delta by the barrier family.

    Mirrors the compactness argument: outside the compact set
    K = {x : min_z W_z(x) >= delta} the solution dominated by the barriers
    is below delta.  Returns (mask of K, sup of u outside K).
    """
    wmin = np.full(len(points), np.inf)
    for gb in barriers:
        wmin = np.minimum(wmin, gb.values(points))
    outside = wmin < delta
    sup_out = float(np.max(u_values[outside], initial=0.0))
    return ~outside, sup_out
