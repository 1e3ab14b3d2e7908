"""Extremal operator families and structural-hypothesis checkers.

The built-in families are x-independent, positively homogeneous of degree
1 + alpha in (p, M) and sandwiched between the extremal values with
ellipticity bounds (a, A).  The gradient enters only through the weight
|p|^alpha, so every family is singular (alpha < 0) or degenerate
(alpha > 0) at vanishing gradient exactly like the p-Laplacian with
p = alpha + 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

FAMILIES = ("pucci_sup", "pucci_inf", "trace")


@dataclass(frozen=True)
class SymMatrix2:
    """Symmetric 2x2 matrix given by its three independent entries."""

    m11: float
    m12: float
    m22: float

    def eigenvalues(self):
        """Return (lambda_min, lambda_max) from the closed 2x2 form."""
        mean = 0.5 * (self.m11 + self.m22)
        rad = np.hypot(0.5 * (self.m11 - self.m22), self.m12)
        return mean - rad, mean + rad

    def trace(self):
        return self.m11 + self.m22

    def norm(self):
        lo, hi = self.eigenvalues()
        return max(abs(lo), abs(hi))

    def as_array(self):
        return np.array([[self.m11, self.m12], [self.m12, self.m22]])

    @staticmethod
    def from_array(m) -> "SymMatrix2":
        m = np.asarray(m, dtype=float)
        return SymMatrix2(float(m[0, 0]), float(0.5 * (m[0, 1] + m[1, 0])), float(m[1, 1]))

    def __add__(self, other: "SymMatrix2") -> "SymMatrix2":
        return SymMatrix2(self.m11 + other.m11, self.m12 + other.m12, self.m22 + other.m22)

    def __neg__(self) -> "SymMatrix2":
        return SymMatrix2(-self.m11, -self.m12, -self.m22)

    def scaled(self, t: float) -> "SymMatrix2":
        return SymMatrix2(t * self.m11, t * self.m12, t * self.m22)


def _zero_vector_field(x):
    x = np.asarray(x, dtype=float)
    return np.zeros_like(x)


def _zero_scalar_field(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return 0.0
    return np.zeros(x.shape[0])


@dataclass(frozen=True)
class EllipticParams:
    """Ellipticity bounds, degeneracy exponent and lower-order fields.

    ``h`` maps points (shape (2,) or (n, 2)) to drift vectors of the same
    shape; ``V`` maps points to scalars.  ``None`` means identically zero.
    """

    a: float
    A: float
    alpha: float
    family: str = "pucci_sup"
    h: Optional[Callable] = None
    V: Optional[Callable] = None

    def __post_init__(self):
        if not (self.a > 0.0 and self.A >= self.a):
            raise ValueError(f"need 0 < a <= A, got a={self.a}, A={self.A}")
        if not self.alpha > -1.0:
            raise ValueError(f"degeneracy exponent must exceed -1, got {self.alpha}")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}, expected one of {FAMILIES}")
        if self.family == "trace" and self.A != self.a:
            raise ValueError("trace family requires A == a")

    def drift(self, x):
        return _zero_vector_field(x) if self.h is None else np.asarray(self.h(np.asarray(x, dtype=float)), dtype=float)

    def potential(self, x):
        if self.V is None:
            return _zero_scalar_field(x)
        return self.V(np.asarray(x, dtype=float))


def pucci_plus(m: SymMatrix2, a: float, A: float) -> float:
    """M^+_{a,A}(m) = A * (sum of positive eigenvalues) - a * (sum of negative parts)."""
    lo, hi = m.eigenvalues()
    return float(A * max(hi, 0.0) - a * max(-hi, 0.0) + A * max(lo, 0.0) - a * max(-lo, 0.0))


def pucci_minus(m: SymMatrix2, a: float, A: float) -> float:
    """M^-_{a,A}(m) = a * (sum of positive eigenvalues) - A * (sum of negative parts)."""
    lo, hi = m.eigenvalues()
    return float(a * max(hi, 0.0) - A * max(-hi, 0.0) + a * max(lo, 0.0) - A * max(-lo, 0.0))


def eval_F(x, p, m: SymMatrix2, params: EllipticParams) -> float:
    """Evaluate the second-order part F(x, p, m) of the configured family.

    The gradient argument must be nonzero; at degenerate points callers
    apply the constant-test rule of the discretization instead.
    """
    p = np.asarray(p, dtype=float)
    pnorm = float(np.hypot(p[0], p[1]))
    if pnorm == 0.0:
        raise ValueError("eval_F requires a nonzero gradient argument")
    w = pnorm ** params.alpha
    if params.family == "pucci_sup":
        return w * pucci_plus(m, params.a, params.A)
    if params.family == "pucci_inf":
        return w * pucci_minus(m, params.a, params.A)
    return w * params.a * m.trace()


def full_operator(x, p, m: SymMatrix2, u_val: float, lam: float, params: EllipticParams) -> float:
    """F(x,p,m) + h(x).p |p|^alpha + (V(x)+lam) |u|^alpha u."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    pnorm = float(np.hypot(p[0], p[1]))
    w = pnorm ** params.alpha
    hx = params.drift(x)
    zero_order = (float(params.potential(x)) + lam) * abs(u_val) ** params.alpha * u_val
    return eval_F(x, p, m, params) + float(hx @ p) * w + zero_order


@dataclass
class HypothesisReport:
    """Max relative violations of the structural hypotheses over random trials."""

    homogeneity: float = 0.0
    sandwich: float = 0.0
    x_independence: float = 0.0
    drift_condition: float = 0.0
    drift_quotient: float = float("nan")
    trials: int = 0
    tol: float = 1e-10
    notes: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        worst = max(self.homogeneity, self.sandwich, self.x_independence, self.drift_condition)
        return bool(np.isfinite(worst) and worst <= self.tol)

    def as_dict(self):
        return {
            "homogeneity": self.homogeneity,
            "sandwich": self.sandwich,
            "x_independence": self.x_independence,
            "drift_condition": self.drift_condition,
            "drift_quotient": None if not np.isfinite(self.drift_quotient) else self.drift_quotient,
            "trials": self.trials,
            "ok": self.ok,
            "notes": self.notes,
        }


def _random_sym(rng) -> SymMatrix2:
    return SymMatrix2(*(rng.standard_normal(3) * 2.0))


def _random_psd(rng) -> SymMatrix2:
    b = rng.standard_normal((2, 2))
    return SymMatrix2.from_array(b.T @ b)


def check_hypotheses(params: EllipticParams, trials: int = 10000, seed: int = 0,
                     points: Optional[np.ndarray] = None) -> HypothesisReport:
    """Randomized verification of homogeneity, the ellipticity sandwich,
    x-independence and the drift condition.

    ``points`` supplies the sample locations for the drift/potential
    checks (defaults to uniform samples of [-1, 1]^2).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    rep = HypothesisReport(trials=trials)
    if points is None:
        points = rng.uniform(-1.0, 1.0, size=(max(64, min(trials, 1024)), 2))
    points = np.asarray(points, dtype=float)

    x0 = points[0]
    for _ in range(trials):
        p = rng.standard_normal(2)
        while np.hypot(p[0], p[1]) < 1e-8:
            p = rng.standard_normal(2)
        m = _random_sym(rng)
        t = rng.uniform(-3.0, 3.0)
        if abs(t) < 1e-6:
            t = 1.0
        mu = rng.uniform(0.0, 3.0)

        base = eval_F(x0, p, m, params)
        scaled = eval_F(x0, t * p, m.scaled(mu), params)
        want = abs(t) ** params.alpha * mu * base
        rep.homogeneity = max(rep.homogeneity, abs(scaled - want) / (1.0 + abs(want)))

        n = _random_psd(rng)
        dF = eval_F(x0, p, m + n, params) - base
        w = np.hypot(p[0], p[1]) ** params.alpha
        lo = params.a * w * n.trace()
        hi = params.A * w * n.trace()
        viol = max(lo - dF, dF - hi) / (1.0 + abs(dF))
        rep.sandwich = max(rep.sandwich, max(viol, 0.0))

        y0 = points[int(rng.integers(len(points)))]
        rep.x_independence = max(rep.x_independence,
                                 abs(eval_F(y0, p, m, params) - base) / (1.0 + abs(base)))

    # Drift condition: sign test for alpha > 0, Hoelder quotient otherwise.
    if params.h is not None:
        hvals = params.drift(points)
        i = rng.integers(len(points), size=4 * trials if trials < 4096 else trials)
        j = rng.integers(len(points), size=i.shape)
        keep = i != j
        dx = points[i[keep]] - points[j[keep]]
        dh = hvals[i[keep]] - hvals[j[keep]]
        if params.alpha > 0:
            dots = np.einsum("ij,ij->i", dh, dx)
            scale = 1.0 + np.einsum("ij,ij->i", dx, dx)
            rep.drift_condition = float(max(0.0, np.max(dots / scale, initial=0.0)))
        else:
            dist = np.linalg.norm(dx, axis=1)
            ok = dist > 1e-12
            quot = np.linalg.norm(dh[ok], axis=1) / dist[ok] ** (1.0 + params.alpha)
            rep.drift_quotient = float(np.max(quot, initial=0.0))
            if not np.all(np.isfinite(quot)):
                rep.drift_condition = float("inf")
                rep.notes.append("drift Hoelder quotient not finite on samples")
            else:
                rep.notes.append("drift Hoelder quotient reported as diagnostic only")
    return rep
