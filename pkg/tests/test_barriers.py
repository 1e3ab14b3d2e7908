import dataclasses
import math

import numpy as np
import pytest

from conebarrier.barriers import (
    build_global_barrier,
    build_phi,
    certify_barrier,
    choose_gamma,
    eval_local_barrier,
    _local_eval_arrays,
)
from conebarrier.errors import InadmissibleGammaError
from conebarrier.geometry import l_shape, unit_square
from conebarrier.operators import EllipticParams, SymMatrix2, eval_F

LAPLACE = EllipticParams(a=1.0, A=1.0, alpha=0.0, family="trace")
PUCCI = EllipticParams(a=1.0, A=2.0, alpha=1.0, family="pucci_sup")


def sector_points(lb, m, seed=0, two_sided=True, r_min=1e-4):
    rng = np.random.default_rng(seed)
    r = np.exp(rng.uniform(np.log(r_min), np.log(lb.r_o * 0.999999), m))
    span = lb.psi if two_sided else 0.0
    base = math.atan2(lb.n[1], lb.n[0])
    t = base + rng.uniform(-span, lb.psi, m)
    return lb.z + r[:, None] * np.column_stack([np.cos(t), np.sin(t)])


class TestChooseGamma:
    def test_below_three_quarters(self):
        # at gamma = 0.75 the solvability inequality fails for psi = pi/2
        g = choose_gamma(LAPLACE, np.pi / 2)
        assert 0.0 < g < 0.75
        beta = 2.0
        s1 = 0.5 * (beta + math.sqrt(beta ** 2 - 4 * 0.75))
        s2 = 0.5 * (beta - math.sqrt(beta ** 2 - 4 * 0.75))
        assert math.exp((s2 - s1) * np.pi / 2) < s2 / s1  # 0.208 < 1/3

    def test_gamma_point_one_admissible(self):
        lb = build_phi(0.1, np.pi / 2, LAPLACE, N=2, rbar=0.5)
        assert lb.sigma1 == pytest.approx(1.9487, abs=2e-4)
        assert lb.sigma2 == pytest.approx(0.0513, abs=2e-4)
        ratio = lb.sigma2 / lb.sigma1
        assert ratio == pytest.approx(0.0263, abs=2e-4)
        assert math.exp((lb.sigma2 - lb.sigma1) * np.pi / 2) == pytest.approx(0.0508, abs=2e-4)
        assert ratio <= math.exp((lb.sigma2 - lb.sigma1) * np.pi / 2)

    def test_small_gamma_limit(self):
        for g in (1e-3, 1e-5):
            lb = build_phi(g, np.pi / 2, LAPLACE, N=2, rbar=0.5)
            assert lb.sigma2 == pytest.approx(0.0, abs=2 * g)
            assert lb.sigma1 == pytest.approx(lb.beta, abs=2 * g)

    def test_returned_gamma_strictly_admissible(self):
        for psi in (np.pi / 4, np.pi / 2, 3 * np.pi / 4):
            for params in (LAPLACE, PUCCI):
                g = choose_gamma(params, psi)
                build_phi(g, psi, params, rbar=0.5)  # must not raise


class TestPhiProfile:
    def test_spec_instance(self):
        lb = build_phi(0.1, np.pi / 2, LAPLACE, N=2, rbar=0.5)
        assert lb.C2 == pytest.approx(1.9166, abs=2e-4)
        assert lb.C1 == pytest.approx(-0.05047, abs=2e-5)
        assert lb.phi(0.0) == pytest.approx(1.8661, abs=2e-4)
        assert lb.phi(0.0) == pytest.approx(lb.C2 * (1 - lb.sigma2 / lb.sigma1), abs=1e-12)

    def test_boundary_conditions_exact(self):
        for params, psi in [(LAPLACE, np.pi / 2), (PUCCI, np.pi / 4), (PUCCI, 3 * np.pi / 4)]:
            g = choose_gamma(params, psi)
            lb = build_phi(g, psi, params, rbar=0.5)
            assert lb.phi(psi) == pytest.approx(1.0, abs=1e-12)
            assert lb.phi_prime(0.0) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("aA", [(1.0, 1.0), (1.0, 2.0)])
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
    @pytest.mark.parametrize("psi", [np.pi / 4, np.pi / 2, 3 * np.pi / 4])
    def test_ode_and_signs(self, aA, alpha, psi):
        a, A = aA
        fam = "trace" if a == A and alpha is not None else "pucci_sup"
        params = EllipticParams(a=a, A=A, alpha=alpha, family="trace" if a == A else "pucci_sup")
        g = choose_gamma(params, psi)
        lb = build_phi(g, psi, params, rbar=0.5)
        th = np.linspace(0.0, psi, 1000)
        assert np.abs(lb.ode_residual(th)).max() <= 1e-10
        assert lb.phi(th).min() >= 1.0 - 1e-12
        assert lb.phi_prime(th).max() <= 1e-12
        assert lb.phi_second(th).max() <= 1e-12

    def test_c_psi_conservative_for_negative_alpha(self):
        params = EllipticParams(a=1.0, A=2.0, alpha=-0.5, family="pucci_sup")
        g = choose_gamma(params, np.pi / 2)
        lb = build_phi(g, np.pi / 2, params, rbar=0.5)
        th = np.linspace(0.0, np.pi / 2, 2001)
        q = lb.phi(th) ** 2 + lb.phi_prime(th) ** 2
        assert lb.C_psi == pytest.approx(float(q.max()) ** (params.alpha / 2), rel=1e-9)


class TestLocalEvaluation:
    def setup_method(self):
        g = choose_gamma(PUCCI, 2.0)
        self.lb = build_phi(g, 2.0, PUCCI, rbar=0.5).anchored(
            np.array([0.3, -0.2]), np.array([np.cos(0.7), np.sin(0.7)])
        )

    def test_axis_gradient(self):
        lb = self.lb
        x = lb.z + 0.2 * lb.n
        v, grad, _ = eval_local_barrier(x, lb)
        g = lb.gamma
        want = g * 0.2 ** (g - 1.0) * lb.phi(0.0) * lb.n
        assert grad == pytest.approx(want, rel=1e-12)

    def test_gradient_finite_differences(self):
        lb = self.lb
        # keep r well above the FD step so central differences are accurate
        pts = sector_points(lb, 1000, seed=3, r_min=0.05)
        v, grad, hess, r, theta = _local_eval_arrays(lb, pts)
        eps = 1e-5
        for e in (np.array([eps, 0.0]), np.array([0.0, eps])):
            vp = _local_eval_arrays(lb, pts + e)[0]
            vm = _local_eval_arrays(lb, pts - e)[0]
            fd = (vp - vm) / (2 * eps)
            comp = grad[:, 0] if e[0] else grad[:, 1]
            assert np.max(np.abs(comp - fd) / (1.0 + np.abs(comp))) <= 1e-6

    def test_hessian_finite_differences(self):
        lb = self.lb
        pts = sector_points(lb, 200, seed=4)
        # keep clear of the apex so the FD stencil stays accurate
        keep = np.hypot(*(pts - lb.z).T) > 0.02
        pts = pts[keep]
        _, _, hess, _, _ = _local_eval_arrays(lb, pts)
        eps = 1e-5

        def v(p):
            return _local_eval_arrays(lb, p)[0]

        ex, ey = np.array([eps, 0.0]), np.array([0.0, eps])
        hxx = (v(pts + ex) - 2 * v(pts) + v(pts - ex)) / eps ** 2
        hyy = (v(pts + ey) - 2 * v(pts) + v(pts - ey)) / eps ** 2
        hxy = (v(pts + ex + ey) - v(pts + ex - ey) - v(pts - ex + ey) + v(pts - ex - ey)) / (4 * eps ** 2)
        scale = 1.0 + np.abs(hess).max(axis=1)
        assert np.max(np.abs(hess[:, 0] - hxx) / scale) <= 1e-4
        assert np.max(np.abs(hess[:, 1] - hxy) / scale) <= 1e-4
        assert np.max(np.abs(hess[:, 2] - hyy) / scale) <= 1e-4

    def test_homogeneity(self):
        # tame profile: machine-precision check
        lb0 = build_phi(0.1, np.pi / 2, LAPLACE, rbar=0.5).anchored(
            np.array([0.1, 0.4]), np.array([0.0, 1.0])
        )
        pts = sector_points(lb0, 100, seed=5)
        v1 = _local_eval_arrays(lb0, pts)[0]
        t = 0.37
        v2 = _local_eval_arrays(lb0, lb0.z + t * (pts - lb0.z))[0]
        assert np.max(np.abs(v2 - t ** lb0.gamma * v1) / np.abs(v1)) <= 1e-12
        # stiff wide-cone profile: exponentials amplify angle roundoff slightly
        lb = self.lb
        pts = sector_points(lb, 100, seed=5)
        v1 = _local_eval_arrays(lb, pts)[0]
        v2 = _local_eval_arrays(lb, lb.z + t * (pts - lb.z))[0]
        assert np.max(np.abs(v2 - t ** lb.gamma * v1) / np.abs(v1)) <= 2e-11

    def test_domain_errors(self):
        lb = self.lb
        with pytest.raises(ValueError):
            eval_local_barrier(lb.z, lb)
        outside = lb.z - 0.1 * lb.n  # angle pi > psi
        with pytest.raises(ValueError):
            eval_local_barrier(outside, lb)

    @pytest.mark.parametrize("params,psi", [
        (LAPLACE, np.pi / 2),
        (PUCCI, np.pi / 4),
        (EllipticParams(a=1.0, A=2.0, alpha=-0.5, family="pucci_sup"), 3 * np.pi / 4),
    ])
    def test_supersolution_margin(self, params, psi):
        g = choose_gamma(params, psi)
        lb = build_phi(g, psi, params, rbar=0.5)
        pts = sector_points(lb, 10000, seed=6)
        _, grad, hess, _, _ = _local_eval_arrays(lb, pts)
        res = np.array([
            eval_F(pts[k], grad[k], SymMatrix2(*hess[k]), params) for k in range(len(pts))
        ])
        assert np.max(res) <= -lb.b + 1e-12 * (1.0 + np.abs(res).max())


class TestGlobalBarrier:
    def test_vanishes_only_at_apex(self):
        dom = unit_square(psi=np.pi / 2, rbar=0.5)
        z = np.array([0.5, 0.0])
        gb = build_global_barrier(dom, z, LAPLACE)
        assert gb.values(z[None, :])[0] == 0.0
        rng = np.random.default_rng(2)
        pts = rng.uniform(0.01, 0.99, size=(100, 2))
        assert np.all(gb.values(pts) > 0.0)

    def test_branch_bound(self):
        dom = l_shape()
        gb = build_global_barrier(dom, np.array([0.0, 0.0]), LAPLACE)
        rng = np.random.default_rng(3)
        pts = []
        while len(pts) < 200:
            c = rng.uniform((-1, -1), (1, 1), (400, 2))
            pts.extend(c[dom.contains_points(c)][: 200 - len(pts)])
        vals = gb.values(np.asarray(pts))
        assert np.max(vals) <= gb.local.r_o ** gb.local.gamma / (2.0 * gb.kappa) + 1e-12

    def test_near_apex_power_bound(self):
        dom = l_shape()
        apexes = dom.boundary_points(16)
        profile = None
        barriers = []
        from conebarrier.barriers import build_phi as _bp, choose_gamma as _cg
        for z in apexes:
            barriers.append(build_global_barrier(dom, z, LAPLACE))
        kappa_min = min(gb.kappa for gb in barriers)
        gamma = barriers[0].local.gamma
        c_w = barriers[0].local.phi(0.0) / kappa_min * (1 + 1e-12)
        rng = np.random.default_rng(4)
        for gb in barriers:
            z = gb.apex
            for _ in range(50):
                r = rng.uniform(1e-4, 0.05)
                t = rng.uniform(0, 2 * np.pi)
                x = z + r * np.array([np.cos(t), np.sin(t)])
                if not dom.contains_points(x[None, :])[0]:
                    continue
                w = gb.values(x[None, :])[0]
                assert w <= c_w * r ** gamma + 1e-9

    @pytest.mark.parametrize("params,dom,z", [
        (LAPLACE, unit_square(psi=np.pi / 2, rbar=0.5), np.array([0.0, 0.0])),
        (LAPLACE, unit_square(psi=np.pi / 4, rbar=0.5), np.array([0.0, 0.0])),
        (PUCCI, l_shape(), np.array([0.0, 0.0])),
        (EllipticParams(a=1.0, A=2.0, alpha=-0.5, family="pucci_inf"), l_shape(), np.array([0.0, 0.0])),
    ])
    def test_certification(self, params, dom, z):
        up = build_global_barrier(dom, z, params, sign=1)
        rep = certify_barrier(up, samples=4000)
        assert rep.passed, rep.as_dict()
        assert rep.n_pole > 0
        # the cone branch is sampled only when the branch-switch radius
        # (G/phi)^(1/gamma) lies above the apex exclusion zone
        lb = up.local
        g_typ = up.c_scale * up.r1 ** -up.sigma
        r_switch = (0.5 * g_typ / lb.phi(0.0)) ** (1.0 / lb.gamma)
        if r_switch > 1e-4:
            assert rep.n_cone > 0
        low = build_global_barrier(dom, z, params, sign=-1)
        repl = certify_barrier(low, samples=4000)
        assert repl.passed, repl.as_dict()
        pts = np.asarray([[0.2, 0.4], [0.1, 0.1]])
        inside = dom.contains_points(pts)
        assert np.all(low.values(pts[inside]) < 0.0)

    def test_corrupted_kappa_fails(self):
        dom = unit_square(psi=np.pi / 2, rbar=0.5)
        gb = build_global_barrier(dom, np.array([0.0, 0.0]), LAPLACE)
        bad = dataclasses.replace(gb, kappa=10.0 * gb.kappa)
        assert not certify_barrier(bad, samples=2000).passed

    def test_inadmissible_gamma_raises(self):
        with pytest.raises(InadmissibleGammaError):
            build_phi(0.75, np.pi / 2, LAPLACE, rbar=0.5)
