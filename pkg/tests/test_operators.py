import numpy as np
import pytest

from conebarrier.operators import (
    EllipticParams,
    SymMatrix2,
    check_hypotheses,
    eval_F,
    full_operator,
    pucci_minus,
    pucci_plus,
)


def random_sym(rng):
    return SymMatrix2(*(rng.standard_normal(3) * 3.0))


def random_psd(rng):
    b = rng.standard_normal((2, 2))
    return SymMatrix2.from_array(b.T @ b)


class TestPucci:
    def test_definite_matrix(self):
        eye = SymMatrix2(1.0, 0.0, 1.0)
        assert pucci_plus(eye, 1.0, 2.0) == pytest.approx(4.0, abs=1e-14)
        assert pucci_minus(eye, 1.0, 2.0) == pytest.approx(2.0, abs=1e-14)

    def test_split_spectrum(self):
        m = SymMatrix2(1.0, 0.0, -1.0)
        assert pucci_plus(m, 1.0, 2.0) == pytest.approx(1.0, abs=1e-14)

    def test_rank_one_cone_matrix(self):
        # I + ((gamma-2)/r^2) x (x) x has eigenvalues {1, gamma-1}; with
        # a=1, A=2 the sup-extremal value is A*1 + a*(gamma-1) = 1.1.
        gamma = 0.1
        x = np.array([0.3, -0.4])
        r2 = x @ x
        m = SymMatrix2.from_array(np.eye(2) + (gamma - 2.0) / r2 * np.outer(x, x))
        lo, hi = m.eigenvalues()
        assert sorted((lo, hi)) == pytest.approx([gamma - 1.0, 1.0], abs=1e-12)
        assert pucci_plus(m, 1.0, 2.0) == pytest.approx(2.0 + (gamma - 1.0), abs=1e-12)

    def test_duality_and_monotonicity(self):
        rng = np.random.default_rng(7)
        for _ in range(2000):
            m = random_sym(rng)
            n = random_psd(rng)
            a, A = 0.5, 2.5
            assert pucci_plus(m, a, A) == pytest.approx(-pucci_minus(-m, a, A), abs=1e-12)
            assert pucci_plus(m + n, a, A) >= pucci_plus(m, a, A) - 1e-12
            assert pucci_minus(m + n, a, A) >= pucci_minus(m, a, A) - 1e-12

    def test_subadditivity(self):
        rng = np.random.default_rng(11)
        for _ in range(2000):
            m1, m2 = random_sym(rng), random_sym(rng)
            s = m1 + m2
            a, A = 1.0, 3.0
            assert pucci_plus(s, a, A) <= pucci_plus(m1, a, A) + pucci_plus(m2, a, A) + 1e-10
            assert pucci_minus(s, a, A) >= pucci_minus(m1, a, A) + pucci_minus(m2, a, A) - 1e-10

    def test_eigenvalue_residual(self):
        rng = np.random.default_rng(5)
        for _ in range(500):
            m = random_sym(rng)
            arr = m.as_array()
            for lam in m.eigenvalues():
                res = np.linalg.det(arr - lam * np.eye(2))
                assert abs(res) <= 1e-12 * (1.0 + m.norm()) ** 2


class TestEvalF:
    @pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
    @pytest.mark.parametrize("family", ["pucci_sup", "pucci_inf", "trace"])
    def test_homogeneity(self, alpha, family):
        aA = (1.0, 1.0) if family == "trace" else (1.0, 2.0)
        params = EllipticParams(a=aA[0], A=aA[1], alpha=alpha, family=family)
        rng = np.random.default_rng(3)
        x = np.zeros(2)
        for _ in range(200):
            p = rng.standard_normal(2) + np.array([0.5, 0.0])
            m = random_sym(rng)
            base = eval_F(x, p, m, params)
            got = eval_F(x, 2.0 * p, m.scaled(3.0), params)
            assert got == pytest.approx(2.0 ** alpha * 3.0 * base, rel=1e-12, abs=1e-12)

    def test_trace_alpha0_is_laplacian(self):
        params = EllipticParams(a=1.0, A=1.0, alpha=0.0, family="trace")
        m = SymMatrix2(2.0, 0.3, -5.0)
        assert eval_F(np.zeros(2), np.array([1.0, 2.0]), m, params) == pytest.approx(m.trace(), abs=1e-14)

    def test_sandwich(self):
        params = EllipticParams(a=1.0, A=2.0, alpha=1.0, family="pucci_sup")
        rng = np.random.default_rng(8)
        x = np.zeros(2)
        for _ in range(1000):
            p = rng.standard_normal(2)
            if np.hypot(*p) < 1e-6:
                continue
            m, n = random_sym(rng), random_psd(rng)
            w = np.hypot(*p) ** params.alpha
            dF = eval_F(x, p, m + n, params) - eval_F(x, p, m, params)
            assert params.a * w * n.trace() - 1e-10 * (1 + abs(dF)) <= dF
            assert dF <= params.A * w * n.trace() + 1e-10 * (1 + abs(dF))

    def test_zero_gradient_rejected(self):
        params = EllipticParams(a=1.0, A=2.0, alpha=1.0)
        with pytest.raises(ValueError):
            eval_F(np.zeros(2), np.zeros(2), SymMatrix2(1, 0, 1), params)


class TestFullOperator:
    def test_zero_order_vanishes_at_zero(self):
        params = EllipticParams(a=1.0, A=2.0, alpha=0.5, V=lambda x: 3.0)
        val = full_operator(np.zeros(2), np.array([1.0, 0.0]), SymMatrix2(0, 0, 0), 0.0, 7.0, params)
        assert val == pytest.approx(0.0, abs=1e-14)

    def test_lambda_shift_matches_potential_shift(self):
        rng = np.random.default_rng(1)
        c = 0.7
        base = EllipticParams(a=1.0, A=2.0, alpha=1.0, V=lambda x: float(np.sin(x[0])))
        shifted = EllipticParams(a=1.0, A=2.0, alpha=1.0, V=lambda x: float(np.sin(x[0])) + c)
        for _ in range(50):
            x = rng.uniform(-1, 1, 2)
            p = rng.standard_normal(2) + np.array([0.2, 0.0])
            m = random_sym(rng)
            u = rng.standard_normal()
            lam = rng.standard_normal()
            assert full_operator(x, p, m, u, lam + c, base) == pytest.approx(
                full_operator(x, p, m, u, lam, shifted), rel=1e-12, abs=1e-12
            )

    def test_linear_reduction(self):
        params = EllipticParams(a=1.0, A=1.0, alpha=0.0, family="trace", V=lambda x: 0.5)
        m = SymMatrix2(1.0, 0.2, -0.4)
        x = np.array([0.1, 0.2])
        got = full_operator(x, np.array([0.3, 0.4]), m, 2.0, 1.5, params)
        assert got == pytest.approx(m.trace() + (0.5 + 1.5) * 2.0, abs=1e-13)


class TestParamsValidation:
    def test_rejects_bad_bounds(self):
        with pytest.raises(ValueError):
            EllipticParams(a=2.0, A=1.0, alpha=0.0)
        with pytest.raises(ValueError):
            EllipticParams(a=0.0, A=1.0, alpha=0.0)
        with pytest.raises(ValueError):
            EllipticParams(a=1.0, A=1.0, alpha=-1.0)
        with pytest.raises(ValueError):
            EllipticParams(a=1.0, A=2.0, alpha=0.0, family="trace")
        with pytest.raises(ValueError):
            EllipticParams(a=1.0, A=2.0, alpha=0.0, family="isaacs")


class TestHypothesisChecks:
    def test_trace_family_exact(self):
        params = EllipticParams(a=1.0, A=1.0, alpha=0.0, family="trace")
        rep = check_hypotheses(params, trials=500, seed=0)
        assert rep.ok
        assert rep.homogeneity <= 1e-12

    def test_pucci_sup_random(self):
        params = EllipticParams(a=1.0, A=2.0, alpha=1.0, family="pucci_sup")
        rep = check_hypotheses(params, trials=10000, seed=1)
        assert rep.ok
        assert max(rep.homogeneity, rep.sandwich) <= 1e-10

    def test_monotone_drift_passes(self):
        params = EllipticParams(a=1.0, A=2.0, alpha=1.0, h=lambda x: -np.asarray(x, dtype=float))
        rep = check_hypotheses(params, trials=500, seed=2)
        assert rep.drift_condition <= 1e-12
        assert rep.ok

    def test_expanding_drift_flagged(self):
        params = EllipticParams(a=1.0, A=2.0, alpha=1.0, h=lambda x: np.asarray(x, dtype=float))
        rep = check_hypotheses(params, trials=500, seed=3)
        assert rep.drift_condition > 1e-6
        assert not rep.ok
