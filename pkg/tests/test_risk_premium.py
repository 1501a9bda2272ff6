import numpy as np
import pytest

from bayesmarkowitz.core_model import DiracPrior, DiscretePrior, GaussianPrior, MarketModel
from bayesmarkowitz.errors import ConfigError, DomainError
from bayesmarkowitz.risk_premium import (ConstantDriftPremium, GaussianPremium, GridPremium, GridSpec,
                                         constant_drift_R, gain_matrix, gaussian_grad_R, gaussian_M,
                                         gaussian_R, gaussian_U, pde_residual, premium_for,
                                         riccati_residual, solve_pde_1d)


def _interior(grid, frac=0.8):
    lo, hi = grid.domain
    c, w = 0.5 * (lo + hi), 0.5 * frac * (hi - lo)
    return (grid.b_grid >= c - w) & (grid.b_grid <= c + w)


class TestConstantDrift:
    def test_values(self):
        m = MarketModel(0.05, 1.0)
        assert constant_drift_R([0.05], m, 0.0) == pytest.approx(1.0)
        assert constant_drift_R([0.05], m, 1.0) == 0.0
        assert constant_drift_R([0.0], m, 0.3) == 0.0

    def test_residual_exact(self):
        rp = ConstantDriftPremium(MarketModel(0.2, 1.0), [0.05])
        # psi = 0 and R is linear in t: only -R_t - |sigma^{-1} b|^2 remains
        b = 0.05
        assert abs(pde_residual(rp, 0.4, [b])) <= 1e-10


class TestGaussianClosedForm:
    def test_hand_values(self, asset8):
        prior, model = asset8
        assert gaussian_M(prior, model, 0.0)[0, 0] == pytest.approx(0.04 / (0.04 * 0.36), rel=1e-13)
        assert gaussian_U(prior, model, 0.0) == pytest.approx(np.log(0.2 / 0.12), rel=1e-13)

    def test_terminal_zero(self, asset8, market2):
        for prior, model in (asset8, market2):
            np.testing.assert_array_equal(gaussian_M(prior, model, model.horizon), 0.0)
            assert gaussian_U(prior, model, model.horizon) == 0.0
            assert gaussian_R(prior, model, model.horizon, prior.mean) == 0.0

    def test_vanishing_prior_volatility(self):
        model = MarketModel(0.2, 1.0)
        prior = GaussianPrior.from_volatility(0.05, 1e-7)
        for t in (0.0, 0.5):
            assert gaussian_R(prior, model, t, [0.05]) == pytest.approx(
                constant_drift_R([0.05], model, t), rel=1e-8)
        assert gaussian_U(prior, model, 0.0) == pytest.approx(0.0, abs=1e-12)

    def test_quadrature_matches_explicit(self, asset8):
        prior, model = asset8
        for t in (0.0, 0.3, 0.9):
            assert gaussian_M(prior, model, t, method="quadrature")[0, 0] == pytest.approx(
                gaussian_M(prior, model, t)[0, 0], rel=1e-9)
            assert gaussian_U(prior, model, t, method="quadrature") == pytest.approx(
                gaussian_U(prior, model, t), rel=1e-8)

    def test_diagonal_decouples(self):
        model = MarketModel(np.diag([0.2, 0.1]), 1.0)
        prior = GaussianPrior(np.array([0.05, 0.02]), np.diag([0.16, 0.01]))
        m2 = gaussian_M(prior, model, 0.2)
        u2 = gaussian_U(prior, model, 0.2)
        us = 0.0
        for k, (s, s0) in enumerate(((0.2, 0.4), (0.1, 0.1))):
            p1 = GaussianPrior.from_volatility(prior.mean[k], s0)
            m1 = MarketModel(s, 1.0)
            assert m2[k, k] == pytest.approx(gaussian_M(p1, m1, 0.2)[0, 0], rel=1e-9)
            us += gaussian_U(p1, m1, 0.2)
        assert abs(m2[0, 1]) < 1e-12
        assert u2 == pytest.approx(us, rel=1e-8)

    def test_gradient_matches_finite_difference(self, market2):
        prior, model = market2
        b = np.array([0.08, -0.02])
        h = 1e-6
        fd = [(gaussian_R(prior, model, 0.3, b + e) - gaussian_R(prior, model, 0.3, b - e)) / (2 * h)
              for e in np.eye(2) * h]
        np.testing.assert_allclose(gaussian_grad_R(prior, model, 0.3, b), fd, atol=1e-7)

    def test_psd_and_decreasing(self, market2):
        prior, model = market2
        prev = None
        for t in np.linspace(0, 1, 6):
            m = gaussian_M(prior, model, t)
            assert np.allclose(m, m.T, atol=1e-12)
            assert np.linalg.eigvalsh(m).min() >= -1e-12
            assert gaussian_U(prior, model, t) >= 0
            r = gaussian_R(prior, model, t, prior.mean)
            if prev is not None:
                assert r <= prev
            prev = r

    def test_residual_of_closed_form(self, asset8, market2):
        rng = np.random.default_rng(3)
        for prior, model in (asset8, market2):
            rp = GaussianPremium(prior, model)
            for _ in range(10):
                t = rng.uniform(0.1, 0.9)
                b = prior.mean + rng.normal(size=model.n) * 0.1
                assert abs(pde_residual(rp, t, b)) <= 1e-5 * (1 + b @ b)


class TestRiccati:
    @pytest.mark.parametrize("frac", [0.1, 0.5, 0.9])
    def test_explicit_1d(self, asset8, frac):
        prior, model = asset8
        rm, ru = riccati_residual(prior, model, frac * model.horizon)
        assert abs(rm[0, 0]) <= 1e-8 and abs(ru) <= 1e-8

    def test_zero_prior_volatility_residual(self):
        # sigma0 = 0 is the constant-drift limit; use a tiny value within SPD tolerance
        model = MarketModel(0.2, 1.0)
        prior = GaussianPrior.from_volatility(0.05, 1e-5)
        rm, ru = riccati_residual(prior, model, 0.5)
        assert abs(rm[0, 0]) <= 1e-8 and abs(ru) <= 1e-8

    def test_quadrature_2d(self, market2):
        prior, model = market2
        for t in (0.1, 0.5, 0.9):
            rm, ru = riccati_residual(prior, model, t)
            assert np.max(np.abs(rm)) <= 1e-6
            assert abs(ru) <= 1e-6
            gm = gain_matrix(prior, model, t) @ gaussian_M(prior, model, t)
            np.testing.assert_allclose(gm, gm.T, atol=1e-9)

    def test_rejects_endpoints(self, asset8):
        with pytest.raises(DomainError):
            riccati_residual(*asset8, 0.0)


class TestEvaluators:
    def test_premium_for_dispatch(self, asset8, two_point):
        assert isinstance(premium_for(*asset8), GaussianPremium)
        assert isinstance(premium_for(DiracPrior([0.05]), MarketModel(0.2, 1.0)), ConstantDriftPremium)
        assert isinstance(premium_for(*two_point, grid=GridSpec(60, 100)), GridPremium)

    def test_gaussian_premium_batch(self, asset8):
        rp = GaussianPremium(*asset8)
        b = np.array([[0.0], [0.05], [0.1]])
        np.testing.assert_allclose(rp.value(0.2, b), gaussian_R(*asset8, 0.2, b))
        assert rp.psi(0.2, b).shape == (3, 1, 1)
        assert rp.r0 == pytest.approx(gaussian_R(*asset8, 0.0, [0.05]))


class TestGrid:
    def test_terminal_slice_zero(self, asset8):
        g = solve_pde_1d(*asset8, GridSpec(100, 200))
        assert np.all(g.values[-1] == 0.0)

    def test_two_point_symmetry(self, two_point):
        g = solve_pde_1d(*two_point, GridSpec(200, 400))
        np.testing.assert_allclose(g.values, g.values[:, ::-1], atol=1e-10)
        assert np.all(g.values[0] > 0)

    def test_first_order_refinement(self, asset8):
        errs = []
        for ns, nt in ((200, 1000), (400, 2000), (800, 4000)):
            g = solve_pde_1d(*asset8, GridSpec(ns, nt))
            mask = _interior(g)
            ex = gaussian_R(*asset8, 0.0, g.b_grid[mask][:, None])
            errs.append(np.max(np.abs(g.values[0][mask] - ex)))
        for coarse, fine in zip(errs, errs[1:]):
            assert 1.7 < coarse / fine < 2.3

    def test_residual_shrinks_with_grid(self, asset8):
        res = []
        for ns, nt in ((200, 1000), (400, 2000)):
            g = solve_pde_1d(*asset8, GridSpec(ns, nt))
            res.append(max(abs(pde_residual(g, t, [0.05])) for t in (0.25, 0.5, 0.75)))
        assert res[1] < 0.7 * res[0]

    def test_lagged_mode_guard(self):
        prior = GaussianPrior.from_volatility(0.1, 0.3)
        with pytest.raises(ConfigError, match="too coarse"):
            solve_pde_1d(prior, MarketModel(0.05, 1.0), GridSpec(400, 2000, gradient_term="lagged"))

    def test_lagged_mode_accuracy(self, asset8):
        g = solve_pde_1d(*asset8, GridSpec(400, 2000, gradient_term="lagged"))
        mask = _interior(g)
        ex = gaussian_R(*asset8, 0.0, g.b_grid[mask][:, None])
        assert np.max(np.abs(g.values[0][mask] - ex) / ex) < 5e-3

    def test_domain_errors_and_clamp(self, two_point):
        g = solve_pde_1d(*two_point, GridSpec(60, 100))
        with pytest.raises(DomainError):
            g.value(0.5, [0.2])
        b, n = g.project(0.5, np.array([[0.2], [0.0], [-0.5]]))
        assert n == 2
        assert b[0, 0] == g.domain[1] and b[2, 0] == g.domain[0]

    def test_interpolation_shapes(self, two_point):
        g = solve_pde_1d(*two_point, GridSpec(60, 100))
        assert isinstance(g.value(0.3, [0.0]), float)
        assert g.value(0.3, np.zeros((4, 1))).shape == (4,)
        assert g.gradient(0.3, [0.0]).shape == (1,)
        assert g.gradient(0.3, np.zeros((4, 1))).shape == (4, 1)

    def test_csv_and_npz_round_trip(self, two_point, tmp_path):
        g = solve_pde_1d(*two_point, GridSpec(40, 50))
        g.to_csv(tmp_path / "r.csv")
        g2 = GridPremium.from_csv(tmp_path / "r.csv", *two_point)
        np.testing.assert_array_equal(g2.values, g.values)
        np.testing.assert_array_equal(g2.grads, g.grads)
        g.save_npz(tmp_path / "r.npz")
        g3 = GridPremium.load_npz(tmp_path / "r.npz", *two_point)
        np.testing.assert_array_equal(g3.values, g.values)
        assert "#" in (tmp_path / "r.csv").read_text().splitlines()[0]

    def test_multi_asset_rejected(self, discrete2):
        with pytest.raises(DomainError):
            solve_pde_1d(*discrete2)
