import mpmath
import numba
import numpy as np
import pytest
import scipy.optimize

from armafield.ar_yw import build_yw_system, solve_yw
from armafield.autocorr import estimate_lags
from armafield.composite import SEPARABLE_AR, SEPARABLE_ARMA, WHITE
from armafield.core import ModelOrder, theta_pack
from armafield.errors import DegenerateFieldError, EstimationError
from armafield.ywls import build_phi, estimate, solve_theta

from conftest import synth

AR_TRUTH = theta_pack(SEPARABLE_AR[1], SEPARABLE_AR[0])
ARMA_TRUTH = theta_pack(SEPARABLE_ARMA[1], SEPARABLE_ARMA[0])
ARMA11 = ModelOrder(1, 1, 1, 1)


def normal_equations_oracle(Phi, x):
    """theta = -(Phi^T Phi)^{-1} Phi^T x evaluated at 50 digits."""
    with mpmath.workdps(50):
        P = mpmath.matrix(Phi.tolist())
        y = mpmath.matrix(x.tolist())
        sol = -((P.T * P) ** -1) * (P.T * y)
        return np.array([float(v) for v in sol])


class TestBuildPhi:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.x = rng.standard_normal((12, 11))
        self.w = rng.standard_normal((12 - 3, 11 - 3))

    def test_ar_rows(self):
        order = ModelOrder(1, 1, 0, 0, 3, 3)
        Phi, x = build_phi(self.x, self.w, order)
        L, M = order.margins
        row = 0
        for n in range(L + 1, 12):
            for m in range(M + 1, 11):
                np.testing.assert_array_equal(Phi[row], [self.x[n, m - 1], self.x[n - 1, m], self.x[n - 1, m - 1]])
                assert x[row] == self.x[n, m]
                row += 1
        assert row == Phi.shape[0]

    def test_ma_rows_use_aligned_noise(self):
        order = ModelOrder(0, 0, 1, 1, 3, 3)
        Phi, _ = build_phi(self.x, self.w, order)

        def w(n, m):  # noise in absolute field coordinates
            return self.w[n - 3, m - 3]

        L, M = order.margins
        n, m = L + 1, M + 1
        np.testing.assert_array_equal(Phi[0], [-w(n, m - 1), -w(n - 1, m), -w(n - 1, m - 1)])
        n, m = 11, 10
        np.testing.assert_array_equal(Phi[-1], [-w(n, m - 1), -w(n - 1, m), -w(n - 1, m - 1)])

    def test_row_count(self):
        order = ModelOrder(1, 1, 1, 1, 6, 6)
        Phi, x = build_phi(np.zeros((256, 256)), np.zeros((250, 250)), order)
        assert Phi.shape == (248 * 248, 6)
        assert x.shape == (61504,)

    def test_misaligned_noise(self):
        with pytest.raises(ValueError):
            build_phi(self.x, self.w[1:], ModelOrder(1, 1, 1, 1, 3, 3))

    def test_too_small(self):
        with pytest.raises(ValueError):
            build_phi(np.zeros((5, 5)), np.zeros((2, 2)), ModelOrder(1, 1, 1, 1, 3, 3))


class TestSolveTheta:
    def test_orthonormal_columns(self):
        rng = np.random.default_rng(1)
        Q, _ = np.linalg.qr(rng.standard_normal((40, 4)))
        x = rng.standard_normal(40)
        np.testing.assert_allclose(solve_theta(Q, x), -Q.T @ x, atol=1e-13)

    def test_random_overdetermined_against_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            Phi = rng.standard_normal((100, 5))
            x = rng.standard_normal(100)
            theta, reg = solve_theta(Phi, x, return_flag=True)
            assert not reg
            ref = normal_equations_oracle(Phi, x)
            assert np.linalg.norm(theta - ref) <= 1e-8 * np.linalg.norm(ref)

    def test_zero_target(self):
        rng = np.random.default_rng(3)
        np.testing.assert_array_equal(solve_theta(rng.standard_normal((20, 3)), np.zeros(20)), 0)

    def test_collinear_columns_get_ridge(self):
        rng = np.random.default_rng(4)
        c = rng.standard_normal(50)
        Phi = np.column_stack([c, c, rng.standard_normal(50)])
        theta, reg = solve_theta(Phi, rng.standard_normal(50), return_flag=True)
        assert reg
        # ridge splits the weight evenly between identical columns
        assert theta[0] == pytest.approx(theta[1], rel=1e-6)

    def test_zero_matrix_fails(self):
        with pytest.raises(EstimationError):
            solve_theta(np.zeros((10, 2)), np.ones(10))

    def test_underdetermined(self):
        with pytest.raises(ValueError):
            solve_theta(np.ones((2, 3)), np.ones(2))


def test_white_noise_fit_is_identity_filter():
    # On white noise a = b is unidentifiable; the identifiable content is that
    # B/A collapses to 1: a and b agree lag by lag.
    for seed in range(5):
        x = synth(WHITE, 256, seed)
        fit = estimate(x - x.mean(), ARMA11)
        a, b = fit.theta[:3], fit.theta[3:]
        assert np.max(np.abs(a - b)) < 0.02
        assert abs(fit.sigma2_hat - 1) < 0.1


@pytest.mark.xfail(strict=True, reason="common-factor direction a = b is not identifiable on white noise")
def test_white_noise_coefficients_small():
    for seed in range(10):
        x = synth(WHITE, 256, seed)
        fit = estimate(x - x.mean(), ARMA11)
        assert np.all(np.abs(fit.theta) <= 0.05)


def test_white_noise_pure_ar_coefficients_small():
    for seed in range(10):
        x = synth(WHITE, 256, seed)
        fit = estimate(x - x.mean(), ModelOrder(1, 1, 0, 0))
        assert np.all(np.abs(fit.theta) <= 0.05)


def test_ar_recovery():
    errs = []
    for seed in range(10):
        x = synth(SEPARABLE_AR, 256, seed)
        errs.append(estimate(x - x.mean(), SEPARABLE_AR[0]).theta - AR_TRUTH)
    assert np.all(np.abs(np.mean(errs, axis=0)) <= 0.05)


@pytest.mark.slow
def test_arma_recovery():
    errs = []
    for seed in range(10):
        x = synth(SEPARABLE_ARMA, 512, seed)
        errs.append(estimate(x - x.mean(), ARMA11).theta - ARMA_TRUTH)
    assert np.all(np.abs(np.mean(errs, axis=0)) <= 0.1)


@numba.njit(cache=True)
def _prediction_error(x, theta):
    # brute-force inverse recursion e = x + sum a x - sum b e for ARMA(1,1,1,1)
    n1, n2 = x.shape
    e = np.zeros((n1, n2))
    for n in range(n1):
        for m in range(n2):
            v = x[n, m]
            if m >= 1:
                v += theta[0] * x[n, m - 1] - theta[3] * e[n, m - 1]
            if n >= 1:
                v += theta[1] * x[n - 1, m] - theta[4] * e[n - 1, m]
            if n >= 1 and m >= 1:
                v += theta[2] * x[n - 1, m - 1] - theta[5] * e[n - 1, m - 1]
            e[n, m] = v
    return e


def test_tolerance_against_prediction_error_minimizer():
    ywls_err, pem_err = [], []
    for seed in range(10):
        x = synth(SEPARABLE_ARMA, 64, seed)
        x = x - x.mean()
        ywls_err.append(estimate(x, ARMA11).theta - ARMA_TRUTH)
        res = scipy.optimize.least_squares(lambda th: _prediction_error(x, th)[4:, 4:].ravel(), np.zeros(6))
        pem_err.append(res.x - ARMA_TRUTH)
    ywls_mae = np.abs(ywls_err).mean(axis=0)
    pem_mae = np.abs(pem_err).mean(axis=0)
    # even at 64x64 both estimators sit well inside the 0.1 tolerance used at 512x512
    assert np.all(pem_mae < 0.1)
    assert np.all(ywls_mae < 0.1)
    assert np.all(ywls_mae <= 2 * pem_mae + 0.02)


def test_pure_ar_consistency_with_direct_yule_walker():
    order = SEPARABLE_AR[0]
    for seed in range(3):
        x = synth(SEPARABLE_AR, 512, seed)
        x = x - x.mean()
        R, r0, _ = build_yw_system(estimate_lags(x, 1, 1), 1, 1)
        direct = solve_yw(R, r0)
        assert np.all(np.abs(estimate(x, order).theta - direct) <= 0.02)


def test_shift_invariance():
    thetas = []
    for seed in range(10):
        x = synth(SEPARABLE_ARMA, 256, seed)
        thetas.append(estimate(x - x.mean(), ARMA11).theta)
    spread = np.std(thetas, axis=0)
    x = synth(SEPARABLE_ARMA, 256, 99)
    a, b = x[:-8, :-8], x[8:, 8:]
    ta = estimate(a - a.mean(), ARMA11).theta
    tb = estimate(b - b.mean(), ARMA11).theta
    assert np.all(np.abs(ta - tb) < spread)


@pytest.mark.parametrize("c", [0.01, 3.0, 250.0])
def test_scale_invariance(c):
    x = synth(SEPARABLE_ARMA, 128, 5)
    x = x - x.mean()
    base = estimate(x, ARMA11)
    scaled = estimate(c * x, ARMA11)
    np.testing.assert_allclose(scaled.theta, base.theta, rtol=1e-9, atol=1e-12)
    assert scaled.sigma2_hat == pytest.approx(c * c * base.sigma2_hat, rel=1e-9)


def test_final_residual_is_white():
    x = synth(SEPARABLE_ARMA, 512, 13)
    fit = estimate(x - x.mean(), ARMA11)
    e = fit.residual - fit.residual.mean()
    r = estimate_lags(e, 3, 3).normalized().values.copy()
    r[3, 3] = 0
    assert np.abs(r).max() <= 0.1


def test_fit_bookkeeping():
    x = synth(SEPARABLE_ARMA, 64, 1)
    fit = estimate(x - x.mean(), ARMA11)
    L, M = ARMA11.margins
    assert fit.regression_rows == (64 - 1 - L) * (64 - 1 - M)
    assert fit.residual.shape == (64 - 1 - L, 64 - 1 - M)
    assert fit.noise.shape == (64 - ARMA11.K1, 64 - ARMA11.K2)
    np.testing.assert_array_equal(theta_pack(fit.params, ARMA11), fit.theta)
    assert fit.params.sigma2 == fit.sigma2_hat == pytest.approx(np.var(fit.residual))
    doc = fit.to_dict()
    assert list(doc) == ["order", "theta", "a", "b", "sigma2", "regularized", "regression_rows"]
    assert list(doc["a"]) == ["0,1", "1,0", "1,1"]


def test_degenerate_field():
    with pytest.raises(DegenerateFieldError):
        estimate(np.zeros((32, 32)), ARMA11)


def test_field_too_small():
    with pytest.raises(ValueError):
        estimate(np.random.default_rng(0).standard_normal((9, 9)), ARMA11)


def test_no_parameters():
    with pytest.raises(ValueError):
        estimate(np.ones((20, 20)), ModelOrder(0, 0, 0, 0, 1, 1))
