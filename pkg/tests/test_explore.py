import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import sqrtm

from fgs.dataset import Dataset
from fgs.errors import ConvergenceError, DataError, NumericalError
from fgs.explore import (
    barycenter,
    effective_bandwidths,
    explore,
    frechet_variance,
    gamma_compare,
    gamma_from_losses,
    gamma_from_predictors,
    wasserstein2_gaussian,
)
from fgs.forest import ForestConfig


def random_pd(rng, d):
    A = rng.normal(size=(d, d))
    return A @ A.T + 0.1 * np.eye(d)


def w2_reference(A, B):
    rA = sqrtm(A).real
    return float(np.trace(A) + np.trace(B) - 2 * np.trace(sqrtm(rA @ B @ rA).real))


def test_w2_identity():
    H = random_pd(np.random.default_rng(0), 3)
    assert wasserstein2_gaussian(H, H) == pytest.approx(0.0, abs=1e-10)


def test_w2_scalars():
    assert wasserstein2_gaussian(2.0, 7.0) == pytest.approx((np.sqrt(2) - np.sqrt(7)) ** 2)


def test_w2_commuting_diagonal():
    assert wasserstein2_gaussian(np.diag([1.0, 4.0]), np.diag([4.0, 1.0])) == pytest.approx(2.0, abs=1e-12)


@given(st.integers(1, 5), st.integers(0, 10_000))
def test_w2_matches_scipy(d, seed):
    rng = np.random.default_rng(seed)
    A, B = random_pd(rng, d), random_pd(rng, d)
    w = wasserstein2_gaussian(A, B)
    assert w == pytest.approx(w2_reference(A, B), rel=1e-7, abs=1e-9)
    assert w == pytest.approx(wasserstein2_gaussian(B, A), rel=1e-8, abs=1e-10)


def test_w2_rejects_non_pd():
    with pytest.raises(NumericalError):
        wasserstein2_gaussian(np.diag([1.0, -1.0]), np.eye(2))
    with pytest.raises(DataError):
        wasserstein2_gaussian(np.ones((2, 3)), np.eye(2))


def test_barycenter_1d():
    res = barycenter([1.0, 4.0])
    assert res.H_bar[0, 0] == pytest.approx(2.25, abs=1e-9)
    assert res.frechet_variance == pytest.approx(0.25, abs=1e-9)


def test_barycenter_identical_and_singleton():
    H = random_pd(np.random.default_rng(2), 4)
    one = barycenter([H])
    np.testing.assert_allclose(one.H_bar, H, atol=1e-12)
    assert one.frechet_variance == pytest.approx(0.0, abs=1e-12)
    same = barycenter([H, H, H])
    np.testing.assert_allclose(same.H_bar, H, atol=1e-12)
    assert same.iterations == 0


def test_barycenter_commuting_closed_form():
    Hs = [np.diag([1.0, 9.0]), np.diag([4.0, 1.0]), np.diag([9.0, 4.0])]
    res = barycenter(Hs)
    expected = np.diag([((1 + 2 + 3) / 3) ** 2, ((3 + 1 + 2) / 3) ** 2])
    np.testing.assert_allclose(res.H_bar, expected, atol=1e-9)


@given(st.integers(1, 6), st.integers(2, 8), st.integers(0, 10_000))
def test_barycenter_fixed_point(d, k, seed):
    rng = np.random.default_rng(seed)
    Hs = [random_pd(rng, d) for _ in range(k)]
    res = barycenter(Hs)
    assert res.residual <= 1e-9
    R = sqrtm(res.H_bar).real
    M = np.mean([sqrtm(R @ H @ R).real for H in Hs], axis=0)
    assert np.linalg.norm(res.H_bar - M) <= 1e-8 * max(1.0, np.linalg.norm(res.H_bar))
    # the barycenter minimises the Frechet functional: perturbing it cannot help
    E = rng.normal(size=(d, d))
    P = res.H_bar + 1e-3 * (E + E.T) * np.linalg.eigvalsh(res.H_bar).min()
    assert frechet_variance(Hs, P) >= res.frechet_variance - 1e-12


def test_barycenter_iteration_cap():
    rng = np.random.default_rng(0)
    with pytest.raises(ConvergenceError):
        barycenter([random_pd(rng, 3) for _ in range(4)], tol=0.0, max_iter=2)


def test_barycenter_empty():
    with pytest.raises(DataError):
        barycenter([])


def test_effective_bandwidths():
    np.testing.assert_allclose(effective_bandwidths(np.eye(3)), np.ones(3))
    np.testing.assert_allclose(effective_bandwidths(np.diag([4.0, 1.0])), [2.0, 1.0])
    np.testing.assert_allclose(effective_bandwidths(np.diag([4.0, 1.0]), 2.0), [4.0, 2.0])
    with pytest.raises(ValueError):
        effective_bandwidths(np.eye(2), 0.0)


def test_explore_shapes(mu2_model):
    X = mu2_model.smoothing.features[:15]
    ex = explore(mu2_model, (1.0, 2.0), points=X)
    assert ex.effective.shape == (15, 5)
    assert set(ex.slopes) == {1.0, 2.0}
    assert ex.slopes[2.0].shape == (15, 5)
    assert ex.barycenter.residual <= 1e-9
    assert ex.barycenter.frechet_variance >= 0


def test_gamma_identical_losses():
    r = np.random.default_rng(0).exponential(size=50)
    est = gamma_from_losses(r, r)
    assert est.gamma_hat == 0.0
    assert est.interval[0] < 0 < est.interval[1]


def test_gamma_hand_values():
    est = gamma_from_losses([1.0, 3.0], [2.0, 6.0], alpha=0.05)
    assert est.gamma_hat == pytest.approx(4.0 - 2.0)
    assert est.tau_hat == pytest.approx(np.sqrt((1 + 1) / 2 + (4 + 4) / 2))
    assert est.m == 2
    half = 1.959964 * est.tau_hat / np.sqrt(2)
    assert est.interval == pytest.approx((2.0 - half, 2.0 + half), abs=1e-5)


def test_gamma_constant_predictors():
    X = np.zeros((20, 1))
    y = np.random.default_rng(1).normal(size=20)
    block = Dataset(X, y)
    const = lambda Z: np.full(Z.shape[0], 0.3)  # noqa: E731
    assert gamma_from_predictors(const, const, block, block).gamma_hat == 0.0


def test_gamma_compare_runs(mu2_data):
    cfg = ForestConfig(num_trees=20, seed=1)
    est = gamma_compare(mu2_data, cfg, seed=3)
    assert est.m == 100
    assert est.interval[0] <= est.gamma_hat <= est.interval[1]
    perm = gamma_compare(mu2_data, cfg, seed=3, permute=2)
    assert perm.permutations == 2
    assert "smoother_guide" in perm.to_dict()


def test_gamma_compare_too_small():
    with pytest.raises(DataError):
        gamma_compare(Dataset(np.ones((10, 1)), np.ones(10)))
