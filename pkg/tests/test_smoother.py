import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fgs.bandwidth import BandwidthMatrix, KernelFamily, KernelSpec
from fgs.dataset import Dataset
from fgs.errors import DataError, SingularDesignError
from fgs.forest import ForestConfig
from fgs.simulate import SimDesign, fgs_fit_error
from fgs.smoother import (
    FgsModel,
    default_gradient_grid,
    fit_fgs,
    gradient_path,
    local_constant,
    local_linear_rows,
    predict,
    predict_many,
    smoother_weights,
    variability_interval,
    z_value,
)

SLOPES = np.array([1.5, -0.5, 3.0])


def random_scale_matrix(rng, d):
    A = rng.normal(size=(d, d))
    return BandwidthMatrix.from_matrix(0.05 * (A @ A.T) + 0.05 * np.eye(d))


@given(st.integers(1, 5), st.integers(0, 10_000))
def test_moment_conditions(d, seed):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(60, d))
    x = rng.uniform(0.2, 0.8, size=d)
    lr = local_linear_rows(X, x, random_scale_matrix(rng, d))
    L = lr.rows
    D = X - x
    np.testing.assert_allclose(L[0].sum(), 1.0, atol=1e-8)
    np.testing.assert_allclose(L[0] @ D, 0.0, atol=1e-8)
    np.testing.assert_allclose(L[1:].sum(axis=1), 0.0, atol=1e-8)
    np.testing.assert_allclose(L[1:] @ D, np.eye(d), atol=1e-8)


def test_interpolates_two_points_in_1d():
    # a compact kernel that only sees the two points nearest to x
    X = np.array([[0.0], [0.4], [0.6], [1.0]])
    y = np.array([9.0, 1.0, 2.0, -7.0])
    G = BandwidthMatrix.from_matrix(np.array([[0.2]]))
    lr = local_linear_rows(X, np.array([0.45]), G, KernelSpec(KernelFamily.EPANECHNIKOV_PRODUCT))
    assert lr.rows[0] @ y == pytest.approx(1.0 + (2.0 - 1.0) / 0.2 * 0.05)
    assert lr.rows[1] @ y == pytest.approx(5.0)


def test_too_few_points_is_diagnosable():
    X = np.array([[0.0], [0.5], [1.0]])
    G = BandwidthMatrix.from_matrix(np.array([[0.1]]))
    with pytest.raises(SingularDesignError, match="larger h"):
        local_linear_rows(X, np.array([0.5]), G, KernelSpec(KernelFamily.EPANECHNIKOV_PRODUCT))


def test_collinear_points_are_singular():
    X = np.array([[0.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.3, 0.3]])
    G = BandwidthMatrix.from_matrix(np.eye(2))
    with pytest.raises(SingularDesignError, match="singular"):
        local_linear_rows(X, np.array([0.4, 0.4]), G)


def test_affine_exactness(affine_model):
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.uniform(0.1, 0.9, size=3)
        h = float(rng.uniform(0.3, 5))
        fit = predict(affine_model, x, h)
        assert fit.beta0 == pytest.approx(2.0 + SLOPES @ x, abs=1e-8)
        np.testing.assert_allclose(fit.beta, SLOPES, atol=1e-8)


def test_constant_response(affine_model):
    m = FgsModel(affine_model.forest, affine_model.smoothing.with_response(np.full(affine_model.smoothing.n, 4.0)))
    fit = predict(m, np.full(3, 0.5), 1.0)
    assert fit.beta0 == pytest.approx(4.0, abs=1e-10)
    np.testing.assert_allclose(fit.beta, 0.0, atol=1e-9)


def test_gradient_path_constant_on_affine(affine_model):
    path = gradient_path(affine_model, np.array([0.4, 0.5, 0.6]), np.array([0.5, 1.0, 2.0, 8.0]))
    assert not path.failed.any()
    np.testing.assert_allclose(path.beta, np.tile(SLOPES, (4, 1)), atol=1e-8)


def test_z_value():
    assert z_value(0.05) == pytest.approx(1.959964, abs=1e-6)
    with pytest.raises(ValueError):
        z_value(1.5)


def test_zero_noise_gives_zero_width(affine_model):
    m = FgsModel(affine_model.forest, affine_model.smoothing, sigma2=np.zeros(affine_model.smoothing.n))
    lo, hi = variability_interval(m, np.full(3, 0.5), 1.0)
    assert hi - lo == 0.0


def test_standard_errors_follow_weights(mu2_model):
    x = np.full(5, 0.5)
    fit = predict(mu2_model, x, 2.0)
    assert fit.se_beta0 == pytest.approx(np.sqrt(fit.ell**2 @ mu2_model.sigma2))
    np.testing.assert_allclose(smoother_weights(mu2_model, x, 2.0), fit.ell)
    assert smoother_weights(mu2_model, x, 2.0, 1) @ mu2_model.smoothing.response == pytest.approx(fit.beta[0])
    with pytest.raises(ValueError):
        smoother_weights(mu2_model, x, 2.0, 6)


def test_no_variance_model_gives_nan_se(affine_model):
    m = FgsModel(affine_model.forest, affine_model.smoothing)
    assert np.isnan(predict(m, np.full(3, 0.5)).se_beta0)


def test_sin4x_fit_quality():
    err = fgs_fit_error(SimDesign("sin4x", 1000, 0.1, 0), np.linspace(0.05, 0.95, 91), 1.0, ForestConfig(num_trees=200))
    assert err < 0.15


def test_query_checks(mu2_model):
    with pytest.raises(DataError):
        predict(mu2_model, np.zeros(4))
    with pytest.raises(DataError):
        predict(mu2_model, np.full(5, np.nan))


def test_dimension_mismatch_rejected(mu2_model, affine_data):
    with pytest.raises(DataError):
        FgsModel(mu2_model.forest, affine_data)


def test_predict_many_skips_failures():
    X = np.array([[0.0], [0.1], [0.2], [0.9]])
    data = Dataset(X, np.arange(4.0))
    model = fit_fgs(
        Dataset(np.linspace(0, 1, 40)[:, None], np.linspace(0, 1, 40)),
        ForestConfig(num_trees=10, seed=0),
        0,
        with_variance=False,
        kernel=KernelSpec(KernelFamily.EPANECHNIKOV_PRODUCT),
    )
    model = FgsModel(model.forest, data, kernel=model.kernel)
    fits = predict_many(model, np.array([[0.55], [0.15]]), 0.01, skip_failures=True)
    assert fits[0] is None
    with pytest.raises(SingularDesignError):
        predict_many(model, np.array([[0.55]]), 0.01)
    path = gradient_path(model, np.array([0.55]), np.array([0.01, 1000.0]))
    assert path.failed.tolist() == [True, False]
    assert np.isnan(path.beta[0]).all()


def test_local_constant_debug(mu2_model):
    v = local_constant(mu2_model, np.full(5, 0.5), 2.0)
    y = mu2_model.smoothing.response
    assert y.min() <= v <= y.max()


def test_default_gradient_grid():
    g = default_gradient_grid()
    assert g[0] == pytest.approx(0.1) and g[-1] == pytest.approx(10.0)
    assert 1.0 in g and len(g) == 21


def test_records_layout(mu2_model):
    path = gradient_path(mu2_model, np.full(5, 0.5), np.array([1.0, 2.0]))
    recs = path.records(mu2_model.smoothing.feature_names)
    assert len(recs) == 10
    assert {"h", "coordinate", "name", "beta", "se", "lower", "upper"} <= set(recs[0])
    assert path.excludes_zero().shape == (2, 5)


def test_fit_from_fgs_is_deterministic(mu2_data):
    a = fit_fgs(mu2_data, ForestConfig(num_trees=10, seed=1), 3)
    b = fit_fgs(mu2_data, ForestConfig(num_trees=10, seed=1), 3)
    x = np.full(5, 0.4)
    assert predict(a, x).beta0 == predict(b, x).beta0
