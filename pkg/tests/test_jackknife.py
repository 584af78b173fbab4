import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fgs.bandwidth import KernelFamily, KernelSpec
from fgs.errors import DataError, SingularDesignError
from fgs.forest import ForestConfig
from fgs.jackknife import (
    JackknifeConfig,
    bias_vector,
    coefficient_operator,
    confidence_interval,
    debias,
    default_jackknife_grid,
    design_matrix,
    fit_polynomial_bias,
    stack_smoother_rows,
)
from fgs.simulate import SimDesign, generate
from fgs.smoother import FgsModel, fit_fgs, predict


def test_design_rows():
    M = design_matrix([1.0, 2.0, 3.0, 4.0], 2)
    np.testing.assert_array_equal(M[:3], [[1, 1], [1, 4], [1, 9]])
    assert design_matrix([1.0, 2.0, 3.0, 4.0, 5.0], 3)[1].tolist() == [1, 4, 8]


@pytest.mark.parametrize("grid, t", [([1.0, 1.0, 2.0, 3.0], 2), ([1.0, 2.0, 3.0], 2), ([1.0, 2.0, 3.0, 4.0], 1)])
def test_design_errors(grid, t):
    with pytest.raises(DataError):
        design_matrix(grid, t)


def test_config_validation():
    with pytest.raises(DataError, match="duplicate"):
        JackknifeConfig(np.array([1.0, 2.0, 2.0, 3.0]))
    with pytest.raises(DataError):
        JackknifeConfig(np.array([0.0, 1.0, 2.0, 3.0]))
    with pytest.raises(DataError):
        JackknifeConfig(alpha=0.0)
    cfg = JackknifeConfig(np.array([3.0, 1.0, 2.0, 4.0]))
    assert cfg.h_grid.tolist() == [1, 2, 3, 4]


def test_default_grid():
    g = default_jackknife_grid()
    assert len(g) == 21 and 1.0 in g
    assert g.min() == pytest.approx(0.1) and g.max() == pytest.approx(10.0)


@given(
    st.floats(-100, 100),
    st.floats(-10, 10),
    st.integers(4, 30),
    st.floats(0.05, 2.0),
    st.floats(1.5, 40.0),
)
def test_polynomial_recovery(a, c, b, lo, span):
    h = np.linspace(lo, lo * span, b)
    kappa = fit_polynomial_bias(a + c * h**2, h, 2)
    assert kappa[0] == pytest.approx(a, abs=1e-10 * max(1.0, abs(c) * h.max() ** 2))
    assert kappa[1] == pytest.approx(c, abs=1e-10 * max(1.0, abs(a)))


def test_constant_has_no_bias():
    h = np.linspace(0.1, 10, 20)
    kappa = fit_polynomial_bias(np.full(20, 3.25), h, 3)
    assert kappa[0] == pytest.approx(3.25, abs=1e-12)
    np.testing.assert_allclose(kappa[1:], 0.0, atol=1e-12)


def test_operator_against_lstsq():
    h = np.linspace(1, 30, 20)
    m = np.random.default_rng(0).normal(size=20)
    ref = np.linalg.lstsq(design_matrix(h, 3), m, rcond=None)[0]
    np.testing.assert_allclose(coefficient_operator(h, 3) @ m, ref, rtol=1e-9, atol=1e-12)


def test_bias_vector():
    np.testing.assert_array_equal(bias_vector(2.0, 3), [0, 4, 8])


def test_affine_debias_exact(affine_model):
    x = np.array([0.4, 0.5, 0.6])
    res = debias(affine_model, x, JackknifeConfig(np.linspace(0.5, 5, 10)))
    assert res.mu_dagger == pytest.approx(2.0 + np.array([1.5, -0.5, 3.0]) @ x, abs=1e-8)
    assert res.bias_at(2.0) == pytest.approx(0.0, abs=1e-8)


def test_debias_identities(mu2_model):
    cfg = JackknifeConfig(np.linspace(1, 30, 20), 2, 0.10)
    x = np.full(5, 0.5)
    res = debias(mu2_model, x, cfg)
    Y = mu2_model.smoothing.response
    assert res.mu_dagger == pytest.approx(res.ell_tilde @ Y)
    assert res.s2 == pytest.approx(res.ell_tilde**2 @ mu2_model.sigma2)
    for j in (0, 7, 19):
        assert res.m_hat[j] == pytest.approx(predict(mu2_model, x, cfg.h_grid[j]).beta0)
    lo, hi = res.interval
    assert (hi - lo) / 2 == pytest.approx(1.6448536 * res.s, rel=1e-6)
    assert res.ell_tilde.sum() == pytest.approx(1.0, abs=1e-8)
    assert confidence_interval(mu2_model, x, cfg) == res.interval
    doc = res.to_dict()
    assert {"mu_dagger", "s", "lo", "hi", "kappa_hat"} <= set(doc)


def test_zero_variance_interval(affine_model):
    m = FgsModel(affine_model.forest, affine_model.smoothing, sigma2=np.zeros(affine_model.smoothing.n))
    res = debias(m, np.full(3, 0.5), JackknifeConfig(np.linspace(0.5, 5, 10)))
    assert res.interval[0] == res.interval[1] == res.mu_dagger


def test_sin4x_grid_smooth():
    model = fit_fgs(generate(SimDesign("sin4x", 1000, 0.1, 0)), ForestConfig(num_trees=100), 0)
    res = debias(model, np.array([0.5]), JackknifeConfig(np.linspace(0.1, 2, 20)))
    assert np.all(np.isfinite(res.m_hat))
    # smooth in h: second differences small relative to the range of m_hat
    assert np.abs(np.diff(res.m_hat, 2)).max() < 0.1


def test_failed_row_names_h():
    data = generate(SimDesign("sin4x", 60, 0.1, 0))
    model = fit_fgs(data, ForestConfig(num_trees=10), 0, kernel=KernelSpec(KernelFamily.EPANECHNIKOV_PRODUCT))
    with pytest.raises(SingularDesignError, match=r"h=1e-06"):
        stack_smoother_rows(model, np.array([0.5]), [1e-6, 1.0])


def test_outside_support_warns(mu2_model):
    cfg = JackknifeConfig(np.linspace(1, 30, 20))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        debias(mu2_model, np.full(5, 0.5), cfg)
    with pytest.warns(UserWarning, match="outside"):
        debias(mu2_model, np.full(5, 1.2), cfg)
