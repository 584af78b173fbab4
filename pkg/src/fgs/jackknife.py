"""Generalized-jackknife bias correction and debiased confidence intervals.

Predictions over a bandwidth grid are regressed on (1, h^2, ..., h^t); the
fitted intercept is the debiased estimate and the other coefficients give the
bias estimate B(x, h).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DataError, NumericalError, SingularDesignError
from .smoother import FgsModel, _as_point, local_rows, z_value


def default_jackknife_grid() -> np.ndarray:
    """20 equally spaced values on [0.1, 10] plus h = 1."""
    return np.union1d(np.linspace(0.1, 10.0, 20), [1.0])


@dataclass(frozen=True)
class JackknifeConfig:
    h_grid: np.ndarray = field(default_factory=default_jackknife_grid)
    t: int = 2
    alpha: float = 0.05

    def __post_init__(self):
        grid = np.asarray(self.h_grid, dtype=float).reshape(-1)
        if grid.size == 0 or np.any(~np.isfinite(grid)) or np.any(grid <= 0):
            raise DataError("bandwidth grid must be finite and strictly positive")
        grid = np.sort(grid)
        if np.any(np.diff(grid) == 0):
            raise DataError("bandwidth grid has duplicate entries")
        if self.t < 2:
            raise DataError(f"polynomial order t must be >= 2, got {self.t}")
        if grid.size <= self.t + 1:
            raise DataError(f"need more than t+1={self.t + 1} bandwidths, got {grid.size}")
        if not 0 < self.alpha < 1:
            raise DataError(f"alpha must lie in (0, 1), got {self.alpha}")
        object.__setattr__(self, "h_grid", grid)

    def to_dict(self) -> dict:
        return {"h_grid": self.h_grid.tolist(), "t": self.t, "alpha": self.alpha}


def design_matrix(h_grid, t: int = 2) -> np.ndarray:
    """Rows (1, h^2, h^3, ..., h^t) for each grid value."""
    h = np.asarray(h_grid, dtype=float).reshape(-1)
    if t < 2:
        raise DataError(f"t must be >= 2, got {t}")
    if h.size <= t + 1:
        raise DataError(f"need b > t+1 bandwidths (b={h.size}, t={t})")
    if np.unique(h).size != h.size:
        raise DataError("duplicate bandwidths make the jackknife design rank deficient")
    return np.column_stack([np.ones_like(h)] + [h**p for p in range(2, t + 1)])


def coefficient_operator(h_grid, t: int = 2) -> np.ndarray:
    """(H'H)^{-1} H' via QR of the design matrix."""
    Hm = design_matrix(h_grid, t)
    Q, R = np.linalg.qr(Hm)
    diag = np.abs(np.diag(R))
    if diag.min() <= 1e-12 * diag.max():
        raise NumericalError("jackknife design matrix is rank deficient")
    return solve_triangular(R, Q.T)


def fit_polynomial_bias(m_hat, h_grid, t: int = 2) -> np.ndarray:
    """Least-squares coefficients (intercept, c_2, ..., c_t) for predictions over the grid."""
    return coefficient_operator(h_grid, t) @ np.asarray(m_hat, dtype=float)


def bias_vector(h: float, t: int) -> np.ndarray:
    return np.array([0.0] + [h**p for p in range(2, t + 1)])


@dataclass(frozen=True)
class JackknifeResult:
    x: np.ndarray
    h_grid: np.ndarray
    t: int
    kappa_hat: np.ndarray
    mu_dagger: float
    ell_tilde: np.ndarray
    s2: float
    interval: tuple[float, float]
    m_hat: np.ndarray
    alpha: float

    @property
    def s(self) -> float:
        return float(np.sqrt(self.s2))

    def bias_at(self, h: float) -> float:
        return float(bias_vector(h, self.t) @ self.kappa_hat)

    def to_dict(self) -> dict:
        return {
            "x": self.x.tolist(),
            "mu_dagger": self.mu_dagger,
            "s": self.s,
            "lo": self.interval[0],
            "hi": self.interval[1],
            "kappa_hat": self.kappa_hat.tolist(),
            "m_hat": self.m_hat.tolist(),
            "h_grid": self.h_grid.tolist(),
            "t": self.t,
            "alpha": self.alpha,
        }


def stack_smoother_rows(model: FgsModel, x, h_grid) -> np.ndarray:
    """Matrix L whose j-th row is ell(x; h_j H_x) over the smoothing rows."""
    x = _as_point(x, model.d)
    H = model.bandwidth(x)
    L = np.empty((len(h_grid), model.smoothing.n))
    for j, h in enumerate(h_grid):
        try:
            L[j] = local_rows(model, x, h, H).rows[0]
        except SingularDesignError as exc:
            raise SingularDesignError(f"smoother row for h={h:g} failed: {exc}") from exc
    return L


def _check_support(model: FgsModel, x):
    X = model.smoothing.features
    if np.any(x < X.min(axis=0)) or np.any(x > X.max(axis=0)):
        warnings.warn(f"query point {x} lies outside the range of the smoothing data", stacklevel=3)


def debias(model: FgsModel, x, cfg: JackknifeConfig = JackknifeConfig()) -> JackknifeResult:
    x = _as_point(x, model.d)
    _check_support(model, x)
    L = stack_smoother_rows(model, x, cfg.h_grid)
    P = coefficient_operator(cfg.h_grid, cfg.t)
    Y = model.smoothing.response
    m_hat = L @ Y
    kappa = P @ m_hat
    ell_tilde = P[0] @ L
    mu_dagger = float(ell_tilde @ Y)
    s2 = float(ell_tilde**2 @ model.sigma2) if model.sigma2 is not None else float("nan")
    half = z_value(cfg.alpha) * np.sqrt(s2)
    return JackknifeResult(
        x=x,
        h_grid=cfg.h_grid,
        t=cfg.t,
        kappa_hat=kappa,
        mu_dagger=mu_dagger,
        ell_tilde=ell_tilde,
        s2=s2,
        interval=(mu_dagger - half, mu_dagger + half),
        m_hat=m_hat,
        alpha=cfg.alpha,
    )


def confidence_interval(model: FgsModel, x, cfg: JackknifeConfig = JackknifeConfig()) -> tuple[float, float]:
    return debias(model, x, cfg).interval
