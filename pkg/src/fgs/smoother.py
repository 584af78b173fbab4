"""Forest-guided local linear smoother.

The forest (trained on one half of the data) supplies the bandwidth matrix
H_x; the local linear fit with kernel K(.; h H_x) is computed on the other
half.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.linalg import solve_triangular

from .bandwidth import DEFAULT_EPS_REL, BandwidthMatrix, KernelSpec, bandwidth_from_weights, kernel_matrix, log_kernel
from .dataset import Dataset, split
from .errors import DataError, SingularDesignError
from .forest import DEFAULT_INFLATION, ForestConfig, ForestModel, VarianceModel, train_forest, train_variance_model

COND_LIMIT = 1e12  # on the (equilibrated) Gram matrix
RANK_LIMIT = 1e16  # beyond this the local design is treated as singular
RIDGE_REL = 1e-10
UNDERFLOW_REL = 1e-300


@dataclass(frozen=True)
class FgsModel:
    forest: ForestModel
    smoothing: Dataset
    variance: VarianceModel | None = None
    kernel: KernelSpec = KernelSpec()
    eps_rel: float = DEFAULT_EPS_REL
    default_h: float = 1.0
    scale_by_n: bool = True
    kernel_convention: str = "covariance"
    sigma2: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.forest.data.d != self.smoothing.d:
            raise DataError("forest and smoothing data have different dimensions")
        if self.sigma2 is None and self.variance is not None:
            object.__setattr__(self, "sigma2", self.variance.sigma2(self.smoothing.features))

    @property
    def d(self) -> int:
        return self.smoothing.d

    def bandwidth(self, x) -> BandwidthMatrix:
        x = _as_point(x, self.d)
        return bandwidth_from_weights(self.forest.weights(x)[0], self.forest.data, x, self.eps_rel, self.scale_by_n)

    def kernel_at(self, H: BandwidthMatrix, h: float) -> BandwidthMatrix:
        return kernel_matrix(H, h, self.kernel_convention)

    def bandwidths(self, X) -> list[BandwidthMatrix]:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        W = self.forest.weights(X)
        return [bandwidth_from_weights(w, self.forest.data, x, self.eps_rel, self.scale_by_n) for w, x in zip(W, X)]


def fit_fgs(
    data: Dataset,
    forest_config: ForestConfig = ForestConfig(),
    split_seed: int = 0,
    c: float = DEFAULT_INFLATION,
    kernel: KernelSpec = KernelSpec(),
    eps_rel: float = DEFAULT_EPS_REL,
    with_variance: bool = True,
    n_jobs: int = 1,
    scale_by_n: bool = True,
    kernel_convention: str = "covariance",
    residuals: str = "oob",
) -> FgsModel:
    """Split in two; forest (and variance forest) on the first half, smoother on the second."""
    d1, d2 = split(data, 2, split_seed)
    forest = train_forest(d1, forest_config, n_jobs=n_jobs)
    variance = train_variance_model(forest, c=c, n_jobs=n_jobs, residuals=residuals) if with_variance else None
    return FgsModel(
        forest, d2, variance, kernel, eps_rel, scale_by_n=scale_by_n, kernel_convention=kernel_convention
    )


@dataclass(frozen=True)
class LocalRows:
    """The (d+1) x n operator (X'WX)^{-1} X'W at one (x, h)."""

    rows: np.ndarray
    effective_count: float
    regularized: bool


@dataclass(frozen=True)
class LocalFit:
    x: np.ndarray
    h: float
    beta0: float
    beta: np.ndarray
    ell: np.ndarray
    se_beta0: float
    se_beta: np.ndarray
    effective_count: float
    regularized: bool = False

    @property
    def coefficients(self) -> np.ndarray:
        return np.concatenate([[self.beta0], self.beta])

    def to_dict(self, names=None) -> dict:
        names = list(names) if names is not None else [f"x{j + 1}" for j in range(self.beta.shape[0])]
        return {
            "x": self.x.tolist(),
            "h": self.h,
            "mu_hat": self.beta0,
            "se_mu_hat": self.se_beta0,
            "slopes": {n: {"beta": float(b), "se": float(s)} for n, b, s in zip(names, self.beta, self.se_beta)},
            "effective_count": self.effective_count,
            "regularized": self.regularized,
        }


def _as_point(x, d) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != d:
        raise DataError(f"query dimension {x.shape[0]} != model dimension {d}")
    if not np.all(np.isfinite(x)):
        raise DataError("query point must be finite")
    return x


def local_linear_rows(X, x, G: BandwidthMatrix, kernel: KernelSpec = KernelSpec(), h: float | None = None) -> LocalRows:
    """Weighted least-squares operator for the local linear fit at ``x``.

    ``G`` is the kernel scale matrix (already scaled to the resolution ``h``,
    which is only used in messages). Columns are equilibrated before the QR
    solve; an ill-conditioned (but not singular) design gets a small ridge and
    is flagged.
    """
    h = float("nan") if h is None else h
    n, d = X.shape
    D = X - x
    logk = log_kernel(D, G, kernel)
    top = logk.max()
    if not np.isfinite(top):
        raise SingularDesignError(f"no data inside the kernel support at h={h:g}; try a larger h")
    k = np.exp(logk - top)
    k[k < UNDERFLOW_REL] = 0.0
    if np.count_nonzero(k) < d + 1:
        raise SingularDesignError(
            f"only {np.count_nonzero(k)} points carry kernel weight at h={h:g} (need {d + 1}); try a larger h"
        )
    A = np.hstack([np.ones((n, 1)), D])
    scale = np.sqrt(k @ A**2)
    if np.any(scale == 0):
        raise SingularDesignError(f"degenerate local design at h={h:g}; try a larger h")
    Ae = A / scale
    sw = np.sqrt(k)
    Q, R = np.linalg.qr(Ae * sw[:, None])
    sv = np.linalg.svd(R, compute_uv=False)
    cond = (sv[0] / sv[-1]) ** 2 if sv[-1] > 0 else np.inf
    if not cond <= RANK_LIMIT:
        raise SingularDesignError(
            f"local design is singular at h={h:g} (fewer than {d + 1} effectively weighted points in general position); try a larger h"
        )
    regularized = cond > COND_LIMIT
    if regularized:
        gram = (Ae * k[:, None]).T @ Ae
        gram += RIDGE_REL * np.trace(gram) / (d + 1) * np.eye(d + 1)
        rows_e = np.linalg.solve(gram, (Ae * k[:, None]).T)
    else:
        rows_e = solve_triangular(R, Q.T) * sw
    ess = k.sum() ** 2 / (k @ k)
    return LocalRows(rows_e / scale[:, None], float(ess), bool(regularized))


def local_rows(model: FgsModel, x, h: float, H: BandwidthMatrix | None = None) -> LocalRows:
    """Local linear operator at (x, h); pass ``H`` to reuse a bandwidth matrix across h."""
    x = _as_point(x, model.d)
    H = model.bandwidth(x) if H is None else H
    return local_linear_rows(model.smoothing.features, x, model.kernel_at(H, h), model.kernel, h)


def smoother_weights(model: FgsModel, x, h: float = 1.0, coefficient_index: int = 0) -> np.ndarray:
    """Row ``coefficient_index`` of (X'WX)^{-1}X'W: 0 gives ell, j gives slope j."""
    if not 0 <= coefficient_index <= model.d:
        raise ValueError(f"coefficient_index must lie in [0, {model.d}]")
    return local_rows(model, x, h).rows[coefficient_index]


def _se(rows: np.ndarray, sigma2) -> np.ndarray:
    if sigma2 is None:
        return np.full(rows.shape[0], np.nan)
    return np.sqrt((rows**2) @ sigma2)


def fit_from_rows(model: FgsModel, x, h: float, lr: LocalRows) -> LocalFit:
    coef = lr.rows @ model.smoothing.response
    se = _se(lr.rows, model.sigma2)
    return LocalFit(
        x=np.asarray(x, dtype=float),
        h=float(h),
        beta0=float(coef[0]),
        beta=coef[1:],
        ell=lr.rows[0],
        se_beta0=float(se[0]),
        se_beta=se[1:],
        effective_count=lr.effective_count,
        regularized=lr.regularized,
    )


def predict(model: FgsModel, x, h: float | None = None) -> LocalFit:
    h = model.default_h if h is None else h
    x = _as_point(x, model.d)
    return fit_from_rows(model, x, h, local_rows(model, x, h))


def predict_many(model: FgsModel, X, h: float | None = None, skip_failures: bool = False) -> list[LocalFit | None]:
    """Local fits at each row of ``X``; failed points become ``None`` when skipping."""
    h = model.default_h if h is None else h
    X = np.atleast_2d(np.asarray(X, dtype=float))
    fits = []
    for x, H in zip(X, model.bandwidths(X)):
        try:
            fits.append(fit_from_rows(model, x, h, local_rows(model, x, h, H)))
        except SingularDesignError:
            if not skip_failures:
                raise
            fits.append(None)
    return fits


def local_constant(model: FgsModel, x, h: float | None = None) -> float:
    """Nadaraya-Watson estimate with the same kernel (debugging aid, no inference)."""
    h = model.default_h if h is None else h
    x = _as_point(x, model.d)
    logk = log_kernel(model.smoothing.features - x, model.kernel_at(model.bandwidth(x), h), model.kernel)
    k = np.exp(logk - logk.max())
    return float(k @ model.smoothing.response / k.sum())


def z_value(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return float(stats.norm.ppf(1 - alpha / 2))


def variability_interval(model: FgsModel, x, h: float | None = None, alpha: float = 0.05) -> tuple[float, float]:
    fit = predict(model, x, h)
    half = z_value(alpha) * fit.se_beta0
    return fit.beta0 - half, fit.beta0 + half


def default_gradient_grid() -> np.ndarray:
    return np.union1d(np.geomspace(0.1, 10.0, 20), [1.0])


@dataclass(frozen=True)
class GradientPath:
    """Slopes, standard errors and bands over an h grid; failed h are NaN rows."""

    x: np.ndarray
    h: np.ndarray
    beta: np.ndarray  # (len(h), d)
    se: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    failed: np.ndarray
    regularized: np.ndarray
    alpha: float

    def excludes_zero(self) -> np.ndarray:
        return (self.lower > 0) | (self.upper < 0)

    def records(self, names=None) -> list[dict]:
        d = self.beta.shape[1]
        names = list(names) if names is not None else [f"x{j + 1}" for j in range(d)]
        out = []
        for i, h in enumerate(self.h):
            for j in range(d):
                out.append({
                    "h": float(h),
                    "coordinate": j + 1,
                    "name": names[j],
                    "beta": float(self.beta[i, j]),
                    "se": float(self.se[i, j]),
                    "lower": float(self.lower[i, j]),
                    "upper": float(self.upper[i, j]),
                    "failed": bool(self.failed[i]),
                    "regularized": bool(self.regularized[i]),
                })
        return out


def gradient_path(model: FgsModel, x, h_grid=None, alpha: float = 0.05) -> GradientPath:
    h_grid = default_gradient_grid() if h_grid is None else np.asarray(h_grid, dtype=float)
    if np.any(h_grid <= 0) or np.any(np.diff(h_grid) < 0):
        raise ValueError("h grid must be positive and sorted")
    x = _as_point(x, model.d)
    H = model.bandwidth(x)
    z = z_value(alpha)
    nh, d = h_grid.shape[0], model.d
    beta = np.full((nh, d), np.nan)
    se = np.full((nh, d), np.nan)
    failed = np.zeros(nh, dtype=bool)
    regularized = np.zeros(nh, dtype=bool)
    for i, h in enumerate(h_grid):
        try:
            fit = fit_from_rows(model, x, h, local_rows(model, x, h, H))
        except SingularDesignError:
            failed[i] = True
            continue
        beta[i], se[i], regularized[i] = fit.beta, fit.se_beta, fit.regularized
    return GradientPath(x, h_grid, beta, se, beta - z * se, beta + z * se, failed, regularized, alpha)
