"""Structural summaries of the smoother family.

Bandwidth matrices are compared in the Bures-Wasserstein geometry with each
H_x plugged into the covariance slot of a centred Gaussian.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .bandwidth import matrix_sqrt
from .dataset import Dataset, split
from .errors import ConvergenceError, DataError, NumericalError, SingularDesignError
from .forest import ForestConfig, train_forest
from .jackknife import JackknifeConfig, debias
from .smoother import FgsModel, predict_many, z_value


def _pd(H, name="matrix") -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.ndim == 0:
        H = H.reshape(1, 1)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise DataError(f"{name} must be square")
    if np.abs(H - H.T).max() > 1e-10 * max(1.0, np.abs(H).max()):
        raise NumericalError(f"{name} is not symmetric")
    H = 0.5 * (H + H.T)
    if np.linalg.eigvalsh(H)[0] <= 0:
        raise NumericalError(f"{name} is not positive definite")
    return H


def _sqrtm(S) -> np.ndarray:
    return matrix_sqrt(S).H


def _trace_sqrt(S) -> float:
    lam = np.linalg.eigvalsh(0.5 * (S + S.T))
    return float(np.sum(np.sqrt(np.clip(lam, 0.0, None))))


def wasserstein2_gaussian(H1, H2) -> float:
    """Squared 2-Wasserstein distance between N(0, H1) and N(0, H2)."""
    H1, H2 = _pd(H1, "H1"), _pd(H2, "H2")
    R1 = _sqrtm(H1)
    w2 = np.trace(H1) + np.trace(H2) - 2 * _trace_sqrt(R1 @ H2 @ R1)
    return float(max(w2, 0.0))


def frechet_variance(H_list, H_bar) -> float:
    H_bar = _pd(H_bar, "H_bar")
    return float(np.mean([wasserstein2_gaussian(H_bar, H) for H in H_list]))


@dataclass(frozen=True)
class BarycenterSummary:
    H_bar: np.ndarray
    frechet_variance: float
    iterations: int
    residual: float

    def to_dict(self) -> dict:
        return {
            "H_bar": self.H_bar.tolist(),
            "frechet_variance": self.frechet_variance,
            "iterations": self.iterations,
            "residual": self.residual,
        }


def _fixed_point_map(H_bar, Hs):
    R = _sqrtm(H_bar)
    M = np.mean([_sqrtm(R @ H @ R) for H in Hs], axis=0)
    return R, M


def barycenter(H_list, tol: float = 1e-9, max_iter: int = 500) -> BarycenterSummary:
    """Bures-Wasserstein barycenter of centred Gaussians with covariances ``H_list``.

    Iterates H <- H^{-1/2} (mean_i (H^{1/2} H_i H^{1/2})^{1/2})^2 H^{-1/2} from the
    Euclidean mean until the fixed-point defect
    ||H - mean_i (H^{1/2} H_i H^{1/2})^{1/2}||_F drops to ``tol``.
    """
    Hs = [_pd(H, f"H_list[{i}]") for i, H in enumerate(H_list)]
    if not Hs:
        raise DataError("barycenter of an empty list")
    H_bar = np.mean(Hs, axis=0)
    residual = np.inf
    for it in range(max_iter + 1):
        R, M = _fixed_point_map(H_bar, Hs)
        residual = float(np.linalg.norm(H_bar - M))
        if residual <= tol:
            return BarycenterSummary(H_bar, frechet_variance(Hs, H_bar), it, residual)
        if it == max_iter:
            break
        Rinv = np.linalg.inv(R)
        H_bar = Rinv @ M @ M @ Rinv
        H_bar = 0.5 * (H_bar + H_bar.T)
    raise ConvergenceError(f"barycenter did not converge in {max_iter} iterations (residual {residual:.3g})")


def effective_bandwidths(H, c: float = 1.0) -> np.ndarray:
    """Half-axis of {u : u' H^{-1} u <= c^2} along each coordinate: c / sqrt((H^{-1})_jj)."""
    if c <= 0:
        raise ValueError("c must be positive")
    H = _pd(H, "H")
    try:
        Hinv = np.linalg.inv(H)
    except np.linalg.LinAlgError:
        raise SingularDesignError("bandwidth matrix is singular") from None
    return c / np.sqrt(np.diag(Hinv))


@dataclass(frozen=True)
class Exploration:
    """Per-point bandwidth geometry and local slopes over the smoothing rows."""

    points: np.ndarray
    bandwidths: list[np.ndarray]
    barycenter: BarycenterSummary
    effective: np.ndarray  # (n, d)
    slopes: dict[float, np.ndarray] = field(default_factory=dict)  # h -> (n, d), NaN for failed fits
    slope_se: dict[float, np.ndarray] = field(default_factory=dict)


def explore(model: FgsModel, h_values=(0.1, 0.5, 1.0, 2.0), c: float = 1.0, points=None, tol: float = 1e-9) -> Exploration:
    """Barycenter, Frechet variance, effective bandwidths and slopes at the smoothing points."""
    X = model.smoothing.features if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    Hs = [b.H for b in model.bandwidths(X)]
    bary = barycenter(Hs, tol=tol)
    eff = np.array([effective_bandwidths(H, c) for H in Hs])
    slopes, ses = {}, {}
    for h in h_values:
        fits = predict_many(model, X, h, skip_failures=True)
        slopes[float(h)] = np.array([f.beta if f is not None else np.full(model.d, np.nan) for f in fits])
        ses[float(h)] = np.array([f.se_beta if f is not None else np.full(model.d, np.nan) for f in fits])
    return Exploration(X, Hs, bary, eff, slopes, ses)


@dataclass(frozen=True)
class GammaEstimate:
    """Excess squared error of the smoother over the forest, with a normal CI."""

    gamma_hat: float
    tau_hat: float
    interval: tuple[float, float]
    m: int
    alpha: float = 0.05
    excluded: int = 0
    permutations: int = 0
    notes: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "tau_hat": self.tau_hat,
            "lo": self.interval[0],
            "hi": self.interval[1],
            "half_width": (self.interval[1] - self.interval[0]) / 2,
            "m": self.m,
            "alpha": self.alpha,
            "excluded": self.excluded,
            "permutations": self.permutations,
            **self.notes,
        }


def gamma_from_losses(forest_losses, smoother_losses, alpha: float = 0.05) -> GammaEstimate:
    """Gamma = mean smoother loss - mean forest loss on disjoint evaluation blocks.

    Positive values mean the smoother has the larger squared error.
    """
    r = np.asarray(forest_losses, dtype=float)
    s = np.asarray(smoother_losses, dtype=float)
    if r.size < 2 or s.size < 2:
        raise DataError("need at least two evaluation points per block")
    m = min(r.size, s.size)
    gamma = float(s.mean() - r.mean())
    tau2 = float(np.sum((r - r.mean()) ** 2) / r.size + np.sum((s - s.mean()) ** 2) / s.size)
    tau = float(np.sqrt(tau2))
    half = z_value(alpha) * tau / np.sqrt(m)
    return GammaEstimate(gamma, tau, (gamma - half, gamma + half), m, alpha)


def gamma_from_predictors(forest_fn, smoother_fn, block3: Dataset, block4: Dataset, alpha: float = 0.05) -> GammaEstimate:
    """Gamma estimate for two fixed predictors (callables on a feature matrix)."""
    r = (block3.response - np.asarray(forest_fn(block3.features), dtype=float)) ** 2
    s = (block4.response - np.asarray(smoother_fn(block4.features), dtype=float)) ** 2
    return gamma_from_losses(r, s, alpha)


def _smoother_predictions(model: FgsModel, X, h: float, jk_cfg: JackknifeConfig | None):
    out = np.full(X.shape[0], np.nan)
    for i, x in enumerate(X):
        try:
            if jk_cfg is None:
                out[i] = predict_many(model, x[None, :], h)[0].beta0
            else:
                out[i] = debias(model, x, jk_cfg).mu_dagger
        except SingularDesignError:
            pass
    return out


def _gamma_once(blocks: list[Dataset], forest_cfg: ForestConfig, jk_cfg, alpha, h, scale_by_n, kernel_convention):
    d1, d2, d3, d4 = blocks
    forest = train_forest(d1, forest_cfg)
    # the smoother needs its own guide forest and smoothing rows: halve D2
    g, s = split(d2, 2, forest_cfg.seed + 7)
    guide = train_forest(g, replace(forest_cfg, seed=forest_cfg.seed + 1))
    fgs = FgsModel(guide, s, None, scale_by_n=scale_by_n, kernel_convention=kernel_convention)
    r = (d3.response - forest.predict(d3.features)) ** 2
    pred = _smoother_predictions(fgs, d4.features, h, jk_cfg)
    ok = np.isfinite(pred)
    s_loss = (d4.response[ok] - pred[ok]) ** 2
    est = gamma_from_losses(r, s_loss, alpha)
    return est, int((~ok).sum())


def gamma_compare(
    data: Dataset,
    forest_cfg: ForestConfig = ForestConfig(),
    jk_cfg: JackknifeConfig | None = None,
    alpha: float = 0.05,
    seed: int = 0,
    permute: int = 0,
    h: float = 1.0,
    scale_by_n: bool = True,
    kernel_convention: str = "covariance",
) -> GammaEstimate:
    """Four-way split estimate of the smoother's excess squared error over the forest.

    Blocks play the roles (forest fit, smoother fit, forest evaluation, smoother
    evaluation). With ``permute > 0`` the estimate and tau^2 are averaged over
    that many random role assignments of the blocks. ``jk_cfg`` switches the
    smoother prediction from mu_hat_h to the debiased estimate.
    """
    if data.n < 4 * 2 * forest_cfg.min_leaf_size:
        raise DataError(f"need at least {8 * forest_cfg.min_leaf_size} rows for a four-way split")
    blocks = split(data, 4, seed)
    cfg = replace(forest_cfg, seed=seed if forest_cfg.seed == 0 else forest_cfg.seed)
    if permute <= 0:
        est, excluded = _gamma_once(blocks, cfg, jk_cfg, alpha, h, scale_by_n, kernel_convention)
        return replace(est, excluded=excluded, notes={"smoother_guide": "D2 halved: guide forest / smoothing rows"})
    rng = np.random.default_rng([seed, 4])
    gammas, tau2s, ms, excluded = [], [], [], 0
    for _ in range(permute):
        order = rng.permutation(4)
        est, exc = _gamma_once([blocks[k] for k in order], cfg, jk_cfg, alpha, h, scale_by_n, kernel_convention)
        gammas.append(est.gamma_hat)
        tau2s.append(est.tau_hat**2)
        ms.append(est.m)
        excluded += exc
    gamma = float(np.mean(gammas))
    tau = float(np.sqrt(np.mean(tau2s)))
    m = int(min(ms))
    half = z_value(alpha) * tau / np.sqrt(m)
    return GammaEstimate(
        gamma, tau, (gamma - half, gamma + half), m, alpha, excluded, permute,
        {"smoother_guide": "D2 halved: guide forest / smoothing rows"},
    )
