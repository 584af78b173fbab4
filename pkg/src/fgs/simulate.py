"""Synthetic designs and the Monte Carlo coverage harness."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dataset import Dataset
from .errors import DataError, FgsError, NumericalError
from .forest import DEFAULT_INFLATION, ForestConfig
from .jackknife import JackknifeConfig, debias
from .smoother import fit_fgs, predict

log = logging.getLogger(__name__)

DESIGNS = ("sin4x", "step", "doppler", "friedman_mu1", "sigmoid_mu2")
DIMENSION = {"sin4x": 1, "step": 1, "doppler": 1, "friedman_mu1": 5, "sigmoid_mu2": 5}
MAX_FAILURE_RATE = 0.05


@dataclass(frozen=True)
class SimDesign:
    name: str
    n: int = 500
    sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.name not in DESIGNS:
            raise DataError(f"unknown design {self.name!r}; choose from {DESIGNS}")
        if self.n < 1:
            raise DataError("n must be >= 1")
        if self.sigma < 0:
            raise DataError("sigma must be >= 0")

    @property
    def d(self) -> int:
        return DIMENSION[self.name]

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def _doppler(x):
    # the radicand changes sign on (0, 1); use sign(r) * sqrt(|r|)
    r = x * (1 - x) * np.sin(2.1 * np.pi / (x + 0.35))
    return np.sign(r) * np.sqrt(np.abs(r))


def _logistic(z):
    return 1.0 / (1.0 + np.exp(-z))


def true_mean(design: SimDesign | str, x) -> float | np.ndarray:
    name = design.name if isinstance(design, SimDesign) else design
    if name not in DESIGNS:
        raise DataError(f"unknown design {name!r}")
    x = np.asarray(x, dtype=float)
    scalar = x.ndim <= 1 and (DIMENSION[name] > 1 or x.ndim == 0)
    X = x.reshape(-1, DIMENSION[name])
    if np.any(X < 0) or np.any(X > 1):
        raise DataError(f"{name}: x outside [0, 1]^{DIMENSION[name]}")
    if name == "sin4x":
        out = np.sin(4 * X[:, 0])
    elif name == "step":
        out = (X[:, 0] > 0.5) - 0.5
    elif name == "doppler":
        out = _doppler(X[:, 0])
    elif name == "friedman_mu1":
        out = (
            10 * np.sin(np.pi * X[:, 0] * X[:, 1])
            + 20 * (X[:, 2] - 0.5) ** 2
            + 10 * X[:, 3]
            + 5 * X[:, 4]
        )
    else:
        out = 10 * _logistic(10 * (X[:, 0] - 0.5)) + 5 * _logistic(10 * (X[:, 1] - 0.5))
    out = np.asarray(out, dtype=float)
    return float(out[0]) if scalar else out


def generate(design: SimDesign) -> Dataset:
    rng = np.random.default_rng(design.seed)
    X = rng.uniform(0.0, 1.0, size=(design.n, design.d))
    y = true_mean(design.name, X) + design.sigma * rng.standard_normal(design.n)
    return Dataset(X, y)


@dataclass(frozen=True)
class Preset:
    design: SimDesign
    jackknife: JackknifeConfig
    points: np.ndarray
    replicates: int = 100


def preset(name: str, replicates: int = 100, seed: int = 0) -> Preset:
    """Experiment presets for the paper-style tables and coverage curves."""
    lin = np.linspace
    if name == "table1":
        pts = np.random.default_rng(seed + 1000).uniform(size=(10, 5))
        return Preset(SimDesign("friedman_mu1", 500, 1.0, seed), JackknifeConfig(lin(1, 5, 20), 2, 0.10), pts, replicates)
    if name == "table2":
        pts = np.random.default_rng(seed + 2000).uniform(size=(10, 5))
        return Preset(SimDesign("sigmoid_mu2", 500, 5.0, seed), JackknifeConfig(lin(1, 30, 20), 2, 0.10), pts, replicates)
    fig3 = {"fig3-sin": ("sin4x", 0.1), "fig3-step": ("step", 0.03), "fig3-doppler": ("doppler", 0.03)}
    if name in fig3:
        design, sigma = fig3[name]
        pts = lin(0.02, 0.98, 49)[:, None]
        return Preset(SimDesign(design, 1000, sigma, seed), JackknifeConfig(lin(0.1, 2, 20), 2, 0.05), pts, replicates)
    raise DataError(f"unknown preset {name!r}")


PRESETS = ("table1", "table2", "fig3-sin", "fig3-step", "fig3-doppler")


@dataclass(frozen=True)
class CoverageReport:
    design: SimDesign
    jackknife: JackknifeConfig
    points: np.ndarray
    truth: np.ndarray
    coverage: np.ndarray
    mean_length: np.ndarray
    replicates: int
    failures: int
    forest: dict = field(default_factory=dict)

    @property
    def coverage_se(self) -> np.ndarray:
        # binomial standard error of the coverage estimate
        return np.sqrt(self.coverage * (1 - self.coverage) / max(self.replicates, 1))

    def to_dict(self) -> dict:
        return {
            "design": self.design.to_dict(),
            "jackknife": self.jackknife.to_dict(),
            "forest": self.forest,
            "replicates": self.replicates,
            "failures": self.failures,
            "points": [
                {
                    "id": i,
                    "x": p.tolist(),
                    "mu": float(m),
                    "coverage": float(c),
                    "coverage_se": float(s),
                    "mean_length": float(ln),
                }
                for i, (p, m, c, s, ln) in enumerate(
                    zip(self.points, self.truth, self.coverage, self.coverage_se, self.mean_length)
                )
            ],
        }

    def csv_rows(self) -> list[list]:
        d = self.points.shape[1]
        header = ["point_id"] + [f"x{j + 1}" for j in range(d)] + ["mu", "coverage", "coverage_se", "mean_length"]
        rows = [header]
        for i in range(self.points.shape[0]):
            rows.append(
                [i, *self.points[i].tolist(), float(self.truth[i]), float(self.coverage[i]),
                 float(self.coverage_se[i]), float(self.mean_length[i])]
            )
        return rows


IntervalFn = Callable[[object, np.ndarray, JackknifeConfig], tuple[float, float]]


def _jackknife_interval(model, x, cfg):
    return debias(model, x, cfg).interval


def replicate_seeds(seed: int, r: int) -> tuple[int, int, int]:
    """(data seed, forest seed, split seed) for replicate ``r``."""
    ss = np.random.SeedSequence([seed, r]).generate_state(3)
    return int(ss[0]), int(ss[1]), int(ss[2])


def run_replicate(
    design: SimDesign,
    jk: JackknifeConfig,
    points: np.ndarray,
    r: int,
    forest_config: ForestConfig = ForestConfig(),
    c: float = DEFAULT_INFLATION,
    interval_fn: IntervalFn | None = None,
    sigma2_floor: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """One Monte Carlo replicate: returns (covered flags, interval lengths) per point."""
    data_seed, forest_seed, split_seed = replicate_seeds(design.seed, r)
    data = generate(replace(design, seed=data_seed))
    model = fit_fgs(data, replace(forest_config, seed=forest_seed), split_seed, c=c)
    if sigma2_floor is not None:
        vm = replace(model.variance, floor=sigma2_floor)
        model = replace(model, variance=vm, sigma2=None)
    fn = interval_fn or _jackknife_interval
    truth = true_mean(design.name, points)
    covered = np.empty(points.shape[0], dtype=bool)
    lengths = np.empty(points.shape[0])
    for i, x in enumerate(points):
        lo, hi = fn(model, x, jk)
        covered[i] = lo <= truth[i] <= hi
        lengths[i] = hi - lo
    return covered, lengths


def coverage_experiment(
    design: SimDesign,
    jk: JackknifeConfig,
    points,
    replicates: int,
    forest_config: ForestConfig = ForestConfig(),
    c: float = DEFAULT_INFLATION,
    interval_fn: IntervalFn | None = None,
    n_jobs: int = 1,
    sigma2_floor: float | None = None,
) -> CoverageReport:
    """Regenerate data ``replicates`` times, run the full pipeline, and aggregate coverage.

    Failed replicates (numerical errors) are dropped and counted; more than 5%
    failures raises.
    """
    if replicates < 1:
        raise DataError("replicates must be >= 1")
    points = np.asarray(points, dtype=float).reshape(-1, design.d)
    args = (design, jk, points)
    kwargs = dict(forest_config=forest_config, c=c, interval_fn=interval_fn, sigma2_floor=sigma2_floor)

    def one(r):
        try:
            return run_replicate(*args, r, **kwargs)
        except (NumericalError, FgsError) as exc:
            log.warning("replicate %d failed: %s", r, exc)
            return None

    if n_jobs == 1:
        results = [one(r) for r in range(replicates)]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=n_jobs)(delayed(one)(r) for r in range(replicates))
    ok = [res for res in results if res is not None]
    failures = replicates - len(ok)
    if failures > MAX_FAILURE_RATE * replicates:
        raise NumericalError(f"{failures}/{replicates} replicates failed")
    covered = np.array([c for c, _ in ok], dtype=float)
    lengths = np.array([ln for _, ln in ok])
    return CoverageReport(
        design=design,
        jackknife=jk,
        points=points,
        truth=np.asarray(true_mean(design.name, points), dtype=float).reshape(-1),
        coverage=covered.mean(axis=0),
        mean_length=lengths.mean(axis=0),
        replicates=len(ok),
        failures=failures,
        forest={**forest_config.to_dict(), "c": c},
    )


def run_preset(name: str, replicates: int = 100, seed: int = 0, forest_config: ForestConfig = ForestConfig(), n_jobs: int = 1) -> CoverageReport:
    p = preset(name, replicates, seed)
    return coverage_experiment(p.design, p.jackknife, p.points, p.replicates, forest_config, n_jobs=n_jobs)


def fgs_fit_error(design: SimDesign, grid, h: float = 1.0, forest_config: ForestConfig = ForestConfig()) -> float:
    """Max |mu_hat - mu| over ``grid`` for one generated dataset (1-D designs)."""
    model = fit_fgs(generate(design), replace(forest_config, seed=design.seed), design.seed)
    grid = np.asarray(grid, dtype=float).reshape(-1, design.d)
    est = np.array([predict(model, x, h).beta0 for x in grid])
    return float(np.max(np.abs(est - true_mean(design.name, grid))))


__all__ = [
    "CoverageReport",
    "DESIGNS",
    "PRESETS",
    "SimDesign",
    "coverage_experiment",
    "generate",
    "preset",
    "run_preset",
    "true_mean",
]
