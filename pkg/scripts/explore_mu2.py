"""Structural summaries of one fit on the sigmoid five-dimensional design.

Prints the barycenter, median effective bandwidths and slope magnitudes, the
gradient bands at the centre of the cube, and the smoother-vs-forest Gamma.
"""

import argparse
from dataclasses import asdict, dataclass

import numpy as np

from fgs.cli import heatmap_table
from fgs.explore import explore, gamma_compare
from fgs.forest import ForestConfig
from fgs.simulate import SimDesign, generate
from fgs.smoother import fit_fgs, gradient_path


@dataclass
class ExploreConfig:
    n: int = 500
    sigma: float = 5.0
    seed: int = 0
    num_trees: int = 500
    permute: int = 0


def run(cfg: ExploreConfig) -> None:
    data = generate(SimDesign("sigmoid_mu2", cfg.n, cfg.sigma, cfg.seed))
    forest_cfg = ForestConfig(num_trees=cfg.num_trees, seed=cfg.seed)
    model = fit_fgs(data, forest_cfg, cfg.seed)
    ex = explore(model, (0.5, 1.0, 2.0))
    names = list(data.feature_names)
    print(heatmap_table(ex.barycenter.H_bar, names))
    print(f"Frechet variance {ex.barycenter.frechet_variance:.4f}")
    print("median effective bandwidth", np.round(np.median(ex.effective, axis=0), 3))
    for h, B in ex.slopes.items():
        print(f"median |beta| at h={h:g}", np.round(np.nanmedian(np.abs(B), axis=0), 2))

    path = gradient_path(model, np.full(5, 0.5))
    print("\nbands excluding 0 at x = 0.5 (rows h, columns coordinates)")
    for h, row in zip(path.h, path.excludes_zero()):
        print(f"{h:7.3f}  " + " ".join("x" if v else "." for v in row))

    est = gamma_compare(data, forest_cfg, seed=cfg.seed, permute=cfg.permute)
    lo, hi = est.interval
    print(f"\nGamma hat {est.gamma_hat:.3f}  95% CI [{lo:.3f}, {hi:.3f}]  (m={est.m})")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for k, v in asdict(ExploreConfig()).items():
        ap.add_argument(f"--{k.replace('_', '-')}", dest=k, type=type(v), default=v)
    run(ExploreConfig(**vars(ap.parse_args())))


if __name__ == "__main__":
    main()
