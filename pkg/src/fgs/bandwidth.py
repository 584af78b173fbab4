"""Forest-derived bandwidth matrices and the scaled kernel K(u; H)."""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .dataset import Dataset
from .errors import DataError, NumericalError, SingularDesignError

DEFAULT_EPS_REL = 1e-8
DEFAULT_LAMBDA_FLOOR = 1e-12
NEG_EIG_TOL = 1e-10


@dataclass(frozen=True)
class BandwidthMatrix:
    """Symmetric PSD matrix with its eigendecomposition (eigenvalues descending)."""

    H: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    regularized: bool = False

    @classmethod
    def from_eigh(cls, lam, U, regularized=False) -> "BandwidthMatrix":
        order = np.argsort(lam)[::-1]
        lam = np.asarray(lam, dtype=float)[order]
        U = np.asarray(U, dtype=float)[:, order]
        H = (U * lam) @ U.T
        return cls(0.5 * (H + H.T), lam, U, regularized)

    @classmethod
    def from_matrix(cls, H) -> "BandwidthMatrix":
        H = _symmetric(H)
        lam, U = np.linalg.eigh(H)
        if lam.min() < -NEG_EIG_TOL * max(1.0, abs(lam.max())):
            raise NumericalError(f"matrix is not positive semi-definite (min eigenvalue {lam.min():.3g})")
        return cls.from_eigh(np.clip(lam, 0.0, None), U)

    @property
    def d(self) -> int:
        return self.H.shape[0]

    def logdet(self) -> float:
        if self.eigenvalues.min() <= 0:
            raise SingularDesignError("bandwidth matrix is singular")
        return float(np.sum(np.log(self.eigenvalues)))

    def inverse(self) -> np.ndarray:
        if self.eigenvalues.min() <= 0:
            raise SingularDesignError("bandwidth matrix is singular")
        return (self.eigenvectors / self.eigenvalues) @ self.eigenvectors.T

    def scaled(self, h: float) -> "BandwidthMatrix":
        return BandwidthMatrix(h * self.H, h * self.eigenvalues, self.eigenvectors, self.regularized)

    def to_dict(self) -> dict:
        return {
            "H": self.H.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "regularized": self.regularized,
        }


class KernelFamily(str, Enum):
    GAUSSIAN = "gaussian"
    EPANECHNIKOV_PRODUCT = "epanechnikov_product"


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = KernelFamily.GAUSSIAN

    def log_base(self, z: np.ndarray) -> np.ndarray:
        """log K_base(z) for rows of ``z`` (-inf outside the support)."""
        z = np.atleast_2d(z)
        d = z.shape[1]
        if self.family is KernelFamily.GAUSSIAN:
            return -0.5 * np.einsum("ij,ij->i", z, z) - 0.5 * d * math.log(2 * math.pi)
        # product of 0.75 (1 - z_j^2) on [-1, 1]
        inside = np.all(np.abs(z) < 1, axis=1)
        with np.errstate(divide="ignore"):
            vals = np.sum(np.log(np.clip(1 - z**2, 0.0, None)), axis=1) + d * math.log(0.75)
        return np.where(inside, vals, -np.inf)


def _symmetric(S, tol=1e-12) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DataError(f"expected a square matrix, got shape {S.shape}")
    scale = max(1.0, float(np.abs(S).max(initial=0.0)))
    if np.abs(S - S.T).max(initial=0.0) > tol * scale:
        raise NumericalError("matrix is not symmetric")
    return 0.5 * (S + S.T)


def weighted_scatter(weights, data: Dataset, x, scale_by_n: bool = True) -> np.ndarray:
    """(1/n) * sum_i w_i (X_i - x)(X_i - x)^T over the rows of ``data``.

    With ``scale_by_n=False`` the 1/n factor is dropped, i.e. the forest-weighted
    covariance of the displacements (the weights already sum to one).
    """
    w = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if w.shape != (data.n,) or x.shape != (data.d,):
        raise DataError("weights/query dimensions do not match the data")
    D = data.features - x
    S = (D * w[:, None]).T @ D
    if scale_by_n:
        S /= data.n
    return 0.5 * (S + S.T)


def matrix_sqrt(S) -> BandwidthMatrix:
    """Principal square root of a symmetric PSD matrix by eigendecomposition."""
    S = _symmetric(S)
    lam, U = np.linalg.eigh(S)
    scale = max(1.0, float(np.abs(lam).max(initial=0.0)))
    if lam.min(initial=0.0) < -NEG_EIG_TOL * scale:
        raise NumericalError(f"matrix has a materially negative eigenvalue ({lam.min():.3g})")
    return BandwidthMatrix.from_eigh(np.sqrt(np.clip(lam, 0.0, None)), U)


def regularize(H: BandwidthMatrix, eps_rel: float = DEFAULT_EPS_REL, lambda_floor: float = DEFAULT_LAMBDA_FLOOR) -> BandwidthMatrix:
    """Add ``delta * I`` when H is (near) rank-deficient."""
    delta = eps_rel * max(float(H.eigenvalues[0]), lambda_floor)
    if H.eigenvalues[-1] >= delta:
        return H
    return BandwidthMatrix.from_eigh(H.eigenvalues + delta, H.eigenvectors, regularized=True)


def log_kernel(U, H: BandwidthMatrix, spec: KernelSpec = KernelSpec()) -> np.ndarray:
    """log K(u; H) = -log det H + log K_base(H^{-1} u) for each row of ``U``."""
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if H.eigenvalues.min() <= 0:
        raise SingularDesignError("kernel needs a positive-definite bandwidth matrix")
    # H^{-1} u through the eigenbasis
    Z = ((U @ H.eigenvectors) / H.eigenvalues) @ H.eigenvectors.T
    return spec.log_base(Z) - H.logdet()


def kernel_eval(u, H: BandwidthMatrix, spec: KernelSpec = KernelSpec()) -> float | np.ndarray:
    u = np.asarray(u, dtype=float)
    out = np.exp(log_kernel(u, H, spec))
    return float(out[0]) if u.ndim == 1 else out


KERNEL_CONVENTIONS = ("covariance", "scale")


def kernel_matrix(H: BandwidthMatrix, h: float, convention: str = "covariance") -> BandwidthMatrix:
    """Scale matrix of the smoothing kernel at resolution ``h``.

    ``"covariance"``: the Gaussian kernel has covariance h*H, so its scale
    matrix is (h*H)^{1/2}. ``"scale"``: h*H is used directly as the scale matrix
    in |G|^{-1} K(G^{-1} u).
    """
    if not h > 0:
        raise ValueError(f"h must be positive, got {h}")
    if convention == "scale":
        return H.scaled(h)
    if convention == "covariance":
        return BandwidthMatrix.from_eigh(np.sqrt(h * H.eigenvalues), H.eigenvectors, H.regularized)
    raise ValueError(f"unknown kernel convention {convention!r}; choose from {KERNEL_CONVENTIONS}")


def bandwidth_from_weights(weights, data: Dataset, x, eps_rel: float = DEFAULT_EPS_REL, scale_by_n: bool = True) -> BandwidthMatrix:
    return regularize(matrix_sqrt(weighted_scatter(weights, data, x, scale_by_n)), eps_rel)


def bandwidth_at(model, data: Dataset, x, eps_rel: float = DEFAULT_EPS_REL, scale_by_n: bool = True) -> BandwidthMatrix:
    """H_x for the forest ``model`` trained on ``data``."""
    x = np.asarray(x, dtype=float)
    return bandwidth_from_weights(model.weights(x)[0], data, x, eps_rel, scale_by_n)


def bandwidths_at(model, data: Dataset, X, eps_rel: float = DEFAULT_EPS_REL, scale_by_n: bool = True) -> list[BandwidthMatrix]:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    W = model.weights(X)
    return [bandwidth_from_weights(w, data, x, eps_rel, scale_by_n) for w, x in zip(W, X)]
