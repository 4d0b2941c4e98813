"""
Anisotropic Gaussian correlation
K(x1, x2) = exp(-sum_j omega_j (x1_j - x2_j)^2) on inputs scaled to [0, 1]^d
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidArgumentError


@dataclass(frozen=True)
class KernelParams:
    """Per-dimension inverse lengthscales omega (non-negative)."""

    omega: np.ndarray

    def __post_init__(self):
        omega = np.atleast_1d(np.asarray(self.omega, dtype=float))
        if omega.ndim != 1:
            raise InvalidArgumentError(f"omega must be a vector, got shape {omega.shape}")
        if np.any(omega < 0) or not np.all(np.isfinite(omega)):
            raise InvalidArgumentError(f"omega must be finite and non-negative, got {omega}")
        object.__setattr__(self, "omega", omega)

    @property
    def d(self) -> int:
        return self.omega.shape[0]


def _check_dim(params: KernelParams, d: int) -> None:
    if d != params.d:
        raise InvalidArgumentError(
            f"Input dimension {d} does not match kernel dimension {params.d}"
        )


def gaussian_kernel(x1: np.ndarray, x2: np.ndarray, params: KernelParams) -> float:
    """Correlation between two points."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape:
        raise InvalidArgumentError(f"Point shapes differ: {x1.shape} vs {x2.shape}")
    _check_dim(params, x1.shape[0])
    return float(np.exp(-np.sum(params.omega * (x1 - x2) ** 2)))


def _sq_diffs(X: np.ndarray) -> np.ndarray:
    """n x n x d array of squared coordinate differences."""
    return (X[:, None, :] - X[None, :, :]) ** 2


def kernel_matrix(X: np.ndarray, params: KernelParams) -> np.ndarray:
    """
    Correlation matrix K_n of the rows of X

    Args:
        X: n x d inputs
        params: Kernel parameters

    Returns:
        Symmetric n x n matrix with unit diagonal
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    _check_dim(params, X.shape[1])
    K = np.exp(-_sq_diffs(X) @ params.omega)
    # exact symmetry regardless of summation order
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, 1.0)
    return K


def cross_kernel(x: np.ndarray, X: np.ndarray, params: KernelParams) -> np.ndarray:
    """Vector [K(x, x_1), ..., K(x, x_n)]."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if x.shape[0] != X.shape[1]:
        raise InvalidArgumentError(
            f"Query dimension {x.shape[0]} does not match data dimension {X.shape[1]}"
        )
    _check_dim(params, x.shape[0])
    return np.exp(-((X - x) ** 2) @ params.omega)


def cross_kernel_matrix(Xq: np.ndarray, X: np.ndarray, params: KernelParams) -> np.ndarray:
    """m x n matrix whose row q is cross_kernel(Xq[q], X)."""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if Xq.shape[1] != X.shape[1]:
        raise InvalidArgumentError(
            f"Query dimension {Xq.shape[1]} does not match data dimension {X.shape[1]}"
        )
    _check_dim(params, X.shape[1])
    return np.exp(-((Xq[:, None, :] - X[None, :, :]) ** 2) @ params.omega)


def kernel_matrix_grad(X: np.ndarray, params: KernelParams, j: int) -> np.ndarray:
    """
    Derivative of K_n with respect to omega_j

    Entries are -(x_ij - x_kj)^2 * K_n[i, k].
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if not 0 <= j < params.d:
        raise InvalidArgumentError(f"Dimension index {j} out of range [0, {params.d})")
    K = kernel_matrix(X, params)
    diff2 = (X[:, None, j] - X[None, :, j]) ** 2
    return -diff2 * K


def kernel_matrix_grads(X: np.ndarray, params: KernelParams) -> np.ndarray:
    """All d derivatives at once, stacked as a d x n x n array."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    K = kernel_matrix(X, params)
    return -np.moveaxis(_sq_diffs(X), 2, 0) * K[None, :, :]
