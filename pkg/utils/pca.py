"""
PCA Module - redundancy reduction for wavelet features
Covariance (or Gram matrix) eigendecomposition by cyclic Jacobi rotations, component selection and projection
"""

import logging
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from utils.errors import DimensionError, InsufficientDataError, ParameterError
from utils.features import LabeledDataset

logger = logging.getLogger(__name__)

Retain = Union[int, float]
PCA_METHODS = ('auto', 'covariance', 'gram')


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # k x d, orthonormal rows
    eigenvalues: np.ndarray  # k, non-increasing
    total_variance: float

    @property
    def k(self) -> int:
        return self.components.shape[0]

    @property
    def d(self) -> int:
        return self.components.shape[1]

    @property
    def explained_variance_ratio(self) -> np.ndarray:
        if self.total_variance <= 0:
            return np.zeros(self.k)
        return self.eigenvalues / self.total_variance


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-12, max_sweeps: int = 100) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues and eigenvectors (columns) of a symmetric matrix by cyclic Jacobi rotations.

    Stops once the off-diagonal Frobenius norm falls below tol times the Frobenius
    norm of the input, or after max_sweeps full sweeps.
    """
    A = np.array(matrix, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if n < 2 or scale == 0.0:
        return np.diag(A).copy(), V
    threshold = tol * scale

    for sweep in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off <= threshold:
            logger.debug("Jacobi converged after %d sweeps (off=%.3e)", sweep, off)
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                gap = A[q, q] - A[p, p]
                # rotation angle below double precision: drop the entry, keeps theta ** 2 finite
                if abs(apq) < 1e-18 * abs(gap):
                    A[p, q] = A[q, p] = 0.0
                    continue
                theta = gap / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = A[:, p].copy()
                col_q = A[:, q].copy()
                A[:, p] = c * col_p - s * col_q
                A[:, q] = s * col_p + c * col_q
                row_p = A[p, :].copy()
                row_q = A[q, :].copy()
                A[p, :] = c * row_p - s * row_q
                A[q, :] = s * row_p + c * row_q
                A[p, q] = A[q, p] = 0.0

                vec_p = V[:, p].copy()
                vec_q = V[:, q].copy()
                V[:, p] = c * vec_p - s * vec_q
                V[:, q] = s * vec_p + c * vec_q
    else:
        logger.warning("⚠️ Jacobi eigensolver hit %d sweeps without converging", max_sweeps)

    return np.diag(A).copy(), V


def _fix_signs(components: np.ndarray) -> np.ndarray:
    """Make each row's entry of largest magnitude positive"""
    idx = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(len(components)), idx])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def _retained_count(eigenvalues: np.ndarray, rank: int, retain: Retain, limit: int) -> int:
    if isinstance(retain, bool):
        raise ParameterError("retain must be a component count or a variance fraction")
    if isinstance(retain, (int, np.integer)):
        if retain < 1 or retain > limit:
            raise ParameterError(f"component count must be in [1, {limit}], got {retain}")
        if retain > rank:
            raise ParameterError(f"requested {retain} components but the centered data has rank {rank}")
        return int(retain)
    fraction = float(retain)
    if not 0.0 < fraction <= 1.0:
        raise ParameterError(f"variance fraction must be in (0, 1], got {fraction}")
    cumulative = np.cumsum(eigenvalues[:rank]) / np.sum(eigenvalues[:rank])
    k = int(np.searchsorted(cumulative, fraction - 1e-12) + 1)
    return min(k, rank)


def pca_fit(X, retain: Retain = 0.95, tol: float = 1e-12, max_sweeps: int = 100,
            method: str = 'auto') -> PcaModel:
    """Fit PCA; retain is an int component count or a float cumulative variance fraction.

    method picks the eigenproblem: 'covariance' (d x d), 'gram' (n x n) or 'auto', which
    uses the smaller of the two.
    """
    if method not in PCA_METHODS:
        raise ParameterError(f"method must be one of {PCA_METHODS}, got {method!r}")
    if isinstance(X, LabeledDataset):
        X = X.X
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] < 1:
        raise DimensionError(f"expected an n x d matrix with d >= 1, got shape {X.shape}")
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError(f"PCA needs at least 2 samples, got {n}")

    mean = X.mean(axis=0)
    centered = X - mean

    if method == 'covariance' or (method == 'auto' and d <= n):
        cov = centered.T @ centered / (n - 1)
        eigenvalues, vectors = jacobi_eigh(cov, tol, max_sweeps)
        order = np.argsort(-eigenvalues, kind='stable')
        eigenvalues = eigenvalues[order]
        components = vectors[:, order].T
    else:
        # Gram trick: the n x n inner-product matrix shares the nonzero spectrum
        gram = centered @ centered.T / (n - 1)
        eigenvalues, vectors = jacobi_eigh(gram, tol, max_sweeps)
        order = np.argsort(-eigenvalues, kind='stable')
        eigenvalues = eigenvalues[order]
        components = (centered.T @ vectors[:, order]).T

    eigenvalues = np.where(eigenvalues < 0, 0.0, eigenvalues)
    total = float(np.sum(eigenvalues))
    rank = int(np.sum(eigenvalues > 1e-10 * max(eigenvalues[0], 1e-300))) if total > 0 else 0
    if rank == 0:
        raise InsufficientDataError("centered data has zero variance")

    k = _retained_count(eigenvalues, rank, retain, min(n - 1, d))
    components = components[:k]
    norms = np.linalg.norm(components, axis=1, keepdims=True)
    components = _fix_signs(components / norms)

    logger.debug("PCA kept %d of %d components (n=%d, d=%d)", k, rank, n, d)
    return PcaModel(mean=mean, components=components, eigenvalues=eigenvalues[:k].copy(), total_variance=total)


def pca_project(model: PcaModel, X):
    """(X - mean) . components^T; a LabeledDataset keeps its labels"""
    if isinstance(X, LabeledDataset):
        return LabeledDataset(pca_project(model, X.X), X.y)
    X = np.asarray(X, dtype=np.float64)
    squeeze = X.ndim == 1
    X = np.atleast_2d(X)
    if X.shape[1] != model.d:
        raise DimensionError(f"expected {model.d} features, got {X.shape[1]}")
    Z = (X - model.mean) @ model.components.T
    return Z[0] if squeeze else Z


def pca_reconstruct(model: PcaModel, Z) -> np.ndarray:
    """Back-projection of projected rows into feature space"""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[-1] != model.k:
        raise DimensionError(f"expected {model.k} components, got {Z.shape[-1]}")
    return Z @ model.components + model.mean
