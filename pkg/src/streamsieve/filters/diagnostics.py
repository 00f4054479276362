"""Window-centroid drift diagnostics in a 2-D principal subspace.

The top two principal components of the first window's covariance are found
by power iteration with deflation; every window is then projected onto
them, scores are normalized per component to [-1, 1] by the largest
absolute projection seen, and each window is summarized by its centroid.
Shifting centroids across windows are the visual evidence of drift.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DriftDiagnostic:
    centroids: np.ndarray  # (n_windows, 2), normalized scores
    components: np.ndarray  # (2, dims), orthonormal
    eigenvalues: np.ndarray  # (2,)
    scales: np.ndarray  # (2,) per-component normalization divisors


def _power_iteration(
    cov: np.ndarray, rng: np.random.Generator, tol: float, max_iter: int
) -> tuple[float, np.ndarray]:
    d = cov.shape[0]
    v = rng.standard_normal(d)
    v /= np.linalg.norm(v)
    for _ in range(max_iter):
        u = cov @ v
        norm = np.linalg.norm(u)
        if norm < 1e-300:
            return 0.0, v
        u /= norm
        if min(np.linalg.norm(u - v), np.linalg.norm(u + v)) < tol:
            v = u
            break
        v = u
    return float(v @ cov @ v), v


def drift_diagnostic(
    windows, tol: float = 1e-8, max_iter: int = 100000, seed: int = 0
) -> DriftDiagnostic:
    """Project labeled windows onto the first window's top-2 components.

    Raises ValueError when the first window's covariance has rank below 2
    (no 2-D subspace to project onto).
    """
    if not windows:
        raise ValueError("need at least one window")
    mats = [np.asarray(w, dtype=np.float64) for w in windows]
    first = mats[0]
    if first.ndim != 2 or first.shape[0] < 2:
        raise ValueError("first window needs at least 2 samples")
    mean = first.mean(axis=0)
    centered = first - mean
    cov = centered.T @ centered / (first.shape[0] - 1)

    rng = np.random.default_rng(seed)
    lam1, v1 = _power_iteration(cov, rng, tol, max_iter)
    if lam1 <= 0.0:
        raise ValueError("degenerate covariance: rank < 2")
    deflated = cov - lam1 * np.outer(v1, v1)
    lam2, v2 = _power_iteration(deflated, rng, tol, max_iter)
    # re-orthogonalize against v1 to keep deflation error out of the basis
    v2 = v2 - (v2 @ v1) * v1
    norm2 = np.linalg.norm(v2)
    if lam2 <= lam1 * 1e-10 or norm2 < 1e-12:
        raise ValueError("degenerate covariance: rank < 2")
    v2 /= norm2
    components = np.stack([v1, v2])
    eigenvalues = np.array([lam1, lam2])

    projections = [(m - mean) @ components.T for m in mats]
    stacked = np.concatenate(projections, axis=0)
    scales = np.max(np.abs(stacked), axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    centroids = np.stack([(p / scales).mean(axis=0) for p in projections])
    return DriftDiagnostic(centroids, components, eigenvalues, scales)
