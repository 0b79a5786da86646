"""Exact metric projections onto each feasible-set variant.

All routines return a nearest point in Euclidean distance.  Where the
minimizer is non-unique (magnitude ties in hard thresholding, repeated
singular values), ties break toward lower indices / earlier singular triples
so results are reproducible; any tie-break attains the minimum.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DegenerateInputError, NumericalError
from .types import (
    EuclideanBall,
    FeasibleSet,
    FullSpace,
    L1Ball,
    LowRankCone,
    SparseCone,
    mat_to_vec,
    vec_to_mat,
)

__all__ = [
    "project",
    "hard_threshold",
    "svd_hard_threshold",
    "project_l1_ball",
    "normalize_to_sphere",
]


def hard_threshold(v: np.ndarray, s: int) -> np.ndarray:
    """Keep the s largest-magnitude entries of v in place, zero the rest."""
    v = np.asarray(v, dtype=float)
    if not 0 <= s <= v.size:
        raise ContractError(f"sparsity s={s} must lie in [0, {v.size}]")
    out = np.zeros_like(v)
    if s == 0:
        return out
    # stable sort keeps the lower index on magnitude ties
    keep = np.argsort(-np.abs(v), kind="stable")[:s]
    out[keep] = v[keep]
    return out


def svd_hard_threshold(mat: np.ndarray, r: int) -> np.ndarray:
    """Best rank-r approximation in Frobenius norm (singular value truncation)."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2:
        raise ContractError(f"expected a 2-d array, got ndim={mat.ndim}")
    if not 1 <= r <= min(mat.shape):
        raise ContractError(f"rank r={r} must lie in [1, {min(mat.shape)}]")
    try:
        u, svals, vt = np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"SVD did not converge on a {mat.shape} matrix: {exc}") from exc
    return (u[:, :r] * svals[:r]) @ vt[:r]


def project_l1_ball(v: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection onto { z : ||z||_1 <= radius }.

    Interior points are returned unchanged; otherwise the projection is the
    soft threshold sign(v) * (|v| - theta)_+ with theta fixed by sorting the
    magnitudes so that the l1 norm comes out exactly at the radius.
    """
    if not radius > 0:
        raise ContractError(f"radius must be positive, got {radius}")
    v = np.asarray(v, dtype=float)
    mag = np.abs(v)
    if mag.sum() <= radius:
        return v.copy()
    srt = np.sort(mag)[::-1]
    csum = np.cumsum(srt)
    ks = np.arange(1, v.size + 1)
    k = ks[srt > (csum - radius) / ks][-1]
    theta = (csum[k - 1] - radius) / k
    return np.sign(v) * np.maximum(mag - theta, 0.0)


def normalize_to_sphere(v: np.ndarray) -> np.ndarray:
    """v / ||v||_2, the closest point on the unit sphere."""
    v = np.asarray(v, dtype=float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        raise DegenerateInputError("cannot normalize the zero vector onto the sphere")
    return v / nv


def project(feasible_set: FeasibleSet, v: np.ndarray) -> np.ndarray:
    """Metric projection of v onto the feasible set."""
    v = np.asarray(v, dtype=float)
    if v.shape != (feasible_set.dim,):
        raise ContractError(
            f"signal shape {v.shape} does not match ambient dimension {feasible_set.dim}"
        )
    if isinstance(feasible_set, SparseCone):
        return hard_threshold(v, feasible_set.s)
    if isinstance(feasible_set, LowRankCone):
        mat = vec_to_mat(v, feasible_set.d1, feasible_set.d2)
        return mat_to_vec(svd_hard_threshold(mat, feasible_set.r))
    if isinstance(feasible_set, L1Ball):
        return project_l1_ball(v, feasible_set.radius)
    if isinstance(feasible_set, EuclideanBall):
        nv = float(np.linalg.norm(v))
        if nv <= feasible_set.radius:
            return v.copy()
        return v * (feasible_set.radius / nv)
    if isinstance(feasible_set, FullSpace):
        return v.copy()
    raise ContractError(f"unknown feasible set {feasible_set!r}")
