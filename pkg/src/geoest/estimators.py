"""The estimators: averaged linear, projected (two-step), rescaled,
sphere-normalized, and the masked low-rank completion estimator."""

from __future__ import annotations

import numpy as np

from .errors import ContractError, DegenerateScaleError
from .projections import normalize_to_sphere, project, svd_hard_threshold
from .sampler import CompletionMask, MeasurementBatch
from .types import FeasibleSet

__all__ = [
    "linear_estimator",
    "projected_estimator",
    "rescaled_estimator",
    "direction_estimator",
    "completion_estimator",
]


def linear_estimator(batch: MeasurementBatch, y: np.ndarray) -> np.ndarray:
    """Averaged linear estimate (1/m) sum_i y_i a_i; unbiased for mu xbar."""
    y = np.asarray(y, dtype=float)
    if y.shape != (batch.m,):
        raise ContractError(f"observation length {y.shape} does not match m={batch.m}")
    return batch.a.T @ y / batch.m


def projected_estimator(
    batch: MeasurementBatch, y: np.ndarray, feasible_set: FeasibleSet
) -> np.ndarray:
    """Metric projection of the linear estimate onto the feasible set."""
    if feasible_set.dim != batch.n:
        raise ContractError(
            f"feasible set dimension {feasible_set.dim} does not match n={batch.n}"
        )
    return project(feasible_set, linear_estimator(batch, y))


def rescaled_estimator(
    batch: MeasurementBatch, y: np.ndarray, feasible_set: FeasibleSet, lam: float
) -> np.ndarray:
    """lambda times the projected estimate, targeting x itself.

    The caller passes the set containing mu xbar (the unscaled one); scaling
    the output by lambda is what maps the estimate onto lambda K, and for
    cones it agrees with projecting onto the scaled set by positive
    homogeneity.
    """
    if not np.isfinite(lam) or lam == 0.0:
        raise DegenerateScaleError(f"rescaling factor must be finite and nonzero, got {lam}")
    return lam * projected_estimator(batch, y, feasible_set)


def direction_estimator(
    batch: MeasurementBatch, y: np.ndarray, feasible_set: FeasibleSet
) -> np.ndarray:
    """Unit-norm direction estimate; raises DegenerateInputError on a zero projection."""
    return normalize_to_sphere(projected_estimator(batch, y, feasible_set))


def completion_estimator(observed: np.ndarray, mask: CompletionMask, r: int) -> np.ndarray:
    """Rank-r truncation of the inverse-probability-weighted observed matrix."""
    if r < 1:
        raise ContractError(f"rank must be a positive integer, got {r}")
    observed = np.asarray(observed, dtype=float)
    if observed.shape != (mask.d, mask.d):
        raise ContractError(
            f"observed shape {observed.shape} does not match mask d={mask.d}"
        )
    return svd_hard_threshold(observed / mask.p, r)
