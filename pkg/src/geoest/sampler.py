"""Seeded generators: Gaussian measurement ensembles, single-index observations
and Bernoulli completion masks.

Reproducibility contract: every generator is a pure function of its arguments
including the 64-bit seed.  Streams come from numpy's counter-based Philox
bit generator; Gaussian variates use ``Generator.standard_normal`` (ziggurat).
Derived seeds are produced with a splitmix64-style mix so that trails indexed
off one master seed get well-separated streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ResourceLimitError
from .types import ObservationModel, GaussianNoise, LogisticNoise, eval_link

__all__ = [
    "mix_seed",
    "rng_from_seed",
    "MeasurementBatch",
    "CompletionMask",
    "gen_measurements",
    "gen_observations",
    "gen_mask",
    "observe_completion",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# hard cap on one allocation: 2^31 doubles (16 GiB)
_MAX_ELEMENTS = 1 << 31


def mix_seed(master_seed: int, index: int) -> int:
    """Derive a child seed from (master, index) via a splitmix64 scramble."""
    z = (int(master_seed) + (int(index) + 1) * _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & _MASK64))


@dataclass(frozen=True)
class MeasurementBatch:
    """m measurement vectors stacked as the rows of ``a`` (an m x n matrix)."""

    a: np.ndarray
    m: int
    n: int
    seed: int


@dataclass(frozen=True)
class CompletionMask:
    """Entry-inclusion indicator for a d x d completion experiment."""

    d: int
    included: np.ndarray
    p: float
    seed: int

    @property
    def count(self) -> int:
        return int(self.included.sum())


def gen_measurements(n: int, m: int, seed: int) -> MeasurementBatch:
    """Draw m i.i.d. standard Gaussian measurement vectors in R^n."""
    if n < 1 or m < 1:
        raise ContractError(f"need n, m >= 1; got n={n}, m={m}")
    if n * m > _MAX_ELEMENTS:
        raise ResourceLimitError(
            f"measurement matrix with {n * m} entries exceeds the size cap {_MAX_ELEMENTS}"
        )
    rng = rng_from_seed(seed)
    a = rng.standard_normal((m, n))
    return MeasurementBatch(a=a, m=m, n=n, seed=int(seed))


def _draw_noise(dist, rng: np.random.Generator, size: int) -> np.ndarray | float:
    if dist is None:
        return 0.0
    if isinstance(dist, GaussianNoise):
        if dist.nu == 0.0:
            return 0.0
        return dist.nu * rng.standard_normal(size)
    if isinstance(dist, LogisticNoise):
        return rng.logistic(loc=0.0, scale=dist.scale, size=size)
    raise ContractError(f"unknown noise distribution {dist!r}")


def gen_observations(
    batch: MeasurementBatch, x: np.ndarray, model: ObservationModel, seed: int
) -> np.ndarray:
    """Observations y_i = link(<a_i, x> + pre_i) + post_i.

    The noise streams are drawn from <a_i, x> onward only (pre noise first,
    then post noise, from a single derived stream), so y depends on a_i
    exclusively through the inner products.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (batch.n,):
        raise ContractError(f"signal shape {x.shape} does not match n={batch.n}")
    z = batch.a @ x
    rng = rng_from_seed(seed)
    u = z + _draw_noise(model.pre_noise, rng, batch.m)
    return eval_link(model.link, u) + _draw_noise(model.post_noise, rng, batch.m)


def gen_mask(d: int, p: float, seed: int) -> CompletionMask:
    """Include each of the d^2 entries independently with probability p."""
    if d < 1:
        raise ContractError(f"need d >= 1, got {d}")
    if not 0.0 < p <= 1.0:
        raise ContractError(f"inclusion probability must be in (0, 1], got {p}")
    rng = rng_from_seed(seed)
    included = rng.random((d, d)) < p
    return CompletionMask(d=d, included=included, p=float(p), seed=int(seed))


def observe_completion(
    xmat: np.ndarray, mask: CompletionMask, noise_nu: float, seed: int
) -> np.ndarray:
    """Masked, optionally noisy entries of a d x d matrix (zeros off-mask)."""
    xmat = np.asarray(xmat, dtype=float)
    if xmat.shape != (mask.d, mask.d):
        raise ContractError(f"matrix shape {xmat.shape} does not match mask d={mask.d}")
    if noise_nu < 0:
        raise ContractError(f"noise level must be >= 0, got {noise_nu}")
    noisy = xmat
    if noise_nu > 0:
        rng = rng_from_seed(seed)
        noisy = xmat + noise_nu * rng.standard_normal((mask.d, mask.d))
    return np.where(mask.included, noisy, 0.0)
