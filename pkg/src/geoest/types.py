"""Domain vocabulary: feasible sets, link functions, observation models, parameters.

Signals are plain 1-d numpy arrays.  A d1 x d2 matrix signal travels as its
column-major flattening; the low-rank feasible set carries the shape, and
``vec_to_mat`` / ``mat_to_vec`` convert between the two layouts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ContractError, DegenerateScaleError

__all__ = [
    "SparseCone",
    "LowRankCone",
    "L1Ball",
    "EuclideanBall",
    "FullSpace",
    "FeasibleSet",
    "Identity",
    "Sign",
    "OddMonomial",
    "LinearCombination",
    "LinkFunction",
    "GaussianNoise",
    "LogisticNoise",
    "NoiseDist",
    "ObservationModel",
    "ModelParams",
    "contains",
    "eval_link",
    "noise_variance",
    "vec_to_mat",
    "mat_to_vec",
]


# ---------------------------------------------------------------------------
# Feasible sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SparseCone:
    """Vectors in R^n with at most ``s`` nonzero entries."""

    n: int
    s: int

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"ambient dimension must be >= 1, got {self.n}")
        if not 0 <= self.s <= self.n:
            raise ContractError(f"sparsity s={self.s} must lie in [0, n={self.n}]")

    @property
    def dim(self) -> int:
        return self.n

    is_cone = True
    diameter = None  # unbounded


@dataclass(frozen=True)
class LowRankCone:
    """d1 x d2 matrices of rank at most ``r``, flattened column-major."""

    d1: int
    d2: int
    r: int

    def __post_init__(self):
        if self.d1 < 1 or self.d2 < 1:
            raise ContractError("matrix dimensions must be positive")
        if not 1 <= self.r <= min(self.d1, self.d2):
            raise ContractError(
                f"rank r={self.r} must lie in [1, min(d1,d2)={min(self.d1, self.d2)}]"
            )

    @property
    def dim(self) -> int:
        return self.d1 * self.d2

    is_cone = True
    diameter = None


@dataclass(frozen=True)
class L1Ball:
    """Scaled l1 ball { v : ||v||_1 <= radius }."""

    n: int
    radius: float

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"ambient dimension must be >= 1, got {self.n}")
        if not self.radius > 0:
            raise ContractError(f"radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.n

    is_cone = False

    @property
    def diameter(self) -> float:
        # attained at antipodal vertices; ||.||_2 <= ||.||_1 caps all other pairs
        return 2.0 * self.radius


@dataclass(frozen=True)
class EuclideanBall:
    """Euclidean ball { v : ||v||_2 <= radius }."""

    n: int
    radius: float

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"ambient dimension must be >= 1, got {self.n}")
        if not self.radius > 0:
            raise ContractError(f"radius must be positive, got {self.radius}")

    @property
    def dim(self) -> int:
        return self.n

    is_cone = False

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius


@dataclass(frozen=True)
class FullSpace:
    """All of R^n (no structural constraint)."""

    n: int

    def __post_init__(self):
        if self.n < 1:
            raise ContractError(f"ambient dimension must be >= 1, got {self.n}")

    @property
    def dim(self) -> int:
        return self.n

    is_cone = True
    diameter = None


FeasibleSet = Union[SparseCone, LowRankCone, L1Ball, EuclideanBall, FullSpace]


def vec_to_mat(v: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Reshape a flat signal to its d1 x d2 matrix (column-major layout)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (d1 * d2,):
        raise ContractError(f"expected a flat vector of length {d1 * d2}, got {v.shape}")
    return v.reshape((d1, d2), order="F")


def mat_to_vec(mat: np.ndarray) -> np.ndarray:
    """Flatten a matrix signal column-major."""
    mat = np.asarray(mat, dtype=float)
    if mat.ndim != 2:
        raise ContractError(f"expected a 2-d array, got ndim={mat.ndim}")
    return mat.reshape(-1, order="F")


def _check_dim(feasible_set: FeasibleSet, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (feasible_set.dim,):
        raise ContractError(
            f"signal shape {v.shape} does not match ambient dimension {feasible_set.dim}"
        )
    return v


def contains(feasible_set: FeasibleSet, v: np.ndarray, tol: float = 1e-9) -> bool:
    """Membership test up to tolerance.

    Sparse membership counts entries above ``tol`` in magnitude; rank
    membership compares trailing singular values against
    ``tol * (top singular value + 1)`` so the test is scale-free; balls allow
    ``radius + tol``.
    """
    if tol < 0:
        raise ContractError(f"tolerance must be nonnegative, got {tol}")
    v = _check_dim(feasible_set, v)
    if isinstance(feasible_set, SparseCone):
        return int(np.count_nonzero(np.abs(v) > tol)) <= feasible_set.s
    if isinstance(feasible_set, LowRankCone):
        if feasible_set.r >= min(feasible_set.d1, feasible_set.d2):
            return True
        svals = np.linalg.svd(
            vec_to_mat(v, feasible_set.d1, feasible_set.d2), compute_uv=False
        )
        return bool(np.all(svals[feasible_set.r :] <= tol * (svals[0] + 1.0)))
    if isinstance(feasible_set, L1Ball):
        return float(np.abs(v).sum()) <= feasible_set.radius + tol
    if isinstance(feasible_set, EuclideanBall):
        return float(np.linalg.norm(v)) <= feasible_set.radius + tol
    if isinstance(feasible_set, FullSpace):
        return True
    raise ContractError(f"unknown feasible set {feasible_set!r}")


# ---------------------------------------------------------------------------
# Link functions
# ---------------------------------------------------------------------------
#
# Every link exposes terms() -> (poly, sign_weight): ``poly`` maps monomial
# degree to coefficient and ``sign_weight`` scales a sign(u) component.  All
# built-in variants are odd and non-decreasing; anything duck-typing terms()
# can be evaluated too (used by diagnostics and error-path tests).


@dataclass(frozen=True)
class Identity:
    def terms(self) -> tuple[dict[int, float], float]:
        return {1: 1.0}, 0.0


@dataclass(frozen=True)
class Sign:
    def terms(self) -> tuple[dict[int, float], float]:
        return {}, 1.0


@dataclass(frozen=True)
class OddMonomial:
    k: int

    def __post_init__(self):
        if self.k < 1 or self.k % 2 == 0:
            raise ContractError(f"monomial exponent must be odd and positive, got {self.k}")

    def terms(self) -> tuple[dict[int, float], float]:
        return {self.k: 1.0}, 0.0


@dataclass(frozen=True)
class LinearCombination:
    weights: tuple[float, ...]
    parts: tuple["LinkFunction", ...]

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "parts", tuple(self.parts))
        if len(self.weights) != len(self.parts) or not self.parts:
            raise ContractError("weights and parts must be nonempty and equally long")
        if any(w <= 0 for w in self.weights):
            raise ContractError("combination weights must be strictly positive")

    def terms(self) -> tuple[dict[int, float], float]:
        poly: dict[int, float] = {}
        sign_w = 0.0
        for w, part in zip(self.weights, self.parts):
            p, s = part.terms()
            for k, c in p.items():
                poly[k] = poly.get(k, 0.0) + w * c
            sign_w += w * s
        return poly, sign_w


LinkFunction = Union[Identity, Sign, OddMonomial, LinearCombination]


def eval_link(link, u):
    """Evaluate a link function pointwise; sign(0) evaluates to 0."""
    poly, sign_w = link.terms()
    arr = np.asarray(u, dtype=float)
    out = np.zeros_like(arr)
    for k in sorted(poly):
        out += poly[k] * arr**k
    if sign_w != 0.0:
        out += sign_w * np.sign(arr)
    if np.isscalar(u) or arr.ndim == 0:
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Noise and observation models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GaussianNoise:
    nu: float

    def __post_init__(self):
        if self.nu < 0:
            raise ContractError(f"gaussian noise scale must be >= 0, got {self.nu}")


@dataclass(frozen=True)
class LogisticNoise:
    scale: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ContractError(f"logistic noise scale must be > 0, got {self.scale}")


NoiseDist = Optional[Union[GaussianNoise, LogisticNoise]]


def noise_variance(dist: NoiseDist) -> float:
    """Variance of a (mean-zero) noise distribution; None means no noise."""
    if dist is None:
        return 0.0
    if isinstance(dist, GaussianNoise):
        return dist.nu**2
    if isinstance(dist, LogisticNoise):
        return dist.scale**2 * np.pi**2 / 3.0
    raise ContractError(f"unknown noise distribution {dist!r}")


@dataclass(frozen=True)
class ObservationModel:
    """Observations y_i = link(<a_i, x> + pre_noise_i) + post_noise_i."""

    link: LinkFunction
    pre_noise: NoiseDist = None
    post_noise: NoiseDist = None


# ---------------------------------------------------------------------------
# Model parameters
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelParams:
    """Scalar calibration parameters of an observation model.

    ``mu`` is the mean of y * <a, xbar>, ``sigma`` its standard deviation and
    ``eta`` the root second moment of y.  ``lam`` (= ||x|| / mu) is None when
    mu is numerically zero; ``psi`` is a sub-gaussian scale estimate and
    ``c_f`` a link-dependent constant, both optional.  The *_se fields carry
    standard errors when the parameters were estimated by Monte Carlo.
    """

    mu: float
    sigma: float
    eta: float
    lam: Optional[float] = None
    psi: Optional[float] = None
    c_f: Optional[float] = None
    method: str = ""
    mu_se: Optional[float] = None
    sigma_se: Optional[float] = None
    eta_se: Optional[float] = None

    def require_lambda(self) -> float:
        if self.lam is None:
            raise DegenerateScaleError(
                "rescaling factor is undefined: mu is numerically zero "
                "(even links have mu = 0)"
            )
        return self.lam
