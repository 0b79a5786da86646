"""Mean widths, packing numbers and minimax radii for the feasible sets.

The local width at scale t averages, over Gaussian directions g, the supremum
of <g, u> for u ranging over the difference set (K - K) intersected with the
radius-t ball.  Each variant admits an exact per-sample supremum:

* sparse cone (sparsity s): difference set is 2s-sparse, so the supremum is
  t times the l2 mass of the 2s largest magnitudes of g;
* low-rank cone (rank r): difference set has rank 2r, so the supremum is t
  times the l2 mass of the top 2r singular values of g reshaped;
* l1 ball of radius R: difference set is the 2R ball, and the supremum over
  the l1/l2 intersection is the inf-convolution
  min_theta [ 2R theta + t ||soft(g, theta)||_2 ], solved by a monotone
  bisection on theta;
* euclidean ball / full space: radial, in closed form.

Packing numbers are greedy lower bounds over seeded candidate streams; all
derived radii are therefore estimates-from-bounds and labeled as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ContractError, UnboundedSetError
from .projections import project_l1_ball
from .sampler import mix_seed, rng_from_seed
from .types import (
    EuclideanBall,
    FeasibleSet,
    FullSpace,
    L1Ball,
    LowRankCone,
    SparseCone,
    vec_to_mat,
)

__all__ = [
    "WidthEstimate",
    "MinimaxRadii",
    "width_sup_sample",
    "local_mean_width",
    "global_mean_width",
    "width_bound_formula",
    "packing_lower_bound",
    "minimax_radii",
    "default_t_grid",
]


@dataclass(frozen=True)
class WidthEstimate:
    """Monte Carlo width estimate; scale_t is None for the global width."""

    value: float
    stderr: float
    n_samples: int
    scale_t: Optional[float]


@dataclass(frozen=True)
class MinimaxRadii:
    """Grid minima of the two minimax infimands plus the width/packing ratio.

    delta_upper evaluates inf_t { t + (nu/sqrt m)(1 + w_t/t) } on the grid and
    delta_lower the packing form inf_t { t + (nu/sqrt m)(1 + sqrt(log P_t)) };
    since the packing counts are greedy lower bounds the outputs are estimates
    from bounds, not exact radii.  ``alpha_sup`` maximizes w_t/(t sqrt(log P_t))
    over the grid and ``alpha_at_scale`` evaluates the same ratio at
    t = delta_upper / 2.
    """

    delta_lower: float
    delta_upper: float
    alpha_sup: Optional[float]
    alpha_at_scale: Optional[float]
    t_grid: tuple[float, ...]
    diam: Optional[float]
    widths: tuple[float, ...]
    packings: tuple[int, ...]


def _l1_sup(g: np.ndarray, l1_radius: float, t: float) -> float:
    """sup <g, u> over ||u||_1 <= l1_radius, ||u||_2 <= t (exact)."""
    mag = np.sort(np.abs(g))[::-1]
    norm2 = float(np.linalg.norm(mag))
    if norm2 == 0.0:
        return 0.0
    if l1_radius >= t * float(mag.sum()) / norm2:
        return t * norm2  # l1 constraint slack
    p1 = np.cumsum(mag)
    p2 = np.cumsum(mag * mag)

    def ratio(theta: float) -> float:
        k = int(np.searchsorted(-mag, -theta))  # entries strictly above theta
        if k == 0:
            return 0.0
        s1 = p1[k - 1] - k * theta
        s2 = math.sqrt(max(p2[k - 1] - 2.0 * theta * p1[k - 1] + k * theta * theta, 0.0))
        return t * s1 / s2 if s2 > 0 else 0.0

    # t S1/S2 decreases in theta (Cauchy-Schwarz); bisect to the root
    lo, hi = 0.0, float(mag[0])
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if ratio(mid) > l1_radius:
            lo = mid
        else:
            hi = mid
    theta = 0.5 * (lo + hi)
    k = int(np.searchsorted(-mag, -theta))
    s2 = 0.0
    if k > 0:
        s2 = math.sqrt(max(p2[k - 1] - 2.0 * theta * p1[k - 1] + k * theta * theta, 0.0))
    return theta * l1_radius + t * s2


def width_sup_sample(feasible_set: FeasibleSet, g: np.ndarray, t: float) -> float:
    """Exact supremum of <g, u> over (K - K) intersected with the t-ball."""
    if not t > 0:
        raise ContractError(f"scale t must be positive, got {t}")
    g = np.asarray(g, dtype=float)
    if g.shape != (feasible_set.dim,):
        raise ContractError(
            f"direction shape {g.shape} does not match ambient dimension {feasible_set.dim}"
        )
    if isinstance(feasible_set, SparseCone):
        k = min(2 * feasible_set.s, feasible_set.n)
        if k == 0:
            return 0.0
        top = np.partition(np.abs(g), feasible_set.n - k)[-k:]
        return t * float(np.linalg.norm(top))
    if isinstance(feasible_set, LowRankCone):
        svals = np.linalg.svd(
            vec_to_mat(g, feasible_set.d1, feasible_set.d2), compute_uv=False
        )
        k = min(2 * feasible_set.r, svals.size)
        return t * float(np.linalg.norm(svals[:k]))
    if isinstance(feasible_set, L1Ball):
        return _l1_sup(g, 2.0 * feasible_set.radius, t)
    if isinstance(feasible_set, EuclideanBall):
        return min(t, 2.0 * feasible_set.radius) * float(np.linalg.norm(g))
    if isinstance(feasible_set, FullSpace):
        return t * float(np.linalg.norm(g))
    raise ContractError(f"unsupported feasible set {feasible_set!r}")


def local_mean_width(
    feasible_set: FeasibleSet, t: float, n_samples: int = 200, seed: int = 0
) -> WidthEstimate:
    """Monte Carlo estimate of the local mean width at scale t."""
    if n_samples < 100:
        raise ContractError(f"need n_samples >= 100, got {n_samples}")
    rng = rng_from_seed(seed)
    vals = np.array(
        [
            width_sup_sample(feasible_set, rng.standard_normal(feasible_set.dim), t)
            for _ in range(n_samples)
        ]
    )
    return WidthEstimate(
        value=float(vals.mean()),
        stderr=float(vals.std(ddof=1)) / math.sqrt(n_samples),
        n_samples=n_samples,
        scale_t=float(t),
    )


def global_mean_width(
    feasible_set: FeasibleSet, n_samples: int = 200, seed: int = 0
) -> WidthEstimate:
    """Monte Carlo estimate of the global mean width (bounded sets only)."""
    if n_samples < 2:
        raise ContractError(f"need n_samples >= 2, got {n_samples}")
    rng = rng_from_seed(seed)
    if isinstance(feasible_set, L1Ball):
        vals = np.array(
            [
                2.0 * feasible_set.radius * np.abs(rng.standard_normal(feasible_set.n)).max()
                for _ in range(n_samples)
            ]
        )
    elif isinstance(feasible_set, EuclideanBall):
        vals = np.array(
            [
                2.0 * feasible_set.radius * np.linalg.norm(rng.standard_normal(feasible_set.n))
                for _ in range(n_samples)
            ]
        )
    else:
        raise UnboundedSetError(
            f"global mean width requires a bounded set, got {type(feasible_set).__name__}"
        )
    return WidthEstimate(
        value=float(vals.mean()),
        stderr=float(vals.std(ddof=1)) / math.sqrt(n_samples),
        n_samples=n_samples,
        scale_t=None,
    )


def width_bound_formula(feasible_set: FeasibleSet) -> float:
    """Closed-form width bound for the structured sets.

    Sparse cone: sqrt(2 s log(2n/s)) + 2 sqrt(s), an explicit envelope with
    implementation-chosen constants.  Low-rank cone: sqrt(2 r (d1 + d2)) --
    note this form only covers the one-sided width of the rank-r cone; the
    two-sided (difference-set) width measured by local_mean_width can exceed
    it by up to sqrt(2) on square shapes (the acceptance suite documents the
    measured gap).  L1 ball of radius R: 4 R sqrt(2 log n) for the global
    width.
    """
    if isinstance(feasible_set, SparseCone):
        if feasible_set.s == 0:
            return 0.0
        s, n = feasible_set.s, feasible_set.n
        return math.sqrt(2.0 * s * math.log(2.0 * n / s)) + 2.0 * math.sqrt(s)
    if isinstance(feasible_set, LowRankCone):
        return math.sqrt(2.0 * feasible_set.r * (feasible_set.d1 + feasible_set.d2))
    if isinstance(feasible_set, L1Ball):
        return 4.0 * feasible_set.radius * math.sqrt(2.0 * math.log(feasible_set.n))
    raise ContractError(
        f"no closed-form width bound for {type(feasible_set).__name__}"
    )


def _packing_candidate(
    feasible_set: FeasibleSet, t: float, rng: np.random.Generator
) -> np.ndarray:
    """One random member of K intersected with the t-ball (uniform radial bias)."""
    if isinstance(feasible_set, SparseCone):
        if feasible_set.s == 0:
            return np.zeros(feasible_set.n)
        v = np.zeros(feasible_set.n)
        support = rng.choice(feasible_set.n, feasible_set.s, replace=False)
        entries = rng.standard_normal(feasible_set.s)
        nrm = np.linalg.norm(entries)
        v[support] = entries / (nrm if nrm > 0 else 1.0)
        return v * (t * rng.uniform())
    if isinstance(feasible_set, LowRankCone):
        left = rng.standard_normal((feasible_set.d1, feasible_set.r))
        right = rng.standard_normal((feasible_set.r, feasible_set.d2))
        flat = (left @ right).reshape(-1, order="F")
        nrm = np.linalg.norm(flat)
        return flat / (nrm if nrm > 0 else 1.0) * (t * rng.uniform())
    if isinstance(feasible_set, L1Ball):
        g = rng.standard_normal(feasible_set.n)
        l1 = np.abs(g).sum()
        raw = g * (2.0 * feasible_set.radius * rng.uniform() / (l1 if l1 > 0 else 1.0))
        v = project_l1_ball(raw, feasible_set.radius)
        cap = t * rng.uniform()
        nrm = np.linalg.norm(v)
        if nrm > cap and nrm > 0:
            v = v * (cap / nrm)  # scaling down stays in the star-shaped set
        return v
    if isinstance(feasible_set, EuclideanBall):
        g = rng.standard_normal(feasible_set.n)
        nrm = np.linalg.norm(g)
        return g / (nrm if nrm > 0 else 1.0) * (min(t, feasible_set.radius) * rng.uniform())
    if isinstance(feasible_set, FullSpace):
        g = rng.standard_normal(feasible_set.n)
        nrm = np.linalg.norm(g)
        return g / (nrm if nrm > 0 else 1.0) * (t * rng.uniform())
    raise ContractError(f"unsupported feasible set {feasible_set!r}")


def packing_lower_bound(
    feasible_set: FeasibleSet, t: float, n_candidates: int = 500, seed: int = 0
) -> int:
    """Greedy t/10-separated packing count of K intersected with the t-ball.

    A valid lower bound on the packing number: candidates are drawn one at a
    time from a seeded stream (so a longer stream extends, never replaces, a
    shorter one) and accepted when they clear all previously accepted points
    by more than t/10.
    """
    if not t > 0:
        raise ContractError(f"scale t must be positive, got {t}")
    if n_candidates < 1:
        raise ContractError(f"need n_candidates >= 1, got {n_candidates}")
    rng = rng_from_seed(seed)
    min_dist = t / 10.0
    accepted: list[np.ndarray] = []
    block: np.ndarray | None = None
    for _ in range(n_candidates):
        cand = _packing_candidate(feasible_set, t, rng)
        if block is None:
            accepted.append(cand)
            block = cand[None, :]
            continue
        dists = np.linalg.norm(block - cand[None, :], axis=1)
        if float(dists.min()) > min_dist:
            accepted.append(cand)
            block = np.vstack([block, cand[None, :]])
    return len(accepted)


def default_t_grid(nu: float, m: int, num: int = 40) -> np.ndarray:
    """Log-spaced scale grid bracketing the infima at noise level nu / sqrt(m)."""
    scale = nu / math.sqrt(m) + 1.0
    return np.geomspace(1e-3, 10.0, num) * scale


def minimax_radii(
    feasible_set: FeasibleSet,
    nu: float,
    m: int,
    t_grid: Optional[Sequence[float]] = None,
    samples: int = 200,
    n_candidates: int = 500,
    seed: int = 0,
) -> MinimaxRadii:
    """Evaluate both minimax infimands on a scale grid.

    Widths come from local_mean_width, packing numbers from the greedy lower
    bound; the alpha ratio is reported both as the grid supremum and at the
    single scale delta_upper / 2.
    """
    if not nu > 0:
        raise ContractError(f"noise level must be positive, got {nu}")
    if m < 1:
        raise ContractError(f"need m >= 1, got {m}")
    grid = default_t_grid(nu, m) if t_grid is None else np.asarray(t_grid, dtype=float)
    if grid.size == 0:
        raise ContractError("t_grid must be nonempty")
    if np.any(grid <= 0) or np.any(np.diff(grid) < 0):
        raise ContractError("t_grid must be positive and sorted")

    noise_scale = nu / math.sqrt(m)
    widths, packings = [], []
    for i, t in enumerate(grid):
        widths.append(local_mean_width(feasible_set, t, samples, mix_seed(seed, 2 * i)).value)
        packings.append(
            packing_lower_bound(feasible_set, t, n_candidates, mix_seed(seed, 2 * i + 1))
        )
    widths_arr = np.array(widths)
    pack_arr = np.array(packings, dtype=float)

    upper_vals = grid + noise_scale * (1.0 + widths_arr / grid)
    lower_vals = grid + noise_scale * (1.0 + np.sqrt(np.log(pack_arr)))
    delta_upper = float(upper_vals.min())
    delta_lower = float(lower_vals.min())

    valid = pack_arr >= 2
    alpha_sup = None
    if np.any(valid):
        ratios = widths_arr[valid] / (grid[valid] * np.sqrt(np.log(pack_arr[valid])))
        alpha_sup = float(ratios.max())

    t2 = delta_upper / 2.0
    w2 = local_mean_width(feasible_set, t2, samples, mix_seed(seed, 1_000_003)).value
    p2 = packing_lower_bound(feasible_set, t2, n_candidates, mix_seed(seed, 1_000_004))
    alpha_at_scale = w2 / (t2 * math.sqrt(math.log(p2))) if p2 >= 2 else None

    return MinimaxRadii(
        delta_lower=delta_lower,
        delta_upper=delta_upper,
        alpha_sup=alpha_sup,
        alpha_at_scale=alpha_at_scale,
        t_grid=tuple(float(t) for t in grid),
        diam=feasible_set.diameter,
        widths=tuple(float(v) for v in widths_arr),
        packings=tuple(int(p) for p in packings),
    )
