"""The acceptance suite: pinned desk-scale experiments with one pass/fail
line per criterion.  Shared by the ``geoest bench`` subcommand and the
pytest acceptance module.

Three sub-checks are known to fail and are reported honestly rather than
loosened: the fitted error-decay slopes of the one-bit sparse experiment and
of the noiseless completion experiment land below the pinned [-0.6, -0.4]
window (the estimators decay *faster* than the guaranteed rate at these
scales), and the measured two-sided low-rank width exceeds the closed-form
constant sqrt(2 r (d1 + d2)) (which only covers the one-sided width).  The
lines carry the measured values; companion checks with the corrected
quantities pass.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np

from .bench import (
    CompletionConfig,
    ExperimentConfig,
    ExperimentResult,
    run_completion_experiment,
    run_experiment,
    write_result_files,
)
from .geometry import local_mean_width, minimax_radii, width_bound_formula
from .model_params import compute_cf, quadrature_params
from .projections import hard_threshold, project_l1_ball, svd_hard_threshold
from .sampler import rng_from_seed
from .types import (
    FullSpace,
    GaussianNoise,
    Identity,
    L1Ball,
    LowRankCone,
    ObservationModel,
    OddMonomial,
    Sign,
    SparseCone,
)

__all__ = [
    "CheckResult",
    "CriterionReport",
    "run_all",
    "l1_projection_oracle",
    "sparse_projection_oracle",
    "jacobi_eigenvalues",
]

SLOPE_WINDOW = (-0.6, -0.4)


@dataclass
class CheckResult:
    label: str
    passed: bool
    detail: str


@dataclass
class CriterionReport:
    name: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, label: str, passed: bool, detail: str) -> None:
        self.checks.append(CheckResult(label, bool(passed), detail))

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        fails = "; ".join(f"{c.label}: {c.detail}" for c in self.checks if not c.passed)
        suffix = f" -- {fails}" if fails else ""
        return f"[{status}] {self.name}{suffix}"


# ---------------------------------------------------------------------------
# pinned experiment configs
# ---------------------------------------------------------------------------

MU_ONEBIT = math.sqrt(2.0 / math.pi)


def prop1_config(variant: str) -> ExperimentConfig:
    models = {
        "identity": (ObservationModel(Identity()), 1001),
        "noisy": (ObservationModel(Identity(), pre_noise=GaussianNoise(1.0)), 1002),
        "sign": (ObservationModel(Sign()), 1003),
    }
    model, seed = models[variant]
    return ExperimentConfig(
        n=50,
        feasible_set=FullSpace(50),
        model=model,
        norm_x=1.0,
        m_grid=(100,),
        trials=2000,
        master_seed=seed,
        metrics=("linear_error",),
        width_samples=100,
    )


PROP1_TARGETS = {
    "identity": (2.0 + 1.0 * 49) / 100.0,
    "noisy": (3.0 + 2.0 * 49) / 100.0,
    "sign": ((1.0 - 2.0 / math.pi) + 1.0 * 49) / 100.0,
}


def onebit_config() -> ExperimentConfig:
    return ExperimentConfig(
        n=500,
        feasible_set=SparseCone(500, 5),
        model=ObservationModel(Sign()),
        norm_x=1.0,
        m_grid=(100, 200, 400, 800, 1600, 3200),
        trials=200,
        master_seed=2001,
        metrics=("linear_error", "projected_error", "direction_error"),
        width_samples=500,
    )


def l1_config() -> ExperimentConfig:
    return ExperimentConfig(
        n=2000,
        feasible_set=L1Ball(2000, 2.0),  # sqrt(s) ball with s = 4
        model=ObservationModel(Identity(), pre_noise=GaussianNoise(1.0)),
        norm_x=1.0,
        m_grid=(50, 100, 200, 400, 800),
        trials=200,
        master_seed=3001,
        metrics=("projected_error",),
        width_samples=200,
    )


def completion_config(noise_nu: float) -> CompletionConfig:
    return CompletionConfig(
        d=100,
        r=2,
        p_grid=(0.1, 0.2, 0.4),
        zeta=1.0,
        noise_nu=noise_nu,
        trials=50,
        master_seed=4001 if noise_nu == 0 else 4002,
    )


_experiment_cache: dict[str, ExperimentResult] = {}
_completion_cache: dict[str, dict] = {}


def cached_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    key = config.experiment_id
    if key not in _experiment_cache:
        _experiment_cache[key] = run_experiment(config, threads=threads)
    return _experiment_cache[key]


def cached_completion(config: CompletionConfig, threads: Optional[int] = None) -> dict:
    key = config.experiment_id
    if key not in _completion_cache:
        _completion_cache[key] = run_completion_experiment(config, threads=threads)
    return _completion_cache[key]


# ---------------------------------------------------------------------------
# independent oracles (criterion 7 and the projection tests)
# ---------------------------------------------------------------------------


def l1_projection_oracle(v: np.ndarray, radius: float) -> np.ndarray:
    """Exhaustive KKT/active-set enumeration over the faces of the l1 ball."""
    v = np.asarray(v, dtype=float)
    if np.abs(v).sum() <= radius:
        return v.copy()
    n = v.size
    best, best_dist = None, np.inf
    for mask in range(1, 1 << n):
        idx = np.array([i for i in range(n) if mask >> i & 1])
        mags = np.abs(v[idx])
        theta = (mags.sum() - radius) / idx.size
        if theta < 0 or np.any(mags <= theta):
            continue
        z = np.zeros(n)
        z[idx] = np.sign(v[idx]) * (mags - theta)
        dist = float(np.linalg.norm(v - z))
        if dist < best_dist:
            best, best_dist = z, dist
    return best


def sparse_projection_oracle(v: np.ndarray, s: int) -> np.ndarray:
    """Argmin over all size-s supports of the distance to v."""
    v = np.asarray(v, dtype=float)
    best, best_dist = None, np.inf
    for support in combinations(range(v.size), s):
        z = np.zeros_like(v)
        z[list(support)] = v[list(support)]
        dist = float(np.linalg.norm(v - z))
        if dist < best_dist:
            best, best_dist = z, dist
    return best


def jacobi_eigenvalues(sym: np.ndarray, sweeps: int = 60) -> np.ndarray:
    """Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.

    Deliberately independent of the LAPACK SVD path it cross-checks.
    """
    a = np.array(sym, dtype=float)
    n = a.shape[0]
    for _ in range(sweeps):
        off = math.sqrt(sum(a[p, q] ** 2 for p in range(n) for q in range(n) if p != q))
        if off < 1e-14 * (1.0 + abs(a).max()):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p, q]) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * a[p, q])
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k, p], a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p, k], a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
    return np.sort(np.diag(a))[::-1]


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def criterion_1(threads: Optional[int] = None) -> CriterionReport:
    """Exact mean-squared-error identity of the linear estimator."""
    rep = CriterionReport("criterion 01 linear-estimator MSE identity")
    for variant in ("identity", "noisy", "sign"):
        result = cached_experiment(prop1_config(variant), threads)
        agg = result.per_m[0]["metrics"]["linear_error_sq"]
        target = PROP1_TARGETS[variant]
        dev = abs(agg["mean"] - target)
        ok = dev <= 4 * agg["stderr"]
        rep.add(
            variant,
            ok,
            f"mean squared error {agg['mean']:.5f} vs target {target:.5f} "
            f"(|dev| = {dev:.2e}, 4se = {4 * agg['stderr']:.2e})",
        )
    return rep


def criterion_2() -> CriterionReport:
    rep = CriterionReport("criterion 02 one-bit mu by quadrature")
    params = quadrature_params(ObservationModel(Sign()), 1.0, order=40)
    dev = abs(params.mu - MU_ONEBIT)
    rep.add("mu", dev <= 1e-8, f"quadrature mu = {params.mu:.12f}, |dev| = {dev:.2e}")
    return rep


def criterion_3(threads: Optional[int] = None) -> CriterionReport:
    """One-bit sparse recovery: direction-error decay and the binary-model bound."""
    rep = CriterionReport("criterion 03 one-bit sparse recovery rate")
    result = cached_experiment(onebit_config(), threads)
    slope = result.fits["direction_error"]["slope"]
    lo, hi = SLOPE_WINDOW
    rep.add(
        "slope",
        lo <= slope <= hi,
        f"fitted direction-error slope {slope:.3f} vs window [{lo}, {hi}] "
        "(the projected estimator decays faster than the guaranteed rate here)",
    )
    worst = -np.inf
    ok = True
    for entry in result.per_m:
        agg = entry["metrics"]["direction_error"]
        bound = entry["bounds"]["binary_direction"]
        margin = agg["mean"] - (bound + 4 * agg["stderr"])
        worst = max(worst, margin)
        ok = ok and margin <= 0
    rep.add("binary_bound", ok, f"worst (mean - bound - 4se) = {worst:.3f} over the m grid")
    return rep


def criterion_4(threads: Optional[int] = None) -> CriterionReport:
    rep = CriterionReport("criterion 04 projection dominance")
    result = cached_experiment(onebit_config(), threads)
    worst = -np.inf
    ok = True
    for entry in result.per_m:
        gap = entry["metrics"]["projected_error"]["mean"] - entry["metrics"]["linear_error"]["mean"]
        worst = max(worst, gap)
        ok = ok and gap <= 0
    rep.add("dominance", ok, f"worst (projected - linear) mean gap = {worst:.4f}")
    return rep


def criterion_5(threads: Optional[int] = None) -> CriterionReport:
    """Masked low-rank completion: rate-bound envelope and decay slope."""
    rep = CriterionReport("criterion 05 matrix completion")
    lo, hi = SLOPE_WINDOW
    for noise_nu, tag in ((0.0, "noiseless"), (1.0, "noisy")):
        result = cached_completion(completion_config(noise_nu), threads)
        ok = True
        worst_ratio = 0.0
        for entry in result["per_p"]:
            ratio = entry["error"]["mean"] / entry["bound"]
            worst_ratio = max(worst_ratio, ratio)
            ok = ok and entry["error"]["mean"] <= entry["bound"] and entry["m_ge_dlogd"]
        rep.add(f"{tag}_bound", ok, f"worst error/bound ratio = {worst_ratio:.3f}")
        slope = result["fit"]["slope"]
        note = " (masked noiseless error vanishes as p -> 1, steepening the decay)" if noise_nu == 0 else ""
        rep.add(f"{tag}_slope", lo <= slope <= hi, f"fitted slope {slope:.3f} vs window [{lo}, {hi}]{note}")
    return rep


def criterion_6(threads: Optional[int] = None) -> CriterionReport:
    """l1-ball experiment: the grid-minimized two-step bound and the
    global-width bound dominate the observed error at every m."""
    rep = CriterionReport("criterion 06 l1-ball bound satisfaction")
    result = cached_experiment(l1_config(), threads)
    for key in ("two_step", "global_width"):
        ok = True
        worst = -np.inf
        for entry in result.per_m:
            agg = entry["metrics"]["projected_error"]
            margin = agg["mean"] - (entry["bounds"][key] + 4 * agg["stderr"])
            worst = max(worst, margin)
            ok = ok and margin <= 0
        rep.add(key, ok, f"worst (mean - bound - 4se) = {worst:.3f}")
    return rep


def criterion_7() -> CriterionReport:
    rep = CriterionReport("criterion 07 projection oracles")
    rng = rng_from_seed(7001)

    worst = 0.0
    for _ in range(1000):
        n = int(rng.integers(2, 7))
        v = rng.standard_normal(n) * float(rng.uniform(0.5, 3.0))
        radius = float(rng.uniform(0.2, 2.0))
        got = project_l1_ball(v, radius)
        want = l1_projection_oracle(v, radius)
        worst = max(worst, float(np.max(np.abs(got - want))))
    rep.add("l1_vs_kkt", worst <= 1e-9, f"max deviation {worst:.2e} over 1000 instances")

    exact = True
    for _ in range(1000):
        v = rng.standard_normal(8)
        if not np.array_equal(hard_threshold(v, 3), sparse_projection_oracle(v, 3)):
            exact = False
            break
    rep.add("hard_threshold_vs_enumeration", exact, "exact support match on 1000 instances")

    worst = 0.0
    for _ in range(200):
        mat = rng.standard_normal((5, 4))
        eigs = jacobi_eigenvalues(mat.T @ mat)
        oracle = math.sqrt(max(eigs[2] + eigs[3], 0.0))
        actual = float(np.linalg.norm(mat - svd_hard_threshold(mat, 2)))
        worst = max(worst, abs(actual - oracle))
    rep.add("svd_vs_eckart_young", worst <= 1e-9, f"max deviation {worst:.2e} over 200 instances")
    return rep


def criterion_8() -> CriterionReport:
    rep = CriterionReport("criterion 08 geometry invariants")

    # cone homogeneity of w_t / t, and w_t <= t sqrt(n)
    homogeneity_ok, sqrtn_ok = True, True
    for i, cone in enumerate((SparseCone(100, 5), LowRankCone(20, 15, 2))):
        base = local_mean_width(cone, 1.0, 400, seed=8100 + i)
        for j, t in enumerate((0.5, 2.0)):
            est = local_mean_width(cone, t, 400, seed=8200 + 10 * i + j)
            tol = 3.0 * math.sqrt((est.stderr / t) ** 2 + base.stderr**2)
            homogeneity_ok &= abs(est.value / t - base.value) <= tol
            sqrtn_ok &= est.value <= t * math.sqrt(cone.dim) + 3 * est.stderr
        sqrtn_ok &= base.value <= math.sqrt(cone.dim) + 3 * base.stderr
    rep.add("cone_homogeneity", homogeneity_ok, "w_t / t constant over t in {0.5, 1, 2} (3se)")
    rep.add("w_t_le_t_sqrt_n", sqrtn_ok, "w_t <= t sqrt(n) + 3se on all tested cones")

    floor = math.sqrt(2.0 / math.pi)
    floor_ok = True
    detail = []
    for i, cone in enumerate((FullSpace(1), SparseCone(5, 1), LowRankCone(2, 2, 1))):
        est = local_mean_width(cone, 1.0, 2000, seed=8300 + i)
        floor_ok &= est.value >= floor - 3 * est.stderr
        detail.append(f"{type(cone).__name__}: {est.value:.3f}")
    rep.add("cone_floor", floor_ok, f"w_1 >= sqrt(2/pi) - 3se ({'; '.join(detail)})")

    lr = LowRankCone(50, 50, 2)
    est = local_mean_width(lr, 1.0, 400, seed=8400)
    formula = width_bound_formula(lr)  # sqrt(2 r (d1 + d2)) = 20
    rep.add(
        "low_rank_width_formula",
        est.value <= formula + 3 * est.stderr,
        f"measured two-sided w_1 = {est.value:.2f} (se {est.stderr:.2f}) vs "
        f"sqrt(2r(d1+d2)) = {formula:.2f}; the formula covers only the one-sided width",
    )
    corrected = math.sqrt(2.0 * (2 * lr.r) * (lr.d1 + lr.d2))
    rep.add(
        "low_rank_width_difference_rank_form",
        est.value <= corrected + 3 * est.stderr,
        f"measured {est.value:.2f} <= sqrt(2*(2r)*(d1+d2)) = {corrected:.2f}",
    )

    sp = SparseCone(1000, 10)
    est = local_mean_width(sp, 1.0, 400, seed=8500)
    ref = math.sqrt(sp.s * math.log(2 * sp.n / sp.s))
    rep.add(
        "sparse_width_window",
        0.5 * ref - 3 * est.stderr <= est.value <= 2.0 * ref + 3 * est.stderr,
        f"w_1 = {est.value:.2f} vs window [{0.5 * ref:.2f}, {2 * ref:.2f}]",
    )

    alpha_ok = True
    detail = []
    for s in (1, 2):
        radii = minimax_radii(
            SparseCone(20, s), nu=1.0, m=50, samples=200, n_candidates=800, seed=8600 + s
        )
        alpha_ok &= radii.alpha_at_scale is not None and radii.alpha_at_scale <= 10.0
        detail.append(f"s={s}: alpha = {radii.alpha_at_scale:.2f}")
    rep.add("alpha_at_scale", alpha_ok, "; ".join(detail))
    return rep


def criterion_9() -> CriterionReport:
    rep = CriterionReport("criterion 09 link-constant rescaling inequality")
    links = (("sign", Sign()), ("identity", Identity()), ("cubic", OddMonomial(3)))
    grid = (0.1, 1.0, 10.0)
    for name, link in links:
        c_f = compute_cf(link)
        worst = -np.inf
        ok = True
        for norm_x in grid:
            for nu in grid:
                params = quadrature_params(
                    ObservationModel(link, pre_noise=GaussianNoise(nu)), norm_x
                )
                lhs = params.require_lambda() * (params.sigma + params.eta)
                rhs = c_f * (norm_x + nu)
                worst = max(worst, lhs / rhs)
                ok = ok and lhs <= rhs * (1 + 1e-9)
        rep.add(name, ok, f"C_f = {c_f:.3f}, worst lhs/rhs = {worst:.3f}")
    return rep


def criterion_10() -> CriterionReport:
    """Byte-identical result files across reruns and across worker counts."""
    rep = CriterionReport("criterion 10 determinism")
    config = prop1_config("sign")

    def _file_bytes(threads: int, tag: str) -> tuple[bytes, bytes]:
        result = run_experiment(config, threads=threads)
        with tempfile.TemporaryDirectory(prefix=f"geoest-{tag}-") as tmp:
            json_path, csv_path = write_result_files(
                tmp, result.experiment_id, result.to_dict(), result.trial_values
            )
            with open(json_path, "rb") as fh:
                json_bytes = fh.read()
            with open(csv_path, "rb") as fh:
                csv_bytes = fh.read()
        return json_bytes, csv_bytes

    env_threads = os.environ.pop("GEOEST_THREADS", None)
    try:
        j1, c1 = _file_bytes(1, "a")
        j2, c2 = _file_bytes(1, "b")
        j8, c8 = _file_bytes(8, "c")
    finally:
        if env_threads is not None:
            os.environ["GEOEST_THREADS"] = env_threads
    rep.add("rerun", j1 == j2 and c1 == c2, "two single-threaded runs byte-identical")
    rep.add("threads", j1 == j8 and c1 == c8, "1-thread and 8-thread runs byte-identical")
    return rep


def whp_quantile_check(threads: Optional[int] = None) -> CriterionReport:
    """95th-percentile error below the high-probability bound (sub-gaussian
    tail scaled so the stated failure probability is at most 5%)."""
    rep = CriterionReport("extra    high-probability quantile bound")
    result = cached_experiment(onebit_config(), threads)
    ok = True
    worst = -np.inf
    for entry in result.per_m:
        agg = entry["metrics"]["projected_error"]
        bound = entry["bounds"].get("whp_q95")
        if bound is None:
            ok = False
            continue
        worst = max(worst, agg["q95"] - bound)
        ok = ok and agg["q95"] <= bound
    rep.add("q95", ok, f"worst (q95 - bound) = {worst:.3f} over the m grid")
    return rep


def run_all(out_dir: Optional[str] = None, threads: Optional[int] = None) -> list[CriterionReport]:
    """Run every criterion; optionally write the experiment result files."""
    reports = [
        criterion_1(threads),
        criterion_2(),
        criterion_3(threads),
        criterion_4(threads),
        criterion_5(threads),
        criterion_6(threads),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
        whp_quantile_check(threads),
    ]
    if out_dir is not None:
        for config in (onebit_config(), l1_config()):
            result = cached_experiment(config, threads)
            write_result_files(out_dir, result.experiment_id, result.to_dict(), result.trial_values)
        for nu in (0.0, 1.0):
            result = dict(cached_completion(completion_config(nu), threads))
            trial_values = result.pop("_trial_values")
            write_result_files(out_dir, result["experiment_id"], result, trial_values)
    return reports
