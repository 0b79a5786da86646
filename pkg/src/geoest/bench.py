"""Reproducible experiment harness: trial sweeps over the number of
observations, error aggregation, theoretical bound evaluation, scaling-law
fits, and machine-readable results.

Determinism contract: every trial draws its streams from seeds derived as
mix(mix(master_seed, m), trial_index), so results are byte-identical across
runs and across worker counts; aggregation always walks trials in index
order.  Result files embed the full config echo, all derived seeds and the
code version.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .errors import ConfigError, ContractError, DegenerateScaleError
from .estimators import completion_estimator, linear_estimator
from .geometry import default_t_grid, global_mean_width, local_mean_width
from .model_params import closed_form_params, monte_carlo_params, quadrature_params
from .projections import project
from .sampler import (
    gen_mask,
    gen_measurements,
    gen_observations,
    mix_seed,
    observe_completion,
    rng_from_seed,
)
from .types import (
    EuclideanBall,
    FeasibleSet,
    FullSpace,
    GaussianNoise,
    Identity,
    L1Ball,
    LinearCombination,
    LogisticNoise,
    LowRankCone,
    ModelParams,
    ObservationModel,
    OddMonomial,
    Sign,
    SparseCone,
    contains,
    noise_variance,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "CompletionConfig",
    "run_trial",
    "run_experiment",
    "evaluate_bounds",
    "run_completion_experiment",
    "set_from_dict",
    "set_to_dict",
    "model_from_dict",
    "model_to_dict",
    "format_float",
    "write_result_files",
]

METRICS = ("linear_error", "projected_error", "direction_error", "scaled_error")
_METRIC_ORDER = ("linear_error", "linear_error_sq", "projected_error", "direction_error", "scaled_error")

_SALT_SIGNAL, _SALT_BATCH, _SALT_OBS = 0, 1, 2
_SALT_PARAMS = 101
_SALT_WIDTH = 211
_SALT_WIDTH_ONE = 223
_SALT_WIDTH_GLOBAL = 227

_WHP_FAIL_PROB = 0.05


# ---------------------------------------------------------------------------
# JSON <-> domain objects
# ---------------------------------------------------------------------------


def set_to_dict(feasible_set: FeasibleSet) -> dict:
    if isinstance(feasible_set, SparseCone):
        return {"kind": "sparse", "n": feasible_set.n, "s": feasible_set.s}
    if isinstance(feasible_set, LowRankCone):
        return {
            "kind": "low_rank",
            "d1": feasible_set.d1,
            "d2": feasible_set.d2,
            "r": feasible_set.r,
        }
    if isinstance(feasible_set, L1Ball):
        return {"kind": "l1_ball", "n": feasible_set.n, "radius": feasible_set.radius}
    if isinstance(feasible_set, EuclideanBall):
        return {"kind": "euclidean_ball", "n": feasible_set.n, "radius": feasible_set.radius}
    if isinstance(feasible_set, FullSpace):
        return {"kind": "full_space", "n": feasible_set.n}
    raise ConfigError(f"unknown feasible set {feasible_set!r}")


def set_from_dict(d: dict) -> FeasibleSet:
    try:
        kind = d["kind"]
        if kind == "sparse":
            return SparseCone(n=int(d["n"]), s=int(d["s"]))
        if kind == "low_rank":
            return LowRankCone(d1=int(d["d1"]), d2=int(d["d2"]), r=int(d["r"]))
        if kind == "l1_ball":
            return L1Ball(n=int(d["n"]), radius=float(d["radius"]))
        if kind == "euclidean_ball":
            return EuclideanBall(n=int(d["n"]), radius=float(d["radius"]))
        if kind == "full_space":
            return FullSpace(n=int(d["n"]))
    except (KeyError, TypeError, ValueError, ContractError) as exc:
        raise ConfigError(f"bad feasible-set entry {d!r}: {exc}") from exc
    raise ConfigError(f"set.kind: unknown kind {d.get('kind')!r}")


def _link_to_dict(link) -> dict:
    if isinstance(link, Identity):
        return {"kind": "identity"}
    if isinstance(link, Sign):
        return {"kind": "sign"}
    if isinstance(link, OddMonomial):
        return {"kind": "odd_monomial", "k": link.k}
    if isinstance(link, LinearCombination):
        return {
            "kind": "linear_combination",
            "weights": list(link.weights),
            "parts": [_link_to_dict(p) for p in link.parts],
        }
    raise ConfigError(f"unknown link {link!r}")


def _link_from_dict(d: dict):
    try:
        kind = d["kind"]
        if kind == "identity":
            return Identity()
        if kind == "sign":
            return Sign()
        if kind == "odd_monomial":
            return OddMonomial(k=int(d["k"]))
        if kind == "linear_combination":
            return LinearCombination(
                weights=tuple(float(w) for w in d["weights"]),
                parts=tuple(_link_from_dict(p) for p in d["parts"]),
            )
    except (KeyError, TypeError, ValueError, ContractError) as exc:
        raise ConfigError(f"bad link entry {d!r}: {exc}") from exc
    raise ConfigError(f"model.link.kind: unknown kind {d.get('kind')!r}")


def _noise_to_dict(dist) -> Optional[dict]:
    if dist is None:
        return None
    if isinstance(dist, GaussianNoise):
        return {"kind": "gaussian", "nu": dist.nu}
    if isinstance(dist, LogisticNoise):
        return {"kind": "logistic", "scale": dist.scale}
    raise ConfigError(f"unknown noise {dist!r}")


def _noise_from_dict(d):
    if d is None:
        return None
    try:
        if d["kind"] == "gaussian":
            return GaussianNoise(nu=float(d["nu"]))
        if d["kind"] == "logistic":
            return LogisticNoise(scale=float(d["scale"]))
    except (KeyError, TypeError, ValueError, ContractError) as exc:
        raise ConfigError(f"bad noise entry {d!r}: {exc}") from exc
    raise ConfigError(f"noise.kind: unknown kind {d.get('kind')!r}")


def model_to_dict(model: ObservationModel) -> dict:
    return {
        "link": _link_to_dict(model.link),
        "pre_noise": _noise_to_dict(model.pre_noise),
        "post_noise": _noise_to_dict(model.post_noise),
    }


def model_from_dict(d: dict) -> ObservationModel:
    if "link" not in d:
        raise ConfigError("model: missing 'link'")
    return ObservationModel(
        link=_link_from_dict(d["link"]),
        pre_noise=_noise_from_dict(d.get("pre_noise")),
        post_noise=_noise_from_dict(d.get("post_noise")),
    )


# ---------------------------------------------------------------------------
# experiment configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    n: int
    feasible_set: FeasibleSet
    model: ObservationModel
    norm_x: float
    m_grid: tuple[int, ...]
    trials: int
    master_seed: int
    metrics: tuple[str, ...] = ("linear_error", "projected_error")
    fixed_signal: Optional[tuple[float, ...]] = None  # None -> random on the set
    t_grid: Optional[tuple[float, ...]] = None  # None -> default rule
    width_samples: int = 200
    param_method: str = "auto"  # auto | closed_form | quadrature | monte_carlo
    param_order: int = 40
    param_mc_samples: int = 1_000_000

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "set": set_to_dict(self.feasible_set),
            "model": model_to_dict(self.model),
            "norm_x": self.norm_x,
            "signal": (
                {"kind": "random"}
                if self.fixed_signal is None
                else {"kind": "fixed", "values": list(self.fixed_signal)}
            ),
            "m_grid": list(self.m_grid),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "metrics": list(self.metrics),
            "t_grid": None if self.t_grid is None else list(self.t_grid),
            "width_samples": self.width_samples,
            "params": {
                "method": self.param_method,
                "order": self.param_order,
                "mc_samples": self.param_mc_samples,
            },
        }

    @staticmethod
    def from_dict(d: dict) -> "ExperimentConfig":
        for key in ("n", "set", "model", "norm_x", "m_grid", "trials", "master_seed"):
            if key not in d:
                raise ConfigError(f"config: missing required key {key!r}")
        signal = d.get("signal", {"kind": "random"})
        if signal.get("kind") == "random":
            fixed = None
        elif signal.get("kind") == "fixed":
            try:
                fixed = tuple(float(v) for v in signal["values"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigError(f"signal.values: {exc}") from exc
        else:
            raise ConfigError(f"signal.kind: unknown kind {signal.get('kind')!r}")
        params = d.get("params", {})
        try:
            return ExperimentConfig(
                n=int(d["n"]),
                feasible_set=set_from_dict(d["set"]),
                model=model_from_dict(d["model"]),
                norm_x=float(d["norm_x"]),
                m_grid=tuple(int(m) for m in d["m_grid"]),
                trials=int(d["trials"]),
                master_seed=int(d["master_seed"]),
                metrics=tuple(d.get("metrics", ["linear_error", "projected_error"])),
                fixed_signal=fixed,
                t_grid=None if d.get("t_grid") is None else tuple(float(t) for t in d["t_grid"]),
                width_samples=int(d.get("width_samples", 200)),
                param_method=str(params.get("method", "auto")),
                param_order=int(params.get("order", 40)),
                param_mc_samples=int(params.get("mc_samples", 1_000_000)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config: {exc}") from exc

    @property
    def experiment_id(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _nu_total(model: ObservationModel) -> float:
    return math.sqrt(noise_variance(model.pre_noise) + noise_variance(model.post_noise))


def compute_params(config: ExperimentConfig) -> ModelParams:
    """Model parameters per the configured method; 'auto' prefers closed form,
    then quadrature, with Monte Carlo as the fallback for logistic pre-noise."""
    method = config.param_method
    if method not in ("auto", "closed_form", "quadrature", "monte_carlo"):
        raise ConfigError(f"params.method: unknown method {method!r}")
    if method in ("auto", "closed_form"):
        params = closed_form_params(config.model, config.norm_x)
        if params is not None:
            return params
        if method == "closed_form":
            raise ConfigError("params.method=closed_form but no closed form exists for this model")
    if method in ("auto", "quadrature") and not isinstance(config.model.pre_noise, LogisticNoise):
        return quadrature_params(config.model, config.norm_x, config.param_order)
    if method == "quadrature":
        raise ConfigError("params.method=quadrature is unavailable with logistic pre-noise")
    return monte_carlo_params(
        config.model,
        config.norm_x,
        config.param_mc_samples,
        mix_seed(config.master_seed, _SALT_PARAMS),
    )


@dataclass(frozen=True)
class _Context:
    config: ExperimentConfig
    params: ModelParams
    fixed_x: Optional[np.ndarray]


def validate_config(config: ExperimentConfig) -> _Context:
    """Check the config contract and precompute the model parameters."""
    c = config
    if c.feasible_set.dim != c.n:
        raise ConfigError(f"set dimension {c.feasible_set.dim} does not match n={c.n}")
    if not c.m_grid or any(m < 1 for m in c.m_grid):
        raise ConfigError("m_grid must be a nonempty list of positive integers")
    if c.trials < 1:
        raise ConfigError("trials must be >= 1")
    if not c.metrics or any(metric not in METRICS for metric in c.metrics):
        raise ConfigError(f"metrics must be a nonempty subset of {METRICS}")
    if not c.norm_x > 0:
        raise ConfigError("norm_x must be positive (the trial targets use x / ||x||)")
    if c.t_grid is not None and (
        len(c.t_grid) == 0 or any(t <= 0 for t in c.t_grid) or list(c.t_grid) != sorted(c.t_grid)
    ):
        raise ConfigError("t_grid must be positive and sorted")
    if c.width_samples < 100:
        raise ConfigError("width_samples must be >= 100 (the width estimator's contract)")

    params = compute_params(c)
    if abs(params.mu) < 1e-12:
        raise ConfigError(
            "degenerate scale: mu is numerically zero for this model, the "
            "estimator targets mu*xbar = 0"
        )
    if "scaled_error" in c.metrics:
        try:
            params.require_lambda()
        except DegenerateScaleError as exc:
            raise ConfigError(str(exc)) from exc

    fixed_x = None
    if c.fixed_signal is not None:
        fixed_x = np.asarray(c.fixed_signal, dtype=float)
        if fixed_x.shape != (c.n,):
            raise ConfigError(f"fixed signal length {fixed_x.size} does not match n={c.n}")
        nrm = float(np.linalg.norm(fixed_x))
        if abs(nrm - c.norm_x) > 1e-9 * max(1.0, c.norm_x):
            raise ConfigError(f"fixed signal norm {nrm} does not match norm_x={c.norm_x}")
        if not contains(c.feasible_set, params.mu * fixed_x / nrm, 1e-9):
            raise ConfigError("fixed signal violates the feasibility convention mu*xbar in K")
    else:
        _check_random_signal_feasible(c.feasible_set, params.mu)
    return _Context(config=c, params=params, fixed_x=fixed_x)


def _check_random_signal_feasible(feasible_set: FeasibleSet, mu: float) -> None:
    if isinstance(feasible_set, SparseCone) and feasible_set.s == 0:
        raise ConfigError("cannot draw a nonzero random signal on a sparsity-0 cone")
    if isinstance(feasible_set, L1Ball) and (feasible_set.radius / abs(mu)) ** 2 < 1:
        raise ConfigError(
            "l1 ball too small for the feasibility convention: need radius >= |mu|"
        )
    if isinstance(feasible_set, EuclideanBall) and abs(mu) > feasible_set.radius + 1e-12:
        raise ConfigError("euclidean ball too small for the feasibility convention")


def gen_signal(feasible_set: FeasibleSet, norm_x: float, mu: float, seed: int) -> np.ndarray:
    """Random signal with ||x||_2 = norm_x whose direction satisfies mu*xbar in K.

    Sparse cone: uniform support, Gaussian entries.  Low-rank cone: Gaussian
    factors.  L1 ball: vertex-biased mixture over power-of-two sparsities k
    with sqrt(k) |mu| <= radius, so feasibility is automatic.  Balls and full
    space: uniform direction.
    """
    rng = rng_from_seed(seed)
    if isinstance(feasible_set, SparseCone):
        v = np.zeros(feasible_set.n)
        support = rng.choice(feasible_set.n, feasible_set.s, replace=False)
        entries = rng.standard_normal(feasible_set.s)
        v[support] = entries
    elif isinstance(feasible_set, LowRankCone):
        left = rng.standard_normal((feasible_set.d1, feasible_set.r))
        right = rng.standard_normal((feasible_set.r, feasible_set.d2))
        v = (left @ right).reshape(-1, order="F")
    elif isinstance(feasible_set, L1Ball):
        k_max = max(1, min(feasible_set.n, int((feasible_set.radius / abs(mu)) ** 2 + 1e-9)))
        sparsities = []
        k = 1
        while k <= k_max:
            sparsities.append(k)
            k *= 2
        k = sparsities[rng.integers(0, len(sparsities))]
        v = np.zeros(feasible_set.n)
        support = rng.choice(feasible_set.n, k, replace=False)
        v[support] = rng.standard_normal(k)
    else:
        v = rng.standard_normal(feasible_set.dim)
    nrm = float(np.linalg.norm(v))
    if nrm == 0.0:  # probability-zero redraw guard
        v[0] = 1.0
        nrm = 1.0
    return v * (norm_x / nrm)


# ---------------------------------------------------------------------------
# trials
# ---------------------------------------------------------------------------


def _trial_seed(master_seed: int, m: int, trial_index: int) -> int:
    return mix_seed(mix_seed(master_seed, m), trial_index)


def _run_trial(ctx: _Context, m: int, trial_index: int) -> dict[str, float]:
    c = ctx.config
    tseed = _trial_seed(c.master_seed, m, trial_index)
    if ctx.fixed_x is not None:
        x = ctx.fixed_x
    else:
        x = gen_signal(c.feasible_set, c.norm_x, ctx.params.mu, mix_seed(tseed, _SALT_SIGNAL))
    xbar = x / c.norm_x
    target = ctx.params.mu * xbar

    batch = gen_measurements(c.n, m, mix_seed(tseed, _SALT_BATCH))
    y = gen_observations(batch, x, c.model, mix_seed(tseed, _SALT_OBS))
    xlin = linear_estimator(batch, y)

    out: dict[str, float] = {}
    if "linear_error" in c.metrics:
        err = float(np.linalg.norm(xlin - target))
        out["linear_error"] = err
        out["linear_error_sq"] = err * err
    if any(k in c.metrics for k in ("projected_error", "direction_error", "scaled_error")):
        xproj = project(c.feasible_set, xlin)
        if "projected_error" in c.metrics:
            out["projected_error"] = float(np.linalg.norm(xproj - target))
        if "direction_error" in c.metrics:
            nrm = float(np.linalg.norm(xproj))
            # a zero projection cannot be normalized; record the failure honestly
            out["direction_error"] = (
                float(np.linalg.norm(xproj / nrm - xbar)) if nrm > 0 else float("nan")
            )
        if "scaled_error" in c.metrics:
            lam = ctx.params.require_lambda()
            out["scaled_error"] = float(np.linalg.norm(lam * xproj - x))
    return out


def run_trial(config: ExperimentConfig, m: int, trial_index: int) -> dict[str, float]:
    """Per-metric errors of a single trial (deterministic in all arguments)."""
    if m not in config.m_grid:
        raise ConfigError(f"m={m} is not in the configured m_grid")
    return _run_trial(validate_config(config), m, trial_index)


# ---------------------------------------------------------------------------
# widths and theoretical bounds
# ---------------------------------------------------------------------------


def _bench_t_grid(config: ExperimentConfig) -> np.ndarray:
    if config.t_grid is not None:
        return np.asarray(config.t_grid, dtype=float)
    return default_t_grid(_nu_total(config.model), min(config.m_grid))


def compute_widths(config: ExperimentConfig) -> dict:
    """Width estimates backing the bound evaluation (seeded off the master)."""
    fs = config.feasible_set
    grid = _bench_t_grid(config)
    seed = config.master_seed
    w_t, w_se = [], []
    for i, t in enumerate(grid):
        est = local_mean_width(fs, float(t), config.width_samples, mix_seed(seed, _SALT_WIDTH + i))
        w_t.append(est.value)
        w_se.append(est.stderr)
    out = {
        "t_grid": [float(t) for t in grid],
        "w_t": w_t,
        "w_t_stderr": w_se,
        "samples": config.width_samples,
        "w1": None,
        "w1_stderr": None,
        "w_global": None,
        "w_global_stderr": None,
    }
    if fs.is_cone:
        est = local_mean_width(fs, 1.0, config.width_samples, mix_seed(seed, _SALT_WIDTH_ONE))
        out["w1"] = est.value
        out["w1_stderr"] = est.stderr
    if fs.diameter is not None:
        est = global_mean_width(fs, config.width_samples, mix_seed(seed, _SALT_WIDTH_GLOBAL))
        out["w_global"] = est.value
        out["w_global_stderr"] = est.stderr
    return out


def _is_binary_model(model: ObservationModel) -> bool:
    poly, sign_w = model.link.terms()
    return (
        sign_w == 1.0
        and not any(a != 0.0 for a in poly.values())
        and model.post_noise is None
    )


def _is_linear_model(model: ObservationModel) -> bool:
    poly, sign_w = model.link.terms()
    if sign_w != 0.0 or set(k for k, a in poly.items() if a != 0.0) != {1} or poly[1] != 1.0:
        return False
    gaussian_or_none = lambda d: d is None or isinstance(d, GaussianNoise)
    return gaussian_or_none(model.pre_noise) and gaussian_or_none(model.post_noise)


def evaluate_bounds(
    config: ExperimentConfig, params: ModelParams, widths: dict
) -> dict[int, dict[str, float]]:
    """Per-m theoretical bound values.

    Always evaluates the grid-minimized two-step bound
    min_t { t + (2/sqrt m)(sigma + eta w_t / t) }; adds the cone form
    (sqrt(2 pi) sigma + 2 eta) w_1 / sqrt(m), the global-width form
    2 sigma / sqrt(m) + 2 sqrt(2) sqrt(eta w / sqrt(m)), the linear-model
    form with C = 2 sqrt(2) (cone constant 2(sqrt(pi)+1)), the binary-model
    form with C = sqrt(2 pi - 4) + 2, and a 95th-percentile bound
    min_t { t + (4 eta/sqrt m)(s + w_t/t) } with s sized so the sub-gaussian
    failure probability 2 exp(-s^2 eta^4 / psi^4) is at most 5%.
    """
    grid = np.asarray(widths["t_grid"], dtype=float)
    w_t = np.asarray(widths["w_t"], dtype=float)
    if grid.size == 0 or grid.size != w_t.size:
        raise ContractError("widths do not cover the bound-evaluation t_grid")
    sigma, eta, mu = params.sigma, params.eta, params.mu
    fs = config.feasible_set
    model = config.model
    nu_tot = _nu_total(model)

    out: dict[int, dict[str, float]] = {}
    for m in config.m_grid:
        rm = math.sqrt(m)
        bounds = {
            "two_step": float(np.min(grid + (2.0 / rm) * (sigma + eta * w_t / grid)))
        }
        if fs.is_cone and widths.get("w1") is not None:
            w1 = widths["w1"]
            bounds["cone_simplified"] = (math.sqrt(2 * math.pi) * sigma + 2 * eta) * w1 / rm
        if widths.get("w_global") is not None:
            bounds["global_width"] = 2 * sigma / rm + 2 * math.sqrt(2) * math.sqrt(
                eta * widths["w_global"] / rm
            )
        if _is_linear_model(model):
            scale = config.norm_x + nu_tot
            bounds["noisy_linear"] = float(
                np.min(grid + 2 * math.sqrt(2) * scale / rm * (1.0 + w_t / grid))
            )
            if fs.is_cone and widths.get("w1") is not None:
                bounds["noisy_linear_cone"] = (
                    2 * (math.sqrt(math.pi) + 1) * scale * widths["w1"] / rm
                )
        if _is_binary_model(model) and fs.is_cone and widths.get("w1") is not None:
            c_bin = math.sqrt(2 * math.pi - 4) + 2
            bounds["binary_cone"] = c_bin * widths["w1"] / rm
            bounds["binary_direction"] = (2.0 / abs(mu)) * c_bin * widths["w1"] / rm
        if params.psi is not None and params.psi > 0 and eta > 0:
            s = math.sqrt(math.log(2.0 / _WHP_FAIL_PROB)) * params.psi**2 / eta**2
            if s <= rm:
                bounds["whp_q95"] = float(
                    np.min(grid + (4.0 * eta / rm) * (s + w_t / grid))
                )
        out[m] = bounds
    return out


# ---------------------------------------------------------------------------
# aggregation and results
# ---------------------------------------------------------------------------


def _aggregate(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    finite = arr[np.isfinite(arr)]
    n_failed = int(arr.size - finite.size)
    if finite.size == 0:
        return {
            "mean": None, "stderr": None, "q50": None, "q90": None, "q95": None,
            "n": 0, "n_failed": n_failed,
        }
    q50, q90, q95 = (float(q) for q in np.percentile(finite, [50, 90, 95]))
    return {
        "mean": float(finite.mean()),
        "stderr": (
            float(finite.std(ddof=1)) / math.sqrt(finite.size) if finite.size >= 2 else None
        ),
        "q50": q50,
        "q90": q90,
        "q95": q95,
        "n": int(finite.size),
        "n_failed": n_failed,
    }


def fit_scaling(ms: Sequence[int], means: Sequence[float], stderrs) -> Optional[dict]:
    """Least-squares slope of log(mean) against log(m), with a delta-method
    confidence half-width propagated from the per-m standard errors."""
    pts = [(m, v, se) for m, v, se in zip(ms, means, stderrs) if v is not None and v > 0]
    if len(pts) < 2:
        return None
    x = np.array([math.log(m) for m, _, _ in pts])
    y = np.array([math.log(v) for _, v, _ in pts])
    xc = x - x.mean()
    sxx = float(xc @ xc)
    if sxx == 0.0:
        return None
    coef = xc / sxx
    slope = float(coef @ y)
    half_width = None
    if all(se is not None for _, _, se in pts):
        se_log = np.array([se / v for _, v, se in pts])
        half_width = 1.96 * float(np.sqrt(np.sum(coef**2 * se_log**2)))
    return {"slope": slope, "half_width": half_width, "n_points": len(pts)}


@dataclass
class ExperimentResult:
    experiment_id: str
    config: dict
    code_version: str
    params: dict
    widths: dict
    per_m: list[dict]
    fits: dict
    trial_values: dict = field(repr=False)  # (m, metric) -> list of per-trial values
    valid: bool = True

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "valid": self.valid,
            "code_version": self.code_version,
            "config": self.config,
            "params": self.params,
            "widths": self.widths,
            "per_m": self.per_m,
            "fits": self.fits,
            "seeds": {
                "master": self.config["master_seed"],
                "trial_rule": "mix(mix(master, m), trial_index); sub-streams mix(trial_seed, {0: signal, 1: measurements, 2: observations})",
                "mix": "splitmix64 scramble of master + (index + 1) * 0x9E3779B97F4A7C15",
                "width_salts": {"local_grid_base": _SALT_WIDTH, "w1": _SALT_WIDTH_ONE, "global": _SALT_WIDTH_GLOBAL},
                "params_salt": _SALT_PARAMS,
            },
        }

    def metric_series(self, metric: str) -> tuple[list[int], list[float], list[float]]:
        """(m values, means, stderrs) across the grid for one metric."""
        ms, means, ses = [], [], []
        for entry in self.per_m:
            agg = entry["metrics"].get(metric)
            if agg is not None:
                ms.append(entry["m"])
                means.append(agg["mean"])
                ses.append(agg["stderr"])
        return ms, means, ses


def _params_dict(params: ModelParams) -> dict:
    return {
        "mu": params.mu,
        "sigma": params.sigma,
        "eta": params.eta,
        "lambda": params.lam,
        "psi": params.psi,
        "method": params.method,
        "mu_se": params.mu_se,
        "sigma_se": params.sigma_se,
        "eta_se": params.eta_se,
    }


def resolve_threads(threads: Optional[int]) -> int:
    """Worker count; the GEOEST_THREADS environment variable wins."""
    env = os.environ.get("GEOEST_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(f"GEOEST_THREADS must be an integer, got {env!r}") from exc
    if threads is None or threads == 0:
        return min(8, os.cpu_count() or 1)
    return max(1, threads)


def run_experiment(config: ExperimentConfig, threads: Optional[int] = None) -> ExperimentResult:
    """Run trials x m_grid, aggregate, and attach bounds and scaling fits.

    Per-trial seeding makes the result independent of the worker count;
    trials are merged in index order.
    """
    ctx = validate_config(config)
    nthreads = resolve_threads(threads)
    widths = compute_widths(config)
    bounds = evaluate_bounds(config, ctx.params, widths)

    trial_values: dict = {}
    per_m: list[dict] = []
    for m in config.m_grid:
        if nthreads > 1:
            with ThreadPoolExecutor(max_workers=nthreads) as pool:
                rows = list(pool.map(lambda i: _run_trial(ctx, m, i), range(config.trials)))
        else:
            rows = [_run_trial(ctx, m, i) for i in range(config.trials)]
        metrics_present = [k for k in _METRIC_ORDER if k in rows[0]]
        agg = {}
        for metric in metrics_present:
            vals = [row[metric] for row in rows]
            trial_values[(m, metric)] = vals
            agg[metric] = _aggregate(vals)
        per_m.append({"m": m, "metrics": agg, "bounds": bounds[m]})

    fits = {}
    for metric in _METRIC_ORDER:
        ms, means, ses = [], [], []
        for entry in per_m:
            if metric in entry["metrics"]:
                ms.append(entry["m"])
                means.append(entry["metrics"][metric]["mean"])
                ses.append(entry["metrics"][metric]["stderr"])
        fit = fit_scaling(ms, means, ses) if ms else None
        if fit is not None:
            fits[metric] = fit

    return ExperimentResult(
        experiment_id=config.experiment_id,
        config=config.to_dict(),
        code_version=__version__,
        params=_params_dict(ctx.params),
        widths=widths,
        per_m=per_m,
        fits=fits,
        trial_values=trial_values,
    )


# ---------------------------------------------------------------------------
# matrix completion experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CompletionConfig:
    d: int
    r: int
    p_grid: tuple[float, ...]
    zeta: float
    noise_nu: float
    trials: int
    master_seed: int
    bound_constant: float = 3.0

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "r": self.r,
            "p_grid": list(self.p_grid),
            "zeta": self.zeta,
            "noise_nu": self.noise_nu,
            "trials": self.trials,
            "master_seed": self.master_seed,
            "bound_constant": self.bound_constant,
        }

    @staticmethod
    def from_dict(d: dict) -> "CompletionConfig":
        for key in ("d", "r", "p_grid", "zeta", "trials", "master_seed"):
            if key not in d:
                raise ConfigError(f"completion config: missing required key {key!r}")
        try:
            return CompletionConfig(
                d=int(d["d"]),
                r=int(d["r"]),
                p_grid=tuple(float(p) for p in d["p_grid"]),
                zeta=float(d["zeta"]),
                noise_nu=float(d.get("noise_nu", 0.0)),
                trials=int(d["trials"]),
                master_seed=int(d["master_seed"]),
                bound_constant=float(d.get("bound_constant", 3.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"completion config: {exc}") from exc

    @property
    def experiment_id(self) -> str:
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:12]


def gen_completion_truth(d: int, r: int, zeta: float, seed: int) -> np.ndarray:
    """Rank-r Gaussian-factor truth rescaled so the largest |entry| equals zeta."""
    rng = rng_from_seed(seed)
    mat = rng.standard_normal((d, r)) @ rng.standard_normal((r, d))
    return mat * (zeta / np.abs(mat).max())


def _completion_trial(cfg: CompletionConfig, p_index: int, p: float, trial: int) -> float:
    tseed = mix_seed(mix_seed(cfg.master_seed, p_index), trial)
    truth = gen_completion_truth(cfg.d, cfg.r, cfg.zeta, mix_seed(tseed, 0))
    mask = gen_mask(cfg.d, p, mix_seed(tseed, 1))
    observed = observe_completion(truth, mask, cfg.noise_nu, mix_seed(tseed, 2))
    estimate = completion_estimator(observed, mask, cfg.r)
    return float(np.linalg.norm(estimate - truth)) / cfg.d


def run_completion_experiment(cfg: CompletionConfig, threads: Optional[int] = None) -> dict:
    """Per-entry completion error against the rate bound C sqrt(rd/m) (zeta + nu)."""
    if cfg.trials < 1:
        raise ConfigError("trials must be >= 1")
    if any(not 0 < p <= 1 for p in cfg.p_grid) or not cfg.p_grid:
        raise ConfigError("p_grid must be a nonempty list of probabilities in (0, 1]")
    nthreads = resolve_threads(threads)
    per_p = []
    trial_values = {}
    for i, p in enumerate(cfg.p_grid):
        if nthreads > 1:
            with ThreadPoolExecutor(max_workers=nthreads) as pool:
                vals = list(pool.map(lambda t: _completion_trial(cfg, i, p, t), range(cfg.trials)))
        else:
            vals = [_completion_trial(cfg, i, p, t) for t in range(cfg.trials)]
        m = p * cfg.d**2
        sample_ok = m >= cfg.d * math.log(cfg.d)
        if not sample_ok:
            warnings.warn(
                f"p={p}: expected sample count m={m:.0f} is below d log d "
                f"= {cfg.d * math.log(cfg.d):.0f}; the rate bound is outside its regime",
                stacklevel=2,
            )
        bound = cfg.bound_constant * math.sqrt(cfg.r * cfg.d / m) * (cfg.zeta + cfg.noise_nu)
        trial_values[(int(round(m)), "completion_error")] = vals
        per_p.append(
            {
                "p": p,
                "m": m,
                "m_ge_dlogd": bool(sample_ok),
                "error": _aggregate(vals),
                "bound": bound,
            }
        )
    fit = fit_scaling(
        [entry["m"] for entry in per_p],
        [entry["error"]["mean"] for entry in per_p],
        [entry["error"]["stderr"] for entry in per_p],
    )
    return {
        "experiment_id": cfg.experiment_id,
        "valid": True,
        "code_version": __version__,
        "config": cfg.to_dict(),
        "per_p": per_p,
        "fit": fit,
        "_trial_values": trial_values,
    }


# ---------------------------------------------------------------------------
# file output
# ---------------------------------------------------------------------------


def format_float(v: float) -> str:
    """Fixed decimal formatting with 17 significant digits (bit-exact round trip)."""
    return format(float(v), ".17g")


def result_json_text(result_dict: dict) -> str:
    return json.dumps(result_dict, sort_keys=True, indent=2) + "\n"


def trials_csv_text(experiment_id: str, trial_values: dict) -> str:
    """Long-form rows: experiment_id, m, trial, metric, value."""
    lines = ["experiment_id,m,trial,metric,value"]
    for (m, metric) in sorted(trial_values, key=lambda k: (k[0], _metric_rank(k[1]))):
        for trial, value in enumerate(trial_values[(m, metric)]):
            lines.append(f"{experiment_id},{m},{trial},{metric},{format_float(value)}")
    return "\n".join(lines) + "\n"


def _metric_rank(metric: str) -> int:
    try:
        return _METRIC_ORDER.index(metric)
    except ValueError:
        return len(_METRIC_ORDER)


def write_result_files(out_dir: str, experiment_id: str, result_dict: dict, trial_values: dict) -> tuple[str, str]:
    """Write the result JSON and the long-form trials CSV; returns both paths."""
    os.makedirs(out_dir, exist_ok=True)
    json_path = os.path.join(out_dir, f"{experiment_id}.result.json")
    csv_path = os.path.join(out_dir, f"{experiment_id}.trials.csv")
    with open(json_path, "w") as fh:
        fh.write(result_json_text(result_dict))
    with open(csv_path, "w") as fh:
        fh.write(trials_csv_text(experiment_id, trial_values))
    return json_path, csv_path
