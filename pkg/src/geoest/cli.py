"""Command-line interface.

Subcommands: ``simulate`` (one experiment from a JSON config, writes result
JSON plus a long-form trials CSV), ``params`` (model parameters as JSON),
``width`` (width estimates for a set), ``matcomp`` (the masked low-rank
completion experiment), ``lowerbound`` (minimax radii report) and ``bench``
(the full acceptance suite).

Exit codes: 0 on success, 2 on a malformed config, 3 on numerical failure;
``bench`` exits 1 when some acceptance check fails.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .bench import (
    CompletionConfig,
    ExperimentConfig,
    run_completion_experiment,
    run_experiment,
    set_from_dict,
    model_from_dict,
    write_result_files,
)
from .errors import ConfigError, ContractError, NumericalError
from .geometry import global_mean_width, local_mean_width, minimax_radii, width_bound_formula
from .model_params import cf_candidates, closed_form_params, monte_carlo_params, quadrature_params
from .sampler import mix_seed
from .types import LogisticNoise

_EXIT_CONFIG = 2
_EXIT_NUMERICAL = 3


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc


def _emit(payload: dict, fmt: str) -> None:
    if fmt == "csv":
        flat = _flatten(payload)
        print("key,value")
        for key, value in flat:
            print(f"{key},{value}")
    else:
        print(json.dumps(payload, sort_keys=True, indent=2))


def _flatten(obj, prefix="") -> list[tuple[str, str]]:
    rows: list[tuple[str, str]] = []
    if isinstance(obj, dict):
        for key in sorted(obj):
            rows.extend(_flatten(obj[key], f"{prefix}{key}." if prefix else f"{key}."))
    elif isinstance(obj, (list, tuple)):
        for i, item in enumerate(obj):
            rows.extend(_flatten(item, f"{prefix}{i}."))
    else:
        rows.append((prefix.rstrip("."), "" if obj is None else str(obj)))
    return rows


def _cmd_params(args) -> int:
    cfg = _load_config(args.config)
    if "model" not in cfg:
        raise ConfigError("params config: missing 'model'")
    model = model_from_dict(cfg["model"])
    norm_x = float(cfg.get("norm_x", 1.0))
    method = cfg.get("method", "auto")
    order = int(cfg.get("order", 40))
    n_samples = int(cfg.get("n_samples", 1_000_000))
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))

    params = None
    if method in ("auto", "closed_form"):
        params = closed_form_params(model, norm_x)
        if params is None and method == "closed_form":
            raise ConfigError("no closed form exists for this model")
    if params is None and method in ("auto", "quadrature"):
        if isinstance(model.pre_noise, LogisticNoise):
            if method == "quadrature":
                raise ConfigError("quadrature is unavailable with logistic pre-noise")
        else:
            params = quadrature_params(model, norm_x, order)
    if params is None:
        params = monte_carlo_params(model, norm_x, n_samples, seed)

    payload = {
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
    try:
        payload["c_f"] = cf_candidates(model.link, order)
    except ContractError:
        payload["c_f"] = None
    _emit(payload, args.format)
    return 0


def _cmd_simulate(args) -> int:
    config = ExperimentConfig.from_dict(_load_config(args.config))
    if args.seed is not None:
        config = ExperimentConfig.from_dict({**config.to_dict(), "master_seed": args.seed})
    try:
        result = run_experiment(config, threads=args.threads)
    except (ConfigError, ContractError):
        raise
    except Exception as exc:
        # flag the failed run on disk so partial outputs are never mistaken for results
        payload = {
            "experiment_id": config.experiment_id,
            "valid": False,
            "error": f"{type(exc).__name__}: {exc}",
            "config": config.to_dict(),
        }
        write_result_files(args.out, config.experiment_id, payload, {})
        raise
    json_path, csv_path = write_result_files(
        args.out, result.experiment_id, result.to_dict(), result.trial_values
    )
    print(json_path)
    print(csv_path)
    return 0


def _cmd_width(args) -> int:
    cfg = _load_config(args.config)
    if "set" not in cfg:
        raise ConfigError("width config: missing 'set'")
    feasible_set = set_from_dict(cfg["set"])
    samples = int(cfg.get("samples", 200))
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    records = []
    if cfg.get("global", False):
        est = global_mean_width(feasible_set, samples, seed)
        records.append(
            {"scale": "global", "value": est.value, "stderr": est.stderr, "samples": samples}
        )
    for i, t in enumerate(cfg.get("t", [])):
        est = local_mean_width(feasible_set, float(t), samples, mix_seed(seed, i + 1))
        records.append(
            {"scale": float(t), "value": est.value, "stderr": est.stderr, "samples": samples}
        )
    if not records:
        raise ConfigError("width config: provide 't' scales and/or 'global': true")
    try:
        formula = width_bound_formula(feasible_set)
    except ContractError:
        formula = None
    _emit({"set": cfg["set"], "seed": seed, "estimates": records, "formula_bound": formula}, args.format)
    return 0


def _cmd_lowerbound(args) -> int:
    cfg = _load_config(args.config)
    for key in ("set", "nu", "m"):
        if key not in cfg:
            raise ConfigError(f"lowerbound config: missing {key!r}")
    feasible_set = set_from_dict(cfg["set"])
    seed = int(args.seed if args.seed is not None else cfg.get("seed", 0))
    radii = minimax_radii(
        feasible_set,
        nu=float(cfg["nu"]),
        m=int(cfg["m"]),
        t_grid=cfg.get("t_grid"),
        samples=int(cfg.get("samples", 200)),
        n_candidates=int(cfg.get("n_candidates", 500)),
        seed=seed,
    )
    _emit(
        {
            "set": cfg["set"],
            "nu": float(cfg["nu"]),
            "m": int(cfg["m"]),
            "seed": seed,
            "delta_lower": radii.delta_lower,
            "delta_upper": radii.delta_upper,
            "alpha_sup": radii.alpha_sup,
            "alpha_at_scale": radii.alpha_at_scale,
            "diam": radii.diam,
            "t_grid": list(radii.t_grid),
            "widths": list(radii.widths),
            "packings": list(radii.packings),
        },
        args.format,
    )
    return 0


def _cmd_matcomp(args) -> int:
    cfg = CompletionConfig.from_dict(_load_config(args.config))
    if args.seed is not None:
        cfg = CompletionConfig.from_dict({**cfg.to_dict(), "master_seed": args.seed})
    result = run_completion_experiment(cfg, threads=args.threads)
    trial_values = result.pop("_trial_values")
    json_path, csv_path = write_result_files(args.out, cfg.experiment_id, result, trial_values)
    print(json_path)
    print(csv_path)
    return 0


def _cmd_bench(args) -> int:
    from .acceptance import run_all

    reports = run_all(out_dir=args.out, threads=args.threads)
    n_fail = sum(not r.passed for r in reports)
    for report in reports:
        print(report.line())
    return 0 if n_fail == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="geoest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, needs_config=True, needs_out=False):
        if needs_config:
            p.add_argument("--config", required=True, help="path to the JSON config")
        if needs_out:
            p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--threads", type=int, default=None, help="worker threads (0 = auto)")
        p.add_argument("--format", choices=("json", "csv"), default="json")

    add_common(sub.add_parser("params", help="model parameters as JSON"))
    add_common(sub.add_parser("simulate", help="run one experiment"), needs_out=True)
    add_common(sub.add_parser("width", help="mean width estimates"))
    add_common(sub.add_parser("lowerbound", help="minimax radii report"))
    add_common(sub.add_parser("matcomp", help="matrix completion experiment"), needs_out=True)
    bench_p = sub.add_parser("bench", help="run the acceptance suite")
    bench_p.add_argument("--out", default=None, help="directory for result files")
    bench_p.add_argument("--threads", type=int, default=None)

    args = parser.parse_args(argv)
    handlers = {
        "params": _cmd_params,
        "simulate": _cmd_simulate,
        "width": _cmd_width,
        "lowerbound": _cmd_lowerbound,
        "matcomp": _cmd_matcomp,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except (ConfigError, ContractError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return _EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
