"""Command-line entry point.

One experiment per invocation, driven by a JSON config file::

    affinelab --config run.json [--set key.path=value ...] [--seed N]
              [--workers N] [--out DIR]

Config schema (defaults in parentheses)::

    {
      "model": "cir" | {inline parameter tuple, see models.params_to_config},
      "experiment": "validate" | "simulate" | "riccati" | "invariant"
                  | "mean" | "moments" | "contraction" | "convolution"
                  | "ergodicity" | "wasserstein",
      "scheme": {"step": h, "horizon": T, "truncation": eps (1e-3)},
      "seed": 0, "workers": 1, "out": "results",
      "start": [x_1, ...]            (preset default when omitted),
      ...experiment-specific keys, see the _run_* handlers...
    }

Complex transform arguments are written as ``[re, im]`` pairs (plain
numbers are treated as real).  Dotted ``--set`` overrides are parsed as
JSON when possible, else kept as strings.

Every run writes ``manifest.json`` into the output directory: the fully
resolved config plus a provenance block.  The manifest is itself a valid
config, and rerunning from it reproduces every output file bit-exactly,
independent of the worker count.

Exit codes: 0 = pass, 1 = a check failed, 2 = configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__, models
from .harness import (
    check_contraction,
    check_convolution,
    check_ergodicity,
    check_mean,
    check_moment_growth,
)
from .params import validate
from .riccati import invariant_transform, solve_riccati
from .sde import (
    NoiseBundle,
    SchemeSettings,
    simulate,
    simulate_ensemble,
    trajectory_to_csv,
    write_samples,
    read_samples,
)
from .wasserstein import EmpiricalMeasure, GroundMetric, wasserstein
from .params import StateDims

__all__ = ["main", "run", "ConfigError"]


class ConfigError(ValueError):
    pass


def _parse_complex_vector(items) -> np.ndarray:
    out = []
    for v in items:
        if isinstance(v, (list, tuple)):
            if len(v) != 2:
                raise ConfigError(f"complex entries are [re, im] pairs, got {v!r}")
            out.append(complex(v[0], v[1]))
        else:
            out.append(complex(float(v), 0.0))
    return np.asarray(out, dtype=complex)


def _resolve_model(cfg: dict):
    model = cfg.get("model")
    if model is None:
        raise ConfigError("config needs a 'model' (preset name or inline parameters)")
    if isinstance(model, str):
        pre = models.preset(model)
        return pre.params, pre.default_start, models.params_to_config(pre.params)
    params = models.params_from_config(model)
    d = params.dims.d
    start = np.zeros(d)
    return params, start, models.params_to_config(params)


def _resolve_scheme(cfg: dict) -> SchemeSettings:
    sch = cfg.get("scheme") or {}
    try:
        return SchemeSettings(
            step=float(sch.get("step", 2.0**-8)),
            horizon=float(sch.get("horizon", 1.0)),
            truncation=float(sch.get("truncation", 1e-3)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolve_metric(cfg: dict, dims: StateDims) -> GroundMetric:
    met = cfg.get("metric") or {}
    return GroundMetric(
        dims=dims,
        kind=met.get("kind", "kappa"),
        kappa=float(met.get("kappa", 1.0)),
    )


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_decay_csv(path: Path, times, values):
    rows = "\n".join(f"{t:.17g},{v:.17g}" for t, v in zip(times, values))
    path.write_text("t,value\n" + rows + "\n")


# ---------------------------------------------------------------------------
# Experiment handlers: each returns (exit_code, artifacts dict)
# ---------------------------------------------------------------------------


def _run_validate(cfg, params, start, scheme, out):
    report = validate(params)
    payload = {
        "admissible": report.admissible,
        "violations": [
            {"condition": v.condition, "index": list(v.index), "message": v.message}
            for v in report
        ],
    }
    _write_json(out / "validation.json", payload)
    return (0 if report.admissible else 1), ["validation.json"]


def _run_simulate(cfg, params, start, scheme, out):
    n_paths = int(cfg.get("n_paths", 1))
    seed = int(cfg.get("seed", 0))
    if n_paths == 1:
        traj = simulate(params, start, scheme, NoiseBundle(seed, int(cfg.get("path", 0))))
        trajectory_to_csv(traj, out / "trajectory.csv")
        return 0, ["trajectory.csv"]
    times = cfg.get("record_times") or [scheme.horizon]
    ens = simulate_ensemble(
        params, start, scheme, n_paths, seed,
        record_times=[float(t) for t in times], workers=int(cfg.get("workers", 1)),
    )
    artifacts = []
    for k, t in enumerate(ens.times):
        name = f"samples_{k}.bin"
        write_samples(ens.at(t), out / name)
        artifacts.append(name)
    summary = "t,mean_norm,moment_root,moment_log\n" + "\n".join(
        f"{t:.17g},{np.linalg.norm(mu):.17g},{r:.17g},{l:.17g}"
        for t, mu, r, l in zip(ens.times, ens.mean, ens.moment_root, ens.moment_log)
    )
    (out / "ensemble.csv").write_text(summary + "\n")
    artifacts.append("ensemble.csv")
    return 0, artifacts


def _run_riccati(cfg, params, start, scheme, out):
    u = _parse_complex_vector(cfg.get("u") or [-1.0] * params.dims.d)
    t_end = float(cfg.get("t_end", scheme.horizon))
    sol = solve_riccati(params, u, t_end, tol=float(cfg.get("tol", 1e-8)))
    d = params.dims.d
    head = "t,re_phi,im_phi," + ",".join(
        f"re_psi{k + 1},im_psi{k + 1}" for k in range(d)
    )
    rows = []
    for i, t in enumerate(sol.grid):
        cells = [f"{t:.17g}", f"{sol.phi[i].real:.17g}", f"{sol.phi[i].imag:.17g}"]
        for k in range(d):
            cells += [f"{sol.psi[i, k].real:.17g}", f"{sol.psi[i, k].imag:.17g}"]
        rows.append(",".join(cells))
    (out / "riccati.csv").write_text(head + "\n" + "\n".join(rows) + "\n")
    return 0, ["riccati.csv"]


def _run_invariant(cfg, params, start, scheme, out):
    u = _parse_complex_vector(cfg.get("u") or [-1.0] * params.dims.d)
    res = invariant_transform(params, u, tail_tol=float(cfg.get("tail_tol", 1e-9)))
    _write_json(
        out / "invariant.json",
        {
            "value": {"re": res.value.real, "im": res.value.imag},
            "t_star": res.t_star,
            "tail_bound": res.tail_bound,
            "terminal_psi_norm": res.terminal_psi_norm,
        },
    )
    return 0, ["invariant.json"]


def _run_mean(cfg, params, start, scheme, out):
    rep = check_mean(
        params,
        start,
        float(cfg.get("t", scheme.horizon)),
        int(cfg.get("n_paths", 10000)),
        int(cfg.get("seed", 0)),
        scheme,
        workers=int(cfg.get("workers", 1)),
    )
    _write_json(out / "mean.json", rep.to_dict())
    return (0 if rep.passed else 1), ["mean.json"]


def _run_moments(cfg, params, start, scheme, out):
    rep = check_moment_growth(
        params,
        start,
        [float(t) for t in cfg.get("times") or [scheme.horizon]],
        int(cfg.get("n_paths", 10000)),
        int(cfg.get("seed", 0)),
        scheme,
        mode=cfg.get("mode", "kappa"),
        kappa=float(cfg.get("kappa", 1.0)),
        workers=int(cfg.get("workers", 1)),
    )
    _write_json(out / "moments.json", rep.to_dict())
    _write_decay_csv(out / "moments.csv", rep.times, rep.moments)
    return (0 if rep.passed else 1), ["moments.json", "moments.csv"]


def _run_contraction(cfg, params, start, scheme, out):
    alt = cfg.get("start_alt")
    if alt is None:
        raise ConfigError("contraction experiment needs 'start_alt'")
    rep = check_contraction(
        params,
        start,
        np.asarray(alt, dtype=float),
        [float(t) for t in cfg.get("times") or [scheme.horizon]],
        int(cfg.get("n_pairs", 2000)),
        int(cfg.get("seed", 0)),
        scheme,
    )
    _write_json(out / "contraction.json", rep.to_dict())
    _write_decay_csv(out / "contraction.csv", rep.times, rep.mean_abs_diff)
    return (0 if rep.passed else 1), ["contraction.json", "contraction.csv"]


def _run_convolution(cfg, params, start, scheme, out):
    u_grid = None
    if cfg.get("u_grid"):
        u_grid = [_parse_complex_vector(u) for u in cfg["u_grid"]]
    rep = check_convolution(
        params,
        start,
        float(cfg.get("t", scheme.horizon)),
        int(cfg.get("n_paths", 10000)),
        int(cfg.get("seed", 0)),
        scheme,
        u_grid=u_grid,
        workers=int(cfg.get("workers", 1)),
    )
    _write_json(out / "convolution.json", rep.to_dict())
    return (0 if rep.passed else 1), ["convolution.json"]


def _run_ergodicity(cfg, params, start, scheme, out):
    rep = check_ergodicity(
        params,
        start,
        [float(t) for t in cfg.get("times") or [1, 2, 3, 4, 5, 6, 7, 8]],
        int(cfg.get("n_paths", 2048)),
        int(cfg.get("seed", 0)),
        scheme,
        _resolve_metric(cfg, params.dims),
        subsample=int(cfg.get("subsample", 512)),
        workers=int(cfg.get("workers", 1)),
    )
    _write_json(out / "ergodicity.json", rep.to_dict())
    _write_decay_csv(out / "wasserstein.csv", rep.times, rep.distances)
    return (0 if rep.passed else 1), ["ergodicity.json", "wasserstein.csv"]


def _run_wasserstein(cfg, params, start, scheme, out):
    pairs = cfg.get("pairs")
    if not pairs:
        raise ConfigError("wasserstein experiment needs 'pairs': [{t, p, q}, ...]")
    metric = _resolve_metric(cfg, params.dims)
    rows = []
    for item in pairs:
        p = EmpiricalMeasure(read_samples(item["p"]), params.dims)
        q = EmpiricalMeasure(read_samples(item["q"]), params.dims)
        rows.append((float(item["t"]), wasserstein(metric, p, q)))
    (out / "wasserstein.csv").write_text(
        "t,distance\n" + "\n".join(f"{t:.17g},{w:.17g}" for t, w in rows) + "\n"
    )
    return 0, ["wasserstein.csv"]


_EXPERIMENTS = {
    "validate": _run_validate,
    "simulate": _run_simulate,
    "riccati": _run_riccati,
    "invariant": _run_invariant,
    "mean": _run_mean,
    "moments": _run_moments,
    "contraction": _run_contraction,
    "convolution": _run_convolution,
    "ergodicity": _run_ergodicity,
    "wasserstein": _run_wasserstein,
}


def _apply_override(cfg: dict, spec: str):
    if "=" not in spec:
        raise ConfigError(f"override must look like key.path=value, got {spec!r}")
    key, raw = spec.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node = cfg
    parts = key.split(".")
    for part in parts[:-1]:
        node = node.setdefault(part, {})
        if not isinstance(node, dict):
            raise ConfigError(f"override path {key!r} crosses a non-object value")
    node[parts[-1]] = value


def run(config_path, overrides=(), seed=None, workers=None, out_dir=None) -> int:
    """Load a config, dispatch the experiment, persist manifest and results."""
    try:
        cfg = json.loads(Path(config_path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    cfg.pop("_provenance", None)
    try:
        for spec in overrides:
            _apply_override(cfg, spec)
        if seed is not None:
            cfg["seed"] = seed
        if workers is not None:
            cfg["workers"] = workers
        if out_dir is not None:
            cfg["out"] = str(out_dir)
        cfg.setdefault("seed", 0)
        cfg.setdefault("workers", 1)
        experiment = cfg.get("experiment")
        if experiment not in _EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {experiment!r}; choose from {sorted(_EXPERIMENTS)}"
            )
        params, default_start, model_echo = _resolve_model(cfg)
        start = np.asarray(cfg.get("start", default_start), dtype=float)
        if start.shape != (params.dims.d,):
            raise ConfigError(f"start must have dimension {params.dims.d}")
        scheme = _resolve_scheme(cfg)
        out = Path(cfg.get("out", "results"))
        out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    resolved = dict(cfg)
    resolved["model"] = model_echo
    resolved["start"] = start.tolist()
    resolved["scheme"] = {
        "step": scheme.step,
        "horizon": scheme.horizon,
        "truncation": scheme.truncation,
    }
    try:
        code, artifacts = _EXPERIMENTS[experiment](cfg, params, start, scheme, out)
    except (ConfigError, ValueError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    manifest = dict(resolved)
    manifest["_provenance"] = {
        "package": f"affinelab {__version__}",
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "artifacts": artifacts,
    }
    _write_json(out / "manifest.json", manifest)
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="affinelab",
        description="Run one affine-process experiment from a JSON config.",
    )
    parser.add_argument("--config", required=True, help="path to the JSON config")
    parser.add_argument(
        "--set", dest="overrides", action="append", default=[],
        metavar="KEY.PATH=VALUE", help="override a config entry (repeatable)",
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--out", default=None, help="output directory")
    args = parser.parse_args(argv)
    return run(args.config, args.overrides, args.seed, args.workers, args.out)


if __name__ == "__main__":
    sys.exit(main())
