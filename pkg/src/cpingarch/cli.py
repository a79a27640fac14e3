"""
Command-line interface.

    cpingarch {simulate,convert,analyze,stationary,validate} --config run.json
              [--seed N] [--out PATH] [--format csv|json] [--threads N]

The configuration is a JSON document checked against ``config_schema.json``
(shipped with the package) before anything is computed; see the README for an
annotated example. Exit codes: 0 ok, 1 validation failure, 2 refused
(precondition does not hold), 3 configuration error.

Replicates are generated in fixed blocks of ``BLOCK`` trajectories; block
``b`` of a run with seed ``s`` draws from ``SeedSequence(s, spawn_key=(b,))``.
Output therefore depends only on the configuration and seed, never on the
number of threads.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from ._rng import stream
from .branching import check_conditions
from .classical import ClassicalParams, simulate_classical
from .distributions import UNIT, SecondaryDistribution
from .epidemic import ThinningParams, map_to_classical, map_to_thinning, simulate_thinning
from .errors import (
    NonConvergenceWarning,
    ParameterError,
    RefusalError,
    RepresentationError,
    TruncationError,
)
from .stationary import StationarySettings, x_stationary
from .validation import run_suite

EXIT_OK, EXIT_VALIDATION, EXIT_REFUSED, EXIT_CONFIG = 0, 1, 2, 3
BLOCK = 4096
DEFAULTS = {"run": {"T": 100, "reps": 1, "seed": 0}, "output": {"format": "csv"}}


class ConfigError(Exception):
    pass


# ------------------------------------------------------------------ config


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("config_schema.json").read_text())


def _pointer(path) -> str:
    return "/" + "/".join(str(p) for p in path)


def _message(error: jsonschema.ValidationError) -> str:
    if error.validator == "not" and list(error.absolute_path) == ["model"]:
        other = "thinning" if error.instance.get("formulation") == "classical" else "classical"
        return f"contains parameters of the {other} formulation"
    return error.message


def load_config(path: str | Path) -> dict:
    """Read and schema-check a configuration file; raises ``ConfigError``."""
    try:
        cfg = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        lines = [f"  {_pointer(e.absolute_path)}: {_message(e)}" for e in errors]
        raise ConfigError("config does not match the schema:\n" + "\n".join(lines))
    return cfg


def resolve(cfg: dict, args: argparse.Namespace) -> dict:
    """Fill defaults and apply command-line overrides."""
    out = json.loads(json.dumps(cfg))
    for section, values in DEFAULTS.items():
        out.setdefault(section, {})
        for k, v in values.items():
            out[section].setdefault(k, v)
    out.setdefault("distribution", UNIT.to_config())
    if args.seed is not None:
        if not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        out["run"]["seed"] = args.seed
    if args.format is not None:
        out["output"]["format"] = args.format
    if args.out is not None:
        out["output"]["path"] = args.out
    return out


def _as_list(v):
    return None if v is None else (list(v) if isinstance(v, (list, tuple)) else [v])


def build_params(cfg: dict) -> ThinningParams | ClassicalParams:
    """Model parameters from a resolved config; raises ``ConfigError`` with the bad field."""
    model = cfg["model"]
    try:
        G = SecondaryDistribution.from_config(cfg["distribution"])
    except (ParameterError, TypeError) as exc:
        raise ConfigError(f"/distribution: {exc}") from None
    if model["formulation"] == "thinning":
        fields = {"kappa": "p", "beta": "q", "eta": "q", "x_init": "p"}
        vals = {k: _as_list(model.get(k)) for k in fields}
        build = lambda: ThinningParams(model["tau"], vals["kappa"], vals["beta"], vals["eta"],
                                       vals["x_init"], G)
    else:
        fields = {"alpha": "p", "beta": "q", "lambda_init": "q", "x_init": "p"}
        vals = {k: _as_list(model.get(k)) for k in fields}
        build = lambda: ClassicalParams(model["nu"], vals["alpha"], vals["beta"], G,
                                        vals["lambda_init"], vals["x_init"])
    order = model.get("order")
    if order is not None:
        for k, which in fields.items():
            if vals[k] is not None and len(vals[k]) != order[which]:
                raise ConfigError(
                    f"/model/{k}: has {len(vals[k])} values but order {which}={order[which]}"
                )
    try:
        return build()
    except ParameterError as exc:
        raise ConfigError(f"/model: {exc}") from None


def both_formulations(params) -> dict:
    """Parameters of the model in both forms; a missing counterpart carries the reason."""
    if isinstance(params, ThinningParams):
        return {"thinning": params.to_dict(), "classical": map_to_classical(params).to_dict()}
    try:
        thin = map_to_thinning(params).to_dict()
    except RepresentationError as exc:
        thin = {"error": str(exc)}
    return {"classical": params.to_dict(), "thinning": thin}


def _thinning(params) -> ThinningParams:
    return params if isinstance(params, ThinningParams) else map_to_thinning(params)


# ------------------------------------------------------------------ output


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _emit(text: str, cfg: dict, meta: dict | None = None) -> None:
    """Write ``text`` to the configured path (plus ``.meta.json`` sidecar) or stdout."""
    path = cfg["output"].get("path")
    if path is None:
        sys.stdout.write(text)
        return
    Path(path).write_text(text)
    if meta is not None:
        Path(path + ".meta.json").write_text(_dumps(meta))


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------- commands


def _blocks(reps: int):
    return [(b, min(BLOCK, reps - b * BLOCK)) for b in range((reps + BLOCK - 1) // BLOCK)]


def _simulate_columns(params, T: int, reps: int, seed: int, threads: int):
    """Columns of the trajectory table for ``reps`` replicates (replicate-major)."""
    thinning = isinstance(params, ThinningParams)
    sim = simulate_thinning if thinning else simulate_classical

    def run(block):
        b, n = block
        path = sim(params, T, stream(seed, b), reps=n)
        if thinning:
            cols = {"i": path.i, "e": path.e}
            cols.update(_split_cols("l", path.l))
            cols["a"] = path.a
            cols.update(_split_cols("c", path.c))
            cols["x"] = path.x
        else:
            cols = {"lambda": path.lam, "n": path.n, "x": path.x}
        return cols

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, _blocks(reps)))
    else:
        parts = [run(b) for b in _blocks(reps)]
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def _split_cols(name: str, arr: np.ndarray) -> dict:
    if arr.shape[-1] == 1:
        return {name: arr[..., 0]}
    return {f"{name}_{j + 1}": arr[..., j] for j in range(arr.shape[-1])}


def cmd_simulate(cfg: dict, params, threads: int) -> int:
    run = cfg["run"]
    T, reps, seed = run["T"], run["reps"], run["seed"]
    cols = _simulate_columns(params, T, reps, seed, threads)
    meta = {"command": "simulate", "config": cfg, "seed": seed, "params": both_formulations(params)}
    if cfg["output"]["format"] == "json":
        traj = {k: v.tolist() if reps > 1 else v[0].tolist() for k, v in cols.items()}
        _emit(_dumps({**meta, "trajectory": traj}), cfg, meta)
        return EXIT_OK
    names = list(cols)
    t = np.arange(1, T + 1)
    header = (["rep"] if reps > 1 else []) + ["t"] + names
    lists = {k: v.tolist() for k, v in cols.items()}
    rows = []
    for r in range(reps):
        lead = [r] if reps > 1 else []
        per = [lists[k][r] for k in names]
        rows.extend(lead + [int(t[s])] + [c[s] for c in per] for s in range(T))
    _emit(_csv(header, rows), cfg, meta)
    return EXIT_OK


def cmd_convert(cfg: dict, params, threads: int) -> int:
    if isinstance(params, ThinningParams):
        counterpart = map_to_classical(params)
    else:
        counterpart = map_to_thinning(params)
    out = {"command": "convert", "config": cfg, "input": params.to_dict(),
           "output": counterpart.to_dict()}
    _emit(_dumps(out), cfg)
    return EXIT_OK


def cmd_analyze(cfg: dict, params, threads: int) -> int:
    tp = _thinning(params)
    r = cfg.get("analysis", {}).get("moment_order", 2)
    report = check_conditions(tp, r)
    out = {"command": "analyze", "config": cfg, "params": both_formulations(params),
           "report": report.to_dict()}
    _emit(_dumps(out), cfg)
    return EXIT_OK


def _settings(cfg: dict) -> StationarySettings:
    try:
        return StationarySettings(**cfg.get("stationary", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"/stationary: {exc}") from None


def cmd_stationary(cfg: dict, params, threads: int) -> int:
    tp = _thinning(params)
    settings = _settings(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", NonConvergenceWarning)
        res = x_stationary(tp, settings)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    body = {
        "command": "stationary",
        "config": cfg,
        "params": both_formulations(params),
        "settings": settings.to_dict(),
        "p_e": res.p_e.probs.tolist(),
        "p_x": res.p_x.probs.tolist(),
        "deficits": {"p_e": res.p_e.deficit, "p_x": res.p_x.deficit},
        "iterations_used": res.iterations_used,
        "final_tv_step": res.final_tv_step,
        "converged": res.converged,
    }
    if cfg["output"]["format"] == "json":
        _emit(_dumps(body), cfg)
        return EXIT_OK
    rows = zip(range(settings.M + 1), body["p_e"], body["p_x"])
    meta = {k: v for k, v in body.items() if k not in ("p_e", "p_x")}
    _emit(_csv(["i", "p_e", "p_x"], rows), cfg, meta)
    return EXIT_OK


def cmd_validate(cfg: dict, params, threads: int) -> int:
    tp = _thinning(params)
    suite = cfg.get("validate", {}).get("suite", "default")
    seed = cfg["run"]["seed"]
    reports = run_suite(tp, suite, seed, _settings(cfg), threads)
    failed = any(r.failed for r in reports)
    body = {"command": "validate", "config": cfg, "suite": suite, "seed": seed,
            "passed": not failed, "reports": [r.to_dict() for r in reports]}
    if cfg["output"]["format"] == "json":
        _emit(_dumps(body), cfg)
    else:
        rows = [[r.name, r.statistic, r.threshold, r.samples_used, r.passed, r.applicable]
                for r in reports]
        meta = {k: v for k, v in body.items() if k != "reports"}
        _emit(_csv(["name", "statistic", "threshold", "samples_used", "passed", "applicable"], rows),
              cfg, meta)
    return EXIT_VALIDATION if failed else EXIT_OK


HELP = {
    "simulate": "simulate trajectories; CSV or JSON plus a .meta.json sidecar",
    "convert": "print the counterpart formulation's parameters",
    "analyze": "branching-process ergodicity and moment conditions",
    "stationary": "limiting-stationary pmfs of the pool and the counts",
    "validate": "run a named validation suite; exit 1 if any check fails",
}

COMMANDS = {
    "simulate": cmd_simulate,
    "convert": cmd_convert,
    "analyze": cmd_analyze,
    "stationary": cmd_stationary,
    "validate": cmd_validate,
}


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cpingarch",
        description="Simulate, convert and analyse (CP-)INGARCH models in classical and thinning form.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=HELP[name])
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override run.seed (64-bit unsigned)")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="override output.format")
        p.add_argument("--threads", type=int, default=1, help="worker threads (default 1)")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = resolve(load_config(args.config), args)
        params = build_params(cfg)
        return COMMANDS[args.command](cfg, params, max(1, args.threads))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (RefusalError, RepresentationError, ParameterError, TruncationError) as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_REFUSED


if __name__ == "__main__":
    sys.exit(main())
