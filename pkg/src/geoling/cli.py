"""Command-line interface.

Commands: ``test``, ``batch``, ``synth``, ``calibrate`` and ``power``.
Exit codes: 0 success, 1 I/O or parse error, 2 method not applicable to
the data, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from . import __version__, inference, synthgen
from .lingdata import METHODS, SHAPES, ParseError, read_observations, write_observations

SCHEMA_VERSION = 1

EXIT_OK, EXIT_IO, EXIT_APPLICABILITY, EXIT_CONFIG = 0, 1, 2, 3


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# -- output helpers -----------------------------------------------------------------


def _clean(obj):
    """Plain JSON types; numpy scalars unwrapped. Non-finite floats are rejected."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            raise CliError(f"refusing to write a non-finite number ({obj})", EXIT_CONFIG)
        return float(obj)
    return obj


def _dump_json(payload, path):
    text = json.dumps(_clean(payload), indent=2, sort_keys=True, allow_nan=False) + "\n"
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _write_csv(path, header, rows):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc}", EXIT_IO) from None


def _ensure_dir(path):
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {path}: {exc}", EXIT_IO) from None


# -- shared argument handling -------------------------------------------------------


def _method_params(args) -> dict:
    params = {}
    if args.method in ("moran", "joins"):
        if args.weights:
            params["weights"] = args.weights
        if args.tau is not None:
            params["tau"] = args.tau
        if args.knn is not None:
            params["knn"] = args.knn
    if args.gamma is not None:
        params["gamma"] = args.gamma
    if args.method == "hsic":
        if args.ling_gamma is not None:
            params["ling_gamma"] = args.ling_gamma
        if args.lowrank_tol is not None:
            params["lowrank_tol"] = args.lowrank_tol
    return params


def _plan(args) -> inference.PermutationPlan:
    try:
        return inference.PermutationPlan(args.permutations, args.seed)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def _load(path, shape, metric):
    try:
        return read_observations(path, shape, metric)
    except ParseError as exc:
        raise CliError(f"{path}: {exc}", EXIT_IO) from None


def _run_test(ds, method, plan, threads, params, stream=0):
    try:
        return inference.permutation_test(ds, method, plan, stream=stream, workers=threads, **params)
    except inference.ApplicabilityError as exc:
        raise CliError(str(exc), EXIT_APPLICABILITY) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None


def _test_payload(rep, ds, n_dropped):
    payload = rep.to_dict()
    payload["n_observations"] = len(ds)
    payload["n_dropped"] = n_dropped
    payload["shape"] = ds.column.shape
    payload["metric"] = ds.points.metric
    if ds.column.labels is not None:
        payload["labels"] = {label: i for i, label in enumerate(ds.column.labels)}
    return payload


def _load_scenario(path) -> synthgen.ScenarioConfig:
    try:
        return synthgen.ScenarioConfig.load(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    except synthgen.ConfigError as exc:
        raise CliError(f"{path}: {exc}", EXIT_CONFIG) from None


def _load_regions(args):
    if args.regions is None:
        return synthgen.default_regions()
    try:
        return synthgen.read_regions(args.regions, args.pool)
    except (OSError, KeyError, ValueError) as exc:
        raise CliError(f"cannot read regions: {exc}", EXIT_IO) from None


# -- commands ------------------------------------------------------------------


def cmd_test(args) -> int:
    ds, dropped = _load(args.input, args.shape, args.metric)
    rep = _run_test(ds, args.method, _plan(args), args.threads, _method_params(args))
    payload = {"schema_version": SCHEMA_VERSION, "command": "test", **_test_payload(rep, ds, dropped)}
    _dump_json(payload, args.output)
    return EXIT_OK


def read_manifest(path):
    """Rows ``(name, path, shape)``; relative paths resolve against the manifest's folder."""
    base = os.path.dirname(os.path.abspath(path))
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            missing = {"name", "path", "shape"} - set(reader.fieldnames or ())
            if missing:
                raise CliError(f"manifest lacks columns {sorted(missing)}", EXIT_IO)
            rows = [(r["name"], os.path.join(base, r["path"]), r["shape"].strip()) for r in reader]
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    if not rows:
        raise CliError("manifest lists no variables", EXIT_IO)
    return rows


def cmd_batch(args) -> int:
    rows = read_manifest(args.manifest)
    plan = _plan(args)
    params = _method_params(args)
    items, meta = [], {}
    for name, path, shape in rows:
        if shape not in SHAPES:
            items.append((name, ValueError(f"unknown shape {shape!r}")))
            continue
        try:
            ds, dropped = read_observations(path, shape, args.metric, name)
        except ParseError as exc:
            items.append((name, exc))
            continue
        meta[name] = (ds, dropped)
        items.append((name, ds))
    try:
        batch = inference.run_batch(items, args.method, plan, args.alpha, args.threads, **params)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    variables = []
    for e in batch.entries:
        ds, dropped = meta[e.name]
        entry = _test_payload(e.report, ds, dropped)
        entry.update(name=e.name, raw_p=e.raw_p, adjusted_p=e.adjusted_p)
        variables.append(entry)
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "batch",
        "method": args.method,
        "alpha": args.alpha,
        "n_permutations": plan.n_permutations,
        "seed": plan.seed,
        "n_significant": batch.n_significant,
        "variables": variables,
        "failures": batch.failures,
    }
    _dump_json(payload, args.output)
    return EXIT_OK


def cmd_synth(args) -> int:
    config = _load_scenario(args.scenario).replace(seed=args.seed)
    try:
        config.validate()
    except synthgen.ConfigError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    regions = _load_regions(args)
    try:
        ds = synthgen.generate(config, regions)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    _ensure_dir(args.out)
    try:
        write_observations(ds, os.path.join(args.out, "observations.csv"))
    except OSError as exc:
        raise CliError(f"cannot write observations: {exc}", EXIT_IO) from None
    warnings = [inference.FALLBACK_WARNING] if ds.meta.get("fallback") else []
    info = {
        "schema_version": SCHEMA_VERSION,
        "command": "synth",
        "shape": ds.column.shape,
        "n_observations": len(ds),
        "scenario": config.to_dict(),
        "warnings": warnings,
    }
    _dump_json(info, os.path.join(args.out, "synth.json"))
    return EXIT_OK


def _experiment_configs(config, grid):
    if grid == "none":
        return [("0", config)]
    if grid == "angles":
        if config.kind != "continuum":
            raise CliError("--grid angles needs a continuum scenario", EXIT_CONFIG)
        return [(repr(a), config.replace(angle=a, seed=synthgen.derive_seed(config.seed, g)))
                for g, a in enumerate(synthgen.ANGLE_GRID)]
    if config.kind != "centers":
        raise CliError("--grid centers needs a centers scenario", EXIT_CONFIG)
    suite = synthgen.scenario_suites(config, mu_grid=(config.mu_obs,), s_grid=(config.s,))
    return [(str(i), c) for i, c in enumerate(suite[f"centers_{config.data_mode}"])]


def cmd_calibrate(args) -> int:
    config = _load_scenario(args.scenario)
    regions = _load_regions(args)
    try:
        res = inference.calibrate(
            config, args.method, _plan(args), args.datasets, regions,
            alpha=args.alpha, sweep=True if args.sweep else None, workers=args.threads,
            **_method_params(args),
        )
    except inference.ApplicabilityError as exc:
        raise CliError(str(exc), EXIT_APPLICABILITY) from None
    except ValueError as exc:
        raise CliError(str(exc), EXIT_CONFIG) from None
    _ensure_dir(args.output)
    _write_csv(os.path.join(args.output, "pvalues.csv"), ["dataset", "p_value"], enumerate(res.p_values))
    _write_csv(os.path.join(args.output, "qq.csv"), ["x", "y"], res.qq_pairs())
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "calibrate",
        "method": args.method,
        "alpha": args.alpha,
        "n_datasets": res.n_datasets,
        "n_degenerate": res.n_degenerate,
        "n_permutations": args.permutations,
        "seed": args.seed,
        "sweep": res.sweep,
        "scenario": config.to_dict(),
        "warnings": res.warnings,
    }
    if res.n_datasets:
        summary.update(
            type1_rate=res.type1_rate,
            ks_statistic=res.ks_statistic,
            ks_critical_1pct=res.ks_critical_1pct,
        )
    _dump_json(summary, os.path.join(args.output, "summary.json"))
    return EXIT_OK


def cmd_power(args) -> int:
    config = _load_scenario(args.scenario)
    regions = _load_regions(args)
    configs = _experiment_configs(config, args.grid)
    plan = _plan(args)
    params = _method_params(args)
    rows, curve, points = [], [], []
    for g, (label, cfg) in enumerate(configs):
        try:
            res = inference.power(cfg, args.method, plan, args.datasets, regions,
                                  alpha=args.alpha, workers=args.threads, **params)
        except inference.ApplicabilityError as exc:
            raise CliError(str(exc), EXIT_APPLICABILITY) from None
        except ValueError as exc:
            raise CliError(str(exc), EXIT_CONFIG) from None
        rows.extend((g, label, i, p) for i, p in enumerate(res.p_values))
        x = cfg.angle if args.grid == "angles" else g
        curve.append((x, res.power))
        points.append({"grid_index": g, "label": label, "power": res.power,
                       "n_rejected": res.n_rejected, "n_degenerate": res.n_degenerate})
    _ensure_dir(args.output)
    _write_csv(os.path.join(args.output, "pvalues.csv"), ["grid_index", "label", "dataset", "p_value"], rows)
    _write_csv(os.path.join(args.output, "power.csv"), ["x", "y"], curve)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "command": "power",
        "method": args.method,
        "alpha": args.alpha,
        "grid": args.grid,
        "n_datasets": args.datasets,
        "n_permutations": plan.n_permutations,
        "seed": plan.seed,
        "scenario": config.to_dict(),
        "mean_power": float(np.mean([p["power"] for p in points])),
        "points": points,
    }
    _dump_json(summary, os.path.join(args.output, "summary.json"))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _add_method_options(p, *, method_required=True):
    p.add_argument("--method", choices=METHODS, required=method_required)
    p.add_argument("--gamma", type=float, help="RBF bandwidth (hsic) or exponential-weight decay")
    p.add_argument("--ling-gamma", type=float, help="RBF bandwidth on frequency values (hsic)")
    p.add_argument("--tau", type=float, help="distance cutoff for threshold weights")
    p.add_argument("--knn", type=int, help="use k-nearest-neighbour weights with this k")
    p.add_argument("--weights", choices=inference.WEIGHT_KINDS, help="spatial weights for moran/joins")
    p.add_argument("--lowrank-tol", type=float, help="use low-rank HSIC with this Cholesky tolerance")
    p.add_argument("--threads", type=int, default=1)


def _add_region_options(p):
    p.add_argument("--regions", help="region CSV (id,population,centroid_x,centroid_y)")
    p.add_argument("--pool", help="location pool CSV (region_id,x,y)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geoling", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"geoling {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="permutation test for one variable")
    p.add_argument("--input", required=True)
    p.add_argument("--shape", choices=SHAPES, required=True)
    p.add_argument("--metric", choices=("euclidean", "haversine"), default="euclidean")
    p.add_argument("--permutations", type=int, default=999)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--output", required=True)
    _add_method_options(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("batch", help="test many variables and apply Benjamini-Hochberg")
    p.add_argument("--manifest", required=True, help="CSV with columns name,path,shape")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--metric", choices=("euclidean", "haversine"), default="euclidean")
    p.add_argument("--permutations", type=int, default=9999)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    _add_method_options(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("synth", help="generate one synthetic dataset")
    p.add_argument("--scenario", required=True, help="scenario JSON file")
    p.add_argument("--out", required=True, help="output folder")
    p.add_argument("--seed", type=int, required=True)
    _add_region_options(p)
    p.set_defaults(func=cmd_synth)

    for name, func, helptext in (
        ("calibrate", cmd_calibrate, "p-value calibration on a null scenario"),
        ("power", cmd_power, "rejection rate on a signal scenario"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--scenario", required=True)
        p.add_argument("--datasets", type=int, default=100)
        p.add_argument("--permutations", type=int, default=499)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--alpha", type=float, default=0.05)
        p.add_argument("--output", required=True, help="output folder")
        _add_region_options(p)
        _add_method_options(p)
        if name == "calibrate":
            p.add_argument("--sweep", action="store_true", help="min-p over a cutoff grid (uncalibrated)")
        else:
            p.add_argument("--grid", choices=("none", "angles", "centers"), default="none")
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; report those as configuration problems
        return EXIT_CONFIG if exc.code else EXIT_OK
    if getattr(args, "threads", 1) < 1:
        print("geoling: --threads must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except CliError as exc:
        print(f"geoling: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
