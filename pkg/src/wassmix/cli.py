"""Batch command-line interface.

Subcommands: simulate, fit, predict, evaluate, pdp.  Options may also be
supplied through ``--config FILE`` holding ``key=value`` lines (keys are the
long option names); explicit flags override the config file, which
overrides built-in defaults.  Validation failures exit 2 with a message
naming the offending flag or file, numerical failures exit 3, success exits
0.  Progress goes to stdout (suppress with --quiet); machine-readable
output goes only to the requested files.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import dataio
from .distributions import EmpiricalDistribution, LevelGrid, empirical_quantiles
from .errors import (
    DegenerateVarianceError,
    InvalidInputError,
    NumericalError,
    WassmixError,
)
from .evaluate import functional_pdp, ice_curves, marginal_param_curve, prediction_loss
from .mm import PiUpdate
from .model import (
    DistributionalDataset,
    ScgmmConfig,
    deserialize,
    serialize,
    train,
)
from .simulate import Scenario, SimConfig, simulate_linear, simulate_mixture
from .trees import TreeParams


class _CliError(Exception):
    """Validation failure destined for exit code 2."""


def _say(opts, message):
    if not opts.get("quiet"):
        print(message)


def _read_config_file(path):
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _CliError(f"--config {path}:{lineno}: expected key=value")
                key, val = line.split("=", 1)
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as exc:
        raise _CliError(f"--config: cannot read {path}: {exc}")
    return values


def _resolve(args, spec):
    """Merge defaults < config file < explicit flags into one dict.

    spec maps option name to (default, cast); cast is applied to config-file
    strings.
    """
    opts = {key: default for key, (default, _) in spec.items()}
    filevals = _read_config_file(args.config) if getattr(args, "config", None) else {}
    for key, raw in filevals.items():
        if key not in spec:
            raise _CliError(f"--config: unknown option {key!r}")
        cast = spec[key][1]
        if cast is bool:
            opts[key] = raw.lower() in ("1", "true", "yes")
        else:
            try:
                opts[key] = cast(raw)
            except ValueError:
                raise _CliError(f"--config: bad value for {key}: {raw!r}")
    for key in spec:
        flag = getattr(args, key, None)
        if flag is not None:
            opts[key] = flag
    return opts


def _require(opts, key):
    if opts.get(key) is None:
        raise _CliError(f"--{key.replace('_', '-')} is required")
    return opts[key]


def _check(cond, message):
    if not cond:
        raise _CliError(message)


def _load_model(path):
    try:
        with open(path, "rb") as fh:
            payload = fh.read()
    except OSError as exc:
        raise _CliError(f"--model: cannot read {path}: {exc}")
    return deserialize(payload)


def cmd_simulate(args) -> int:
    spec = dict(scenario=("eq7", str), n_samples=(None, int), points=(None, int),
                omega=(0.1, float), seed=(0, int), out_x=(None, str),
                out_q=(None, str), quiet=(False, bool))
    opts = _resolve(args, spec)
    scenario = opts["scenario"]
    _check(scenario in ("eq7", "linear"), f"--scenario must be eq7 or linear, got {scenario!r}")
    n_samples = _require(opts, "n_samples")
    points = _require(opts, "points")
    _check(n_samples >= 2, f"--n-samples must be at least 2, got {n_samples}")
    _check(points >= 2, f"--points must be at least 2, got {points}")
    _check(opts["omega"] >= 0.0, f"--omega must be non-negative, got {opts['omega']}")
    out_x = _require(opts, "out_x")
    out_q = _require(opts, "out_q")

    cfg = SimConfig(n_samples=n_samples, n_points=points, omega=opts["omega"],
                    seed=opts["seed"],
                    scenario=Scenario.MIXTURE if scenario == "eq7" else Scenario.LINEAR)
    grid = cfg.grid
    if cfg.scenario is Scenario.MIXTURE:
        data = simulate_mixture(cfg)
        Q = np.stack(
            [empirical_quantiles(o, grid).values for o in data.outcomes]
        )
    else:
        data = simulate_linear(cfg)
        Q = np.stack([o.values for o in data.outcomes])
    dataio.write_covariates_csv(out_x, data.X)
    dataio.write_quantiles_csv(out_q, grid.levels, Q)
    _say(opts, f"wrote {data.n} rows to {out_x} and {out_q}")
    return 0


def _load_fit_inputs(opts):
    X = dataio.read_covariates_csv(_require(opts, "in_x"))
    if opts.get("in_q") and opts.get("in_points"):
        raise _CliError("--in-q and --in-points are mutually exclusive")
    if opts.get("in_q"):
        grid, Q = dataio.read_quantiles_csv(opts["in_q"])
        _check(Q.shape[0] == X.shape[0],
               f"--in-q: {opts['in_q']} has {Q.shape[0]} rows but "
               f"{opts['in_x']} has {X.shape[0]}")
        outcomes = tuple(dataio.quantile_rows_to_functions(grid, Q))
    elif opts.get("in_points"):
        groups = dataio.read_points_csv(opts["in_points"])
        _check(len(groups) == X.shape[0],
               f"--in-points: {opts['in_points']} has {len(groups)} samples but "
               f"{opts['in_x']} has {X.shape[0]} rows")
        outcomes = tuple(EmpiricalDistribution(g) for g in groups)
    else:
        raise _CliError("one of --in-q or --in-points is required")
    return DistributionalDataset(X, outcomes)


def cmd_fit(args) -> int:
    spec = dict(in_x=(None, str), in_q=(None, str), in_points=(None, str),
                k=(None, int), eta=(0.1, float), max_iters=(100, int),
                patience=(5, int), val_fraction=(0.2, float), seed=(0, int),
                tree_depth=(3, int), min_leaf=(10, int), pi_update=("em", str),
                out_model=(None, str), out_trace=(None, str), quiet=(False, bool))
    opts = _resolve(args, spec)
    k = _require(opts, "k")
    _check(k >= 1, f"--k must be at least 1, got {k}")
    _check(opts["eta"] > 0.0, f"--eta must be positive, got {opts['eta']}")
    _check(opts["max_iters"] >= 1, f"--max-iters must be at least 1, got {opts['max_iters']}")
    _check(opts["patience"] >= 1, f"--patience must be at least 1, got {opts['patience']}")
    _check(0.0 < opts["val_fraction"] < 1.0,
           f"--val-fraction must be inside (0, 1), got {opts['val_fraction']}")
    _check(opts["pi_update"] in ("em", "gradient"),
           f"--pi-update must be em or gradient, got {opts['pi_update']!r}")
    out_model = _require(opts, "out_model")

    data = _load_fit_inputs(opts)
    cfg = ScgmmConfig(
        n_components=k,
        learning_rate=opts["eta"],
        max_boost_iters=opts["max_iters"],
        early_stop_patience=opts["patience"],
        validation_fraction=opts["val_fraction"],
        tree=TreeParams(max_depth=opts["tree_depth"], min_samples_leaf=opts["min_leaf"]),
        seed=opts["seed"],
        pi_update=PiUpdate(opts["pi_update"]),
    )
    _say(opts, f"fitting K={k} mixture on {data.n} samples x {data.n_features} features")
    model = train(data, cfg)
    with open(out_model, "wb") as fh:
        fh.write(serialize(model))
    if opts.get("out_trace"):
        dataio.write_trace_csv(opts["out_trace"], model.trace)
    it, tl, vl = model.trace[model.best_iteration]
    _say(opts, f"best iteration {it}: train loss {tl:.6g}, validation loss {vl:.6g}")
    return 0


def cmd_predict(args) -> int:
    spec = dict(model=(None, str), in_x=(None, str), out_q=(None, str),
                out_params=(None, str), quiet=(False, bool))
    opts = _resolve(args, spec)
    model = _load_model(_require(opts, "model"))
    X = dataio.read_covariates_csv(_require(opts, "in_x"))
    out_q = _require(opts, "out_q")
    _check(X.shape[1] == model.n_features or X.shape[0] == 0,
           f"--in-x: expected {model.n_features} feature columns, got {X.shape[1]}")
    if X.shape[0] == 0:
        X = X.reshape(0, model.n_features)
    grid = model.config.grid
    Q = model.predict_quantiles_batch(X)
    dataio.write_quantiles_csv(out_q, grid.levels, Q)
    if opts.get("out_params"):
        pi, mu, sd = model.predict_params_batch(X)
        K = model.config.n_components
        with open(opts["out_params"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [f"pi_{k + 1}" for k in range(K)]
                + [f"mu_{k + 1}" for k in range(K)]
                + [f"sigma_{k + 1}" for k in range(K)]
            )
            for i in range(X.shape[0]):
                writer.writerow([repr(float(v)) for v in (*pi[i], *mu[i], *sd[i])])
    _say(opts, f"predicted {X.shape[0]} rows to {out_q}")
    return 0


def cmd_evaluate(args) -> int:
    spec = dict(observed=(None, str), predicted=(None, str), out_json=(None, str),
                out_csv=(None, str), quiet=(False, bool))
    opts = _resolve(args, spec)
    grid_o, Q_o = dataio.read_quantiles_csv(_require(opts, "observed"))
    grid_p, Q_p = dataio.read_quantiles_csv(_require(opts, "predicted"))
    _check(grid_o == grid_p, "--observed and --predicted use different level grids")
    _check(Q_o.shape[0] == Q_p.shape[0],
           f"row mismatch: {Q_o.shape[0]} observed vs {Q_p.shape[0]} predicted")
    _check(Q_o.shape[0] > 0, "--observed: no rows to evaluate")
    observed = dataio.quantile_rows_to_functions(grid_o, Q_o)
    predicted = dataio.quantile_rows_to_functions(grid_p, Q_p)
    r_squared = None
    try:
        report = prediction_loss(observed, predicted)
        per_sample, mean_loss = report.per_sample, report.mean_loss
        r_squared, variance = report.r_squared, report.variance
    except DegenerateVarianceError as exc:
        per_sample, mean_loss, variance = exc.per_sample, exc.mean_loss, 0.0
        _say(opts, "warning: observed outcomes are identical, R^2 undefined")
    doc = {
        "n": int(per_sample.size),
        "mean_w2": mean_loss,
        "r_squared": r_squared,
        "wasserstein_variance": variance,
    }
    out_json = _require(opts, "out_json")
    with open(out_json, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if opts.get("out_csv"):
        with open(opts["out_csv"], "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["index", "w2"])
            for i, v in enumerate(per_sample):
                writer.writerow([i, repr(float(v))])
    _say(opts, f"mean W2 loss {mean_loss:.6g}"
         + (f", R^2 {r_squared:.6g}" if r_squared is not None else ""))
    return 0


def cmd_pdp(args) -> int:
    spec = dict(model=(None, str), in_x=(None, str), feature=(None, int),
                rho=(0.5, float), mode=("quantile", str), grid_points=(25, int),
                grid_min=(None, float), grid_max=(None, float), out=(None, str),
                quiet=(False, bool))
    opts = _resolve(args, spec)
    model = _load_model(_require(opts, "model"))
    X = dataio.read_covariates_csv(_require(opts, "in_x"))
    out = _require(opts, "out")
    feature = _require(opts, "feature")
    _check(1 <= feature <= model.n_features,
           f"--feature must be in 1..{model.n_features} (1-based), got {feature}")
    _check(X.shape[0] > 0, "--in-x: need at least one row")
    _check(X.shape[1] == model.n_features,
           f"--in-x: expected {model.n_features} feature columns, got {X.shape[1]}")
    _check(opts["mode"] in ("quantile", "params", "ice"),
           f"--mode must be quantile, params or ice, got {opts['mode']!r}")
    _check(0.0 < opts["rho"] < 1.0, f"--rho must be inside (0, 1), got {opts['rho']}")
    _check(opts["grid_points"] >= 1, "--grid-points must be at least 1")
    fidx = feature - 1
    lo = opts["grid_min"] if opts["grid_min"] is not None else float(X[:, fidx].min())
    hi = opts["grid_max"] if opts["grid_max"] is not None else float(X[:, fidx].max())
    _check(lo <= hi, f"--grid-min {lo} exceeds --grid-max {hi}")
    if opts["grid_points"] == 1 or lo == hi:
        value_grid = np.array([lo])
    else:
        value_grid = np.linspace(lo, hi, opts["grid_points"])

    with open(out, "w", newline="") as fh:
        writer = csv.writer(fh)
        if opts["mode"] == "quantile":
            curve = functional_pdp(model, X, fidx, value_grid, opts["rho"])
            writer.writerow(["feature_value", "curve_value"])
            for v, y in zip(curve.feature_values, curve.values):
                writer.writerow([repr(float(v)), repr(float(y))])
        elif opts["mode"] == "params":
            curves = marginal_param_curve(model, X, fidx, value_grid)
            K = model.config.n_components
            writer.writerow(
                ["feature_value"]
                + [f"pi_{k + 1}" for k in range(K)]
                + [f"mu_{k + 1}" for k in range(K)]
                + [f"sigma_{k + 1}" for k in range(K)]
            )
            for j, v in enumerate(curves.feature_values):
                writer.writerow(
                    [repr(float(v))]
                    + [repr(float(x)) for x in (*curves.weights[j], *curves.means[j], *curves.sds[j])]
                )
        else:
            matrix = ice_curves(model, X, fidx, value_grid, opts["rho"])
            writer.writerow(["row", "feature_value", "value"])
            for i in range(matrix.shape[0]):
                for j, v in enumerate(value_grid):
                    writer.writerow([i, repr(float(v)), repr(float(matrix[i, j]))])
    _say(opts, f"wrote {opts['mode']} curve for feature {feature} to {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wassmix",
        description="Conditional Gaussian mixture regression for distributional outcomes",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value options file")
        p.add_argument("--quiet", action="store_true", default=None,
                       help="suppress progress output")

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--scenario", choices=["eq7", "linear"])
    p.add_argument("--n-samples", type=int, dest="n_samples")
    p.add_argument("--points", type=int)
    p.add_argument("--omega", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-x", dest="out_x")
    p.add_argument("--out-q", dest="out_q")
    add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="train a model from covariates and outcomes")
    p.add_argument("--in-x", dest="in_x")
    p.add_argument("--in-q", dest="in_q")
    p.add_argument("--in-points", dest="in_points")
    p.add_argument("--k", type=int)
    p.add_argument("--eta", type=float)
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--patience", type=int)
    p.add_argument("--val-fraction", type=float, dest="val_fraction")
    p.add_argument("--seed", type=int)
    p.add_argument("--tree-depth", type=int, dest="tree_depth")
    p.add_argument("--min-leaf", type=int, dest="min_leaf")
    p.add_argument("--pi-update", choices=["em", "gradient"], dest="pi_update")
    p.add_argument("--out-model", dest="out_model")
    p.add_argument("--out-trace", dest="out_trace")
    add_common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict quantiles for covariate rows")
    p.add_argument("--model")
    p.add_argument("--in-x", dest="in_x")
    p.add_argument("--out-q", dest="out_q")
    p.add_argument("--out-params", dest="out_params")
    add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against observations")
    p.add_argument("--observed")
    p.add_argument("--predicted")
    p.add_argument("--out-json", dest="out_json")
    p.add_argument("--out-csv", dest="out_csv")
    add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pdp", help="partial dependence / ICE / parameter curves")
    p.add_argument("--model")
    p.add_argument("--in-x", dest="in_x")
    p.add_argument("--feature", type=int, help="1-based feature index")
    p.add_argument("--rho", type=float)
    p.add_argument("--mode", choices=["quantile", "params", "ice"])
    p.add_argument("--grid-points", type=int, dest="grid_points")
    p.add_argument("--grid-min", type=float, dest="grid_min")
    p.add_argument("--grid-max", type=float, dest="grid_max")
    p.add_argument("--out")
    add_common(p)
    p.set_defaults(func=cmd_pdp)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (_CliError, InvalidInputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except WassmixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
