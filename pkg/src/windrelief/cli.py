"""``windrelief`` command line.

Exit codes: 0 success, 1 domain error (bad data or parameters), 2 usage or
I/O error. Every JSON output carries ``schema_version`` and a ``manifest``
recording the command, argument list, seed, input digests and outputs.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .cascadenet import (
    TrainConfig,
    init_network,
    model_from_json,
    model_to_json,
    sensitivity_sweep,
    train,
)
from .dataset import (
    FEATURE_NAMES,
    Role,
    build_feature_matrix,
    fit_normalization,
    load_roster,
    load_site_table,
    split_by_role,
    write_site_table,
)
from .errors import DomainError, EmptyInput, RangeViolation
from .metrics import compute_metrics, error_histogram
from .nasa import CACHE_ENV, PowerClient, fetch_site
from .relief import rank_features, rrelieff_weights
from .windmodels import PowerSpec, fit_lag_model, lag_predict, persistence_forecast, wind_power

SCHEMA_VERSION = 1
log = logging.getLogger("windrelief")


class UsageError(Exception):
    pass


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _manifest(args, inputs, outputs) -> dict:
    return {
        "command": args.command,
        "argv": list(args.argv),
        "seed": getattr(args, "seed", None),
        "inputs": {str(p): _digest(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
        "tool_version": __version__,
    }


def _write_json(path, doc: dict) -> None:
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: not valid JSON ({exc})") from None


def _parse_m(text):
    if text is None or text == "all":
        return "all"
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--m must be an integer or 'all', got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("--m must be positive")
    return value


def _load_sites(path, **kw):
    if not Path(path).is_file():
        raise UsageError(f"{path}: no such file")
    return load_site_table(path, **kw)


def _ranking(sites, args):
    fm = build_feature_matrix(sites)
    weights = rrelieff_weights(fm.X, fm.y, k=args.k, m=args.m, seed=args.seed)
    return rank_features(weights, FEATURE_NAMES), weights


# --------------------------------------------------------------------------
# subcommands


def cmd_fetch(args) -> int:
    roster = Path(args.data)
    if not roster.is_file():
        raise UsageError(f"{roster}: no such file")
    cache = Path(args.cache) if args.cache else None
    if cache is None:
        cache = Path(os.environ.get(CACHE_ENV) or Path(args.out).parent / ".power_cache")
    client = PowerClient(cache_dir=cache, wind_height=args.wind_height)
    sites = []
    for lineno, entry in enumerate(load_roster(roster), start=2):
        if entry.latitude is None or entry.longitude is None:
            raise RangeViolation(f"{roster} row {lineno}: site {entry.name!r} has no "
                                 f"coordinates", row=lineno)
        sites.append(fetch_site(entry.name, entry.state, entry.role, entry.latitude,
                                entry.longitude, client))
        print(f"fetched {entry.name} ({entry.latitude}, {entry.longitude})", file=sys.stderr)
    write_site_table(sites, args.out)
    print(f"wrote {len(sites)} sites ({12 * len(sites)} rows) to {args.out}")
    return 0


def cmd_validate(args) -> int:
    sites = _load_sites(args.data)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        train_s, test_s = split_by_role(sites)
    fm = build_feature_matrix(sites)
    summary = {
        "sites": len(sites),
        "rows": fm.n_rows,
        "training_sites": len(train_s),
        "testing_sites": len(test_s),
        "feature_min": dict(zip(FEATURE_NAMES, fm.X.min(axis=0).tolist())),
        "feature_max": dict(zip(FEATURE_NAMES, fm.X.max(axis=0).tolist())),
        "wind_speed_range": [float(fm.y.min()), float(fm.y.max())],
    }
    print(f"{args.data}: {len(sites)} sites, {fm.n_rows} rows, "
          f"{len(train_s)} Training / {len(test_s)} Testing")
    if args.out:
        _write_json(args.out, {"schema_version": SCHEMA_VERSION, "summary": summary,
                               "manifest": _manifest(args, [args.data], [args.out])})
    return 0


def cmd_rank(args) -> int:
    sites = _load_sites(args.data)
    ranking, weights = _ranking(sites, args)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "feature_names": list(FEATURE_NAMES),
        "weights": weights.to_dict(),
        "ranks": ranking.to_dict(),
        "parameters": {"k": args.k, "m": args.m, "seed": args.seed, "method": "rrelieff"},
        "manifest": _manifest(args, [args.data], [args.out]),
    }
    _write_json(args.out, doc)
    for name in ranking.top(len(FEATURE_NAMES)):
        i = FEATURE_NAMES.index(name)
        print(f"{ranking.ranks[i]:2d}  {name:22s} {weights.weights[i]: .6f}")
    return 0


def _selected_features(args, sites) -> tuple[list[str], list]:
    inputs = []
    if args.ranks:
        doc = _read_json(args.ranks)
        names = doc["ranks"]["ranked_names"]
        inputs.append(args.ranks)
    else:
        names = _ranking(sites, args)[0].top(len(FEATURE_NAMES))
    if not 1 <= args.top <= len(names):
        raise UsageError(f"--top must be between 1 and {len(names)}")
    return names[:args.top], inputs


def _train_config(args, n_hidden) -> TrainConfig:
    return TrainConfig(seed=args.seed, max_epochs=args.max_epochs, n_hidden=n_hidden)


def _scaled_split(sites, names):
    train_s, test_s = split_by_role(sites)
    if not train_s:
        raise EmptyInput("no Training-role sites in the data")
    tr = build_feature_matrix(train_s).select(names)
    norm = fit_normalization(tr.X, tr.y)
    te = build_feature_matrix(test_s).select(names) if test_s else None
    return tr, te, norm


def cmd_train(args) -> int:
    sites = _load_sites(args.data)
    names, extra_inputs = _selected_features(args, sites)
    tr, te, norm = _scaled_split(sites, names)
    cfg = _train_config(args, args.hidden)
    Xs, ys = norm.scale_features(tr.X), norm.scale_target(tr.y)
    test = (norm.scale_features(te.X), norm.scale_target(te.y)) if te is not None else None
    report = train(init_network(len(names), args.hidden, args.seed), Xs, ys, cfg, test=test)
    net = report.network
    train_metrics = compute_metrics(norm.inverse_target(net.predict(Xs)), tr.y)

    report_path = args.report or str(Path(args.out).with_suffix("")) + ".train.json"
    manifest = _manifest(args, [args.data, *extra_inputs], [args.out, report_path])
    Path(args.out).write_text(model_to_json(
        net, feature_names=names, normalization=norm.to_dict(), config=cfg,
        extra={"manifest": manifest, "train_rmse": train_metrics.rmse}) + "\n",
        encoding="utf-8")
    _write_json(report_path, {
        "schema_version": SCHEMA_VERSION,
        "feature_names": names,
        "train_report": report.to_dict(),
        "train_metrics": train_metrics.to_dict(),
        "manifest": manifest,
    })
    print(f"trained {len(names)}-{args.hidden}-1 cascade net on {tr.n_rows} rows "
          f"({', '.join(names)}); best epoch {report.best_epoch}, stop: {report.stop_reason}, "
          f"train RMSE {train_metrics.rmse:.4f} m/s")
    return 0


def _load_model(path):
    if not Path(path).is_file():
        raise UsageError(f"{path}: no such file")
    try:
        net, doc = model_from_json(Path(path).read_text(encoding="utf-8"))
    except (ValueError, KeyError) as exc:
        raise UsageError(f"{path}: not a usable model file ({exc})") from None
    from .dataset import NormalizationParams

    return net, doc, NormalizationParams.from_dict(doc["normalization"])


def _role_sites(sites, role):
    if role == "all":
        return list(sites)
    want = Role.TESTING if role == "testing" else Role.TRAINING
    return [s for s in sites if s.role is want]


def cmd_evaluate(args) -> int:
    net, doc, norm = _load_model(args.model)
    sites = _role_sites(_load_sites(args.data), args.role)
    if not sites:
        raise EmptyInput(f"{args.data}: no {args.role}-role sites to evaluate")
    fm = build_feature_matrix(sites).select(doc["feature_names"])
    pred = norm.inverse_target(net.predict(norm.scale_features(fm.X)))
    report = compute_metrics(pred, fm.y)
    hist = error_histogram(pred - fm.y, args.bins)
    rows = [{"site": sites[si].name, "month": mo, "actual": float(a), "predicted": float(p)}
            for (si, mo), a, p in zip(fm.row_origin, fm.y, pred)]
    _write_json(args.out, {
        "schema_version": SCHEMA_VERSION,
        "role": args.role,
        "metrics": report.to_dict(),
        "histogram": hist.to_dict(),
        "predictions": rows,
        "manifest": _manifest(args, [args.model, args.data], [args.out]),
    })
    print(f"{args.role}: n={report.n} RMSE {report.rmse:.4f} m/s, MAE {report.mae:.4f} m/s, "
          f"MAPE {report.mape if report.mape is None else round(report.mape, 3)}%")
    if args.plot:
        print(hist.render())
    return 0


def cmd_predict(args) -> int:
    net, doc, norm = _load_model(args.model)
    sites = _load_sites(args.data, require_target=False)
    fm = build_feature_matrix(sites).select(doc["feature_names"])
    pred = norm.inverse_target(net.predict(norm.scale_features(fm.X)))
    rows = [{"site": sites[si].name, "month": mo, "predicted": float(p)}
            for (si, mo), p in zip(fm.row_origin, pred)]
    _write_json(args.out, {
        "schema_version": SCHEMA_VERSION,
        "predictions": rows,
        "manifest": _manifest(args, [args.model, args.data], [args.out]),
    })
    print(f"predicted {len(rows)} site-months for {len(sites)} sites")
    return 0


def cmd_sweep(args) -> int:
    sites = _load_sites(args.data)
    names, extra_inputs = _selected_features(args, sites)
    tr, te, norm = _scaled_split(sites, names)
    if te is None:
        raise EmptyInput(f"{args.data}: sweep needs Testing-role sites for held-out MAPE")
    if args.hidden - args.delta < 0:
        raise UsageError("--hidden minus --delta must be >= 0")
    rows = sensitivity_sweep(
        args.hidden, args.delta, norm.scale_features(tr.X), norm.scale_target(tr.y),
        norm.scale_features(te.X), norm.scale_target(te.y),
        _train_config(args, args.hidden), target_inverse=norm.inverse_target,
        workers=args.workers)
    _write_json(args.out, {
        "schema_version": SCHEMA_VERSION,
        "feature_names": names,
        "trials": [{"n_hidden": r.n_hidden, "seed": r.seed, "mape": r.mape,
                    "best_epoch": r.best_epoch, "selected": r.selected} for r in rows],
        "manifest": _manifest(args, [args.data, *extra_inputs], [args.out]),
    })
    for r in rows:
        print(f"n_hidden={r.n_hidden:3d}  MAPE {r.mape:8.3f}%{'  <- selected' if r.selected else ''}")
    return 0


def _read_speeds(path) -> list[float]:
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"{path}: no such file")
    if path.suffix == ".json":
        doc = _read_json(path)
        try:
            return [float(r["predicted"]) for r in doc["predictions"]]
        except (KeyError, TypeError):
            raise UsageError(f"{path}: expected a predictions document") from None
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        fields = reader.fieldnames or []
        col = "wind_speed" if "wind_speed" in fields else ("predicted" if "predicted" in fields
                                                           else None)
        if col is None:
            raise UsageError(f"{path}: needs a wind_speed or predicted column")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(float(row[col]))
            except ValueError:
                raise RangeViolation(f"{path} row {lineno}: {col}={row[col]!r} is not a number",
                                     row=lineno, field=col) from None
        return out


def cmd_power(args) -> int:
    speeds = _read_speeds(args.data)
    spec = PowerSpec(args.rho, args.area)
    watts = np.atleast_1d(wind_power(spec, speeds))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "rho": spec.rho,
        "area": spec.area,
        "speeds": speeds,
        "power_w": watts.tolist(),
        "mean_power_w": float(watts.mean()) if len(watts) else None,
    }
    if args.horizon:
        pers = persistence_forecast(speeds, args.horizon)
        doc["persistence"] = {"speeds": pers.tolist(),
                              "power_w": np.atleast_1d(wind_power(spec, pers)).tolist()}
        if len(speeds) >= 4:
            lag = fit_lag_model(speeds)
            fc = np.maximum(lag_predict(lag, speeds[-2:], args.horizon), 0.0)
            doc["lag_model"] = {"model": lag.to_dict(), "speeds": fc.tolist(),
                                "power_w": np.atleast_1d(wind_power(spec, fc)).tolist()}
    doc["manifest"] = _manifest(args, [args.data], [args.out])
    _write_json(args.out, doc)
    print(f"{len(speeds)} speeds -> mean power {doc['mean_power_w']} W "
          f"(rho={spec.rho}, A={spec.area})")
    return 0


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="windrelief",
                                description="Relief feature ranking and cascade-net wind "
                                            "speed prediction.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help_text, data=True, out=True, seed=False):
        sp = sub.add_parser(name, help=help_text)
        if data:
            sp.add_argument("--data", required=True)
        if out:
            sp.add_argument("--out", required=True)
        if seed:
            sp.add_argument("--seed", type=int, default=0)
        sp.set_defaults(func=func)
        return sp

    sp = add("fetch", cmd_fetch, "fetch POWER climatology for a site roster")
    sp.add_argument("--wind-height", type=int, choices=(10, 50), default=10)
    sp.add_argument("--cache", help=f"cache directory (default ${CACHE_ENV} or beside --out)")

    sp = add("validate", cmd_validate, "check a site CSV and print a summary", out=False)
    sp.add_argument("--out")

    def relief_opts(sp):
        sp.add_argument("--k", type=int, default=10)
        sp.add_argument("--m", type=_parse_m, default="all")

    sp = add("rank", cmd_rank, "rank the 8 features with RReliefF", seed=True)
    relief_opts(sp)

    def net_opts(sp):
        relief_opts(sp)
        sp.add_argument("--ranks", help="ranks JSON from `rank` (computed if omitted)")
        sp.add_argument("--top", type=int, default=3)
        sp.add_argument("--hidden", type=int, default=10)
        sp.add_argument("--max-epochs", type=int, default=1000)

    sp = add("train", cmd_train, "train the cascade net on Training-role sites", seed=True)
    net_opts(sp)
    sp.add_argument("--report", help="train report path (default <out>.train.json)")

    sp = add("evaluate", cmd_evaluate, "score a model on site rows")
    sp.add_argument("--model", required=True)
    sp.add_argument("--role", choices=("testing", "training", "all"), default="testing")
    sp.add_argument("--bins", type=int, default=20)
    sp.add_argument("--plot", action="store_true", help="print a text histogram")

    sp = add("predict", cmd_predict, "apply a model to new site rows")
    sp.add_argument("--model", required=True)

    sp = add("sweep", cmd_sweep, "hidden-neuron sensitivity sweep", seed=True)
    net_opts(sp)
    sp.add_argument("--delta", type=int, default=5)
    sp.add_argument("--workers", type=int, default=1)

    sp = add("power", cmd_power, "convert wind speeds to power")
    sp.add_argument("--rho", type=float, default=1.225)
    sp.add_argument("--area", type=float, default=1.0)
    sp.add_argument("--horizon", type=int, default=0,
                    help="also forecast this many steps with persistence and the lag model")
    return p


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"windrelief {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (UsageError, OSError, ValueError) as exc:
        print(f"windrelief {args.command}: error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run())
