"""Command-line entry point: ``tradewinds {calibrate,predict,decay,regress,synth}``.

Every command writes its outputs plus ``manifest.json`` into ``--out-dir``.
Exit codes: 2 input problems, 3 degenerate data, 4 shape/kind mismatch,
5 regression failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .calibrate import DEFAULT_GRID, PsoConfig, grid_evaluate, pso_calibrate
from .domain import HOURS_PER_WEEK, ModelKind, ModelParams
from .errors import (
    DegenerateRange,
    InsufficientData,
    IngestError,
    KindMismatch,
    NoObservations,
    NonCalibratable,
    RankDeficient,
)
from .geo import build_distance_matrix
from .ingest import FILE_NAMES, load_scenario
from .models import market_share, observe, predict, share_difference
from .stats import classify, decay_analysis, geometric_intervals, mlr_fit, regression_design
from .synth import PROFILE_SHAPES, SynthSpec, generate, write_dataset

log = logging.getLogger("tradewinds")

EXIT_INGEST = 2
EXIT_DEGENERATE = 3
EXIT_SHAPE = 4
EXIT_REGRESSION = 5


class CommandError(Exception):
    def __init__(self, code, message):
        self.code = code
        super().__init__(message)


# -- helpers -------------------------------------------------------------------


def _floats(text):
    return tuple(float(v) for v in text.split(","))


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _num(v):
    return repr(float(v))


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_paths(args):
    base = Path(args.data) if args.data else None
    paths = {}
    for key in ("stores", "hourly", "visits", "neighborhoods"):
        given = getattr(args, key)
        if given:
            paths[key] = Path(given)
        elif base is not None:
            paths[key] = base / FILE_NAMES[key]
        else:
            raise CommandError(EXIT_INGEST, f"no {key} file: pass --{key} or --data DIR")
    return paths


def _load(args):
    paths = _input_paths(args)
    for key, p in paths.items():
        if not p.exists():
            raise CommandError(EXIT_INGEST, f"{key} file not found: {p}")
    kwargs = {}
    if args.min_visit_threshold is not None:
        kwargs = dict(privacy_filter=True, min_visit_threshold=args.min_visit_threshold)
    report = load_scenario(paths["stores"], paths["hourly"], paths["visits"], paths["neighborhoods"], **kwargs)
    for w in report.warnings:
        log.warning(w)
    args._inputs = {k: str(p) for k, p in paths.items()}
    args._hashes = {k: _sha256(p) for k, p in paths.items()}
    return report


# -- commands ------------------------------------------------------------------


def cmd_calibrate(args, out: Path):
    report = _load(args)
    s = report.scenario
    d = build_distance_matrix(s)
    kind = ModelKind(args.model)
    written = []

    if args.grid or args.grid_only:
        alphas = args.alphas or DEFAULT_GRID
        betas = args.betas or DEFAULT_GRID
        try:
            grid = grid_evaluate(s, d, kind, alphas, betas)
        except NoObservations as exc:
            raise CommandError(EXIT_DEGENERATE, str(exc)) from exc
        _write_csv(out / "grid.csv", ["alpha\\beta"] + [_num(b) for b in betas],
                   [[_num(a)] + [_num(v) for v in row] for a, row in zip(alphas, grid)])
        written.append("grid.csv")
        if args.grid_only:
            return written, {}

    overrides = dict(
        particles=args.particles, restarts=args.restarts, iterations=args.iterations,
        seed=args.seed,
        bounds_low=args.bounds_low, bounds_high=args.bounds_high,
    )
    if args.config:
        cfg = PsoConfig.from_file(args.config, **overrides)
    else:
        cfg = PsoConfig(**{k: v for k, v in overrides.items() if v is not None})
    try:
        res = pso_calibrate(s, d, kind, cfg, workers=args.threads)
    except (NoObservations, NonCalibratable) as exc:
        raise CommandError(EXIT_DEGENERATE, str(exc)) from exc
    _write_json(out / "result.json", {
        "model": kind.value,
        "alpha": res.best_params.alpha,
        "beta": res.best_params.beta,
        "r": res.best_objective,
        "evaluations": res.evaluations,
        "degenerate": res.degenerate,
        "zero_variance_evaluations": res.zero_variance_evaluations,
    })
    _write_csv(out / "trace.csv", ["restart", "iteration", "best_objective"],
               [[r, i, _num(v)] for r, tr in enumerate(res.trace) for i, v in enumerate(tr)])
    written += ["result.json", "trace.csv"]
    if res.degenerate:
        log.warning("objective is flat over the bounds; the returned exponents are arbitrary")
    return written, {"pso": cfg.to_dict()}


def _resolve_params(args):
    model = args.model
    if args.params:
        data = json.loads(Path(args.params).read_text())
        if model and data.get("model") and data["model"] != model:
            raise KindMismatch(f"--model {model} but {args.params} was calibrated for {data['model']}")
        model = model or data.get("model")
        alpha = args.alpha if args.alpha is not None else data["alpha"]
        beta = args.beta if args.beta is not None else data["beta"]
    else:
        if args.alpha is None or args.beta is None:
            raise CommandError(EXIT_INGEST, "pass --alpha and --beta, or --params result.json")
        alpha, beta = args.alpha, args.beta
    return ModelKind(model or "huff"), ModelParams(alpha, beta)


def cmd_predict(args, out: Path):
    report = _load(args)
    s = report.scenario
    d = build_distance_matrix(s)
    kind, params = _resolve_params(args)
    hour = args.hour
    if hour is not None and (not kind.dynamic or not 0 <= hour < HOURS_PER_WEEK):
        raise KindMismatch(f"--hour {hour} is not valid for model {kind.value}")
    pred = predict(s, d, params, kind)

    if args.weights == "population":
        weights = np.array([nb.population for nb in s.neighborhoods])
    else:
        weights = s.visit_array.sum(axis=1)
    ms = market_share(pred, weights, hour=hour)

    rows = []
    for i, nid in enumerate(pred.neighborhood_ids):
        for j, sid in enumerate(pred.store_ids):
            if pred.values.ndim == 2:
                rows.append([nid, sid, _num(pred.values[i, j])])
            elif hour is not None:
                rows.append([nid, sid, _num(pred.values[i, j, hour]), hour])
            else:
                rows.extend([nid, sid, _num(pred.values[i, j, t]), t] for t in range(HOURS_PER_WEEK))
    header = ["cbg_id", "store_id", "probability"] + (["hour"] if pred.values.ndim == 3 else [])
    _write_csv(out / "shares.csv", header, rows)

    _write_csv(out / "winners.csv", ["cbg_id", "store_id", "probability"],
               [[n, w, _num(p)] for n, w, p in zip(ms.neighborhood_ids, ms.winners, ms.winner_probability)])
    if ms.store_shares.ndim == 1:
        _write_csv(out / "store_shares.csv", ["store_id", "share"],
                   [[sid, _num(v)] for sid, v in zip(ms.store_ids, ms.store_shares)])
    else:
        _write_csv(out / "store_shares.csv", ["store_id", "hour", "share"],
                   [[sid, t, _num(ms.store_shares[j, t])]
                    for j, sid in enumerate(ms.store_ids) for t in range(HOURS_PER_WEEK)])

    try:
        breaks = geometric_intervals(ms.winner_probability, args.classes)
        classes = classify(ms.winner_probability, breaks)
    except DegenerateRange:
        breaks = np.array([ms.winner_probability[0]] * 2)
        classes = np.zeros(len(ms.winners), dtype=int)
    features = []
    for nb, w, p, c in zip(s.neighborhoods, ms.winners, ms.winner_probability, classes):
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [nb.centroid.lon, nb.centroid.lat]},
            "properties": {"cbg_id": nb.id, "store_id": w, "probability": float(p), "class": int(c)},
        })
    for st in s.stores:
        features.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [st.location.lon, st.location.lat]},
            "properties": {"store_id": st.id, "brand": st.brand, "role": "store"},
        })
    _write_json(out / "market_share.geojson", {
        "type": "FeatureCollection",
        "classification": {"method": "geometric", "breaks": [float(b) for b in breaks]},
        "features": features,
    })
    written = ["shares.csv", "winners.csv", "store_shares.csv", "market_share.geojson"]

    if args.diff:
        try:
            obs = observe(s, kind)
        except NoObservations as exc:
            raise CommandError(EXIT_DEGENERATE, str(exc)) from exc
        diff = share_difference(pred, obs, hour=hour)
        _write_csv(out / "diff.csv", ["cbg_id", "store_id", "difference"],
                   [[nid, sid, _num(diff.values[i, j])]
                    for i, nid in enumerate(diff.neighborhood_ids) for j, sid in enumerate(diff.store_ids)])
        _write_json(out / "diff_summary.json",
                    {"hour": hour, "min": diff.min, "max": diff.max, "mean_abs": diff.mean_abs})
        written += ["diff.csv", "diff_summary.json"]
    return written, {"model": kind.value, "alpha": params.alpha, "beta": params.beta}


def cmd_decay(args, out: Path):
    report = _load(args)
    s = report.scenario
    try:
        ds = decay_analysis(s, build_distance_matrix(s), bins=args.bins,
                            fit_min_km=args.fit_min_km, log_bins=not args.linear_bins)
    except NoObservations as exc:
        raise CommandError(EXIT_DEGENERATE, str(exc)) from exc
    _write_json(out / "decay.json", {
        "median_km": ds.median_km,
        "mean_of_medians_km": ds.mean_of_medians_km,
        "store_medians_km": ds.store_medians_km,
        "loglog_slope": None if np.isnan(ds.loglog_slope) else ds.loglog_slope,
        "loglog_intercept": None if np.isnan(ds.loglog_intercept) else ds.loglog_intercept,
        "fit_range_km": list(ds.fit_range_km),
        "bins": args.bins,
    })
    _write_csv(out / "pdf.csv", ["bin_low_km", "bin_high_km", "bin_center_km", "density"],
               [[_num(lo), _num(hi), _num(c), _num(v)]
                for lo, hi, c, v in zip(ds.bin_edges[:-1], ds.bin_edges[1:], ds.bin_centers, ds.density)])
    _write_csv(out / "ecdf.csv", ["distance_km", "cumulative_prob"],
               [[_num(x), _num(p)] for x, p in zip(ds.ecdf_km, ds.ecdf_prob)])
    rows = []
    for c, v, used in zip(ds.bin_centers, ds.density, ds.fit_mask):
        if v > 0:
            fitted = ds.loglog_intercept + ds.loglog_slope * np.log(c)
            rows.append([_num(np.log(c)), _num(np.log(v)), int(used), _num(fitted)])
    _write_csv(out / "loglog.csv", ["ln_distance", "ln_density", "in_fit", "fitted_ln_density"], rows)
    return ["decay.json", "pdf.csv", "ecdf.csv", "loglog.csv"], {}


def _regression_rows(rep, group=None):
    prefix = [group] if group is not None else []
    return [prefix + [v, _num(c), _num(se), _num(t), _num(p), stars]
            for v, c, se, t, p, stars in rep.rows()]


def cmd_regress(args, out: Path):
    report = _load(args)
    s = report.scenario
    X, y, groups = regression_design(s, build_distance_matrix(s), group_by=args.group_by)
    header = ["variable", "coefficient", "std_error", "t_value", "p_value", "significance"]
    try:
        pooled = mlr_fit(X, y)
    except (RankDeficient, InsufficientData) as exc:
        raise CommandError(EXIT_REGRESSION, str(exc)) from exc
    _write_csv(out / "regression.csv", header, _regression_rows(pooled))
    _write_json(out / "regression.json", {"r_squared": pooled.r_squared, "n_obs": pooled.n_obs,
                                          "variables": list(pooled.variables)})
    written = ["regression.csv", "regression.json"]
    if args.group_by:
        labels = np.array([str(g) for g in groups], dtype=object)
        coef_rows, r2_rows, r2 = [], [], []
        for g in sorted(set(labels.tolist())):
            sel = labels == g
            try:
                rep = mlr_fit({k: v[sel] for k, v in X.items()}, y[sel])
            except (RankDeficient, InsufficientData) as exc:
                log.warning("group %s: %s", g, exc)
                r2_rows.append([g, "NA", int(sel.sum())])
                continue
            coef_rows += _regression_rows(rep, g)
            r2_rows.append([g, _num(rep.r_squared), rep.n_obs])
            r2.append(rep.r_squared)
        if r2:
            r2_rows.append(["Mean", _num(np.mean(r2)), ""])
            r2_rows.append(["Std", _num(np.std(r2, ddof=1)) if len(r2) > 1 else "NA", ""])
        _write_csv(out / "regression_by_group.csv", [args.group_by] + header, coef_rows)
        _write_csv(out / "rsquared.csv", [args.group_by, "r_squared", "n_obs"], r2_rows)
        written += ["regression_by_group.csv", "rsquared.csv"]
    return written, {}


def cmd_synth(args, out: Path):
    spec = SynthSpec(
        n_stores=args.n_stores,
        n_neighborhoods=args.n_neighborhoods,
        alpha=args.alpha,
        beta=args.beta,
        profile_shape=args.profile,
        kappa=args.kappa,
        visits_per_neighborhood=args.visits_per_neighborhood,
        noise=args.noise,
        seed=args.seed,
        **({"bbox": args.bbox} if args.bbox else {}),
    )
    scenario, truth = generate(spec)
    paths = write_dataset(scenario, truth, out)
    return sorted(p.name for p in paths.values()), {}


# -- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    run = argparse.ArgumentParser(add_help=False)
    run.add_argument("--out-dir", default=".", help="directory for outputs (created if missing)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--threads", type=int, default=1, help="worker threads for calibration restarts")
    run.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="directory holding stores.csv, hourly.csv, visits.csv, neighborhoods.csv")
    data.add_argument("--stores", help="stores.csv path")
    data.add_argument("--hourly", help="hourly.csv path")
    data.add_argument("--visits", help="visits.csv path")
    data.add_argument("--neighborhoods", help="neighborhoods.csv path")
    data.add_argument("--min-visit-threshold", type=float, default=None,
                      help="drop visit rows below this count (privacy filter); off by default")

    kinds = [k.value for k in ModelKind]
    p = argparse.ArgumentParser(prog="tradewinds", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", parents=[run, data], help="fit alpha and beta by particle swarm")
    c.add_argument("--model", choices=kinds, default="thuff")
    c.add_argument("--config", help="flat key = value swarm configuration file")
    c.add_argument("--particles", type=int)
    c.add_argument("--restarts", type=int)
    c.add_argument("--iterations", type=int)
    c.add_argument("--bounds-low", type=_floats, help="alpha,beta lower bounds")
    c.add_argument("--bounds-high", type=_floats, help="alpha,beta upper bounds")
    c.add_argument("--grid", action="store_true", help="also write grid.csv")
    c.add_argument("--grid-only", action="store_true", help="only evaluate the grid")
    c.add_argument("--alphas", type=_floats)
    c.add_argument("--betas", type=_floats)
    c.set_defaults(func=cmd_calibrate)

    pr = sub.add_parser("predict", parents=[run, data], help="predicted shares, winners and map export")
    pr.add_argument("--model", choices=kinds)
    pr.add_argument("--alpha", type=float)
    pr.add_argument("--beta", type=float)
    pr.add_argument("--params", help="result.json from calibrate")
    pr.add_argument("--hour", type=int, help="hour of week 0..167 (Monday 00:00 = 0)")
    pr.add_argument("--diff", action="store_true", help="write predicted minus observed")
    pr.add_argument("--classes", type=int, default=7)
    pr.add_argument("--weights", choices=["population", "visits"], default="population")
    pr.set_defaults(func=cmd_predict)

    de = sub.add_parser("decay", parents=[run, data], help="distance-decay distribution")
    de.add_argument("--bins", type=int, default=30)
    de.add_argument("--fit-min-km", type=float, default=1.0)
    de.add_argument("--linear-bins", action="store_true")
    de.set_defaults(func=cmd_decay)

    rg = sub.add_parser("regress", parents=[run, data], help="visit-driver regression")
    rg.add_argument("--group-by", choices=["city", "brand"])
    rg.set_defaults(func=cmd_regress)

    sy = sub.add_parser("synth", parents=[run], help="write a synthetic dataset")
    sy.add_argument("--stores", dest="n_stores", type=int, default=5)
    sy.add_argument("--neighborhoods", dest="n_neighborhoods", type=int, default=200)
    sy.add_argument("--alpha", type=float, default=0.8)
    sy.add_argument("--beta", type=float, default=1.2)
    sy.add_argument("--profile", choices=list(PROFILE_SHAPES), default="dirichlet")
    sy.add_argument("--kappa", type=float, default=0.5)
    sy.add_argument("--noise", choices=["none", "poisson"], default="none")
    sy.add_argument("--visits-per-neighborhood", type=float, default=1000.0)
    sy.add_argument("--bbox", type=_floats, help="lat_min,lon_min,lat_max,lon_max")
    sy.set_defaults(func=cmd_synth)
    return p


def _config_echo(args):
    return {k: v for k, v in sorted(vars(args).items()) if not k.startswith("_") and k != "func"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    try:
        written, extra = args.func(args, out)
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (IngestError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (NoObservations, NonCalibratable) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except KindMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except (RankDeficient, InsufficientData) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGRESSION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    config = _config_echo(args)
    config.update(extra)
    _write_json(out / "manifest.json", {
        "command": args.command,
        "config": config,
        "inputs": getattr(args, "_inputs", {}),
        "input_sha256": getattr(args, "_hashes", {}),
        "outputs": written,
        "seed": args.seed,
        "tool_version": __version__,
        "wall_time_s": round(time.perf_counter() - start, 6),
    })
    return 0


if __name__ == "__main__":
    sys.exit(main())
