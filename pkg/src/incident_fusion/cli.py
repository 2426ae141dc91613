"""Command-line entry point: ``incident-fusion <command>``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Sequence

import pandas as pd

from .config import RunConfig, load_config
from .encoders import encode_all, read_encoded, write_encoded
from .encoders.cache import write_training_reports
from .errors import ConfigurationError, IncidentFusionError, MissingArtifactError
from .evaluation import build_baseline_table, make_folds, rank_baseline_models, run_grid, tune_model
from .explain import (
    build_chain,
    duration_tertiles,
    lime_explain,
    severity_groups,
    tfidf_fit,
    write_explanation,
)
from .ingest import (
    parse_incidents,
    parse_station_readings,
    write_incidents,
    write_station_readings,
)
from .matching import match_all, plot_series, read_matched, read_normalization, write_matched
from .nn import check_layers
from .pareto import pareto_front, random_split_experiment, random_vector_experiment, write_scatter
from .reports import (
    baseline_of,
    format_top_table,
    read_outcomes,
    read_ranking,
    write_outcomes,
    write_parallel_categories,
    write_ranking,
)
from .synthetic import NoiseLevels, SyntheticConfig, generate_synthetic

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
GRADIENT_TOLERANCE = 1e-4
GRID_TOP = 3

# cache_dir artifacts
INCIDENTS_FILE = "incidents.csv"
STATIONS_FILE = "stations.csv"
STATION_META_FILE = "stations_meta.csv"
REJECTED_INCIDENTS_FILE = "rejected_incidents.csv"
REJECTED_READINGS_FILE = "rejected_readings.csv"
MATCHED_FILE = "matched.csv"
ENCODED_FILE = "encoded.csv"
LOSSES_DIR = "losses"
MODELS_DIR = "models"
# output_dir artifacts
RANKING_FILE = "ranking.csv"
OUTCOMES_FILE = "outcomes.csv"
FRONT_FILE = "pareto_front.csv"
PARALLEL_FILE = "parallel_categories.csv"


def parse_synth(text: str) -> SyntheticConfig:
    """
    Synthetic dataset settings from ``key=value`` pairs separated by commas.

    Keys are ``seed``, ``n_incidents``, ``n_stations`` and ``duration_noise``.

    Examples
    --------
    >>> cfg = parse_synth("seed=1,n_incidents=60")
    >>> cfg.seed, cfg.n_incidents
    (1, 60)
    """
    values = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        key, sep, value = item.partition("=")
        if not sep:
            raise ConfigurationError(f"synthetic setting '{item}' is not key=value")
        values[key.strip()] = value.strip()
    unknown = sorted(set(values) - {"seed", "n_incidents", "n_stations", "duration_noise"})
    if unknown:
        raise ConfigurationError(f"unknown synthetic setting(s): {unknown}")
    try:
        kwargs = {k: int(values[k]) for k in ("seed", "n_incidents", "n_stations") if k in values}
        if "duration_noise" in values:
            kwargs["noise_sd"] = NoiseLevels(duration=float(values["duration_noise"]))
    except ValueError as exc:
        raise ConfigurationError(f"bad synthetic setting: {exc}") from exc
    return SyntheticConfig(**kwargs)


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(str(path), hint)
    return path


def _load_records(cfg: RunConfig):
    path = _require(cfg.cache_dir / INCIDENTS_FILE, "incident-fusion ingest")
    records, _ = parse_incidents(path)
    return records


def _load_stations(cfg: RunConfig):
    path = _require(cfg.cache_dir / STATIONS_FILE, "incident-fusion ingest")
    meta = _require(cfg.cache_dir / STATION_META_FILE, "incident-fusion ingest")
    stations, _ = parse_station_readings(path, meta)
    return stations


def _load_matched(cfg: RunConfig):
    records = _load_records(cfg)
    return records, read_matched(cfg.cache_dir / MATCHED_FILE, records)


def _grid_table(cfg: RunConfig):
    records, matched = _load_matched(cfg)
    return records, matched, build_baseline_table([m.incident for m in matched])


def cmd_ingest(cfg: RunConfig, args) -> int:
    """Validate raw incident and detector CSVs into the cache (or synthesise them first)."""
    incidents_path = Path(cfg.paths.incidents)
    stations_path = Path(cfg.paths.stations)
    meta_path = Path(cfg.paths.station_metadata) if cfg.paths.station_metadata else None
    synth = args.synth if getattr(args, "synth", None) else cfg.ingest.synth
    if synth:
        synth_cfg = parse_synth(synth)
        incidents, stations = generate_synthetic(synth_cfg)
        if meta_path is None:
            meta_path = stations_path.with_name(stations_path.stem + "_meta.csv")
        for p in (incidents_path, stations_path, meta_path):
            p.parent.mkdir(parents=True, exist_ok=True)
        write_incidents(incidents, incidents_path)
        write_station_readings(stations, stations_path, meta_path)
        print(f"Generated {len(incidents)} synthetic incidents at {len(stations)} stations (seed {synth_cfg.seed}).")

    _require(incidents_path, "a raw incident CSV in [paths] incidents")
    _require(stations_path, "a raw station CSV in [paths] stations")
    records, inc_report = parse_incidents(
        incidents_path, cfg.ingest.baseline_columns, cfg.ingest.categorical_columns, cfg.ingest.tz
    )
    stations, st_report = parse_station_readings(stations_path, meta_path, cfg.ingest.tz)

    cache = cfg.cache_dir
    cache.mkdir(parents=True, exist_ok=True)
    write_incidents(records, cache / INCIDENTS_FILE)
    write_station_readings(stations, cache / STATIONS_FILE, cache / STATION_META_FILE)
    inc_report.to_csv(cache / REJECTED_INCIDENTS_FILE)
    st_report.to_csv(cache / REJECTED_READINGS_FILE)
    print(inc_report.summary("incident"))
    print(st_report.summary("station reading"))
    return 0


def cmd_match(cfg: RunConfig, args) -> int:
    """Match incidents to stations and cache the six normalised series."""
    records = _load_records(cfg)
    stations = _load_stations(cfg)
    matched, summary = match_all(records, stations, cfg.match.radius_m, cfg.match.max_speed, cfg.match.max_flow)
    write_matched(matched, cfg.cache_dir / MATCHED_FILE, summary)
    if cfg.match.plots > 0:
        plot_dir = cfg.output_dir / "series"
        plot_dir.mkdir(parents=True, exist_ok=True)
        for m in matched[: cfg.match.plots]:
            plot_series(m, plot_dir / f"{m.incident.id}.svg")
    print(summary.line())
    return 0


def cmd_train_encoders(cfg: RunConfig, args) -> int:
    """Train every encoder variant and cache the encoded vectors."""
    records, matched = _load_matched(cfg)
    enc = cfg.encoders
    sidecar = read_normalization(cfg.cache_dir / MATCHED_FILE)
    normalization = {"max_speed": sidecar["max_speed"], "max_flow": sidecar["max_flow"]}
    cache, reports = encode_all(
        records,
        matched,
        units=enc.units,
        activations=enc.activations,
        sources=cfg.sources,
        heads=enc.heads,
        epochs=enc.epochs,
        batch_size=enc.batch_size,
        learning_rate=enc.learning_rate,
        seed=cfg.seed,
        n_jobs=cfg.eval.jobs,
        model_dir=cfg.cache_dir / MODELS_DIR,
        normalization=normalization,
    )
    write_encoded(cache, cfg.cache_dir / ENCODED_FILE)
    write_training_reports(reports, cfg.cache_dir / LOSSES_DIR)
    print(f"Encoded {len(cache)} source/units/activation combination(s) from {len(reports)} trained encoder(s).")
    return 0


def cmd_rank_models(cfg: RunConfig, args) -> int:
    """Cross-validate every configured model on the baseline features."""
    _, _, table = _grid_table(cfg)
    all_configs = cfg.regressor_configs()
    configs = {kind: all_configs[kind] for kind in cfg.models.kinds}
    ranked = rank_baseline_models(table, configs, seed=cfg.seed, k=cfg.eval.folds, n_jobs=cfg.eval.jobs)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_ranking(ranked, out / RANKING_FILE, out / "ranking.svg")
    for i, o in enumerate(ranked, start=1):
        print(f"{i}. {o.spec.model:<5} MAPE {o.metrics.mape:.2f}  RMSE {o.metrics.rmse:.2f}")
    print("Grid models: " + ", ".join(o.spec.model for o in ranked[:GRID_TOP]))
    return 0


def _grid_models(cfg: RunConfig, args) -> list[str]:
    if getattr(args, "models", None):
        models = [m.strip() for m in args.models.split(",") if m.strip()]
    elif cfg.models.grid:
        models = list(cfg.models.grid)
    else:
        models = read_ranking(cfg.output_dir / RANKING_FILE)[:GRID_TOP]
    unknown = [m for m in models if m not in cfg.regressor_configs()]
    if unknown or not models:
        raise ConfigurationError(f"unknown or empty model list: {models}")
    return models


def cmd_run_grid(cfg: RunConfig, args) -> int:
    """Evaluate every fused scenario for the grid models and report the best ones."""
    _, _, table = _grid_table(cfg)
    cache = read_encoded(cfg.cache_dir / ENCODED_FILE)
    models = _grid_models(cfg, args)
    all_configs = cfg.regressor_configs()
    configs = {m: all_configs[m] for m in models}
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)

    if getattr(args, "tune", False) or cfg.models.tune:
        plan = make_folds(table.n_rows, cfg.eval.folds, cfg.seed)
        for model in models:
            best, trail = tune_model(table, configs[model], cfg.tuning_grid(model), plan)
            configs[model] = best
            pd.DataFrame([{**params, "mape": m} for params, m in trail]).to_csv(
                out / f"tuning_{model}.csv", index=False, float_format="%.10g"
            )
            tuned = {k: getattr(best, k) for k in cfg.tuning_grid(model)}
            print(f"Tuned {model}: {tuned}")

    outcomes = run_grid(
        table,
        cache,
        configs,
        sources=cfg.sources,
        units=cfg.encoders.units,
        activations=cfg.encoders.activations,
        seed=cfg.seed,
        k=cfg.eval.folds,
        n_jobs=cfg.eval.jobs,
    )
    write_outcomes(outcomes, out / OUTCOMES_FILE)
    for model in models:
        mine = [o for o in outcomes if o.spec.model == model]
        text = format_top_table(mine, baseline_of(mine, model), cfg.eval.top_n)
        (out / f"top_{model}.txt").write_text(text + "\n")
        print(model)
        print(text)
        print()
    try:
        write_parallel_categories(outcomes, out / PARALLEL_FILE)
    except IncidentFusionError as exc:
        logger.warning("parallel categories skipped: %s", exc)
    return 0


def cmd_pareto(cfg: RunConfig, args) -> int:
    """Keep the outcomes no other outcome of the same model beats on both MAPE and RMSE."""
    out = cfg.output_dir
    outcomes = read_outcomes(out / OUTCOMES_FILE)
    fronts = []
    for model in dict.fromkeys(o.spec.model for o in outcomes):
        mine = [o for o in outcomes if o.spec.model == model]
        front = pareto_front(mine)
        fronts.extend(front)
        frame = pd.DataFrame(
            {
                "evaluation": range(len(mine)),
                "mape": [o.metrics.mape for o in mine],
                "rmse": [o.metrics.rmse for o in mine],
                "on_front": [o in front for o in mine],
            }
        )
        write_scatter(frame, out / f"pareto_{model}.csv", out / f"pareto_{model}.svg", title=model)
        print(f"{model}: {len(front)} of {len(mine)} outcomes on the MAPE/RMSE front")
    write_outcomes(fronts, out / FRONT_FILE)
    return 0


def cmd_random_experiment(cfg: RunConfig, args) -> int:
    """MAPE-vs-RMSE scatter of random vectors and, optionally, of random model splits."""
    ev = cfg.eval
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    frame = random_vector_experiment(ev.random_dims, ev.random_low, ev.random_high, ev.random_pairs, cfg.seed)
    write_scatter(frame, out / "random_vectors.csv", out / "random_vectors.svg", title="random vectors")
    corr = frame["mape"].corr(frame["rmse"])
    print(
        f"Random vectors: {len(frame)} evaluations, {int(frame['on_front'].sum())} on the front, "
        f"MAPE/RMSE correlation {corr:.3f}"
    )
    if getattr(args, "splits", False):
        _, _, table = _grid_table(cfg)
        config = cfg.regressor_configs()[ev.split_model]
        splits = random_split_experiment(
            table, config, ev.split_evals, ev.split_test_fraction, cfg.seed, ev.jobs
        )
        write_scatter(splits, out / "random_splits.csv", out / "random_splits.svg", title=f"{ev.split_model} splits")
        print(
            f"Random splits: {len(splits)} evaluations of {ev.split_model}, "
            f"{int(splits['on_front'].sum())} on the front"
        )
    return 0


def cmd_explain(cfg: RunConfig, args) -> int:
    """Word importances for the severity and duration-group classifiers of descriptions."""
    ex = cfg.explain
    records = sorted(_load_records(cfg), key=lambda r: r.id)
    descriptions = [r.description for r in records]
    n_terms = len(tfidf_fit(descriptions).vocabulary)
    k = min(ex.n_components, len(descriptions), n_terms)
    if k < ex.n_components:
        logger.warning("corpus supports only %d SVD components; using %d instead of %d", k, k, ex.n_components)

    groups = duration_tertiles([r.duration_min for r in records])
    print("Duration groups: " + ", ".join(groups.describe(max(r.duration_min for r in records))))
    chains = [
        build_chain(descriptions, severity_groups([r.severity for r in records]), k, ex.n_iter, cfg.seed, name="severity"),
        build_chain(descriptions, groups.labels, k, ex.n_iter, cfg.seed, name="duration"),
    ]

    by_id = {r.id: r for r in records}
    wanted = list(ex.incidents) or [r.id for r in records[: ex.n_incidents]]
    missing = [i for i in wanted if i not in by_id]
    if missing:
        raise ConfigurationError(f"unknown incident id(s) to explain: {missing}")

    out = cfg.output_dir / "explain"
    out.mkdir(parents=True, exist_ok=True)
    for chain in chains:
        for incident_id in wanted:
            text = by_id[incident_id].description
            label = chain.predict([text])[0]
            importances = lime_explain(
                text, chain, label, n_samples=ex.n_samples, seed=cfg.seed,
                kernel_width=ex.kernel_width, alpha=ex.alpha, top_k=ex.top_k, bigrams=ex.bigrams,
            )
            stem = out / f"{chain.name}_{incident_id}"
            write_explanation(importances, stem.with_suffix(".csv"), stem.with_suffix(".svg"),
                              title=f"{chain.name} {incident_id}: class {label}")
            words = ", ".join(f"{w.token} {w.weight:+.3f}" for w in importances)
            print(f"{chain.name} {incident_id} -> {label}: {words}")
    return 0


def cmd_check_gradients(cfg: RunConfig, args) -> int:
    """Compare analytic gradients with central differences."""
    worst = check_layers(n_seeds=args.seeds)
    for name, err in worst.items():
        print(f"{name:<14} max relative error {err:.2e}")
    if max(worst.values()) > GRADIENT_TOLERANCE:
        print(f"Gradient check failed: tolerance {GRADIENT_TOLERANCE:g}")
        return 4
    return 0


PIPELINE = (cmd_ingest, cmd_match, cmd_train_encoders, cmd_rank_models, cmd_run_grid, cmd_pareto)


def cmd_pipeline(cfg: RunConfig, args) -> int:
    """ingest, match, train-encoders, rank-models, run-grid and pareto on one config."""
    for step in PIPELINE:
        logger.info("pipeline step %s", step.__name__[4:].replace("_", "-"))
        code = step(cfg, args)
        if code:
            return code
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration (default: $INCIDENT_FUSION_CONFIG)")
    common.add_argument("--seed", type=int, help="master seed, overrides the config")
    common.add_argument("--jobs", type=int, help="worker processes, overrides [eval] jobs")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")

    parser = argparse.ArgumentParser(
        prog="incident-fusion",
        description="Traffic incident duration prediction with fused text and detector features",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", parents=[common], help="validate raw CSVs into the cache")
    p.add_argument("--synth", metavar="KEY=VALUE,...", help="generate a synthetic dataset first, e.g. seed=1")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("match", parents=[common], help="match incidents to detector stations")
    p.add_argument("--radius", type=float, help="match radius in metres")
    p.add_argument("--plots", type=int, help="write series plots for the first N matches")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("train-encoders", parents=[common], help="train the description and series encoders")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train_encoders)

    p = sub.add_parser("rank-models", parents=[common], help="rank models on the baseline features")
    p.set_defaults(func=cmd_rank_models)

    p = sub.add_parser("run-grid", parents=[common], help="evaluate every fused scenario")
    p.add_argument("--models", help="comma-separated model kinds (default: top 3 of rank-models)")
    p.add_argument("--tune", action="store_true", help="grid-search hyper-parameters first")
    p.set_defaults(func=cmd_run_grid)

    p = sub.add_parser("pareto", parents=[common], help="MAPE/RMSE Pareto fronts of the grid outcomes")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("random-experiment", parents=[common], help="MAPE vs RMSE on random vectors")
    p.add_argument("--splits", action="store_true", help="also run repeated random train/test splits")
    p.set_defaults(func=cmd_random_experiment)

    p = sub.add_parser("explain", parents=[common], help="word importances for severity and duration groups")
    p.add_argument("--incident", action="append", dest="incidents", help="incident id to explain (repeatable)")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("check-gradients", parents=[common], help="finite-difference check of the network code")
    p.add_argument("--seeds", type=int, default=20)
    p.set_defaults(func=cmd_check_gradients)

    p = sub.add_parser("pipeline", parents=[common], help="ingest through pareto in one go")
    p.add_argument("--synth", metavar="KEY=VALUE,...", help="generate a synthetic dataset first")
    p.add_argument("--models", help="comma-separated model kinds for the grid")
    p.add_argument("--tune", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def _configure_logging(verbosity: int) -> None:
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, force=True)


def main(argv: Sequence[str] | None = None) -> int:
    """
    Run one command and return its exit code.

    Exit codes are 0 on success, 2 for input, schema or configuration
    errors, 3 when an upstream artifact is missing and 4 for numerical
    failures.
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    _configure_logging(args.verbose)
    try:
        cfg = load_config(args.config)
        cfg = cfg.override(
            seed=args.seed,
            **{
                "eval.jobs": args.jobs,
                "match.radius_m": getattr(args, "radius", None),
                "match.plots": getattr(args, "plots", None),
                "encoders.epochs": getattr(args, "epochs", None),
                "explain.incidents": getattr(args, "incidents", None),
            },
        )
        return args.func(cfg, args)
    except IncidentFusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
