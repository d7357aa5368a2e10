"""Command-line entry point: ``gtprep {synth,ingest,preprocess,backtest,report}``.

Exit codes: 0 success, 2 configuration or input error, 3 numerical failures
(some forecast weeks failed; outputs are still written).
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime as dt
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .cluster import write_clusters
from .denoise import SplineDenoiser
from .evalstats import snr_log_ratio, summarize_report
from .forecast import write_trace
from .ingest import (IngestError, SeriesPanel, align_panels, parse_trends_csv, read_panels,
                     write_panels)
from .pipeline import (ConfigError, PipelineConfig, StageError, backtest_location,
                       preprocess_location, report_rows, synth_location)
from .select import write_predictors
from .synthgen import generate_world, load_world_config, save_world_config
from .triage import write_triage_report

log = logging.getLogger("gtprep")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3

# default, meaning and provenance of every configuration field
FIELD_HELP = {
    "seed": "root seed for every random stream (ours)",
    "n_locations": "synthetic locations written by synth (ours)",
    "n_downloads": "replicate downloads per location (published study: 27)",
    "world": "overrides of the synthetic world parameters (ours)",
    "target": "synthetic target: driving themes, AR(1) noise level and persistence (ours)",
    "train_end": "first test week, ISO date; null means test_weeks before the end (ours)",
    "test_weeks": "length of the out-of-sample period (ours)",
    "dedup_threshold": "correlation above which near-duplicate keywords are dropped (published)",
    "zero_low": "zero fraction below which a keyword is used on its own (published)",
    "zero_high": "zero fraction above which a keyword is discarded (published)",
    "k_max": "largest cluster count on the elbow curve; null means min(30, ceil(n/3)) (ours)",
    "cluster_dominance": "share of keywords above which a cluster is split once (published)",
    "combine_mode": "auto, ingested-combined, simulated-union or summed (ours)",
    "lambda_min": "smallest smoothing parameter on the grid (published)",
    "lambda_max": "largest smoothing parameter on the grid (published)",
    "lambda_count": "grid size, log-spaced (ours)",
    "denoise_window": "trailing spline window in weeks (published)",
    "denoise_gate": "only smooth series above the median one-step RMSE (published)",
    "adf_alpha": "significance level of the unit-root cascade (published)",
    "select_threshold": "pairwise correlation treated as collinear (ours; unstated in the study)",
    "select_cap": "maximum predictors per location (ours; unstated in the study)",
    "horizons": "forecast horizons in weeks, 0 is the nowcast (published)",
    "models": "built-in models: arimax, sarimax, argo (published)",
    "variants": "exogenous variants: none, raw, clustering, denoising, detrending (published)",
    "train_window": "rolling estimation window in weeks (published: 104)",
    "argo_lags": "target lags in the lasso autoregression (published: 52)",
    "argo_folds": "contiguous cross-validation folds for the lasso penalty (ours)",
    "plugins": "external models: {name, command, target_lags, exog_lags, expanding, ...} (ours)",
}


def _defaults_epilog() -> str:
    cfg = PipelineConfig()
    lines = ["configuration fields (JSON file via --config) and defaults:"]
    for f in dataclasses.fields(cfg):
        value = json.dumps(getattr(cfg, f.name))
        lines.append(f"  {f.name} = {value}\n      {FIELD_HELP[f.name]}")
    return "\n".join(lines)


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    cfg.validate()
    return cfg


def _header(cfg: PipelineConfig) -> str:
    return f"# root_seed={cfg.seed}\n"


def _write_frame(frame: pd.DataFrame, path: Path, header: str = "") -> None:
    with open(path, "w", newline="") as fh:
        fh.write(header)
        frame.to_csv(fh, index=False, lineterminator="\n", float_format="%.10g")


def _read_target(path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"target file not found: {path}")
    raw = pd.read_csv(path, comment="#", dtype={"location": str})
    if not {"date", "target"} <= set(raw.columns):
        raise IngestError("target file needs 'date' and 'target' columns")
    raw["date"] = pd.to_datetime(raw["date"])
    if "location" not in raw.columns:
        raw["location"] = ""
    return raw


def _target_for(targets: pd.DataFrame, location: str) -> pd.Series:
    sub = targets[(targets["location"] == location) | (targets["location"] == "")]
    if sub.empty:
        raise IngestError(f"no target rows for location {location!r}")
    series = pd.Series(sub["target"].to_numpy(dtype=float),
                       index=pd.DatetimeIndex(sub["date"], name="date"), name="target")
    if series.index.has_duplicates:
        raise IngestError(f"duplicate target weeks for location {location!r}")
    return series.sort_index()


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _load_config(args)
    if args.locations is not None:
        cfg.n_locations = args.locations
    if args.downloads is not None:
        cfg.n_downloads = args.downloads
    cfg.validate()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    targets = []
    for i in range(cfg.n_locations):
        world, panels, target = synth_location(cfg, i)
        loc = panels[0].location
        save_world_config(world.config, out / f"world_{loc}.json")
        write_panels(panels, out / f"panels_{loc}.csv")
        targets.append(pd.DataFrame({"date": target.index.strftime("%Y-%m-%d"), "location": loc,
                                     "target": target.to_numpy()}))
        log.info("location %s: %d keywords, %d weeks, %d downloads", loc, len(world.keywords),
                 len(world.dates), len(panels))
    _write_frame(pd.concat(targets, ignore_index=True), out / "target.csv", _header(cfg))
    return EXIT_OK


def cmd_ingest(args) -> int:
    download = dt.date.fromisoformat(args.download_date) if args.download_date else None
    panels = []
    for i, path in enumerate(args.inputs):
        text = Path(path).read_text(encoding="utf-8-sig")
        date = download + dt.timedelta(days=i) if download and args.replicates else download
        panels.append(parse_trends_csv(text, args.location, date))
    if len(panels) > 1 and args.replicates:
        panels = list(align_panels(panels).panels)
    elif len(panels) > 1:
        # several files of one download: keyword blocks side by side
        first = panels[0]
        frames = [p.to_frame() for p in panels]
        joined = pd.concat(frames, axis=1, join="inner")
        if joined.columns.has_duplicates:
            raise IngestError("the same keyword appears in more than one input file")
        panels = [SeriesPanel(first.location, [d.date() for d in joined.index],
                              list(joined.columns), joined.to_numpy().T, first.download_date)]
    write_panels(panels, args.out)
    return EXIT_OK


def _location_panels(path) -> dict[str, list]:
    if not Path(path).is_file():
        raise FileNotFoundError(f"panel file not found: {path}")
    by_loc: dict[str, list] = {}
    for p in read_panels(path):
        by_loc.setdefault(p.location, []).append(p)
    if not by_loc:
        raise IngestError("panel file is empty")
    return by_loc


def _snr_report(panels, result, cfg) -> pd.DataFrame | None:
    """Mean log SNR ratio per individually kept keyword across replicate downloads."""
    kept = result.triage_plan.kept if result.triage_plan else []
    if len(panels) < 3 or not kept:
        return None
    train_len = result.train_len
    den = SplineDenoiser(cfg.denoise_window, cfg.lambda_grid, gate=False)
    den.fit(panels[0].to_frame()[kept].iloc[:train_len])
    raw = np.stack([p.to_frame()[kept].to_numpy().T for p in panels])
    smooth = np.stack([den.transform(p.to_frame()[kept]).to_numpy().T for p in panels])
    ratio = snr_log_ratio(raw, smooth)
    with np.errstate(invalid="ignore"):
        means = [float(np.nanmean(r)) if np.any(np.isfinite(r)) else math.nan for r in ratio]
    return pd.DataFrame({"keyword": kept, "mean_log_snr_ratio": means})


def _world_for(spec, location: str):
    """World for ``location``: a JSON file, or ``world_<location>.json`` in a directory."""
    if not spec:
        return None
    path = Path(spec)
    if path.is_dir():
        path = path / f"world_{location}.json"
    if not path.is_file():
        raise FileNotFoundError(f"world file not found: {path}")
    return generate_world(load_world_config(path))


def cmd_preprocess(args) -> int:
    cfg = _load_config(args)
    by_loc: dict[str, list] = {}
    for path in args.panels:
        for loc, panels in _location_panels(path).items():
            by_loc.setdefault(loc, []).extend(panels)
    targets = _read_target(args.target) if args.target else None
    skip = [s for s in ("cluster", "denoise", "detrend") if getattr(args, f"skip_{s}")]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    for loc, panels in by_loc.items():
        target = _target_for(targets, loc) if targets is not None else None
        result = preprocess_location(panels[0], target, cfg, _world_for(args.world, loc), skip)
        d = out / loc
        d.mkdir(exist_ok=True)
        write_triage_report(result.triage_plan, d / "triage_report.csv")
        if result.cluster_plan is not None:
            write_clusters(result.cluster_plan, d / "clusters.csv", d / "queries.txt")
            _write_frame(pd.DataFrame({"query": list(result.combined_zero_fractions),
                                       "zero_fraction": list(result.combined_zero_fractions.values()),
                                       "flag": [result.cluster_plan.flags.get(q, "") for q in
                                                result.combined_zero_fractions]}),
                         d / "combined_report.csv")
        if result.denoise_report:
            _write_frame(pd.DataFrame(result.denoise_report), d / "denoise_report.csv")
        if result.trend_report:
            _write_frame(pd.DataFrame(result.trend_report), d / "trend_report.csv")
        for variant, preds in result.predictors.items():
            write_predictors(preds, d / f"predictors_{variant}.csv")
        for variant, frame in result.variants.items():
            if variant == "none":
                continue
            wide = frame.reset_index().rename(columns={"index": "date"})
            wide["date"] = pd.DatetimeIndex(wide["date"]).strftime("%Y-%m-%d")
            _write_frame(wide, d / f"variant_{variant}.csv", _header(cfg))
        final = "raw"
        for stage, variant in (("cluster", "clustering"), ("denoise", "denoising"),
                               ("detrend", "detrending")):
            if stage not in skip:
                final = variant
        (d / "preprocessed.txt").write_text(final + "\n")
        snr = _snr_report(panels, result, cfg)
        if snr is not None:
            _write_frame(snr, d / "snr_report.csv")
        log.info("location %s preprocessed: %s", loc,
                 {v: f.shape[1] for v, f in result.variants.items()})
    return EXIT_OK


def _read_variant(path: Path) -> pd.DataFrame:
    frame = pd.read_csv(path, comment="#")
    frame.index = pd.DatetimeIndex(pd.to_datetime(frame.pop("date")), name="date")
    return frame.astype(float)


def cmd_backtest(args) -> int:
    cfg = _load_config(args)
    targets = _read_target(args.target)
    root = Path(args.preprocessed)
    if not root.is_dir():
        raise FileNotFoundError(f"preprocessed directory not found: {root}")
    locations = sorted(p.name for p in root.iterdir() if p.is_dir())
    if not locations:
        raise IngestError(f"no location directories under {root}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows, failed = [], 0
    from .pipeline import LocationResult

    for loc in locations:
        target = _target_for(targets, loc)
        variants = {"none": pd.DataFrame(index=target.index)}
        for v in cfg.variants:
            if v == "none":
                continue
            path = root / loc / f"variant_{v}.csv"
            if not path.is_file():
                raise FileNotFoundError(f"missing {path} (was the stage skipped?)")
            variants[v] = _read_variant(path)
        result = LocationResult(loc, 0, variants, {})
        traces = backtest_location(result, target, cfg)
        for tr in traces:
            d = out / "traces" / tr.exog_variant
            d.mkdir(parents=True, exist_ok=True)
            write_trace(tr, d / f"trace_{loc}_{tr.model_id}_{tr.horizon}.csv")
            failed += tr.n_failed
        rows.extend(report_rows(traces))
    report = pd.DataFrame(rows)
    _write_frame(report, out / "report.csv", _header(cfg))
    _write_summary(report, cfg.seed, out / "summary.json")
    if failed:
        log.error("%d forecast weeks failed; see the flags column of the traces", failed)
        return EXIT_NUMERIC
    return EXIT_OK


def _write_summary(report: pd.DataFrame, seed: int, path: Path, season: str | None = None) -> dict:
    col = {"peak": "mse_peak", "off": "mse_off"}.get(season, "mse")
    rows = [dict(r, mse=r[col]) for r in report.to_dict("records") if np.isfinite(r[col])]
    summary = summarize_report(rows)
    summary["root_seed"] = seed
    summary["season"] = season or "all"
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")
    return summary


def cmd_report(args) -> int:
    path = Path(args.report)
    if not path.is_file():
        raise FileNotFoundError(f"report not found: {path}")
    first = path.read_text().splitlines()[0]
    seed = int(first.split("=")[1]) if first.startswith("# root_seed=") else -1
    report = pd.read_csv(path, comment="#", dtype={"location": str})
    out = Path(args.out) if args.out else path.with_name(
        "summary.json" if args.season is None else f"summary_{args.season}.json")
    summary = _write_summary(report, seed, out, args.season)
    print(f"root seed {seed}, season {summary['season']}")
    print(f"{'h':>2} {'model':<8} {'variant':<11} {'median':>7} {'(Q1, Q3)':>16}  markers")
    for c in summary["cells"]:
        print(f"{c['horizon']:>2} {c['model']:<8} {c['variant']:<11} {c['median_re']:7.3f} "
              f"({c['q1_re']:.3f}, {c['q3_re']:.3f})  {c['markers']}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gtprep", description="Search-volume preprocessing, forecasting and simulation.",
        epilog=_defaults_epilog(), formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text, epilog=_defaults_epilog(),
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "simulate worlds, replicate downloads and targets")
    p.add_argument("--config", help="JSON pipeline configuration")
    p.add_argument("--seed", type=int, help="override the root seed")
    p.add_argument("--locations", type=int, help="override n_locations")
    p.add_argument("--downloads", type=int, help="override n_downloads")
    p.add_argument("--out", required=True, help="output directory")

    p = add("ingest", cmd_ingest, "convert Trends CSV exports to the columnar panel format")
    p.add_argument("inputs", nargs="+", help="Trends 'interest over time' CSV files")
    p.add_argument("--location", required=True)
    p.add_argument("--download-date", help="ISO date of the (first) download")
    p.add_argument("--replicates", action="store_true",
                   help="inputs are repeated downloads of the same keywords on consecutive days")
    p.add_argument("--out", required=True, help="output panel CSV")

    p = add("preprocess", cmd_preprocess,
            "triage, cluster, combine, denoise, detrend and select, writing every stage report")
    p.add_argument("--config", help="JSON pipeline configuration")
    p.add_argument("--seed", type=int, help="override the root seed")
    p.add_argument("--panels", required=True, nargs="+", help="columnar panel CSV file(s)")
    p.add_argument("--target", help="target CSV (date[,location],target); enables selection")
    p.add_argument("--world", help="world JSON, or a directory of world_<location>.json files, "
                   "for simulated-union combination")
    p.add_argument("--skip-cluster", action="store_true", help="leave out clustering")
    p.add_argument("--skip-denoise", action="store_true", help="leave out denoising")
    p.add_argument("--skip-detrend", action="store_true", help="leave out detrending")
    p.add_argument("--out", required=True, help="output directory")

    p = add("backtest", cmd_backtest, "rolling-origin forecasts for every model, horizon and variant")
    p.add_argument("--config", help="JSON pipeline configuration")
    p.add_argument("--seed", type=int, help="override the root seed")
    p.add_argument("--preprocessed", required=True, help="output directory of preprocess")
    p.add_argument("--target", required=True, help="target CSV")
    p.add_argument("--out", required=True, help="output directory")

    p = add("report", cmd_report, "summarise report.csv into median RE tables with test markers")
    p.add_argument("report", help="report.csv written by backtest")
    p.add_argument("--season", choices=("peak", "off"), help="restrict to December-January or the rest")
    p.add_argument("--out", help="summary JSON path")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, IngestError, StageError, FileNotFoundError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"gtprep {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
