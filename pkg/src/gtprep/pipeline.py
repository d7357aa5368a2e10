"""End-to-end orchestration shared by the command line and the test suite.

Preprocessing variants are cumulative, matching the ablation layout of the
report: ``raw`` (individual queries passing the zero filter), ``clustering`` (triage plus combined
sparse clusters), ``denoising`` (plus spline smoothing) and ``detrending``
(plus the ADF cascade). ``none`` is the no-exogenous baseline. Every variant
ends with the same target-correlation selection.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from .cluster import ClusterPlan, cluster_keywords, combined_frame, split_oversized
from .denoise import SplineDenoiser
from .detrend import ADFDetrender
from .evalstats import mse, season_of
from .forecast import (ARIMAXForecaster, ArgoForecaster, ForecastTrace, PersistenceModel,
                       SubprocessModel, run_backtest)
from .ingest import ReplicateStore, SeriesPanel
from .select import PredictorSet, prune_collinear, rank_by_target_correlation
from .synthgen import LatentWorld, WorldConfig, generate_target, generate_world, sample_replicates
from .triage import TriagePlan, triage

__all__ = [
    "PipelineConfig",
    "ConfigError",
    "StageError",
    "LocationResult",
    "VARIANTS",
    "MODELS",
    "location_seed",
    "synth_location",
    "preprocess_location",
    "build_models",
    "test_dates",
    "backtest_location",
    "report_rows",
]

VARIANTS = ("none", "raw", "clustering", "denoising", "detrending")
MODELS = ("arimax", "sarimax", "argo")
STAGES = ("triage", "cluster", "combine", "denoise", "detrend", "select")


class ConfigError(ValueError):
    """Invalid configuration value; the message names the field."""


class StageError(RuntimeError):
    """A preprocessing stage failed; carries the stage and offending keyword."""

    def __init__(self, stage: str, message: str, keyword: str | None = None):
        self.stage = stage
        self.keyword = keyword
        where = f" (keyword {keyword!r})" if keyword else ""
        super().__init__(f"stage {stage!r} failed{where}: {message}")


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline with its default."""

    seed: int = 0
    n_locations: int = 1
    n_downloads: int = 27
    world: dict = field(default_factory=dict)  # WorldConfig overrides
    target: dict = field(default_factory=lambda: {"themes": [0, 1, 2], "noise": 0.05, "ar": 0.7})
    train_end: str | None = None  # first test week; defaults to test_weeks before the end
    test_weeks: int = 80
    dedup_threshold: float = 0.99
    zero_low: float = 0.30
    zero_high: float = 0.99
    k_max: int | None = None
    cluster_dominance: float = 0.40
    combine_mode: str = "auto"
    lambda_min: float = 0.1
    lambda_max: float = 2.0
    lambda_count: int = 20
    denoise_window: int = 20
    denoise_gate: bool = True
    adf_alpha: float = 0.05
    select_threshold: float = 0.95
    select_cap: int = 10
    horizons: list = field(default_factory=lambda: [0, 1, 2, 3])
    models: list = field(default_factory=lambda: list(MODELS))
    variants: list = field(default_factory=lambda: list(VARIANTS))
    train_window: int = 104
    argo_lags: int = 52
    argo_folds: int = 5
    plugins: list = field(default_factory=list)  # dicts of SubprocessModel parameters

    def validate(self) -> None:
        def bad(name, why):
            raise ConfigError(f"invalid config field '{name}': {why}")

        if self.n_locations < 1:
            bad("n_locations", "must be >= 1")
        if self.n_downloads < 1:
            bad("n_downloads", "must be >= 1")
        for name in ("dedup_threshold", "select_threshold"):
            if not 0 < getattr(self, name) < 1:
                bad(name, "must lie in (0, 1)")
        if not 0 < self.zero_low < self.zero_high < 1:
            bad("zero_low" if not 0 < self.zero_low < 1 else "zero_high",
                "need 0 < zero_low < zero_high < 1")
        if not 0 < self.cluster_dominance <= 1:
            bad("cluster_dominance", "must lie in (0, 1]")
        if self.k_max is not None and self.k_max < 1:
            bad("k_max", "must be >= 1")
        if self.combine_mode not in ("auto", "ingested-combined", "simulated-union", "summed"):
            bad("combine_mode", "unknown mode")
        if not 0 < self.lambda_min <= self.lambda_max or self.lambda_count < 1:
            bad("lambda_min", "need 0 < lambda_min <= lambda_max and lambda_count >= 1")
        if self.denoise_window < 4:
            bad("denoise_window", "must be >= 4")
        if not 0 < self.adf_alpha < 1:
            bad("adf_alpha", "must lie in (0, 1)")
        if self.adf_alpha not in (0.01, 0.05, 0.10, 0.1):
            bad("adf_alpha", "critical values exist for 0.01, 0.05 and 0.10")
        if self.select_cap < 1:
            bad("select_cap", "must be >= 1")
        if not self.horizons or any(h not in (0, 1, 2, 3) for h in self.horizons):
            bad("horizons", "each horizon must be 0, 1, 2 or 3")
        if any(m not in MODELS for m in self.models):
            bad("models", f"built-in models are {MODELS}")
        if any(v not in VARIANTS for v in self.variants):
            bad("variants", f"variants are {VARIANTS}")
        if self.train_window < 60:
            bad("train_window", "must be >= 60")
        if "sarimax" in self.models and self.train_window < 104:
            bad("train_window", "the seasonal model needs >= 104")
        if self.test_weeks < 1:
            bad("test_weeks", "must be >= 1")
        if self.train_end is not None:
            try:
                dt.date.fromisoformat(self.train_end)
            except ValueError:
                bad("train_end", "not an ISO date")
        for i, plug in enumerate(self.plugins):
            if not isinstance(plug, dict) or "command" not in plug or "name" not in plug:
                bad(f"plugins[{i}]", "needs 'name' and 'command'")
        try:
            self.world_config().validate()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc).replace("world config field '", "config field 'world.")) from None

    def world_config(self, seed: int | None = None) -> WorldConfig:
        known = {f.name for f in dataclasses.fields(WorldConfig)}
        unknown = set(self.world) - known
        if unknown:
            raise ConfigError(f"invalid config field 'world.{sorted(unknown)[0]}': unknown")
        params = dict(self.world)
        params["seed"] = self.seed if seed is None else seed
        return WorldConfig(**params)

    @property
    def lambda_grid(self) -> np.ndarray:
        return np.geomspace(self.lambda_min, self.lambda_max, self.lambda_count)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"invalid config field '{sorted(unknown)[0]}': unknown")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        with open(path) as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from None
        return cls.from_dict(raw)


def location_seed(root: int, index: int) -> int:
    """Independent per-location seed derived from the root seed."""
    return int(np.random.SeedSequence(root, spawn_key=(index,)).generate_state(1)[0])


def synth_location(cfg: PipelineConfig, index: int) -> tuple[LatentWorld, list[SeriesPanel], pd.Series]:
    """World, replicate downloads and target series of synthetic location ``index``."""
    seed = location_seed(cfg.seed, index)
    world = generate_world(cfg.world_config(seed))
    name = f"LOC{index:02d}"
    panels = sample_replicates(world, cfg.n_downloads, location=name)
    params = dict(cfg.target)
    values = generate_target(world, seed=seed, **params)
    target = pd.Series(values, index=pd.DatetimeIndex(world.dates, name="date"), name="target")
    return world, panels, target


@dataclass
class LocationResult:
    location: str
    train_len: int
    variants: dict[str, pd.DataFrame]  # selected predictors per variant
    full: dict[str, pd.DataFrame]  # every series per variant, before selection
    triage_plan: TriagePlan | None = None
    cluster_plan: ClusterPlan | None = None
    combined_zero_fractions: dict = field(default_factory=dict)
    denoise_report: list = field(default_factory=list)
    trend_report: list = field(default_factory=list)
    predictors: dict[str, PredictorSet] = field(default_factory=dict)


def _train_len(index: pd.DatetimeIndex, train_end: pd.Timestamp) -> int:
    return int(np.searchsorted(index.values, np.datetime64(train_end), side="left"))


def split_date(index: pd.DatetimeIndex, cfg: PipelineConfig) -> pd.Timestamp:
    """First test week."""
    if cfg.train_end is not None:
        return pd.Timestamp(cfg.train_end)
    if cfg.test_weeks >= len(index):
        raise ConfigError("invalid config field 'test_weeks': longer than the data")
    return index[len(index) - cfg.test_weeks]


def test_dates(target: pd.Series, cfg: PipelineConfig) -> pd.DatetimeIndex:
    start = split_date(target.index, cfg)
    return target.index[target.index >= start]


def _resolve_mode(cfg: PipelineConfig, world, frame: pd.DataFrame) -> str:
    if cfg.combine_mode != "auto":
        return cfg.combine_mode
    if world is not None:
        return "simulated-union"
    if any("+" in str(c) for c in frame.columns):
        return "ingested-combined"
    raise ConfigError("invalid config field 'combine_mode': auto needs a world file or combined "
                      "downloads; set 'summed' explicitly to add member series")


def _select(frame: pd.DataFrame, target: pd.Series, split: pd.Timestamp,
            cfg: PipelineConfig) -> tuple[pd.DataFrame, PredictorSet]:
    frame = frame.loc[frame.index.intersection(target.index)]
    n_train = _train_len(frame.index, split)
    train = frame.iloc[:n_train]
    live = [c for c in frame.columns if np.var(train[c].to_numpy()) > 0]
    if not live:
        return frame[[]], PredictorSet([], {})
    ranked = rank_by_target_correlation(frame[live], target.loc[frame.index].to_numpy(), n_train)
    chosen = prune_collinear(ranked, frame[live], cfg.select_threshold, cfg.select_cap, n_train)
    return frame[chosen.keywords], chosen


def preprocess_location(source, target: pd.Series | None, cfg: PipelineConfig,
                        world: LatentWorld | None = None,
                        skip: Sequence[str] = ()) -> LocationResult:
    """Run triage, clustering, combination, denoising, detrending and selection.

    Parameters
    ----------
    source : SeriesPanel or ReplicateStore
        Keyword downloads; a store contributes its first download.
    target : Series or None
        Weekly target on the panel's weeks. Without it selection is skipped
        and every variant keeps all of its series.
    skip : sequence of {"cluster", "denoise", "detrend"}
        Stages left out of the cumulative chain.
    """
    panel = source.panels[0] if isinstance(source, ReplicateStore) else source
    if not isinstance(panel, SeriesPanel):
        raise TypeError("source must be a SeriesPanel or ReplicateStore")
    if len(panel.keywords) == 0 or panel.n_weeks == 0:
        raise StageError("triage", "empty panel")
    frame = panel.to_frame()
    split = split_date(frame.index, cfg)
    n_train = _train_len(frame.index, split)
    if n_train < 60:
        raise StageError("triage", f"only {n_train} training weeks before {split.date()}")
    result = LocationResult(panel.location, n_train, {}, {})

    try:
        plan = triage(frame, cfg.dedup_threshold, cfg.zero_low, cfg.zero_high, n_train)
    except ValueError as exc:
        raise StageError("triage", str(exc)) from exc
    result.triage_plan = plan
    # raw: individual queries through the zero filter only
    result.full["raw"] = frame[[k for k, z in plan.zero_fractions.items() if z < cfg.zero_low]]

    current = frame[plan.kept]
    if "cluster" not in skip:
        sparse = [k for k in plan.to_cluster if np.var(frame[k].iloc[:n_train]) > 0]
        if sparse:
            try:
                if len(sparse) == 1:
                    cplan = ClusterPlan([sparse], sparse[:], 1, [])
                else:
                    cplan = cluster_keywords(frame[sparse], cfg.k_max, n_train)
                    cplan = split_oversized(cplan, frame[sparse], cfg.cluster_dominance,
                                            cfg.k_max, n_train)
            except ValueError as exc:
                raise StageError("cluster", str(exc)) from exc
            try:
                mode = _resolve_mode(cfg, world, frame)
                store_date = panel.download_date or (world.dates[-1] if world else None)
                combined, zf = combined_frame(cplan, panel, mode, world, store_date)
            except ConfigError:
                raise
            except (KeyError, ValueError) as exc:
                raise StageError("combine", str(exc)) from exc
            result.cluster_plan = cplan
            result.combined_zero_fractions = zf
            current = pd.concat([current, combined.set_index(frame.index)], axis=1)
    result.full["clustering"] = current

    if "denoise" not in skip and current.shape[1]:
        den = SplineDenoiser(cfg.denoise_window, cfg.lambda_grid, cfg.denoise_gate)
        try:
            den.fit(current.iloc[:n_train])
            current = den.transform(current)
        except ValueError as exc:
            raise StageError("denoise", str(exc)) from exc
        result.denoise_report = den.report()
    result.full["denoising"] = current

    if "detrend" not in skip and current.shape[1]:
        det = ADFDetrender(cfg.adf_alpha)
        train = current.iloc[:n_train]
        try:
            det.fit(train)
            result.trend_report = det.report(train)
            current = det.transform(current)
        except ValueError as exc:
            keyword = str(exc).split("'")[1] if "'" in str(exc) else None
            raise StageError("detrend", str(exc), keyword) from exc
    result.full["detrending"] = current

    for variant in ("raw", "clustering", "denoising", "detrending"):
        full = result.full[variant]
        if target is None:
            result.variants[variant] = full
            continue
        try:
            chosen, preds = _select(full, target, split, cfg)
        except ValueError as exc:
            raise StageError("select", f"{variant}: {exc}") from exc
        result.variants[variant] = chosen
        result.predictors[variant] = preds
    result.variants["none"] = frame[[]]
    return result


def build_models(cfg: PipelineConfig) -> dict:
    models = {}
    for m in cfg.models:
        if m == "arimax":
            models[m] = ARIMAXForecaster(False, cfg.train_window)
        elif m == "sarimax":
            models[m] = ARIMAXForecaster(True, cfg.train_window)
        elif m == "argo":
            models[m] = ArgoForecaster(cfg.train_window, cfg.argo_lags, cfg.argo_folds)
    for plug in cfg.plugins:
        params = dict(plug)
        if params.get("command") == "builtin:persistence":
            models[params["name"]] = PersistenceModel()
        else:
            models[params["name"]] = SubprocessModel(**params)
    return models


def backtest_location(result: LocationResult, target: pd.Series, cfg: PipelineConfig,
                      models: dict | None = None) -> list[ForecastTrace]:
    """Every (model, horizon, variant) trace for one location."""
    models = build_models(cfg) if models is None else models
    dates = test_dates(target, cfg)
    traces = []
    for variant in cfg.variants:
        exog = result.variants.get(variant)
        if exog is None:
            raise StageError("select", f"variant {variant!r} was not produced (stage skipped?)")
        traces.extend(run_backtest(target, exog if exog.shape[1] else None, models,
                                   cfg.horizons, dates, result.location, variant))
    return traces


def report_rows(traces: Sequence[ForecastTrace], baseline: str = "none") -> list[dict]:
    """One row per trace with MSE, RE against the no-exog trace and season MSEs."""
    base = {}
    for tr in traces:
        if tr.exog_variant == baseline:
            yt, yh = tr.valid()
            base[(tr.location, tr.horizon, tr.model_id)] = mse(yt, yh) if yt.size else math.nan
    rows = []
    for tr in traces:
        yt, yh = tr.valid()
        value = mse(yt, yh) if yt.size else math.nan
        ref = base.get((tr.location, tr.horizon, tr.model_id), math.nan)
        season = np.array([season_of(pd.Timestamp(d)) for d in tr.dates])
        ok = np.isfinite(np.asarray(tr.y_hat, dtype=float))
        err = (np.asarray(tr.y_true) - np.asarray(tr.y_hat, dtype=float)) ** 2
        by = {s: float(np.mean(err[ok & (season == s)])) if np.any(ok & (season == s)) else math.nan
              for s in ("peak", "off")}
        rows.append({
            "location": tr.location, "horizon": tr.horizon, "model": tr.model_id,
            "variant": tr.exog_variant, "n_weeks": len(tr.dates), "n_failed": tr.n_failed,
            "mse": value, "re": value / ref if ref > 0 and math.isfinite(value) else math.nan,
            "mse_peak": by["peak"], "mse_off": by["off"],
        })
    return rows
