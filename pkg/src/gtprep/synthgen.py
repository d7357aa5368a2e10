"""Simulator for the Trends data-generating mechanism.

Latent weekly search counts ``K_t`` out of ``N_t`` total searches are drawn
once per world. Each download samples ``n`` searches per week without
replacement (hypergeometric), zeroes weeks whose sampled count falls under the
privacy threshold, and rescales to 0-100 against the peak week.
"""

from __future__ import annotations

import dataclasses
import datetime as dt
import json
import zlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .ingest import SeriesPanel

__all__ = [
    "WorldConfig",
    "LatentWorld",
    "generate_world",
    "sample_download",
    "sample_replicates",
    "sample_series",
    "union_volume",
    "regime_shift",
    "generate_target",
    "load_world_config",
    "save_world_config",
]

FAMILIES = ("flat", "linear", "quadratic", "random_walk")
SEASON = 52


@dataclass
class WorldConfig:
    """Parameters of a synthetic search world.

    Rates are fractions of all searches. Each keyword follows one *theme*
    (a shared seasonal/epidemic signal), one trend family and its own
    multiplicative latent noise.
    """

    n_keywords: int = 200
    n_weeks: int = 1000
    start_date: str = "2004-01-04"
    seed: int = 0
    population: int = 5_000_000
    population_growth: float = 0.0  # relative growth over the whole span
    sample_size: int = 200_000
    privacy_threshold: float = 5.0  # minimum sampled count reported as nonzero
    rate_range: tuple[float, float] = (2e-5, 2e-3)  # log-uniform base rates
    n_themes: int = 8
    family_weights: dict = field(default_factory=lambda: {f: 0.25 for f in FAMILIES})
    seasonal_amplitude: tuple[float, float] = (0.3, 1.2)
    spike_rate: float = 0.5  # epidemic spikes per theme per year
    spike_height: tuple[float, float] = (0.3, 1.5)
    theme_noise: float = 0.15  # sd of the AR(1) log-activity shared by a theme
    theme_ar: float = 0.8
    theme_rate_scale: list = field(default_factory=list)  # per-theme base-rate multipliers, default 1
    noise_scale: tuple[float, float] = (0.02, 0.10)
    trend_strength: tuple[float, float] = (0.5, 2.5)  # total relative change over span
    random_walk_sigma: float = 0.03
    overlaps: dict = field(default_factory=dict)  # "a|b" -> fraction of min(K_a, K_b)
    default_overlap: float = 0.0
    keyword_prefix: str = "kw"

    def __post_init__(self):
        self.rate_range = tuple(self.rate_range)
        self.seasonal_amplitude = tuple(self.seasonal_amplitude)
        self.spike_height = tuple(self.spike_height)
        self.noise_scale = tuple(self.noise_scale)
        self.trend_strength = tuple(self.trend_strength)

    def validate(self) -> None:
        def bad(name, why):
            raise ValueError(f"invalid world config field '{name}': {why}")

        if self.n_keywords < 1:
            bad("n_keywords", "must be >= 1")
        if self.n_weeks < 2:
            bad("n_weeks", "must be >= 2")
        if self.population < 1:
            bad("population", "must be positive")
        if not 1 <= self.sample_size <= self.population:
            bad("sample_size", "must be in [1, population]")
        if self.privacy_threshold < 0:
            bad("privacy_threshold", "must be >= 0")
        lo, hi = self.rate_range
        if not 0 < lo <= hi < 1:
            bad("rate_range", "need 0 < low <= high < 1")
        if self.n_themes < 1:
            bad("n_themes", "must be >= 1")
        if set(self.family_weights) - set(FAMILIES):
            bad("family_weights", f"families must be among {FAMILIES}")
        if sum(self.family_weights.values()) <= 0:
            bad("family_weights", "weights must sum to a positive value")
        if any(not x > 0 for x in self.theme_rate_scale):
            bad("theme_rate_scale", "multipliers must be positive")
        if self.theme_noise < 0:
            bad("theme_noise", "must be >= 0")
        if not -1 < self.theme_ar < 1:
            bad("theme_ar", "must lie in (-1, 1)")
        if not 0 <= self.default_overlap <= 1:
            bad("default_overlap", "must be in [0, 1]")
        try:
            start = dt.date.fromisoformat(self.start_date)
        except ValueError:
            bad("start_date", "not an ISO date")
        if start.weekday() != 6:
            bad("start_date", "weeks start on Sunday")

    @property
    def start(self) -> dt.date:
        return dt.date.fromisoformat(self.start_date)


def save_world_config(config: WorldConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(dataclasses.asdict(config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_world_config(path) -> WorldConfig:
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in dataclasses.fields(WorldConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"invalid world config field '{sorted(unknown)[0]}': unknown")
    config = WorldConfig(**raw)
    config.validate()
    return config


@dataclass(frozen=True)
class LatentWorld:
    """Unobserved population counts behind every download."""

    config: WorldConfig
    dates: tuple[dt.date, ...]
    keywords: tuple[str, ...]
    N: np.ndarray  # (n_weeks,)
    K: np.ndarray  # (n_keywords, n_weeks)
    themes: np.ndarray  # (n_themes, n_weeks), positive multiplicative signals
    components: tuple[dict, ...]
    threshold: np.ndarray  # (n_weeks,) privacy threshold per week

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def sample_size(self) -> int:
        return self.config.sample_size

    def index(self, keyword: str) -> int:
        try:
            return self.keywords.index(keyword)
        except ValueError:
            raise KeyError(f"keyword {keyword!r} not in world") from None

    def overlap(self, a: str, b: str) -> float:
        ov = self.config.overlaps
        return float(ov.get(f"{a}|{b}", ov.get(f"{b}|{a}", self.config.default_overlap)))


def _theme_signals(cfg: WorldConfig, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(cfg.n_weeks)
    out = np.empty((cfg.n_themes, cfg.n_weeks))
    for j in range(cfg.n_themes):
        amp = rng.uniform(*cfg.seasonal_amplitude)
        peak = rng.uniform(0, SEASON)
        log_sig = amp * np.cos(2 * np.pi * (t - peak) / SEASON)
        n_spikes = rng.poisson(cfg.spike_rate * cfg.n_weeks / SEASON)
        for _ in range(n_spikes):
            centre = rng.uniform(0, cfg.n_weeks)
            width = rng.uniform(2, 6)
            log_sig = log_sig + rng.uniform(*cfg.spike_height) * np.exp(
                -0.5 * ((t - centre) / width) ** 2)
        if cfg.theme_noise > 0:
            innov = rng.normal(0, cfg.theme_noise * np.sqrt(1 - cfg.theme_ar ** 2), cfg.n_weeks)
            innov[0] = rng.normal(0, cfg.theme_noise)
            log_sig = log_sig + lfilter([1.0], [1.0, -cfg.theme_ar], innov)
        out[j] = np.exp(log_sig - log_sig.mean())
    return out


def _trend(family: str, cfg: WorldConfig, rng: np.random.Generator) -> tuple[np.ndarray, dict]:
    tau = np.arange(cfg.n_weeks) / cfg.n_weeks
    strength = rng.uniform(*cfg.trend_strength)
    if family == "flat":
        return np.ones_like(tau), {}
    if family == "linear":
        s = strength if rng.random() < 0.7 else -strength / (1 + strength)
        return 1 + s * tau, {"slope": s}
    if family == "quadratic":
        a = rng.uniform(-1, 1) * strength
        b = strength * (1 if rng.random() < 0.6 else -0.5)
        curve = 1 + a * tau + b * tau ** 2
        lift = max(0.0, 0.2 - curve.min())
        return curve + lift, {"a": a, "b": b, "lift": lift}
    walk = np.cumsum(rng.normal(0, cfg.random_walk_sigma, cfg.n_weeks))
    return np.exp(walk - walk[0]), {"sigma": cfg.random_walk_sigma}


def generate_world(config: WorldConfig) -> LatentWorld:
    """Draw a deterministic latent world from ``config.seed``.

    Raises
    ------
    ValueError
        If the config is invalid or some keyword rate would exceed 1.
    """
    cfg = config
    cfg.validate()
    root = np.random.SeedSequence(cfg.seed)
    theme_ss, kw_ss = root.spawn(2)
    themes = _theme_signals(cfg, np.random.default_rng(theme_ss))

    t = np.arange(cfg.n_weeks)
    N = np.round(cfg.population * (1 + cfg.population_growth * t / cfg.n_weeks)).astype(np.int64)
    if N.min() < cfg.sample_size:
        raise ValueError("invalid world config: sample_size exceeds population in some week")
    dates = tuple(cfg.start + dt.timedelta(weeks=int(i)) for i in t)

    families = list(cfg.family_weights)
    probs = np.array([cfg.family_weights[f] for f in families], dtype=float)
    probs /= probs.sum()
    width = len(str(cfg.n_keywords - 1))
    keywords, comps, K = [], [], np.empty((cfg.n_keywords, cfg.n_weeks), dtype=np.int64)
    for i, ss in enumerate(kw_ss.spawn(cfg.n_keywords)):
        rng = np.random.default_rng(ss)
        family = families[rng.choice(len(families), p=probs)]
        theme = int(rng.integers(cfg.n_themes))
        base = float(np.exp(rng.uniform(*np.log(cfg.rate_range))))
        if theme < len(cfg.theme_rate_scale):
            base *= cfg.theme_rate_scale[theme]
        trend, coefs = _trend(family, cfg, rng)
        noise = rng.uniform(*cfg.noise_scale)
        rate = base * themes[theme] * trend * np.exp(noise * rng.standard_normal(cfg.n_weeks))
        if rate.max() > 1:
            raise ValueError(f"infeasible config: keyword {i} needs K_t > N_t")
        K[i] = np.round(rate * N)
        name = f"{cfg.keyword_prefix}{i:0{width}d}"
        keywords.append(name)
        comps.append({"keyword": name, "family": family, "theme": theme, "base_rate": base,
                      "noise_scale": noise, **coefs})
    threshold = np.full(cfg.n_weeks, float(cfg.privacy_threshold))
    return LatentWorld(cfg, dates, tuple(keywords), N, K, themes, tuple(comps), threshold)


def _stream(seed: int, download_date: dt.date, name: str) -> np.random.Generator:
    key = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(download_date.toordinal(), key)))


def sample_series(world: LatentWorld, latent: np.ndarray, name: str,
                  download_date: dt.date) -> np.ndarray:
    """One download of a latent count series, as reported 0-100 integers.

    The random stream is keyed by (seed, download date, name), so repeating a
    call within the same day returns the same values.
    """
    latent = np.asarray(latent, dtype=np.int64)
    n = world.sample_size
    if n > world.N.min():
        raise ValueError("sample size exceeds population")
    if np.any(latent < 0) or np.any(latent > world.N):
        raise ValueError("latent counts must lie in [0, N_t]")
    rng = _stream(world.seed, download_date, name)
    k = rng.hypergeometric(latent, world.N - latent, n).astype(float)
    k[k < world.threshold] = 0.0
    # ratio to the peak-week population share; the reference cancels in the peak rescale
    ref = np.max(latent / world.N)
    if ref <= 0 or not np.any(k > 0):
        return np.zeros(latent.shape, dtype=np.int64)
    r = (k / n) / ref
    return np.clip(np.round(100 * r / r.max()), 0, 100).astype(np.int64)


def sample_download(world: LatentWorld, download_date: dt.date,
                    keywords: Sequence[str] | None = None, location: str = "SYN") -> SeriesPanel:
    """Simulate one single-keyword download per keyword on ``download_date``."""
    keywords = list(world.keywords if keywords is None else keywords)
    values = np.stack([sample_series(world, world.K[world.index(k)], k, download_date)
                       for k in keywords])
    return SeriesPanel(location, world.dates, keywords, values, download_date)


def sample_replicates(world: LatentWorld, n_downloads: int, first_date: dt.date | None = None,
                      keywords: Sequence[str] | None = None, location: str = "SYN") -> list[SeriesPanel]:
    """Downloads on ``n_downloads`` consecutive days after the last latent week."""
    first = first_date or (world.dates[-1] + dt.timedelta(days=7))
    return [sample_download(world, first + dt.timedelta(days=i), keywords, location)
            for i in range(n_downloads)]


def union_volume(world: LatentWorld, keywords: Sequence[str]) -> np.ndarray:
    """Latent count of searches matching any of ``keywords``.

    Inclusion-exclusion truncated at pairwise terms; the overlap of a pair is
    a configured fraction of the smaller of the two counts.
    """
    keywords = list(dict.fromkeys(keywords))
    if not keywords:
        raise ValueError("union of no keywords")
    Ks = [world.K[world.index(k)] for k in keywords]
    total = np.sum(Ks, axis=0).astype(float)
    for i in range(len(keywords)):
        for j in range(i + 1, len(keywords)):
            total -= world.overlap(keywords[i], keywords[j]) * np.minimum(Ks[i], Ks[j])
    if np.any(total < -1e-9):
        raise ValueError("overlap configuration implies a negative union volume")
    return np.minimum(np.round(total), world.N).astype(np.int64)


def regime_shift(world: LatentWorld, date: dt.date, zero_inflation_factor: float) -> LatentWorld:
    """Raise the privacy threshold from ``date`` onward, mimicking an algorithm update."""
    if zero_inflation_factor < 1:
        raise ValueError("zero_inflation_factor must be >= 1")
    mask = np.array([d >= date for d in world.dates])
    threshold = world.threshold.copy()
    threshold[mask] *= zero_inflation_factor
    return dataclasses.replace(world, threshold=threshold)


def generate_target(world: LatentWorld, themes: Sequence[int] = (0, 1, 2),
                    weights: Sequence[float] | None = None, scale: float = 100.0,
                    noise: float = 0.05, ar: float = 0.7, seed: int | None = None) -> np.ndarray:
    """Weekly target driven by latent theme signals plus AR(1) noise.

    ``y_t = scale * sum_j w_j * theme_j(t) * (1 + e_t)``, with ``e`` a
    stationary AR(1) of marginal standard deviation ``noise``.
    """
    weights = np.full(len(themes), 1.0 / len(themes)) if weights is None else np.asarray(weights)
    rng = np.random.default_rng(np.random.SeedSequence(world.seed if seed is None else seed,
                                                       spawn_key=(7919,)))
    signal = np.tensordot(weights, world.themes[list(themes)], axes=1)
    e = np.empty(signal.size)
    e[0] = rng.normal(0, noise)
    innov = noise * np.sqrt(1 - ar ** 2)
    for t in range(1, e.size):
        e[t] = ar * e[t - 1] + rng.normal(0, innov)
    return scale * signal * (1 + e)
