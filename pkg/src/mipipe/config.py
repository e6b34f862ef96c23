"""Pipeline configuration types and their JSON mapping for the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

from .errors import ConfigError
from .preprocess import PreprocessConfig

METHODS = ("csp", "ar", "lrp", "combined")


@dataclass(frozen=True)
class EnsembleConfig:
    rounds: int = 50
    subset_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigError("ensemble rounds must be >= 1")
        if not 0 < self.subset_fraction <= 1:
            raise ConfigError("subset_fraction must be in (0, 1]")


@dataclass(frozen=True)
class SearchSpace:
    """Candidate grid for transductive parameter selection."""

    bands_hz: tuple[tuple[float, float], ...]
    windows_s: tuple[tuple[float, float], ...]
    channel_sets: tuple[tuple[int, ...] | None, ...] = (None,)
    m_values: tuple[int, ...] = (1,)

    def __post_init__(self):
        if not (self.bands_hz and self.windows_s and self.channel_sets and self.m_values):
            raise ConfigError("search space axes must be nonempty")
        for lo, hi in self.bands_hz:
            if not 0 < lo < hi:
                raise ConfigError(f"invalid band candidate ({lo}, {hi})")
        for a, b in self.windows_s:
            if not 0 <= a < b:
                raise ConfigError(f"invalid window candidate ({a}, {b})")
        for m in self.m_values:
            if m < 1:
                raise ConfigError("m candidates must be >= 1")


def default_search_space(trial_duration_s: float) -> SearchSpace:
    """Sliding 2 Hz bands over 8-30 Hz plus the broad 8-35 Hz band, and
    2-4 s windows sliding in 0.5 s steps."""
    bands = [(float(lo), float(lo + 2)) for lo in range(8, 29)]
    bands.append((8.0, 35.0))
    windows = []
    for length in (2.0, 3.0, 4.0):
        start = 0.5
        while start + length <= trial_duration_s + 1e-9:
            windows.append((start, start + length))
            start += 0.5
    if not windows:
        windows = [(0.0, trial_duration_s)]
    return SearchSpace(bands_hz=tuple(bands), windows_s=tuple(windows))


@dataclass(frozen=True)
class PipelineConfig:
    """Every free parameter of the classification pipeline."""

    method: str = "csp"
    preprocess: PreprocessConfig = field(
        default_factory=lambda: PreprocessConfig(
            band_hz=(12.0, 14.0), window_s=(0.5, 4.5)
        )
    )
    m: int = 1
    ar_order: int = 7
    ar_band_hz: tuple[float, float] = (8.0, 35.0)
    lrp_lowpass_hz: float = 1.5
    lrp_baseline_window_s: tuple[float, float] = (0.0, 0.5)
    lrp_feature_window_s: tuple[float, float] = (0.5, 1.5)
    n_select: int = 2
    channels: tuple[int, ...] | None = None
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    adapt: bool = False
    search: SearchSpace | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.m < 1:
            raise ConfigError("m must be >= 1")
        if self.ar_order < 1:
            raise ConfigError("ar_order must be >= 1")
        if self.n_select < 1:
            raise ConfigError("n_select must be >= 1")

    def replace(self, **kwargs) -> "PipelineConfig":
        from dataclasses import replace
        return replace(self, **kwargs)


def _pair(value, name):
    if value is None:
        return None
    if not (isinstance(value, (list, tuple)) and len(value) == 2):
        raise ConfigError(f"{name} must be a [low, high] pair")
    return (float(value[0]), float(value[1]))


def preprocess_from_dict(doc: dict) -> PreprocessConfig:
    try:
        return PreprocessConfig(
            band_hz=_pair(doc.get("band_hz"), "band_hz"),
            lowpass_hz=doc.get("lowpass_hz"),
            spatial_ref=doc.get("spatial_ref", "none"),
            window_s=_pair(doc.get("window_s"), "window_s"),
            baseline_window_s=_pair(doc.get("baseline_window_s"), "baseline_window_s"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def search_from_dict(doc: dict) -> SearchSpace:
    channel_sets = doc.get("channel_sets")
    if channel_sets is None:
        channel_sets = (None,)
    else:
        channel_sets = tuple(
            None if cs is None else tuple(int(c) for c in cs) for cs in channel_sets
        )
    return SearchSpace(
        bands_hz=tuple(_pair(b, "band candidate") for b in doc["bands_hz"]),
        windows_s=tuple(_pair(w, "window candidate") for w in doc["windows_s"]),
        channel_sets=channel_sets,
        m_values=tuple(int(m) for m in doc.get("m_values", (1,))),
    )


def pipeline_config_from_dict(doc: dict) -> PipelineConfig:
    """Build a PipelineConfig from parsed JSON, naming the offending field."""
    known = {
        "method", "preprocess", "m", "ar_order", "ar_band_hz", "lrp_lowpass_hz",
        "lrp_baseline_window_s", "lrp_feature_window_s", "n_select", "channels",
        "ensemble", "adapt", "search",
    }
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config fields: {sorted(unknown)}")
    try:
        ens = doc.get("ensemble", {})
        return PipelineConfig(
            method=doc.get("method", "csp"),
            preprocess=preprocess_from_dict(doc.get("preprocess", {
                "band_hz": [12.0, 14.0], "window_s": [0.5, 4.5],
            })),
            m=int(doc.get("m", 1)),
            ar_order=int(doc.get("ar_order", 7)),
            ar_band_hz=_pair(doc.get("ar_band_hz", (8.0, 35.0)), "ar_band_hz"),
            lrp_lowpass_hz=float(doc.get("lrp_lowpass_hz", 1.5)),
            lrp_baseline_window_s=_pair(
                doc.get("lrp_baseline_window_s", (0.0, 0.5)), "lrp_baseline_window_s"),
            lrp_feature_window_s=_pair(
                doc.get("lrp_feature_window_s", (0.5, 1.5)), "lrp_feature_window_s"),
            n_select=int(doc.get("n_select", 2)),
            channels=None if doc.get("channels") is None
            else tuple(int(c) for c in doc["channels"]),
            ensemble=EnsembleConfig(
                rounds=int(ens.get("rounds", 50)),
                subset_fraction=float(ens.get("subset_fraction", 0.5)),
                seed=int(ens.get("seed", 0)),
            ),
            adapt=bool(doc.get("adapt", False)),
            search=None if doc.get("search") is None else search_from_dict(doc["search"]),
        )
    except (TypeError, ValueError, KeyError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid pipeline config: {exc}") from exc


def pipeline_config_to_dict(config: PipelineConfig) -> dict:
    doc = asdict(config)
    if config.search is None:
        doc["search"] = None
    return doc
