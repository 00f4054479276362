"""Pipeline run configuration: a TOML file, validated in full before any run.

Minimal example::

    topic = "landslides"
    keywords = ["landslide", "mudslide", "rockslide"]
    seed = 7
    mode = "adaptive"            # or "frozen"
    window_seconds = 604800
    n_windows = 12
    start_time = 1600000000

    [inputs]
    social = "social.jsonl"      # relative paths resolve against this file
    hc = "hc.jsonl"
    truth = "truth.jsonl"        # optional; enables per-window metrics

    [rules]                      # optional RuleConfig overrides
    noaa_high = 0.7

    [join]                       # optional JoinSpec overrides
    method = "string_similarity"
    threshold = 0.5

    [filters]
    dims = 256
    algos = ["logistic", "hinge"]
    scheme = "model"             # unweighted | model | expert
    schedule = "user"            # user | detector | hybrid
    schedule_period = 604800
    negative_ratio = 3.0

Unknown keys anywhere are rejected so typos fail fast.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields as dc_fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .events import RuleConfig
from .joins import JoinSpec


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSettings:
    dims: int = 256
    encoder_seed: int = 0
    algos: tuple[str, ...] = ("logistic", "hinge")
    scheme: str = "model"
    expert_weights: tuple[float, ...] | None = None
    schedule: str = "user"
    schedule_period: int | None = None
    negative_ratio: float = 3.0
    epochs: int = 30
    margin_band: float = 1.0
    alarm_lambda: float = 3.0
    monitor_window: int = 500
    consecutive_needed: int = 2

    def __post_init__(self) -> None:
        if self.dims < 2:
            raise ConfigError("encoder dims must be at least 2")
        for algo in self.algos:
            if algo not in ("logistic", "hinge"):
                raise ConfigError(f"unknown filter algorithm {algo!r}")
        if self.scheme not in ("unweighted", "model", "expert"):
            raise ConfigError(f"unknown ensemble scheme {self.scheme!r}")
        if self.scheme == "expert" and not self.expert_weights:
            raise ConfigError("expert scheme requires expert_weights")
        if self.schedule not in ("user", "detector", "hybrid"):
            raise ConfigError(f"unknown schedule {self.schedule!r}")
        if self.negative_ratio <= 0:
            raise ConfigError("negative_ratio must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    topic: str
    keywords: tuple[str, ...]
    social_file: Path
    hc_file: Path
    window_seconds: int
    n_windows: int
    start_time: int
    truth_file: Path | None = None
    gazetteer_file: Path | None = None
    seed: int = 0
    mode: str = "adaptive"
    augmentation: bool = True
    rules: RuleConfig = field(default_factory=RuleConfig)
    join: JoinSpec = field(default_factory=JoinSpec)
    filters: FilterSettings = field(default_factory=FilterSettings)
    crash_after_window: int | None = None  # test hook
    crash_point: str = "pre_checkpoint"

    def __post_init__(self) -> None:
        if not self.topic or ":" in self.topic:
            raise ConfigError("topic must be non-empty and colon-free")
        if not self.keywords:
            raise ConfigError("at least one keyword required")
        if self.window_seconds <= 0 or self.n_windows <= 0:
            raise ConfigError("window_seconds and n_windows must be positive")
        if self.mode not in ("adaptive", "frozen"):
            raise ConfigError(f"mode must be adaptive or frozen, got {self.mode!r}")
        if self.crash_point not in ("pre_checkpoint", "post_checkpoint"):
            raise ConfigError(f"unknown crash point {self.crash_point!r}")
        for name in ("social_file", "hc_file"):
            path = getattr(self, name)
            if not Path(path).exists():
                raise ConfigError(f"{name} does not exist: {path}")
        if self.truth_file is not None and not Path(self.truth_file).exists():
            raise ConfigError(f"truth_file does not exist: {self.truth_file}")
        if self.gazetteer_file is not None and not Path(self.gazetteer_file).exists():
            raise ConfigError(f"gazetteer_file does not exist: {self.gazetteer_file}")

    @property
    def schedule_period(self) -> int:
        return self.filters.schedule_period or self.window_seconds


def _take(table: dict, key: str, default):
    return table.pop(key) if key in table else default


def _reject_unknown(table: dict, section: str) -> None:
    if table:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(table)}")


def _build_rules(table: dict) -> RuleConfig:
    kwargs = {}
    valid = {f.name for f in dc_fields(RuleConfig)}
    for key in list(table):
        if key not in valid:
            raise ConfigError(f"unknown keys in [rules]: ['{key}']")
        value = table.pop(key)
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    try:
        return RuleConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"bad [rules]: {exc}") from exc


def _build_join(table: dict, keywords: tuple[str, ...]) -> JoinSpec:
    valid = {f.name for f in dc_fields(JoinSpec)}
    kwargs = {"keywords": keywords}
    for key in list(table):
        if key not in valid:
            raise ConfigError(f"unknown keys in [join]: ['{key}']")
        value = table.pop(key)
        if key == "schema_map":
            value = tuple((str(a), str(b)) for a, b in value)
        elif isinstance(value, list):
            value = tuple(value)
        kwargs[key] = value
    try:
        return JoinSpec(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"bad [join]: {exc}") from exc


def _build_filters(table: dict) -> FilterSettings:
    valid = {f.name for f in dc_fields(FilterSettings)}
    kwargs = {}
    for key in list(table):
        if key not in valid:
            raise ConfigError(f"unknown keys in [filters]: ['{key}']")
        value = table.pop(key)
        kwargs[key] = tuple(value) if isinstance(value, list) else value
    try:
        return FilterSettings(**kwargs)
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"bad [filters]: {exc}") from exc


def load_config(path: str | Path, mode: str | None = None) -> PipelineConfig:
    """Parse and validate a pipeline config file; no side effects on failure."""
    path = Path(path)
    try:
        with path.open("rb") as fh:
            doc = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc

    base = path.parent

    def respath(value) -> Path:
        p = Path(value)
        return p if p.is_absolute() else base / p

    inputs = doc.pop("inputs", None)
    if not isinstance(inputs, dict):
        raise ConfigError("config needs an [inputs] table")
    social = _take(inputs, "social", None)
    hc = _take(inputs, "hc", None)
    truth = _take(inputs, "truth", None)
    gazetteer = _take(inputs, "gazetteer", None)
    _reject_unknown(inputs, "inputs")
    if social is None or hc is None:
        raise ConfigError("[inputs] needs social and hc paths")

    keywords = tuple(str(k) for k in _take(doc, "keywords", []))
    rules = _build_rules(doc.pop("rules", {}) or {})
    join = _build_join(doc.pop("join", {}) or {}, keywords)
    filters = _build_filters(doc.pop("filters", {}) or {})

    kwargs = dict(
        topic=str(_take(doc, "topic", "")),
        keywords=keywords,
        social_file=respath(social),
        hc_file=respath(hc),
        truth_file=respath(truth) if truth else None,
        gazetteer_file=respath(gazetteer) if gazetteer else None,
        window_seconds=int(_take(doc, "window_seconds", 0)),
        n_windows=int(_take(doc, "n_windows", 0)),
        start_time=int(_take(doc, "start_time", 0)),
        seed=int(_take(doc, "seed", 0)),
        mode=str(mode or _take(doc, "mode", "adaptive")),
        augmentation=bool(_take(doc, "augmentation", True)),
        crash_after_window=_take(doc, "crash_after_window", None),
        crash_point=str(_take(doc, "crash_point", "pre_checkpoint")),
        rules=rules,
        join=join,
        filters=filters,
    )
    if mode is not None:
        doc.pop("mode", None)
    _reject_unknown(doc, "top level")
    return PipelineConfig(**kwargs)
