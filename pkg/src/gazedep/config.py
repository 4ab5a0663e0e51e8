"""Run configuration: a ``key = value`` text file plus command-line overrides.

One file describes one experiment row (a gaze feature or feature group and
the data it is trained on). Relative paths are resolved against the
working directory.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Iterable

from gazedep.errors import ConfigError
from gazedep.evaluation import PUNCT_POLICIES
from gazedep.gaze import resolve_features
from gazedep.mtl import DEFAULT_AUX_WEIGHT
from gazedep.nn.model import Hyperparams

MODES = ("parallel", "disjoint", "baseline")
HYPER_KEYS = tuple(f.name for f in fields(Hyperparams))


@dataclass
class RunConfig:
    mode: str = "baseline"
    treebank: str | None = None
    gaze: str | None = None
    gaze_treebank: str | None = None
    train: str | None = None
    dev: str | None = None
    test: str | None = None
    split: tuple[float, float, float] = (0.8, 0.1, 0.1)
    gaze_split: tuple[float, float, float] = (0.9, 0.1, 0.0)
    seed: int = 1
    tasks: list[str] = field(default_factory=list)
    aux_weight: float = DEFAULT_AUX_WEIGHT
    weights: dict[str, float] = field(default_factory=dict)
    pos_column: str = "upos"
    gaze_pos_column: str | None = None
    punct: str = "ud-deprel"
    aggregate: str = "none"
    embeddings: str | None = None
    scale: str = "full"
    output: str = "run"
    name: str = ""
    hyper: dict[str, float] = field(default_factory=dict)

    def hyperparams(self) -> Hyperparams:
        base = Hyperparams.desk() if self.scale == "desk" else Hyperparams()
        return base.with_overrides(**self.hyper)

    def validate(self) -> "RunConfig":
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.punct not in PUNCT_POLICIES:
            raise ConfigError(f"punct must be one of {', '.join(PUNCT_POLICIES)}")
        if self.pos_column not in ("upos", "xpos") or self.gaze_pos_column not in (None, "upos", "xpos"):
            raise ConfigError("pos columns must be upos or xpos")
        if self.aggregate not in ("none", "mean"):
            raise ConfigError("aggregate must be none or mean")
        if self.scale not in ("full", "desk"):
            raise ConfigError("scale must be full or desk")
        if self.aux_weight < 0 or any(w < 0 for w in self.weights.values()):
            raise ConfigError("auxiliary weights must be non-negative")
        features = resolve_features(self.tasks)
        unknown = set(self.weights) - set(features)
        if unknown:
            raise ConfigError(f"weights given for unconfigured tasks: {', '.join(sorted(unknown))}")
        self.hyperparams()

        if self.mode == "baseline":
            if features:
                raise ConfigError("baseline mode trains without gaze tasks; remove 'tasks'")
            if not (self.treebank or self.train):
                raise ConfigError("baseline mode needs 'treebank' (to split) or 'train'/'dev' files")
        elif self.mode == "parallel":
            if not (self.treebank and self.gaze):
                raise ConfigError("parallel mode needs 'treebank' and 'gaze'")
        else:
            if not self.train:
                raise ConfigError("disjoint mode needs a parsing corpus: 'train' (and 'dev', 'test')")
            if not (self.gaze and self.gaze_treebank):
                raise ConfigError("disjoint mode needs a gaze corpus: 'gaze' and 'gaze_treebank'")
            if not features:
                raise ConfigError("disjoint mode needs at least one gaze task")
        if self.train and not self.dev:
            raise ConfigError("'train' given without 'dev' (needed for model selection)")
        return self


def _ratios(value: str) -> tuple[float, float, float]:
    parts = [p for p in value.replace("-", ",").split(",") if p.strip()]
    try:
        nums = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad split ratios {value!r}") from None
    if len(nums) != 3:
        raise ConfigError(f"split needs three ratios, got {value!r}")
    if sum(nums) > 1.5:  # written as percentages, e.g. 80-10-10
        nums = [n / 100.0 for n in nums]
    if abs(sum(nums) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {value!r}")
    return tuple(nums)  # type: ignore[return-value]


def _weights(value: str) -> dict[str, float]:
    out = {}
    for item in value.split(","):
        if not item.strip():
            continue
        name, _, w = item.partition(":")
        try:
            out[name.strip()] = float(w)
        except ValueError:
            raise ConfigError(f"bad task weight {item!r}, expected feature:weight") from None
    return out


_STR_KEYS = ("mode", "treebank", "gaze", "gaze_treebank", "train", "dev", "test", "pos_column",
             "gaze_pos_column", "punct", "aggregate", "embeddings", "scale", "output", "name")
_OPTIONAL_KEYS = ("treebank", "gaze", "gaze_treebank", "train", "dev", "test", "embeddings", "gaze_pos_column")


def apply(cfg: RunConfig, key: str, value: str) -> None:
    key, value = key.strip(), value.strip()
    try:
        if key in _OPTIONAL_KEYS:
            setattr(cfg, key, value or None)
        elif key in _STR_KEYS:
            setattr(cfg, key, value)
        elif key in ("split", "gaze_split"):
            setattr(cfg, key, _ratios(value))
        elif key == "seed":
            cfg.seed = int(value)
        elif key == "tasks":
            cfg.tasks = [t for t in value.replace(",", " ").split() if t]
        elif key == "aux_weight":
            cfg.aux_weight = float(value)
        elif key == "weights":
            cfg.weights = _weights(value)
        elif key in HYPER_KEYS:
            kind = next(f.type for f in fields(Hyperparams) if f.name == key)
            cfg.hyper[key] = int(value) if kind in (int, "int") else float(value)
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None


def parse_config(text: str, overrides: Iterable[str] = ()) -> RunConfig:
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = line.split("=", 1)
        apply(cfg, key, value)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, value = item.split("=", 1)
        apply(cfg, key, value)
    return cfg.validate()


def load_config(path: str, overrides: Iterable[str] = ()) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, overrides)


def to_text(cfg: RunConfig) -> str:
    """Canonical key = value rendering, used to record the effective config of a run."""
    lines = []
    for key in _STR_KEYS:
        v = getattr(cfg, key)
        if v not in (None, ""):
            lines.append(f"{key} = {v}")
    lines.append("split = " + ",".join(repr(r) for r in cfg.split))
    lines.append("gaze_split = " + ",".join(repr(r) for r in cfg.gaze_split))
    lines.append(f"seed = {cfg.seed}")
    if cfg.tasks:
        lines.append("tasks = " + " ".join(cfg.tasks))
    lines.append(f"aux_weight = {cfg.aux_weight!r}")
    if cfg.weights:
        lines.append("weights = " + ",".join(f"{k}:{v!r}" for k, v in cfg.weights.items()))
    for k, v in cfg.hyperparams().to_dict().items():
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
