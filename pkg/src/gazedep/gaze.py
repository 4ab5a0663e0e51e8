"""Token-level gaze features and their discretization into auxiliary labels.

Twelve features in four groups. The six duration features are mapped to
quintile bins fitted on training data; the others keep their raw values.
"""

from __future__ import annotations

from dataclasses import astuple, dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from gazedep.corpus import GazeReading
from gazedep.errors import ConfigError

GROUPS: dict[str, tuple[str, ...]] = {
    "basic": ("total_fix_dur", "mean_fix_dur", "n_fix", "fix_prob"),
    "early": ("first_fix_dur", "first_pass_dur"),
    "late": ("n_refix", "reread_prob"),
    "context": ("prev_fix_prob", "next_fix_prob", "prev_fix_dur", "next_fix_dur"),
}
FEATURES: tuple[str, ...] = tuple(f for group in GROUPS.values() for f in group)
DURATION_FEATURES: tuple[str, ...] = (
    "total_fix_dur", "mean_fix_dur", "first_fix_dur", "first_pass_dur", "prev_fix_dur", "next_fix_dur",
)
PERCENTILES = (20, 40, 60, 80)
BINS = ("0-20", "20-40", "40-60", "60-80", "80-100")


@dataclass(frozen=True)
class GazeVector:
    total_fix_dur: float = 0.0
    mean_fix_dur: float = 0.0
    first_fix_dur: float = 0.0
    first_pass_dur: float = 0.0
    n_fix: float = 0
    n_refix: float = 0
    fix_prob: float = 0
    reread_prob: float = 0
    prev_fix_prob: float = 0
    next_fix_prob: float = 0
    prev_fix_dur: float = 0.0
    next_fix_dur: float = 0.0

    def get(self, feature: str) -> float:
        if feature not in FEATURES:
            raise KeyError(f"unknown gaze feature {feature!r}")
        return getattr(self, feature)


def resolve_features(names: Iterable[str]) -> list[str]:
    """Expand group names and validate feature names, keeping first-mention order."""
    out: list[str] = []
    for name in names:
        name = name.strip()
        if not name:
            continue
        expanded = GROUPS.get(name, (name,))
        for feat in expanded:
            if feat not in FEATURES:
                raise ConfigError(
                    f"unknown gaze feature or group {name!r}; expected one of "
                    f"{', '.join(GROUPS)} or {', '.join(FEATURES)}"
                )
            if feat not in out:
                out.append(feat)
    return out


def derive(reading: GazeReading) -> list[GazeVector]:
    recs = reading.records
    n = len(recs)
    fix = [1 if r.n_fix > 0 else 0 for r in recs]
    out = []
    for i, r in enumerate(recs):
        prev_ok, next_ok = i > 0, i < n - 1
        out.append(
            GazeVector(
                total_fix_dur=float(r.total_fix_dur),
                mean_fix_dur=float(r.total_fix_dur) / r.n_fix if r.n_fix > 0 else 0.0,
                first_fix_dur=float(r.first_fix_dur),
                first_pass_dur=float(r.first_pass_dur),
                n_fix=r.n_fix,
                n_refix=r.n_refix,
                fix_prob=fix[i],
                reread_prob=1 if r.reread else 0,
                prev_fix_prob=fix[i - 1] if prev_ok else 0,
                next_fix_prob=fix[i + 1] if next_ok else 0,
                prev_fix_dur=float(recs[i - 1].total_fix_dur) if prev_ok else 0.0,
                next_fix_dur=float(recs[i + 1].total_fix_dur) if next_ok else 0.0,
            )
        )
    return out


def aggregate(vector_lists: Sequence[Sequence[GazeVector]]) -> list[GazeVector]:
    """Token-wise mean over several readings of one sentence.

    Optional alternative to per-reading instances; probabilities become
    fractions of participants.
    """
    if not vector_lists:
        raise ConfigError("nothing to aggregate")
    n = len(vector_lists[0])
    if any(len(v) != n for v in vector_lists):
        raise ConfigError("readings of one sentence differ in length")
    arr = np.array([[astuple(v) for v in vecs] for vecs in vector_lists], dtype=np.float64)
    mean = arr.mean(axis=0)
    return [GazeVector(*map(float, row)) for row in mean]


@dataclass(frozen=True)
class Discretizer:
    cuts: Mapping[str, tuple[float, float, float, float]]

    def to_dict(self) -> dict:
        return {k: list(v) for k, v in self.cuts.items()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Sequence[float]]) -> "Discretizer":
        return cls({k: tuple(float(x) for x in v) for k, v in d.items()})


def rank_cuts(values: np.ndarray) -> tuple[float, ...]:
    """Value at rank ceil(q/100 * N) of the sorted sample, for each quintile boundary q."""
    ordered = np.sort(np.asarray(values, dtype=np.float64))
    n = ordered.size
    # integer ceil avoids float artefacts such as 0.6 * 5 = 3.0000000000000004
    return tuple(float(ordered[max(1, (q * n + 99) // 100) - 1]) for q in PERCENTILES)


def fit_discretizer(vectors: Iterable[GazeVector]) -> Discretizer:
    vecs = list(vectors)
    if not vecs:
        raise ConfigError("cannot fit a discretizer on an empty training set")
    cuts = {feat: rank_cuts(np.array([getattr(v, feat) for v in vecs])) for feat in DURATION_FEATURES}
    return Discretizer(cuts)


def bin_label(value: float, cuts: Sequence[float]) -> str:
    for label, cut in zip(BINS, cuts):
        if value <= cut:
            return label
    return BINS[-1]


def format_raw(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return f"{value:.1f}"


def discretize(vec: GazeVector, disc: Discretizer, tasks: Sequence[str]) -> dict[str, str]:
    labels = {}
    for feat in tasks:
        value = vec.get(feat)
        if feat in DURATION_FEATURES:
            labels[feat] = bin_label(value, disc.cuts[feat])
        else:
            labels[feat] = format_raw(value)
    return labels


def sentence_labels(vectors: Sequence[GazeVector], disc: Discretizer, tasks: Sequence[str]) -> dict[str, list[str]]:
    """Per-feature label columns for one reading."""
    per_token = [discretize(v, disc, tasks) for v in vectors]
    return {feat: [lab[feat] for lab in per_token] for feat in tasks}

