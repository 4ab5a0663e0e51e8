"""Task configuration, combined losses and batch scheduling for multitask training."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from gazedep.errors import ConfigError
from gazedep.gaze import resolve_features
from gazedep.nn import autograd as ag
from gazedep.nn.autograd import Tensor
from gazedep.vocab import Vocab

HEAD_TASK = "head"
REL_TASK = "rel"
MAIN_TASKS = (HEAD_TASK, REL_TASK)
DEFAULT_AUX_WEIGHT = 0.1

PARSE = "parse"
GAZE = "gaze"
PARALLEL = "parallel"
SOURCES = (PARSE, GAZE, PARALLEL)


@dataclass(frozen=True)
class TaskSpec:
    name: str
    kind: str  # main-parse-head | main-parse-rel | aux-gaze
    weight: float = 1.0
    feature: str | None = None

    def __post_init__(self):
        if self.kind not in ("main-parse-head", "main-parse-rel", "aux-gaze"):
            raise ConfigError(f"unknown task kind {self.kind!r}")
        if self.weight < 0:
            raise ConfigError(f"task {self.name!r} has negative weight")
        if self.is_main and self.weight != 1.0:
            raise ConfigError("main parsing tasks are weighted 1.0")

    @property
    def is_main(self) -> bool:
        return self.kind != "aux-gaze"


def build_task_specs(aux: Sequence[str] = (), aux_weight: float = DEFAULT_AUX_WEIGHT,
                     weights: Mapping[str, float] | None = None) -> list[TaskSpec]:
    """Two main parsing tasks plus one auxiliary task per gaze feature.

    ``aux`` may mix feature names and group names (basic, early, late,
    context); a group becomes one task per member feature.
    """
    weights = dict(weights or {})
    specs = [TaskSpec(HEAD_TASK, "main-parse-head"), TaskSpec(REL_TASK, "main-parse-rel")]
    for feat in resolve_features(aux):
        specs.append(TaskSpec(feat, "aux-gaze", float(weights.get(feat, aux_weight)), feature=feat))
    unknown = set(weights) - {s.name for s in specs}
    if unknown:
        raise ConfigError(f"weights given for unconfigured tasks: {', '.join(sorted(unknown))}")
    return specs


@dataclass
class Instance:
    """One training sentence: tokens plus whatever gold label columns it carries."""

    forms: list[str]
    pos: list[str]
    gold: dict[str, list[str]] = field(default_factory=dict)
    sent_id: str = ""

    def __len__(self) -> int:
        return len(self.forms)


@dataclass
class Batch:
    instances: list[Instance]
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ConfigError(f"unknown batch source {self.source!r}")

    @property
    def tau(self) -> int:
        return 1 if self.source in (PARSE, PARALLEL) else 0

    def token_seqs(self) -> list[tuple[list[str], list[str]]]:
        return [(inst.forms, inst.pos) for inst in self.instances]

    def gold_ids(self, label_vocabs: Mapping[str, Vocab]) -> dict[str, np.ndarray]:
        """Concatenated gold ids for each task annotated on every instance."""
        out = {}
        for task, vocab in label_vocabs.items():
            if all(task in inst.gold for inst in self.instances):
                out[task] = np.array(
                    [vocab.index(lab) for inst in self.instances for lab in inst.gold[task]], dtype=np.int64
                )
        return out


def _weighted_sum(logits: Mapping[str, Tensor], gold: Mapping[str, np.ndarray],
                  specs: Sequence[TaskSpec], parts: dict[str, float] | None) -> Tensor:
    terms = []
    for spec in specs:
        ce = ag.cross_entropy(logits[spec.name], gold[spec.name])
        if parts is not None:
            parts[spec.name] = ce.item()
        # a zero-weighted task stays out of the graph entirely
        if spec.weight == 0.0:
            continue
        terms.append(ce if spec.weight == 1.0 else ag.scale(ce, spec.weight))
    return ag.add_all(terms)


def parallel_loss(logits: Mapping[str, Tensor], gold: Mapping[str, np.ndarray],
                  specs: Sequence[TaskSpec], parts: dict[str, float] | None = None) -> Tensor:
    """L = L_head + L_rel + sum_a beta_a * L_a, every term a token-mean cross-entropy."""
    missing = [s.name for s in specs if s.name not in gold]
    if missing:
        raise ConfigError(f"parallel training needs gold for every task; missing {', '.join(missing)}")
    return _weighted_sum(logits, gold, specs, parts)


def disjoint_loss(logits: Mapping[str, Tensor], gold: Mapping[str, np.ndarray],
                  specs: Sequence[TaskSpec], tau: int, parts: dict[str, float] | None = None) -> Tensor:
    """tau * (L_head + L_rel) + (1 - tau) * sum_a beta_a * L_a; the inactive side is not in the graph."""
    if tau not in (0, 1):
        raise ConfigError("tau must be 0 or 1")
    active = [s for s in specs if s.is_main == bool(tau)]
    missing = [s.name for s in active if s.name not in gold]
    if missing:
        side = "parsing" if tau else "gaze"
        raise ConfigError(f"tau={tau} batch lacks {side} gold for {', '.join(missing)}")
    return _weighted_sum(logits, gold, active, parts)


def parallel_batches(n: int, batch_size: int, seed: int, epoch: int = 0) -> list[np.ndarray]:
    order = np.random.default_rng([seed, epoch]).permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def schedule_disjoint(n_parse: int, n_gaze: int, batch_size: int, seed: int,
                      epoch: int = 0) -> list[tuple[str, np.ndarray]]:
    """One epoch of single-source batches over two corpora.

    Each source is shuffled independently; the next batch's source is drawn
    with probability proportional to the instances it still has left.
    """
    if n_parse <= 0 or n_gaze <= 0:
        raise ConfigError(
            "disjoint scheduling needs two non-empty corpora; use parallel or baseline mode for one corpus"
        )
    if batch_size <= 0:
        raise ConfigError("batch_size must be positive")
    rng = np.random.default_rng([seed, epoch])
    orders = {PARSE: rng.permutation(n_parse), GAZE: rng.permutation(n_gaze)}
    taken = {PARSE: 0, GAZE: 0}
    batches = []
    while True:
        left_p = n_parse - taken[PARSE]
        left_g = n_gaze - taken[GAZE]
        if left_p + left_g == 0:
            break
        source = PARSE if rng.random() * (left_p + left_g) < left_p else GAZE
        start = taken[source]
        batches.append((source, orders[source][start:start + batch_size]))
        taken[source] = min(start + batch_size, n_parse if source == PARSE else n_gaze)
    return batches
