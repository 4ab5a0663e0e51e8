"""Attachment scores and dev-set model selection."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from gazedep.corpus import Sentence, Token
from gazedep.errors import ConfigError, DataError

PUNCT_POLICIES = ("ud-deprel", "ptb-pos", "none")
PTB_PUNCT_TAGS = frozenset({"``", "''", ":", ",", "."})


@dataclass(frozen=True)
class ParseScore:
    uas: float
    las: float
    evaluated_tokens: int
    excluded_tokens: int
    correct_heads: int = 0
    correct_labeled: int = 0

    def tsv(self) -> str:
        return f"{self.uas:.2f}\t{self.las:.2f}\t{self.evaluated_tokens}\t{self.excluded_tokens}"


def is_excluded(tok: Token, policy: str) -> bool:
    if policy == "ud-deprel":
        return tok.deprel.split(":", 1)[0] == "punct"
    if policy == "ptb-pos":
        return tok.pos in PTB_PUNCT_TAGS
    return False


def score(gold: Sequence[Sentence], predicted: Sequence[Sentence], punct_policy: str = "ud-deprel") -> ParseScore:
    """UAS/LAS over tokens not excluded by ``punct_policy`` (decided on the gold token)."""
    if punct_policy not in PUNCT_POLICIES:
        raise ConfigError(f"punct policy must be one of {PUNCT_POLICIES}")
    if len(gold) != len(predicted):
        raise DataError(f"gold has {len(gold)} sentences, prediction has {len(predicted)}")
    evaluated = excluded = heads_ok = labeled_ok = 0
    for g, p in zip(gold, predicted):
        if len(g) != len(p):
            raise DataError(
                f"sentence {g.sent_id!r}: gold has {len(g)} tokens, prediction has {len(p)}"
            )
        for gt, pt in zip(g.tokens, p.tokens):
            if is_excluded(gt, punct_policy):
                excluded += 1
                continue
            evaluated += 1
            if gt.head == pt.head:
                heads_ok += 1
                if gt.deprel == pt.deprel:
                    labeled_ok += 1
    if evaluated == 0:
        return ParseScore(0.0, 0.0, 0, excluded)
    return ParseScore(
        100.0 * heads_ok / evaluated, 100.0 * labeled_ok / evaluated, evaluated, excluded, heads_ok, labeled_ok
    )


def select_best(dev_las: Sequence[float]) -> int:
    """1-based epoch with the highest dev LAS; earliest wins ties."""
    if not dev_las:
        raise ConfigError("no epochs to select from")
    best = 0
    for i, v in enumerate(dev_las):
        if v > dev_las[best]:
            best = i
    return best + 1
