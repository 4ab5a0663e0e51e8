"""Random treebanks and gaze readings for tests, smoke runs and benchmarks."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from gazedep.corpus import GazeReading, RawGaze, Sentence, Token

TAGSET = ("NOUN", "VERB", "DET", "ADJ", "ADP", "PRON", "ADV", "PUNCT")
DEPRELS = ("nsubj", "obj", "det", "amod", "case", "obl", "advmod", "punct", "conj", "nmod")


def random_heads(n: int, rng: np.random.Generator, projective: bool = False) -> list[int]:
    """Heads (1-based, 0 = root) of a uniformly shaped random single-rooted tree."""
    if projective:
        return _projective_heads(1, n, 0, rng, [0] * n)
    order = rng.permutation(n) + 1
    heads = [0] * n
    for k in range(1, n):
        heads[order[k] - 1] = int(order[rng.integers(k)])
    return heads


def _projective_heads(lo: int, hi: int, parent: int, rng, heads: list[int]) -> list[int]:
    if lo > hi:
        return heads
    r = int(rng.integers(lo, hi + 1))
    heads[r - 1] = parent
    _projective_heads(lo, r - 1, r, rng, heads)
    _projective_heads(r + 1, hi, r, rng, heads)
    return heads


def random_sentence(sent_id: str, n: int, rng: np.random.Generator, tagset: Sequence[str] = TAGSET,
                    deprels: Sequence[str] = DEPRELS, vocab_size: int = 6, projective: bool = False) -> Sentence:
    heads = random_heads(n, rng, projective)
    tags = [tagset[int(i)] for i in rng.integers(len(tagset), size=n)]
    tokens = []
    for i in range(n):
        form = f"{tags[i].lower()}{int(rng.integers(vocab_size))}"
        rel = "root" if heads[i] == 0 else deprels[int(rng.integers(len(deprels)))]
        tokens.append(Token(i + 1, form, tags[i], heads[i], rel, upos=tags[i], xpos=tags[i]))
    return Sentence(sent_id, tuple(tokens))


def random_treebank(n_sents: int, seed: int = 0, min_len: int = 3, max_len: int = 12, **kw) -> list[Sentence]:
    rng = np.random.default_rng(seed)
    return [random_sentence(f"s{i + 1}", int(rng.integers(min_len, max_len + 1)), rng, **kw)
            for i in range(n_sents)]


def random_raw_gaze(rng: np.random.Generator) -> RawGaze:
    n_fix = int(rng.choice([0, 0, 1, 1, 1, 2, 2, 3, 4]))
    if n_fix == 0:
        return RawGaze()
    durations = rng.integers(60, 320, size=n_fix).astype(float)
    first_pass_n = int(rng.integers(1, n_fix + 1))
    return RawGaze(
        total_fix_dur=float(durations.sum()),
        first_fix_dur=float(durations[0]),
        first_pass_dur=float(durations[:first_pass_n].sum()),
        n_fix=n_fix,
        n_refix=n_fix - first_pass_n,
        reread=n_fix > first_pass_n,
    )


def random_readings(sentences: Sequence[Sentence], participants: Sequence[str] = ("p1", "p2", "p3"),
                    seed: int = 0) -> list[GazeReading]:
    rng = np.random.default_rng(seed)
    out = []
    for s in sentences:
        for p in participants:
            out.append(GazeReading(s.sent_id, p, tuple(random_raw_gaze(rng) for _ in s.tokens), tuple(s.forms)))
    return out
