"""Relative PoS-based head encoding of dependency trees.

Each token gets a label (offset, pos, deprel): the head is the
``offset``-th token carrying tag ``pos`` to the right (offset > 0) or to
the left (offset < 0). The syntactic root gets ``(-1, ROOT, deprel)``.
"""

from __future__ import annotations

from typing import NamedTuple, Sequence

from gazedep.corpus import Sentence
from gazedep.errors import ConfigError, DataError
from gazedep.vocab import Vocab

ROOT = "ROOT"
ROOT_DEPREL = "root"


class DepLabel(NamedTuple):
    offset: int
    pos: str
    deprel: str

    @property
    def head_key(self) -> str:
        """The (offset, pos) sub-pair as a single vocabulary symbol."""
        return f"{self.offset:+d}@{self.pos}"

    def __str__(self) -> str:
        return f"{self.offset:+d}@{self.pos}@{self.deprel}"

    @classmethod
    def parse(cls, text: str) -> "DepLabel":
        parts = text.split("@", 2)
        if len(parts) != 3:
            raise DataError(f"label {text!r} is not of the form offset@pos@deprel")
        try:
            offset = int(parts[0])
        except ValueError:
            raise DataError(f"label {text!r} has a non-integer offset") from None
        if offset == 0:
            raise DataError(f"label {text!r} has offset 0")
        return cls(offset, parts[1], parts[2])


def split_head_key(key: str) -> tuple[int, str]:
    off, pos = key.split("@", 1)
    return int(off), pos


def encode(sentence: Sentence) -> list[DepLabel]:
    return encode_arcs(sentence.heads, sentence.deprels, sentence.pos_tags)


def encode_arcs(heads: Sequence[int], deprels: Sequence[str], pos_tags: Sequence[str]) -> list[DepLabel]:
    labels = []
    for i, (h, rel) in enumerate(zip(heads, deprels), start=1):
        if h == 0:
            labels.append(DepLabel(-1, ROOT, rel))
            continue
        tag = pos_tags[h - 1]
        if h > i:
            k = sum(1 for j in range(i + 1, h + 1) if pos_tags[j - 1] == tag)
            labels.append(DepLabel(k, tag, rel))
        else:
            k = sum(1 for j in range(h, i) if pos_tags[j - 1] == tag)
            labels.append(DepLabel(-k, tag, rel))
    return labels


def resolve(i: int, offset: int, pos: str, pos_tags: Sequence[str]) -> int | None:
    """Head index for token ``i`` (1-based) under the offset rule, or None if unresolvable."""
    n = len(pos_tags)
    step = 1 if offset > 0 else -1
    need = abs(offset)
    j = i + step
    while 1 <= j <= n:
        if pos_tags[j - 1] == pos:
            need -= 1
            if need == 0:
                return j
        j += step
    return None


class Decoded(NamedTuple):
    heads: list[int]
    deprels: list[str]
    repaired: bool


def decode(labels: Sequence[DepLabel], pos_tags: Sequence[str]) -> Decoded:
    """Turn a predicted label sequence into a single-rooted tree.

    Repair chain, applied in order: unresolvable labels attach to the root
    position; with no root, the first ROOT-labelled token (else token 1)
    becomes root; with several roots the leftmost wins and the rest attach
    to it; each remaining cycle has its leftmost member reattached to the
    root.
    """
    n = len(labels)
    if n == 0:
        raise ConfigError("cannot decode an empty label sequence")
    if len(pos_tags) != n:
        raise ConfigError(f"{n} labels but {len(pos_tags)} PoS tags")

    heads = [0] * n
    deprels = [lab.deprel for lab in labels]
    repaired = False
    for i, lab in enumerate(labels, start=1):
        if lab.pos == ROOT:
            heads[i - 1] = 0
            continue
        h = resolve(i, lab.offset, lab.pos, pos_tags) if lab.offset != 0 else None
        if h is None:
            repaired = True
            h = 0
        heads[i - 1] = h

    roots = [i for i in range(1, n + 1) if heads[i - 1] == 0]
    if not roots:
        repaired = True
        root = next((i for i, lab in enumerate(labels, start=1) if lab.pos == ROOT), 1)
        heads[root - 1] = 0
        deprels[root - 1] = ROOT_DEPREL
    else:
        root = roots[0]
        if len(roots) > 1:
            repaired = True
            for r in roots[1:]:
                heads[r - 1] = root

    while True:
        cycle = _find_cycle(heads)
        if cycle is None:
            break
        repaired = True
        heads[min(cycle) - 1] = root
    return Decoded(heads, deprels, repaired)


def _find_cycle(heads: list[int]) -> list[int] | None:
    n = len(heads)
    state = [0] * (n + 1)
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            return path[path.index(node):]
        for p in path:
            state[p] = 2
    return None


def decode_sentence(sentence: Sentence, labels: Sequence[DepLabel]) -> Sentence:
    out = decode(labels, sentence.pos_tags)
    return sentence.with_arcs(out.heads, out.deprels)


def label_vocab(corpus_labels: Sequence[Sequence[DepLabel]]) -> tuple[Vocab, Vocab]:
    """(offset, pos) vocabulary and deprel vocabulary, in first-occurrence order."""
    if not corpus_labels or not any(corpus_labels):
        raise ConfigError("cannot build label vocabularies from an empty corpus")
    head_vocab = Vocab(lab.head_key for sent in corpus_labels for lab in sent)
    rel_vocab = Vocab(lab.deprel for sent in corpus_labels for lab in sent)
    return head_vocab, rel_vocab


def format_labels(labels: Sequence[DepLabel]) -> str:
    return " ".join(str(lab) for lab in labels)


def parse_labels(line: str) -> list[DepLabel]:
    return [DepLabel.parse(tok) for tok in line.split()]
