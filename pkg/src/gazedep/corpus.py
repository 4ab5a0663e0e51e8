"""Treebank and gaze-record ingestion, alignment and splitting.

Treebanks are CoNLL-U. Gaze measurements use a flat tab-separated layout
with one row per (sentence, participant, token)::

    sent_id  participant_id  token_index  form  total_fix_dur  first_fix_dur
    first_pass_dur  n_fix  n_refix  reread

Every (sentence, participant) pair is one reading and one training instance.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence, TypeVar

import numpy as np

from gazedep.errors import AlignmentError, ConfigError, ConlluError, GazeFormatError

T = TypeVar("T")

POS_COLUMNS = ("upos", "xpos")

GAZE_COLUMNS = (
    "sent_id",
    "participant_id",
    "token_index",
    "form",
    "total_fix_dur",
    "first_fix_dur",
    "first_pass_dur",
    "n_fix",
    "n_refix",
    "reread",
)


@dataclass(frozen=True)
class Token:
    index: int
    form: str
    pos: str
    head: int | None
    deprel: str
    lemma: str = "_"
    upos: str | None = None
    xpos: str | None = None
    feats: str = "_"
    deps: str = "_"
    misc: str = "_"


@dataclass(frozen=True)
class Sentence:
    sent_id: str
    tokens: tuple[Token, ...]
    comments: tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]

    @property
    def pos_tags(self) -> list[str]:
        return [t.pos for t in self.tokens]

    @property
    def heads(self) -> list[int | None]:
        return [t.head for t in self.tokens]

    @property
    def deprels(self) -> list[str]:
        return [t.deprel for t in self.tokens]

    def with_arcs(self, heads: Sequence[int], deprels: Sequence[str]) -> "Sentence":
        """Copy of the sentence with HEAD and DEPREL replaced."""
        if len(heads) != len(self.tokens) or len(deprels) != len(self.tokens):
            raise ValueError("arc count does not match sentence length")
        tokens = tuple(
            _replace_arc(tok, int(h), str(d)) for tok, h, d in zip(self.tokens, heads, deprels)
        )
        return Sentence(self.sent_id, tokens, self.comments)


def _replace_arc(tok: Token, head: int, deprel: str) -> Token:
    return Token(
        tok.index, tok.form, tok.pos, head, deprel,
        tok.lemma, tok.upos, tok.xpos, tok.feats, tok.deps, tok.misc,
    )


@dataclass(frozen=True)
class RawGaze:
    total_fix_dur: float = 0.0
    first_fix_dur: float = 0.0
    first_pass_dur: float = 0.0
    n_fix: int = 0
    n_refix: int = 0
    reread: bool = False

    def violations(self) -> list[str]:
        """Human-readable list of broken measurement invariants (empty when valid)."""
        out = []
        for name in ("total_fix_dur", "first_fix_dur", "first_pass_dur", "n_fix", "n_refix"):
            if getattr(self, name) < 0:
                out.append(f"{name} is negative")
        fixated = (self.n_fix > 0, self.total_fix_dur > 0, self.first_fix_dur > 0)
        if len(set(fixated)) != 1:
            out.append("n_fix, total_fix_dur and first_fix_dur must be all zero or all positive")
        if self.n_refix > self.n_fix:
            out.append("n_refix exceeds n_fix")
        if not self.first_fix_dur <= self.first_pass_dur <= self.total_fix_dur:
            out.append("expected first_fix_dur <= first_pass_dur <= total_fix_dur")
        return out


@dataclass(frozen=True)
class GazeReading:
    sent_id: str
    participant_id: str
    records: tuple[RawGaze, ...]
    forms: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.records)


# --------------------------------------------------------------------------
# CoNLL-U
# --------------------------------------------------------------------------


def parse_conllu(text: str, pos_column: str = "upos", require_heads: bool = True) -> list[Sentence]:
    """Parse CoNLL-U text into sentences.

    Multiword-token and empty-node lines are skipped. With
    ``require_heads=False`` an underscore HEAD is accepted and stored as
    ``None`` (unannotated input for prediction).
    """
    if pos_column not in POS_COLUMNS:
        raise ConfigError(f"pos_column must be one of {POS_COLUMNS}, got {pos_column!r}")
    sentences: list[Sentence] = []
    comments: list[str] = []
    sent_id: str | None = None
    rows: list[tuple[int, list[str]]] = []

    def flush() -> None:
        nonlocal sent_id, comments, rows
        if rows:
            sid = sent_id if sent_id is not None else f"s{len(sentences) + 1}"
            sentences.append(_build_sentence(sid, rows, tuple(comments), pos_column, require_heads))
        sent_id, comments, rows = None, [], []

    lines = text.split("\n")
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        if not line.strip():
            flush()
            continue
        if line.startswith("#"):
            if rows:
                raise ConlluError("comment inside a sentence", lineno)
            body = line[1:].strip()
            if body.startswith("sent_id") and "=" in body:
                sent_id = body.split("=", 1)[1].strip()
            else:
                comments.append(line)
            continue
        cols = line.split("\t")
        if len(cols) != 10:
            raise ConlluError(f"expected 10 tab-separated columns, found {len(cols)}", lineno)
        if "-" in cols[0] or "." in cols[0]:
            continue
        rows.append((lineno, cols))
    flush()
    return sentences


def _build_sentence(
    sent_id: str,
    rows: list[tuple[int, list[str]]],
    comments: tuple[str, ...],
    pos_column: str,
    require_heads: bool,
) -> Sentence:
    n = len(rows)
    tokens = []
    for expected, (lineno, cols) in enumerate(rows, start=1):
        try:
            index = int(cols[0])
        except ValueError:
            raise ConlluError(f"non-integer ID {cols[0]!r}", lineno) from None
        if index != expected:
            raise ConlluError(f"token ID {index} out of sequence (expected {expected})", lineno)
        if cols[6] == "_" and not require_heads:
            head = None
        else:
            try:
                head = int(cols[6])
            except ValueError:
                raise ConlluError(f"non-integer HEAD {cols[6]!r}", lineno) from None
            if not 0 <= head <= n:
                raise ConlluError(f"HEAD {head} out of range 0..{n}", lineno)
            if head == index:
                raise ConlluError("token is its own head", lineno)
        pos = cols[3] if pos_column == "upos" else cols[4]
        tokens.append(
            Token(
                index=index, form=cols[1], pos=pos, head=head, deprel=cols[7],
                lemma=cols[2], upos=cols[3], xpos=cols[4], feats=cols[5],
                deps=cols[8], misc=cols[9],
            )
        )
    return Sentence(sent_id, tuple(tokens), comments)


def write_conllu(sentences: Iterable[Sentence]) -> str:
    blocks = []
    for sent in sentences:
        lines = [f"# sent_id = {sent.sent_id}", *sent.comments]
        for tok in sent.tokens:
            upos = tok.upos if tok.upos is not None else tok.pos
            xpos = tok.xpos if tok.xpos is not None else "_"
            head = "_" if tok.head is None else str(tok.head)
            lines.append(
                "\t".join(
                    (str(tok.index), tok.form, tok.lemma, upos, xpos, tok.feats,
                     head, tok.deprel, tok.deps, tok.misc)
                )
            )
        blocks.append("\n".join(lines) + "\n\n")
    return "".join(blocks)


def is_tree(heads: Sequence[int]) -> bool:
    """True when ``heads`` (1-based, 0 = root) form a single-rooted tree."""
    n = len(heads)
    if n == 0 or sum(1 for h in heads if h == 0) != 1:
        return False
    if any(h is None or not 0 <= h <= n for h in heads):
        return False
    state = [0] * (n + 1)  # 0 unseen, 1 on stack, 2 reaches root
    state[0] = 2
    for start in range(1, n + 1):
        path = []
        node = start
        while state[node] == 0:
            state[node] = 1
            path.append(node)
            node = heads[node - 1]
        if state[node] == 1:
            return False
        for p in path:
            state[p] = 2
    return True


# --------------------------------------------------------------------------
# Gaze TSV
# --------------------------------------------------------------------------


def parse_gaze_tsv(text: str) -> list[GazeReading]:
    lines = [ln.rstrip("\r") for ln in text.split("\n")]
    while lines and not lines[-1].strip():
        lines.pop()
    if not lines:
        return []
    header = tuple(c.strip() for c in lines[0].split("\t"))
    if header != GAZE_COLUMNS:
        raise GazeFormatError(f"bad header, expected columns {', '.join(GAZE_COLUMNS)}", 1)

    readings: list[GazeReading] = []
    seen: set[tuple[str, str]] = set()
    key: tuple[str, str] | None = None
    records: list[RawGaze] = []
    forms: list[str] = []

    def flush() -> None:
        if key is not None:
            readings.append(GazeReading(key[0], key[1], tuple(records), tuple(forms)))

    for rowno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cols = line.split("\t")
        if len(cols) != len(GAZE_COLUMNS):
            raise GazeFormatError(f"expected {len(GAZE_COLUMNS)} columns, found {len(cols)}", rowno)
        sid, pid = cols[0], cols[1]
        try:
            tok_index = int(cols[2])
            rec = RawGaze(
                total_fix_dur=float(cols[4]),
                first_fix_dur=float(cols[5]),
                first_pass_dur=float(cols[6]),
                n_fix=int(cols[7]),
                n_refix=int(cols[8]),
                reread=_parse_flag(cols[9]),
            )
        except ValueError as exc:
            raise GazeFormatError(f"bad value: {exc}", rowno) from None
        if not all(math.isfinite(v) for v in (rec.total_fix_dur, rec.first_fix_dur, rec.first_pass_dur)):
            raise GazeFormatError("non-finite duration", rowno)

        if (sid, pid) != key:
            if (sid, pid) in seen:
                raise GazeFormatError(
                    f"duplicate or non-contiguous rows for sentence {sid!r}, participant {pid!r}", rowno
                )
            flush()
            seen.add((sid, pid))
            key, records, forms = (sid, pid), [], []
        expected = len(records) + 1
        if tok_index < expected:
            raise GazeFormatError(f"duplicate token_index {tok_index} for ({sid}, {pid})", rowno)
        if tok_index > expected:
            raise GazeFormatError(f"gap in token_index: expected {expected}, found {tok_index}", rowno)
        problems = rec.violations()
        if problems:
            raise GazeFormatError("; ".join(problems), rowno)
        records.append(rec)
        forms.append(cols[3])
    flush()
    return readings


def _parse_flag(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true"):
        return True
    if v in ("0", "false"):
        return False
    raise ValueError(f"reread must be 0 or 1, got {value!r}")


def write_gaze_tsv(readings: Iterable[GazeReading]) -> str:
    out = ["\t".join(GAZE_COLUMNS)]
    for rd in readings:
        forms = rd.forms or ("_",) * len(rd.records)
        for i, (rec, form) in enumerate(zip(rd.records, forms), start=1):
            out.append(
                "\t".join(
                    (rd.sent_id, rd.participant_id, str(i), form, _fmt_ms(rec.total_fix_dur),
                     _fmt_ms(rec.first_fix_dur), _fmt_ms(rec.first_pass_dur), str(rec.n_fix),
                     str(rec.n_refix), "1" if rec.reread else "0")
                )
            )
    return "\n".join(out) + "\n"


def _fmt_ms(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# --------------------------------------------------------------------------
# Alignment and splitting
# --------------------------------------------------------------------------


class Alignment(NamedTuple):
    pairs: list[tuple[Sentence, GazeReading]]
    parsing_only: list[Sentence]


def align(sentences: Sequence[Sentence], readings: Sequence[GazeReading]) -> Alignment:
    """Pair every gaze reading with its sentence.

    Sentences that nobody read come back in ``parsing_only``.
    """
    by_id: dict[str, Sentence] = {}
    for s in sentences:
        if s.sent_id in by_id:
            raise AlignmentError(f"duplicate sent_id {s.sent_id!r} in treebank")
        by_id[s.sent_id] = s
    pairs = []
    read_ids = set()
    for rd in readings:
        sent = by_id.get(rd.sent_id)
        if sent is None:
            raise AlignmentError(f"gaze reading for unknown sentence {rd.sent_id!r}")
        if len(rd) != len(sent):
            raise AlignmentError(
                f"sentence {rd.sent_id!r} has {len(sent)} tokens but participant "
                f"{rd.participant_id!r} has {len(rd)} gaze records"
            )
        pairs.append((sent, rd))
        read_ids.add(rd.sent_id)
    parsing_only = [s for s in sentences if s.sent_id not in read_ids]
    return Alignment(pairs, parsing_only)


class Split(NamedTuple):
    train: list
    dev: list
    test: list


def _sent_id_of(item) -> str:
    if isinstance(item, Sentence):
        return item.sent_id
    return item[0].sent_id


def split(
    items: Sequence[T],
    ratios: Sequence[float],
    seed: int,
    key: Callable[[T], str] = _sent_id_of,
) -> Split:
    """Seeded train/dev/test partition that never separates readings of one sentence.

    Unique sentence ids are shuffled and cut by ratio (floor for train and
    dev, the remainder goes to test).
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios):
        raise ConfigError(f"split ratios must be three non-negative numbers, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)!r}")
    groups: dict[str, list[T]] = {}
    for item in items:
        groups.setdefault(key(item), []).append(item)
    ids = list(groups)
    order = np.random.default_rng(seed).permutation(len(ids))
    n = len(ids)
    # epsilon guards products like 0.29 * 100 = 28.999999999999996
    n_train = min(n, math.floor(ratios[0] * n + 1e-9))
    n_dev = min(n - n_train, math.floor(ratios[1] * n + 1e-9))
    bounds = (0, n_train, n_train + n_dev, n)
    parts = []
    for lo, hi in zip(bounds, bounds[1:]):
        part: list[T] = []
        for j in order[lo:hi]:
            part.extend(groups[ids[j]])
        parts.append(part)
    return Split(*parts)


def read_text(path: str) -> str:
    """Read a UTF-8 file; ``-`` means standard input."""
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8", newline="") as f:
        return f.read()
