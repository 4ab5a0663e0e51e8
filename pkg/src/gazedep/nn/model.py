"""Hard-shared BiLSTM multitask tagger."""

from __future__ import annotations

import zlib
from dataclasses import asdict, dataclass, fields, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from gazedep.errors import ConfigError
from gazedep.nn import autograd as ag
from gazedep.nn.autograd import Tensor
from gazedep.vocab import Vocab

LSTM_NAMES = ("char_fw", "char_bw", "l1_fw", "l1_bw", "l2_fw", "l2_bw")


@dataclass(frozen=True)
class Hyperparams:
    word_emb_dim: int = 100
    char_emb_dim: int = 30
    pos_emb_dim: int = 20
    word_hidden: int = 800
    char_hidden: int = 50
    lr0: float = 0.02
    decay: float = 0.05
    momentum: float = 0.9
    dropout: float = 0.5
    batch_size: int = 8
    max_epochs: int = 100

    def __post_init__(self):
        for name in ("word_emb_dim", "char_emb_dim", "pos_emb_dim", "word_hidden", "char_hidden",
                     "batch_size", "max_epochs"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("word_hidden", "char_hidden"):
            if getattr(self, name) % 2:
                raise ConfigError(f"{name} is split across two directions and must be even")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must be in [0, 1)")
        if self.lr0 <= 0 or self.decay < 0 or not 0.0 <= self.momentum < 1.0:
            raise ConfigError("need lr0 > 0, decay >= 0 and momentum in [0, 1)")

    @classmethod
    def desk(cls, **overrides) -> "Hyperparams":
        """Embedding and hidden sizes scaled down about tenfold for CPU-scale runs."""
        base = dict(word_emb_dim=10, char_emb_dim=3, pos_emb_dim=2, word_hidden=80, char_hidden=6)
        base.update(overrides)
        return cls(**base)

    @property
    def input_dim(self) -> int:
        return self.word_emb_dim + self.char_hidden + self.pos_emb_dim

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> "Hyperparams":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def with_overrides(self, **kw) -> "Hyperparams":
        return replace(self, **kw)


class Vocabs(NamedTuple):
    words: Vocab
    chars: Vocab
    pos: Vocab
    labels: dict[str, Vocab]  # task name -> label vocabulary, in head order

    def to_dict(self) -> dict:
        return {
            "words": self.words.to_dict(),
            "chars": self.chars.to_dict(),
            "pos": self.pos.to_dict(),
            "labels": [[name, v.to_dict()] for name, v in self.labels.items()],
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Vocabs":
        return cls(
            Vocab.from_dict(d["words"]),
            Vocab.from_dict(d["chars"]),
            Vocab.from_dict(d["pos"]),
            {name: Vocab.from_dict(v) for name, v in d["labels"]},
        )

    @classmethod
    def build(cls, token_seqs: Sequence[tuple[Sequence[str], Sequence[str]]], labels: dict[str, Vocab]) -> "Vocabs":
        words = Vocab((w for forms, _ in token_seqs for w in forms), pad=True)
        chars = Vocab((ch for forms, _ in token_seqs for w in forms for ch in w), pad=True)
        pos = Vocab((p for _, tags in token_seqs for p in tags), pad=True)
        return cls(words, chars, pos, dict(labels))


class Batch(NamedTuple):
    """Padded integer view of a list of sentences."""

    lengths: np.ndarray  # (B,)
    word_ids: np.ndarray  # (B, T)
    pos_ids: np.ndarray  # (B, T)
    char_ids: np.ndarray  # (N, L), one row per real token
    char_lengths: np.ndarray  # (N,)
    flat_index: np.ndarray  # (N,) row of each real token in the flattened (B*T) layout

    @property
    def n_tokens(self) -> int:
        return int(self.lengths.sum())


def glorot(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = np.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


class Tagger:
    """Word, character and PoS embeddings feeding two shared BiLSTM layers and one softmax head per task."""

    def __init__(self, hp: Hyperparams, vocabs: Vocabs, seed: int = 1):
        self.hp = hp
        self.vocabs = vocabs
        self.seed = int(seed)
        self.tasks = list(vocabs.labels)
        self.params: dict[str, Tensor] = {}
        self._init_params()
        self.dropout_rng = np.random.default_rng([self.seed, 0xD0])

    # -- parameters -------------------------------------------------------

    def _rng(self, name: str) -> np.random.Generator:
        # name-keyed streams: adding a head never shifts the init of the others
        return np.random.default_rng([self.seed, zlib.crc32(name.encode())])

    def _add(self, name: str, value: np.ndarray) -> None:
        self.params[name] = Tensor(value, requires_grad=True, name=name)

    def _init_params(self) -> None:
        hp, v = self.hp, self.vocabs
        self._add("word_emb", glorot(self._rng("word_emb"), (len(v.words), hp.word_emb_dim)))
        self._add("char_emb", glorot(self._rng("char_emb"), (len(v.chars), hp.char_emb_dim)))
        self._add("pos_emb", glorot(self._rng("pos_emb"), (len(v.pos), hp.pos_emb_dim)))
        ch, wh = hp.char_hidden // 2, hp.word_hidden // 2
        dims = {
            "char_fw": (hp.char_emb_dim, ch), "char_bw": (hp.char_emb_dim, ch),
            "l1_fw": (hp.input_dim, wh), "l1_bw": (hp.input_dim, wh),
            "l2_fw": (hp.word_hidden, wh), "l2_bw": (hp.word_hidden, wh),
        }
        for name in LSTM_NAMES:
            d_in, h = dims[name]
            self._add(f"{name}.wx", glorot(self._rng(f"{name}.wx"), (d_in, 4 * h)))
            self._add(f"{name}.wh", glorot(self._rng(f"{name}.wh"), (h, 4 * h)))
            bias = np.zeros(4 * h)
            bias[h:2 * h] = 1.0
            self._add(f"{name}.b", bias)
        for task in self.tasks:
            n_out = len(self.vocabs.labels[task])
            self._add(f"head.{task}.w", glorot(self._rng(f"head.{task}.w"), (hp.word_hidden, n_out)))
            self._add(f"head.{task}.b", np.zeros(n_out))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def shared_param_names(self) -> list[str]:
        return [n for n in self.params if not n.startswith("head.")]

    def head_param_names(self, task: str) -> list[str]:
        return [f"head.{task}.w", f"head.{task}.b"]

    # -- batching ---------------------------------------------------------

    def make_batch(self, token_seqs: Sequence[tuple[Sequence[str], Sequence[str]]]) -> Batch:
        v = self.vocabs
        lengths = np.array([len(forms) for forms, _ in token_seqs], dtype=np.int64)
        if lengths.size == 0 or lengths.min() == 0:
            raise ConfigError("batches need at least one non-empty sentence")
        B, T = lengths.size, int(lengths.max())
        word_ids = np.zeros((B, T), dtype=np.int64)
        pos_ids = np.zeros((B, T), dtype=np.int64)
        chars: list[list[int]] = []
        flat = []
        for b, (forms, tags) in enumerate(token_seqs):
            n = len(forms)
            word_ids[b, :n] = v.words.encode(forms)
            pos_ids[b, :n] = v.pos.encode(tags)
            for t, form in enumerate(forms):
                chars.append(v.chars.encode(form) if form else [v.chars.unk_id])
                flat.append(b * T + t)
        char_lengths = np.array([len(c) for c in chars], dtype=np.int64)
        char_ids = np.zeros((len(chars), int(char_lengths.max())), dtype=np.int64)
        for i, c in enumerate(chars):
            char_ids[i, : len(c)] = c
        return Batch(lengths, word_ids, pos_ids, char_ids, char_lengths, np.array(flat, dtype=np.int64))

    # -- forward ----------------------------------------------------------

    def _lstm(self, name: str, x: Tensor, lengths: np.ndarray, reverse: bool) -> Tensor:
        p = self.params
        return ag.lstm(x, lengths, p[f"{name}.wx"], p[f"{name}.wh"], p[f"{name}.b"], reverse=reverse)

    def embed(self, batch: Batch) -> Tensor:
        """(B, T, word + char + pos) input vectors."""
        p = self.params
        B, T = batch.word_ids.shape
        words = ag.embedding(p["word_emb"], batch.word_ids)
        tags = ag.embedding(p["pos_emb"], batch.pos_ids)

        chars = ag.embedding(p["char_emb"], batch.char_ids)
        n, L = batch.char_ids.shape
        fw = ag.reshape(self._lstm("char_fw", chars, batch.char_lengths, False), (n * L, -1))
        bw = ag.reshape(self._lstm("char_bw", chars, batch.char_lengths, True), (n * L, -1))
        starts = np.arange(n) * L
        char_vec = ag.concat(
            [ag.take_rows(fw, starts + batch.char_lengths - 1), ag.take_rows(bw, starts)], axis=-1
        )
        char_grid = ag.reshape(ag.scatter_rows(char_vec, batch.flat_index, B * T), (B, T, -1))
        return ag.concat([words, char_grid, tags], axis=-1)

    def encode(self, batch: Batch, train: bool = False) -> Tensor:
        """Shared representation h_i for every real token, (N, word_hidden)."""
        p_drop = self.hp.dropout if train else 0.0
        x = ag.dropout(self.embed(batch), p_drop, self.dropout_rng)
        h = ag.concat([self._lstm("l1_fw", x, batch.lengths, False),
                       self._lstm("l1_bw", x, batch.lengths, True)], axis=-1)
        h = ag.dropout(h, p_drop, self.dropout_rng)
        h = ag.concat([self._lstm("l2_fw", h, batch.lengths, False),
                       self._lstm("l2_bw", h, batch.lengths, True)], axis=-1)
        B, T, D = h.shape
        return ag.take_rows(ag.reshape(h, (B * T, D)), batch.flat_index)

    def forward(self, batch: Batch, train: bool = False, tasks: Sequence[str] | None = None) -> dict[str, Tensor]:
        """Per-task (N, |labels|) logits."""
        h = self.encode(batch, train)
        out = {}
        for task in tasks if tasks is not None else self.tasks:
            out[task] = ag.linear(h, self.params[f"head.{task}.w"], self.params[f"head.{task}.b"])
        return out

    def predict(self, batch: Batch, tasks: Sequence[str] | None = None) -> dict[str, list[list[str]]]:
        """Most probable non-UNK label per token, split back into sentences."""
        logits = self.forward(batch, train=False, tasks=tasks)
        bounds = np.cumsum(batch.lengths)[:-1]
        out = {}
        for task, t in logits.items():
            vocab = self.vocabs.labels[task]
            scores = t.data.copy()
            scores[:, vocab.special_ids] = -np.inf
            best = scores.argmax(axis=1)
            out[task] = [[vocab.itos[i] for i in chunk] for chunk in np.split(best, bounds)]
        return out

    def load_word_vectors(self, text: str) -> int:
        """Overwrite embeddings of known words from ``word v1 v2 ...`` lines; returns rows set."""
        table = self.params["word_emb"].data
        hits = 0
        for line in text.splitlines():
            parts = line.rstrip().split(" ")
            if len(parts) != table.shape[1] + 1 or parts[0] not in self.vocabs.words:
                continue
            table[self.vocabs.words.index(parts[0])] = np.array(parts[1:], dtype=np.float64)
            hits += 1
        return hits
