"""Experiment orchestration: data assembly per mode, the training loop, checkpoint selection."""

from __future__ import annotations

import io
import logging
import os
from dataclasses import dataclass, field
from typing import Callable, Sequence

from gazedep import config as config_mod
from gazedep.config import RunConfig
from gazedep.corpus import GazeReading, Sentence, align, parse_conllu, parse_gaze_tsv, read_text, split
from gazedep.encoder import DepLabel, decode, encode, label_vocab, split_head_key
from gazedep.errors import ConfigError
from gazedep.evaluation import ParseScore, score, select_best
from gazedep.gaze import Discretizer, GazeVector, aggregate, derive, fit_discretizer, sentence_labels
from gazedep.mtl import (
    HEAD_TASK, PARALLEL, PARSE, REL_TASK, Batch, Instance, TaskSpec, build_task_specs, disjoint_loss,
    parallel_batches, parallel_loss, schedule_disjoint,
)
from gazedep.nn import autograd as ag
from gazedep.nn import serialize
from gazedep.nn.model import Hyperparams, Tagger, Vocabs
from gazedep.nn.optim import SGD
from gazedep.vocab import Vocab

log = logging.getLogger(__name__)

PREDICT_BATCH = 32


@dataclass
class GazeItem:
    sentence: Sentence
    vectors: list[GazeVector]


@dataclass
class Data:
    """Everything a run trains and evaluates on."""

    parse_train: list[Sentence]
    dev: list[Sentence]
    test: list[Sentence]
    gaze_train: list[GazeItem] = field(default_factory=list)
    gaze_dev: list[GazeItem] = field(default_factory=list)
    parallel: bool = False


@dataclass
class TrainResult:
    model: Tagger
    best_epoch: int
    log_rows: list[dict]
    dev_score: ParseScore
    test_score: ParseScore | None
    specs: list[TaskSpec]
    blob: bytes = b""


# --------------------------------------------------------------------------
# data assembly
# --------------------------------------------------------------------------


def _load_treebank(path: str, pos_column: str) -> list[Sentence]:
    return parse_conllu(read_text(path), pos_column=pos_column)


def _gaze_items(pairs: Sequence[tuple[Sentence, GazeReading]], mode: str) -> list[GazeItem]:
    if mode == "none":
        return [GazeItem(s, derive(r)) for s, r in pairs]
    grouped: dict[str, list[tuple[Sentence, GazeReading]]] = {}
    for s, r in pairs:
        grouped.setdefault(s.sent_id, []).append((s, r))
    return [GazeItem(g[0][0], aggregate([derive(r) for _, r in g])) for g in grouped.values()]


def assemble(cfg: RunConfig) -> Data:
    if cfg.mode in ("parallel", "baseline") and cfg.treebank:
        sentences = _load_treebank(cfg.treebank, cfg.pos_column)
        if cfg.gaze:
            aligned = align(sentences, parse_gaze_tsv(read_text(cfg.gaze)))
            if aligned.parsing_only:
                log.warning("%d treebank sentences have no gaze reading and are skipped",
                            len(aligned.parsing_only))
            parts = split(aligned.pairs, cfg.split, cfg.seed)
            items = [_gaze_items(p, cfg.aggregate) for p in parts]
            if cfg.mode == "baseline":
                return Data([g.sentence for g in items[0]], [g.sentence for g in items[1]],
                            [g.sentence for g in items[2]])
            return Data([g.sentence for g in items[0]], [g.sentence for g in items[1]],
                        [g.sentence for g in items[2]], items[0], items[1], parallel=True)
        if cfg.mode == "parallel":
            raise ConfigError("parallel mode needs 'gaze'")
        parts = split(sentences, cfg.split, cfg.seed)
        return Data(parts.train, parts.dev, parts.test)

    train = _load_treebank(cfg.train, cfg.pos_column)
    dev = _load_treebank(cfg.dev, cfg.pos_column)
    test = _load_treebank(cfg.test, cfg.pos_column) if cfg.test else []
    data = Data(train, dev, test)
    if cfg.mode == "disjoint":
        gaze_sents = _load_treebank(cfg.gaze_treebank, cfg.gaze_pos_column or cfg.pos_column)
        aligned = align(gaze_sents, parse_gaze_tsv(read_text(cfg.gaze)))
        parts = split(aligned.pairs, cfg.gaze_split, cfg.seed)
        data.gaze_train = _gaze_items(parts.train, cfg.aggregate)
        data.gaze_dev = _gaze_items(parts.dev, cfg.aggregate)
    return data


def _parse_gold(sent: Sentence) -> dict[str, list[str]]:
    labels = encode(sent)
    return {HEAD_TASK: [lab.head_key for lab in labels], REL_TASK: [lab.deprel for lab in labels]}


def build_instances(data: Data, specs: Sequence[TaskSpec],
                    disc: Discretizer | None) -> tuple[list[Instance], list[Instance], list[Instance]]:
    """(parse-side, gaze-side, parallel) training instances."""
    features = [s.feature for s in specs if not s.is_main]
    if data.parallel:
        out = []
        for item in data.gaze_train:
            gold = _parse_gold(item.sentence)
            if features:
                gold.update(sentence_labels(item.vectors, disc, features))
            out.append(Instance(item.sentence.forms, item.sentence.pos_tags, gold, item.sentence.sent_id))
        return [], [], out
    parse_side = [Instance(s.forms, s.pos_tags, _parse_gold(s), s.sent_id) for s in data.parse_train]
    gaze_side = []
    if features:
        for item in data.gaze_train:
            gold = sentence_labels(item.vectors, disc, features)
            gaze_side.append(Instance(item.sentence.forms, item.sentence.pos_tags, gold, item.sentence.sent_id))
    return parse_side, gaze_side, []


def build_vocabs(instances: Sequence[Instance], specs: Sequence[TaskSpec]) -> Vocabs:
    parse_labels = [
        [DepLabel(*split_head_key(h), r) for h, r in zip(i.gold[HEAD_TASK], i.gold[REL_TASK])]
        for i in instances if HEAD_TASK in i.gold
    ]
    head_vocab, rel_vocab = label_vocab(parse_labels)
    labels: dict[str, Vocab] = {HEAD_TASK: head_vocab, REL_TASK: rel_vocab}
    for spec in specs:
        if not spec.is_main:
            labels[spec.name] = Vocab(lab for i in instances if spec.name in i.gold for lab in i.gold[spec.name])
    return Vocabs.build([(i.forms, i.pos) for i in instances], labels)


# --------------------------------------------------------------------------
# inference helpers
# --------------------------------------------------------------------------


def parse_sentences(model: Tagger, sentences: Sequence[Sentence], batch_size: int = PREDICT_BATCH) -> list[Sentence]:
    """Predict heads and relations; predictions for repeated sent_ids are computed once."""
    cache: dict[tuple[str, tuple[str, ...]], Sentence] = {}
    todo = []
    for s in sentences:
        key = (s.sent_id, tuple(s.forms))
        if key not in cache:
            cache[key] = s
            todo.append(key)
    done: dict[tuple[str, tuple[str, ...]], Sentence] = {}
    for start in range(0, len(todo), batch_size):
        keys = todo[start:start + batch_size]
        chunk = [cache[k] for k in keys]
        batch = model.make_batch([(s.forms, s.pos_tags) for s in chunk])
        pred = model.predict(batch, tasks=[HEAD_TASK, REL_TASK])
        for k, s, heads, rels in zip(keys, chunk, pred[HEAD_TASK], pred[REL_TASK]):
            labels = [DepLabel(*split_head_key(h), r) for h, r in zip(heads, rels)]
            out = decode(labels, s.pos_tags)
            done[k] = s.with_arcs(out.heads, out.deprels)
    return [done[(s.sent_id, tuple(s.forms))] for s in sentences]


def aux_accuracy(model: Tagger, items: Sequence[GazeItem], disc: Discretizer,
                 features: Sequence[str]) -> dict[str, float]:
    if not items or not features:
        return {}
    hits = {f: 0 for f in features}
    total = 0
    for start in range(0, len(items), PREDICT_BATCH):
        chunk = items[start:start + PREDICT_BATCH]
        batch = model.make_batch([(g.sentence.forms, g.sentence.pos_tags) for g in chunk])
        pred = model.predict(batch, tasks=list(features))
        for j, g in enumerate(chunk):
            gold = sentence_labels(g.vectors, disc, features)
            total += len(g.vectors)
            for f in features:
                hits[f] += sum(1 for a, b in zip(pred[f][j], gold[f]) if a == b)
    return {f: 100.0 * hits[f] / total for f in features}


# --------------------------------------------------------------------------
# training loop
# --------------------------------------------------------------------------


def _epoch_batches(cfg: RunConfig, hp: Hyperparams, parse_side, gaze_side, par, epoch: int) -> list[Batch]:
    if par:
        return [Batch([par[i] for i in idx], PARALLEL)
                for idx in parallel_batches(len(par), hp.batch_size, cfg.seed, epoch)]
    if gaze_side:
        return [Batch([(parse_side if src == PARSE else gaze_side)[i] for i in idx], src)
                for src, idx in schedule_disjoint(len(parse_side), len(gaze_side), hp.batch_size, cfg.seed, epoch)]
    return [Batch([parse_side[i] for i in idx], PARSE)
            for idx in parallel_batches(len(parse_side), hp.batch_size, cfg.seed, epoch)]


def train_step(model: Tagger, opt: SGD, batch: Batch, specs: Sequence[TaskSpec], epoch: int,
               disjoint: bool, parts: dict[str, float] | None = None) -> float:
    """One optimisation step; returns the scalar loss."""
    model.zero_grad()
    mb = model.make_batch(batch.token_seqs())
    gold = batch.gold_ids(model.vocabs.labels)
    active = [s for s in specs if (s.is_main == bool(batch.tau)) or not disjoint]
    logits = model.forward(mb, train=True, tasks=[s.name for s in active])
    if disjoint:
        loss = disjoint_loss(logits, gold, specs, batch.tau, parts)
    else:
        loss = parallel_loss(logits, gold, specs, parts)
    ag.backward(loss)
    opt.step(epoch)
    return loss.item()


def train(cfg: RunConfig, data: Data | None = None,
          on_epoch: Callable[[dict], None] | None = None) -> TrainResult:
    hp = cfg.hyperparams()
    data = data if data is not None else assemble(cfg)
    if not data.dev:
        raise ConfigError("the development set is empty; model selection needs dev sentences")
    specs = build_task_specs(cfg.tasks, cfg.aux_weight, cfg.weights)
    features = [s.feature for s in specs if not s.is_main]
    disc = fit_discretizer(v for g in data.gaze_train for v in g.vectors) if features else None
    parse_side, gaze_side, par = build_instances(data, specs, disc)
    if not (parse_side or par):
        raise ConfigError("no parsing training data")
    disjoint = bool(gaze_side)
    model = Tagger(hp, build_vocabs(parse_side + gaze_side + par, specs), seed=cfg.seed)
    if cfg.embeddings:
        hits = model.load_word_vectors(read_text(cfg.embeddings))
        log.info("loaded %d pretrained word vectors", hits)
    opt = SGD(model.params, hp.lr0, hp.decay, hp.momentum)
    extra = model_extra(cfg, specs, disc)

    rows: list[dict] = []
    las_history: list[float] = []
    best_blob = b""
    for epoch in range(hp.max_epochs):
        sums: dict[str, float] = {}
        counts: dict[str, int] = {}
        total = 0.0
        batches = _epoch_batches(cfg, hp, parse_side, gaze_side, par, epoch)
        for batch in batches:
            parts: dict[str, float] = {}
            total += train_step(model, opt, batch, specs, epoch, disjoint, parts)
            for k, v in parts.items():
                sums[k] = sums.get(k, 0.0) + v
                counts[k] = counts.get(k, 0) + 1
        dev_score = score(data.dev, parse_sentences(model, data.dev), cfg.punct)
        row = {
            "epoch": epoch + 1,
            "train_loss": total / max(1, len(batches)),
            **{f"loss_{s.name}": sums.get(s.name, float("nan")) / max(1, counts.get(s.name, 0)) for s in specs},
            "dev_uas": dev_score.uas,
            "dev_las": dev_score.las,
        }
        acc = aux_accuracy(model, data.gaze_dev, disc, features) if features else {}
        for f in features:
            row[f"dev_acc_{f}"] = acc.get(f, float("nan"))
        rows.append(row)
        las_history.append(round(dev_score.las, 10))
        if select_best(las_history) == epoch + 1:
            buf = io.BytesIO()
            serialize.dump(model, buf, extra)
            best_blob = buf.getvalue()
        log.info("epoch %d loss %.4f dev UAS %.2f LAS %.2f", epoch + 1, row["train_loss"],
                 dev_score.uas, dev_score.las)
        if on_epoch:
            on_epoch(row)

    best_epoch = select_best(las_history)
    best, _ = serialize.load(io.BytesIO(best_blob))
    dev_final = score(data.dev, parse_sentences(best, data.dev), cfg.punct)
    test_final = score(data.test, parse_sentences(best, data.test), cfg.punct) if data.test else None
    return TrainResult(best, best_epoch, rows, dev_final, test_final, specs, best_blob)


def model_extra(cfg: RunConfig, specs: Sequence[TaskSpec], disc: Discretizer | None) -> dict:
    return {
        "tasks": [[s.name, s.kind, s.weight] for s in specs],
        "discretizer": disc.to_dict() if disc else None,
        "pos_column": cfg.pos_column,
        "punct": cfg.punct,
        "mode": cfg.mode,
    }


def format_log(rows: Sequence[dict]) -> str:
    if not rows:
        return ""
    cols = list(rows[0])
    lines = ["\t".join(cols)]
    for r in rows:
        cells = []
        for c in cols:
            v = r[c]
            if c == "epoch":
                cells.append(str(v))
            elif c.startswith("loss") or c == "train_loss":
                cells.append(f"{v:.6f}")
            else:
                cells.append(f"{v:.2f}")
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def format_scores(result: TrainResult) -> str:
    lines = ["split\tUAS\tLAS\tevaluated\texcluded", f"dev\t{result.dev_score.tsv()}"]
    if result.test_score is not None:
        lines.append(f"test\t{result.test_score.tsv()}")
    return "\n".join(lines) + "\n"


def run(cfg: RunConfig) -> TrainResult:
    """Train per ``cfg`` and write model.gdp, train_log.tsv, scores.tsv and config.txt to ``cfg.output``."""
    os.makedirs(cfg.output, exist_ok=True)
    log_path = os.path.join(cfg.output, "train_log.tsv")
    rows_written: list[dict] = []

    # append-only log: header with the first row, then one line per epoch
    with open(log_path, "w", encoding="utf-8") as fh:
        def on_epoch(row: dict) -> None:
            rows_written.append(row)
            text = format_log(rows_written)
            fh.write(text if len(rows_written) == 1 else text.split("\n")[-2] + "\n")
            fh.flush()

        result = train(cfg, on_epoch=on_epoch)
    with open(os.path.join(cfg.output, "model.gdp"), "wb") as fh:
        fh.write(result.blob)
    with open(os.path.join(cfg.output, "scores.tsv"), "w", encoding="utf-8") as fh:
        fh.write(format_scores(result))
    with open(os.path.join(cfg.output, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(config_mod.to_text(cfg))
    return result
