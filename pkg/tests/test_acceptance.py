"""Acceptance criteria 1-9, each reported as one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines as they are
produced; they are also repeated in the terminal summary.
"""

import math
import re
import shutil
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from conftest import ACCEPTANCE, EXAMPLE_CONLLU, write_fixture_data
from gazedep.cli import main
from gazedep.config import parse_config
from gazedep.corpus import is_tree, parse_conllu
from gazedep.encoder import DepLabel, decode, encode
from gazedep.evaluation import score
from gazedep.gaze import DURATION_FEATURES, FEATURES, GazeVector, derive, fit_discretizer
from gazedep.mtl import GAZE, PARSE, build_task_specs, schedule_disjoint
from gazedep.nn import SGD, Hyperparams, Tagger, Vocabs, autograd as ag
from gazedep.synthetic import random_readings, random_sentence, random_treebank
from gazedep.training import (
    Data, GazeItem, _epoch_batches, assemble, build_instances, build_vocabs, train, train_step,
)
from gazedep.vocab import Vocab

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def report(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_criterion_1_round_trip():
    rng = np.random.default_rng(101)
    start = time.perf_counter()
    failures = 0
    for i in range(1000):
        n = int(rng.integers(1, 31))
        tagset = [f"T{k}" for k in range(int(rng.integers(1, 13)))]
        sent = random_sentence(f"r{i}", n, rng, tagset=tagset, projective=bool(rng.random() < 0.3))
        d = decode(encode(sent), sent.pos_tags)
        failures += (list(d.heads), list(d.deprels)) != (list(sent.heads), list(sent.deprels))
    elapsed = time.perf_counter() - start
    report(1, failures == 0 and elapsed < 5.0, f"{1000 - failures}/1000 exact, {elapsed:.2f}s of 5s")


def random_labels(rng, n, tags):
    labels = []
    for _ in range(n):
        pos = str(rng.choice(tags + ["ROOT", "ROOT", "ZZ"]))
        off = int(rng.integers(-n - 2, n + 3)) or 1
        if pos == "ROOT" and rng.random() < 0.7:
            off = -1
        labels.append(DepLabel(off, pos, str(rng.choice(["nsubj", "obj", "root", "punct"]))))
    return labels


def test_criterion_2_decoder_totality():
    rng = np.random.default_rng(202)
    failures = 0
    for _ in range(1000):
        n = int(rng.integers(1, 31))
        tags = [f"T{k}" for k in range(int(rng.integers(1, 6)))]
        pos = [str(rng.choice(tags)) for _ in range(n)]
        d = decode(random_labels(rng, n, tags), pos)
        failures += not (len(d.heads) == n and is_tree(d.heads))
    report(2, failures == 0, f"{failures} non-tree outputs in 1000")


def test_criterion_3_example(tmp_path, capsys):
    f = tmp_path / "example.conllu"
    f.write_text(EXAMPLE_CONLLU)
    assert main(["encode", str(f)]) == 0
    encoded = capsys.readouterr().out.strip()
    want = "+1@V@aux +1@N@det +1@V@nsubj -1@ROOT@root -1@V@punct"

    gold = parse_conllu(EXAMPLE_CONLLU)[0]

    def with_head(i, h):
        heads = list(gold.heads)
        heads[i - 1] = h
        return gold.with_arcs(heads, gold.deprels)

    def with_rel(i, r):
        rels = list(gold.deprels)
        rels[i - 1] = r
        return gold.with_arcs(gold.heads, rels)

    # (prediction, policy, hand-counted UAS, LAS)
    cases = [
        (gold, "ud-deprel", 100.0, 100.0),
        (with_head(1, 3), "ud-deprel", 75.0, 75.0),  # 3 of 4 evaluable heads right
        (with_rel(3, "obj"), "ud-deprel", 100.0, 75.0),
        (with_head(5, 3), "ud-deprel", 100.0, 100.0),  # "?" is excluded
        (with_head(5, 3), "none", 80.0, 80.0),  # 4 of 5
    ]
    bad = []
    for pred, policy, uas, las in cases:
        s = score([gold], [pred], policy)
        if abs(s.uas - uas) > 0.01 or abs(s.las - las) > 0.01:
            bad.append((policy, s.uas, s.las, uas, las))
    report(3, encoded == want and not bad, f"encode {'verbatim' if encoded == want else repr(encoded)}, "
           f"{len(cases) - len(bad)}/{len(cases)} hand counts")


def test_criterion_4_gradient_check():
    start = time.perf_counter()
    sents = random_treebank(6, seed=44, min_len=2, max_len=7)
    seqs = [(list(s.forms), list(s.pos_tags)) for s in sents]
    labels = {"head": Vocab([f"h{k}" for k in range(7)]), "rel": Vocab([f"r{k}" for k in range(5)]),
              "n_fix": Vocab(["0", "1", "2", "3"])}
    model = Tagger(Hyperparams.desk(), Vocabs.build(seqs, labels), seed=9)
    batch = model.make_batch(seqs)
    rng = np.random.default_rng(4)
    gold = {t: rng.integers(1, len(v), size=batch.n_tokens) for t, v in labels.items()}

    def loss():
        model.dropout_rng = np.random.default_rng(123)  # same dropout masks every evaluation
        out = model.forward(batch, train=True)
        return ag.add_all([ag.cross_entropy(out["head"], gold["head"]), ag.cross_entropy(out["rel"], gold["rel"]),
                           ag.scale(ag.cross_entropy(out["n_fix"], gold["n_fix"]), 0.1)])

    model.zero_grad()
    ag.backward(loss())
    used = {"word_emb": np.unique(batch.word_ids[batch.word_ids > 0]),
            "pos_emb": np.unique(batch.pos_ids[batch.pos_ids > 0]),
            "char_emb": np.unique(batch.char_ids[batch.char_ids > 0])}
    eps = 1e-5
    worst, strict, checked, resolvable = 0.0, 0.0, 0, 0
    for name, p in model.params.items():
        for _ in range(8):
            if name in used:
                idx = (int(rng.choice(used[name])), int(rng.integers(p.shape[1])))
            else:
                idx = tuple(int(rng.integers(s)) for s in p.shape)
            old = p.data[idx]
            p.data[idx] = old + eps
            hi = loss().item()
            p.data[idx] = old - eps
            lo = loss().item()
            p.data[idx] = old
            num, ana = (hi - lo) / (2 * eps), float(p.grad[idx])
            worst = max(worst, abs(num - ana) / max(1.0, abs(ana)))
            # plain relative error, meaningful only above the difference quotient's rounding floor
            if abs(ana) > 1e-6:
                strict = max(strict, abs(num - ana) / max(abs(num), abs(ana)))
                resolvable += 1
            checked += 1
    elapsed = time.perf_counter() - start
    report(4, checked >= 200 and worst < 1e-4 and strict < 1e-4 and elapsed < 60,
           f"{checked} coordinates, worst |fd-g|/max(1,|g|) {worst:.2e}; worst |fd-g|/max(|fd|,|g|) "
           f"{strict:.2e} over the {resolvable} with |g| > 1e-6; {elapsed:.1f}s")


def rank_oracle(values, q):
    ordered = sorted(values)
    n = len(ordered)
    return float(ordered[math.ceil(Fraction(q, 100) * n) - 1])


def test_criterion_5_discretizer_oracle():
    rng = np.random.default_rng(505)
    mismatches = 0
    for _ in range(100):
        n = int(rng.integers(1, 60))
        pool = rng.integers(0, 12, size=n).astype(float) * 25.0
        pool[rng.random(n) < 0.25] = 0.0
        vecs = [GazeVector(**{f: float(pool[(i + k) % n]) for k, f in enumerate(FEATURES)}) for i in range(n)]
        disc = fit_discretizer(vecs)
        for feat in DURATION_FEATURES:
            column = [getattr(v, feat) for v in vecs]
            mismatches += tuple(disc.cuts[feat]) != tuple(rank_oracle(column, q) for q in (20, 40, 60, 80))
    report(5, mismatches == 0, f"{mismatches} mismatching cut vectors over 100 samples x 6 features")


def test_criterion_6_masking(tmp_path):
    d = write_fixture_data(tmp_path / "data")
    cfg = parse_config(
        f"mode = disjoint\ntrain = {d}/ptb_train.conllu\ndev = {d}/ptb_dev.conllu\n"
        f"gaze_treebank = {d}/dundee_treebank.conllu\ngaze = {d}/dundee_gaze.tsv\ntasks = early late\n"
        "scale = desk\n"
    )
    data = assemble(cfg)
    specs = build_task_specs(cfg.tasks)
    disc = fit_discretizer(v for g in data.gaze_train for v in g.vectors)
    parse_side, gaze_side, _ = build_instances(data, specs, disc)
    model = Tagger(cfg.hyperparams(), build_vocabs(parse_side + gaze_side, specs), seed=cfg.seed)
    opt = SGD(model.params, 0.1, 0.0, 0.9)
    aux_names = [n for s in specs if not s.is_main for n in model.head_param_names(s.name)]
    main_names = model.head_param_names("head") + model.head_param_names("rel")
    seen = {1: 0, 0: 0}
    leaks = 0
    for batch in _epoch_batches(cfg, cfg.hyperparams(), parse_side, gaze_side, [], 0):
        train_step(model, opt, batch, specs, 0, disjoint=True)
        masked = aux_names if batch.tau == 1 else main_names
        active = main_names if batch.tau == 1 else aux_names
        leaks += any(model.params[n].grad.any() for n in masked)
        leaks += not any(model.params[n].grad.any() for n in active)
        seen[batch.tau] += 1
    report(6, leaks == 0 and seen[0] > 0 and seen[1] > 0,
           f"{seen[1]} tau=1 and {seen[0]} tau=0 batches, {leaks} with non-zero masked buffers")


def test_criterion_7_scheduler():
    a = schedule_disjoint(37, 19, 8, seed=7)
    b = schedule_disjoint(37, 19, 8, seed=7)
    counts = {PARSE: np.zeros(37, int), GAZE: np.zeros(19, int)}
    for src, idx in a:
        np.add.at(counts[src], idx, 1)
    covered = all((c == 1).all() for c in counts.values())
    same = [(s, i.tolist()) for s, i in a] == [(s, i.tolist()) for s, i in b]
    report(7, covered and same and all(len(i) <= 8 for _, i in a),
           f"{len(a)} batches, each instance once: {covered}, deterministic: {same}")


def test_criterion_8_learning_smoke():
    start = time.perf_counter()
    sents = random_treebank(20, seed=808, min_len=3, max_len=10)
    cfg = parse_config("mode = baseline\ntrain = x\ndev = x\npunct = none\n",
                       ["scale=desk", "max_epochs=100", "lr0=0.5", "dropout=0"])
    fit = train(cfg, Data(sents, sents, []))
    reached = [r["epoch"] for r in fit.log_rows if r["dev_uas"] >= 95.0]
    overfit_s = time.perf_counter() - start

    readings = random_readings(sents, ("p1",), seed=8)
    items = [GazeItem(s, derive(r)) for s, r in zip(sents, readings)]
    par = Data(sents[:16], sents[16:], [], items[:16], items[16:], parallel=True)
    base = Data(sents[:16], sents[16:], [])
    short = ["scale=desk", "max_epochs=3"]
    no_aux = train(parse_config("mode = baseline\ntrain = x\ndev = x\n", short), base)
    zero = train(parse_config("mode = parallel\ntreebank = x\ngaze = y\ntasks = basic context\naux_weight = 0\n",
                              short), par)
    equal = all(p.data.tobytes() == zero.model.params[n].data.tobytes() for n, p in no_aux.model.params.items())
    equal = equal and [r["train_loss"] for r in no_aux.log_rows] == [r["train_loss"] for r in zero.log_rows]
    ok = bool(reached) and overfit_s < 300 and equal
    detail = (f"UAS >= 95 first at epoch {reached[0]}" if reached else
              f"best UAS {max(r['dev_uas'] for r in fit.log_rows):.2f}")
    report(8, ok, f"{detail}, {overfit_s:.1f}s of 300s; beta=0 run bit-identical to no-aux run: {equal}")


SCORE_LINE = re.compile(r"^(dev|test)\t\d{1,3}\.\d{2}\t\d{1,3}\.\d{2}\t\d+\t\d+$")


def test_criterion_9_shipped_configs(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    write_fixture_data(tmp_path / "data")
    shutil.copytree(CONFIGS, tmp_path / "configs")
    cfgs = sorted((tmp_path / "configs").glob("*/*.cfg"))
    failed = []
    for cfg in cfgs:
        out = tmp_path / "runs" / cfg.parent.name / cfg.stem
        code = main(["train", str(cfg), "--set", "scale=desk", "--set", "max_epochs=1", "--output", str(out)])
        capsys.readouterr()
        lines = (out / "scores.tsv").read_text().splitlines() if code == 0 else []
        if code != 0 or lines[:1] != ["split\tUAS\tLAS\tevaluated\texcluded"] or \
                not lines[1:] or not all(SCORE_LINE.match(ln) for ln in lines[1:]):
            failed.append(f"{cfg.parent.name}/{cfg.stem}")
    n1 = sum(c.parent.name == "experiment1" for c in cfgs)
    n2 = len(cfgs) - n1
    report(9, not failed and n1 == n2 == 17,
           f"{len(cfgs) - len(failed)}/{len(cfgs)} configs ran and wrote well-formed scores"
           + (f"; failed: {', '.join(failed)}" if failed else ""))
