import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gazedep.errors import ConfigError, DataError
from gazedep.evaluation import score, select_best
from gazedep.synthetic import DEPRELS, random_heads, random_treebank


def perturb(sent, heads=None, deprels=None):
    h = list(sent.heads)
    r = list(sent.deprels)
    for i, v in (heads or {}).items():
        h[i - 1] = v
    for i, v in (deprels or {}).items():
        r[i - 1] = v
    return sent.with_arcs(h, r)


def test_identical(example):
    s = score([example], [example])
    assert (s.uas, s.las, s.evaluated_tokens, s.excluded_tokens) == (100.0, 100.0, 4, 1)
    assert s.tsv() == "100.00\t100.00\t4\t1"


def test_wrong_punct_head_is_not_counted(example):
    pred = perturb(example, heads={5: 3})
    s = score([example], [pred], "ud-deprel")
    assert (s.uas, s.las, s.evaluated_tokens) == (100.0, 100.0, 4)
    s = score([example], [pred], "none")
    assert (s.uas, s.las, s.evaluated_tokens, s.excluded_tokens) == (80.0, 80.0, 5, 0)
    # with upos as the PoS column the tag is "P", which is not a PTB punctuation tag
    s = score([example], [pred], "ptb-pos")
    assert s.evaluated_tokens == 5


def test_wrong_head_among_evaluable(example):
    s = score([example], [perturb(example, heads={1: 3})])
    assert s.uas == pytest.approx(75.0, abs=0.01) and s.las == pytest.approx(75.0, abs=0.01)


def test_wrong_deprel(example):
    s = score([example], [perturb(example, deprels={3: "obj"})])
    assert s.uas == 100.0 and s.las == pytest.approx(75.0, abs=0.01)


def test_ptb_pos_policy(example_text):
    from gazedep.corpus import parse_conllu

    gold = parse_conllu(example_text, pos_column="xpos")[0]
    s = score([gold], [perturb(gold, heads={5: 3})], "ptb-pos")
    assert (s.uas, s.evaluated_tokens, s.excluded_tokens) == (100.0, 4, 1)


def test_mismatch_names_sentence(example):
    short = example.__class__("ex1", example.tokens[:4])
    with pytest.raises(DataError, match="ex1"):
        score([example], [short])
    with pytest.raises(DataError):
        score([example], [])
    with pytest.raises(ConfigError):
        score([example], [example], "ptb")


def test_select_best():
    assert select_best([78.0, 79.4, 79.1]) == 2
    assert select_best([79.0, 79.0]) == 1
    assert select_best([50.0]) == 1
    with pytest.raises(ConfigError):
        select_best([])


@st.composite
def gold_and_pred(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    gold = random_treebank(draw(st.integers(1, 8)), seed=seed, min_len=1, max_len=9)
    rng = np.random.default_rng(seed + 1)
    pred = []
    for s in gold:
        heads = random_heads(len(s), rng) if rng.random() < 0.5 else list(s.heads)
        rels = [r if rng.random() < 0.7 else DEPRELS[int(rng.integers(len(DEPRELS)))] for r in s.deprels]
        pred.append(s.with_arcs(heads, rels))
    return gold, pred


@settings(max_examples=80, deadline=None)
@given(gold_and_pred(), st.sampled_from(["ud-deprel", "ptb-pos", "none"]), st.randoms(use_true_random=False))
def test_properties(pair, policy, rnd):
    gold, pred = pair
    s = score(gold, pred, policy)
    assert 0 <= s.las <= s.uas <= 100
    assert s.evaluated_tokens + s.excluded_tokens == sum(len(g) for g in gold)
    if policy == "none":
        assert s.excluded_tokens == 0

    # brute-force token counter
    punct = {"ud-deprel": lambda t: t.deprel == "punct", "ptb-pos": lambda t: t.pos in {"``", "''", ":", ",", "."},
             "none": lambda t: False}[policy]
    ev = uh = lh = 0
    for g, p in zip(gold, pred):
        for gt, pt in zip(g.tokens, p.tokens):
            if punct(gt):
                continue
            ev += 1
            uh += gt.head == pt.head
            lh += gt.head == pt.head and gt.deprel == pt.deprel
    assert (s.correct_heads, s.correct_labeled, s.evaluated_tokens) == (uh, lh, ev)
    if ev:
        assert s.uas == pytest.approx(100 * uh / ev) and s.las == pytest.approx(100 * lh / ev)

    order = list(range(len(gold)))
    rnd.shuffle(order)
    t = score([gold[i] for i in order], [pred[i] for i in order], policy)
    assert (t.correct_heads, t.correct_labeled, t.evaluated_tokens) == (s.correct_heads, s.correct_labeled, ev)
