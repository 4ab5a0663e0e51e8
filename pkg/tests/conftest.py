import numpy as np
import pytest

from gazedep.corpus import parse_conllu
from gazedep.nn import Hyperparams, Tagger, Vocabs
from gazedep.vocab import Vocab

EXAMPLE_CONLLU = (
    "# sent_id = ex1\n"
    "# text = Can a parser see ?\n"
    "1\tCan\tcan\tV\tMD\t_\t4\taux\t_\t_\n"
    "2\ta\ta\tD\tDT\t_\t3\tdet\t_\t_\n"
    "3\tparser\tparser\tN\tNN\t_\t4\tnsubj\t_\t_\n"
    "4\tsee\tsee\tV\tVB\t_\t0\troot\t_\t_\n"
    "5\t?\t?\tP\t.\t_\t4\tpunct\t_\t_\n"
    "\n"
)


@pytest.fixture
def example_text():
    return EXAMPLE_CONLLU


@pytest.fixture
def example():
    return parse_conllu(EXAMPLE_CONLLU)[0]

TOY_SEQS = [
    (["Can", "a", "parser", "see", "?"], ["V", "D", "N", "V", "P"]),
    (["a", "dog"], ["D", "N"]),
    (["see"], ["V"]),
]


def make_toy_model(seed=3, tasks=("head", "rel", "n_fix"), **hp):
    labels = {t: Vocab([f"{t}{k}" for k in range(3 + i)]) for i, t in enumerate(tasks)}
    hp = {"word_hidden": 8, "char_hidden": 4, **hp}
    return Tagger(Hyperparams.desk(**hp), Vocabs.build(TOY_SEQS, labels), seed=seed)


def toy_gold(model, n_tokens, seed=0):
    rng = np.random.default_rng(seed)
    return {t: rng.integers(1, len(v), size=n_tokens) for t, v in model.vocabs.labels.items()}


@pytest.fixture
def toy_model():
    return make_toy_model()


def write_fixture_data(root, n_sents=20, seed=0):
    """Synthetic stand-ins for the treebank, gaze and PTB-style files the shipped configs expect."""
    from gazedep.corpus import write_conllu, write_gaze_tsv
    from gazedep.synthetic import random_readings, random_treebank

    root.mkdir(parents=True, exist_ok=True)
    dundee = random_treebank(n_sents, seed=seed, min_len=3, max_len=8)
    (root / "dundee_treebank.conllu").write_text(write_conllu(dundee))
    (root / "dundee_gaze.tsv").write_text(write_gaze_tsv(random_readings(dundee, ("p1", "p2"), seed=seed)))
    for i, part in enumerate(("train", "dev", "test")):
        sents = random_treebank(n_sents if part == "train" else 6, seed=seed + 10 + i, min_len=3, max_len=8)
        (root / f"ptb_{part}.conllu").write_text(write_conllu(sents))
    return root


@pytest.fixture
def data_dir(tmp_path):
    return write_fixture_data(tmp_path / "data")


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
