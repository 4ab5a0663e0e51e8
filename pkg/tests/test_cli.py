import subprocess
import sys
import textwrap

import pytest

from conftest import EXAMPLE_CONLLU
from gazedep.cli import main
from gazedep.corpus import is_tree, parse_conllu, write_conllu
from gazedep.gaze import BINS
from gazedep.synthetic import random_treebank

EXAMPLE_LABELS = "+1@V@aux +1@N@det +1@V@nsubj -1@ROOT@root -1@V@punct"


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def example_file(tmp_path):
    p = tmp_path / "example.conllu"
    p.write_text(EXAMPLE_CONLLU)
    return p


def test_encode_example(capsys, example_file):
    code, out, _ = run(capsys, "encode", str(example_file))
    assert code == 0 and out == EXAMPLE_LABELS + "\n"


def test_decode_round_trip(capsys, tmp_path):
    sents = random_treebank(30, seed=4, min_len=1, max_len=15)
    gold = tmp_path / "g.conllu"
    gold.write_text(write_conllu(sents))
    labels = tmp_path / "labels.txt"
    assert main(["encode", str(gold), "-o", str(labels)]) == 0
    code, out, _ = run(capsys, "decode", str(labels), str(gold))
    assert code == 0
    back = parse_conllu(out)
    assert [s.heads for s in back] == [s.heads for s in sents]
    assert [s.deprels for s in back] == [s.deprels for s in sents]


def test_decode_label_count_mismatch(capsys, tmp_path, example_file):
    labels = tmp_path / "l.txt"
    labels.write_text("+1@V@aux -1@ROOT@root\n")
    code, _, err = run(capsys, "decode", str(labels), str(example_file))
    assert code == 1 and "label line 1" in err


def test_eval_gold_gold(capsys, example_file):
    code, out, _ = run(capsys, "eval", str(example_file), str(example_file))
    assert code == 0 and out == "100.00\t100.00\t4\t1\n"
    code, out, _ = run(capsys, "eval", str(example_file), str(example_file), "--punct", "none")
    assert out == "100.00\t100.00\t5\t0\n"


def test_data_error_exit_code(capsys, tmp_path):
    bad = tmp_path / "bad.conllu"
    bad.write_text("1\tx\tx\tN\tNN\t_\t7\tdep\t_\t_\n\n")
    code, _, err = run(capsys, "encode", str(bad))
    assert code == 1 and "line 1" in err
    code, _, err = run(capsys, "encode", str(tmp_path / "missing.conllu"))
    assert code == 1


def test_featurize(capsys, data_dir):
    code, out, _ = run(capsys, "featurize", str(data_dir / "dundee_gaze.tsv"), "--tasks", "basic", "next_fix_prob")
    assert code == 0
    lines = out.splitlines()
    assert lines[0].split("\t") == ["sent_id", "participant_id", "token_index", "form",
                                    "total_fix_dur", "mean_fix_dur", "n_fix", "fix_prob", "next_fix_prob"]
    gaze_rows = (data_dir / "dundee_gaze.tsv").read_text().splitlines()
    assert len(lines) == len(gaze_rows)
    for line in lines[1:]:
        cells = line.split("\t")
        assert cells[4] in BINS and cells[5] in BINS
        assert cells[7] in ("0", "1") and cells[8] in ("0", "1")
    code, _, err = run(capsys, "featurize", str(data_dir / "dundee_gaze.tsv"), "--tasks", "pupil")
    assert code == 2


def test_baseline_with_tasks_is_config_error(capsys, tmp_path):
    cfg = tmp_path / "b.cfg"
    cfg.write_text("mode = baseline\ntreebank = t.conllu\ntasks = n_fix\n")
    code, _, err = run(capsys, "train", str(cfg))
    assert code == 2 and "baseline" in err


def test_corrupt_model(capsys, tmp_path, example_file):
    model = tmp_path / "m.gdp"
    model.write_bytes(b"XXXX" + b"\0" * 64)
    code, _, err = run(capsys, "predict", str(model), str(example_file))
    assert code == 1 and "magic" in err


def test_predict_has_no_gaze_flag():
    from gazedep.cli import build_parser

    sub = build_parser()._subparsers._group_actions[0].choices["predict"]
    dests = {a.dest for a in sub._actions}
    assert not any("gaze" in d for d in dests)


@pytest.fixture
def trained(tmp_path, data_dir, monkeypatch):
    monkeypatch.chdir(tmp_path)
    cfg = tmp_path / "p.cfg"
    cfg.write_text(
        "mode = parallel\ntreebank = data/dundee_treebank.conllu\ngaze = data/dundee_gaze.tsv\n"
        "tasks = mean_fix_dur\nscale = desk\nmax_epochs = 2\noutput = out\n"
    )
    assert main(["train", str(cfg)]) == 0
    return tmp_path / "out"


def test_train_outputs(trained, capsys):
    capsys.readouterr()
    assert (trained / "model.gdp").read_bytes()[:4] == b"GDP1"
    header, *rows = (trained / "train_log.tsv").read_text().splitlines()
    cols = header.split("\t")
    assert cols == ["epoch", "train_loss", "loss_head", "loss_rel", "loss_mean_fix_dur", "dev_uas", "dev_las",
                    "dev_acc_mean_fix_dur"]
    assert [r.split("\t")[0] for r in rows] == ["1", "2"]
    scores = (trained / "scores.tsv").read_text().splitlines()
    assert scores[0] == "split\tUAS\tLAS\tevaluated\texcluded"
    assert [s.split("\t")[0] for s in scores[1:]] == ["dev", "test"]
    assert "tasks = mean_fix_dur" in (trained / "config.txt").read_text()


def test_predict_empty_and_oov(trained, capsys, tmp_path):
    empty = tmp_path / "empty.conllu"
    empty.write_text("")
    code, out, _ = run(capsys, "predict", str(trained / "model.gdp"), str(empty))
    assert code == 0 and out == ""
    oov = tmp_path / "oov.conllu"
    oov.write_text("".join(f"{i}\tzz{i}\t_\tX\t_\t_\t_\t_\t_\t_\n" for i in range(1, 8)) + "\n")
    code, out, _ = run(capsys, "predict", str(trained / "model.gdp"), str(oov))
    assert code == 0
    (sent,) = parse_conllu(out)
    assert is_tree(sent.heads)


def test_predict_never_opens_gaze_file(trained, tmp_path):
    gaze = (tmp_path / "data" / "dundee_gaze.tsv").resolve()
    script = textwrap.dedent(f"""
        import os, sys
        opened = []
        def hook(event, args):
            if event == "open" and isinstance(args[0], (str, bytes, os.PathLike)):
                opened.append(os.path.abspath(os.fsdecode(args[0])))
        sys.addaudithook(hook)
        from gazedep.cli import main
        code = main(["predict", {str(trained / 'model.gdp')!r}, {str(tmp_path / 'data' / 'ptb_dev.conllu')!r},
                     "-o", {str(tmp_path / 'pred.conllu')!r}])
        assert code == 0
        assert {str(gaze)!r} not in opened, "gaze file was opened"
        assert any(p.endswith("model.gdp") for p in opened)
        print("ok")
    """)
    res = subprocess.run([sys.executable, "-c", script], capture_output=True, text=True, cwd=tmp_path)
    assert res.returncode == 0, res.stderr
    assert res.stdout.strip() == "ok"


def test_example_through_overfitted_model(tmp_path, capsys, monkeypatch, example_file):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "tb.conllu").write_text(EXAMPLE_CONLLU + write_conllu(random_treebank(4, seed=2, min_len=3, max_len=6)))
    (tmp_path / "f.cfg").write_text(
        "mode = baseline\ntrain = tb.conllu\ndev = tb.conllu\nscale = desk\nmax_epochs = 40\n"
        "lr0 = 0.5\ndropout = 0\nbatch_size = 1\noutput = fit\n"
    )
    assert main(["train", "f.cfg"]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "predict", "fit/model.gdp", str(example_file))
    assert code == 0
    (pred,) = parse_conllu(out)
    gold = parse_conllu(EXAMPLE_CONLLU)[0]
    assert pred.heads == gold.heads and pred.deprels == gold.deprels
