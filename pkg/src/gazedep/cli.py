"""Command-line interface.

Exit codes: 0 success, 1 data error, 2 configuration error. Log verbosity
comes from the ``GAZEDEP_LOG`` environment variable (e.g. ``INFO``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from typing import Sequence

from gazedep import config as config_mod
from gazedep.corpus import parse_conllu, parse_gaze_tsv, read_text, write_conllu
from gazedep.encoder import decode, encode, format_labels, parse_labels
from gazedep.errors import ConfigError, DataError
from gazedep.evaluation import PUNCT_POLICIES, score
from gazedep.gaze import Discretizer, FEATURES, derive, discretize, fit_discretizer, resolve_features
from gazedep.nn import kernels, serialize

log = logging.getLogger("gazedep")


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
    else:
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(text)


def cmd_train(args) -> int:
    overrides = list(args.set or [])
    if args.output:
        overrides.append(f"output={args.output}")
    cfg = config_mod.load_config(args.config, overrides)
    from gazedep.training import format_scores, run

    log.info("training %s (%s mode, %s kernels)", cfg.name or args.config, cfg.mode, kernels.BACKEND)
    result = run(cfg)
    sys.stdout.write(format_scores(result))
    return 0


def cmd_predict(args) -> int:
    from gazedep.training import parse_sentences

    model, extra = serialize.load_path(args.model)
    pos_column = args.pos_column or extra.get("pos_column", "upos")
    sentences = parse_conllu(read_text(args.input), pos_column=pos_column, require_heads=False)
    _write(write_conllu(parse_sentences(model, sentences)), args.output)
    return 0


def cmd_encode(args) -> int:
    sentences = parse_conllu(read_text(args.input), pos_column=args.pos_column)
    _write("".join(format_labels(encode(s)) + "\n" for s in sentences), args.output)
    return 0


def cmd_decode(args) -> int:
    sentences = parse_conllu(read_text(args.conllu), pos_column=args.pos_column, require_heads=False)
    lines = [ln for ln in read_text(args.labels).splitlines() if ln.strip()]
    if len(lines) != len(sentences):
        raise DataError(f"{len(lines)} label lines for {len(sentences)} sentences")
    out = []
    for lineno, (line, sent) in enumerate(zip(lines, sentences), start=1):
        labels = parse_labels(line)
        if len(labels) != len(sent):
            raise DataError(f"label line {lineno}: {len(labels)} labels for {len(sent)} tokens")
        d = decode(labels, sent.pos_tags)
        out.append(sent.with_arcs(d.heads, d.deprels))
    _write(write_conllu(out), args.output)
    return 0


def cmd_featurize(args) -> int:
    readings = parse_gaze_tsv(read_text(args.gaze))
    features = resolve_features(args.tasks or FEATURES)
    per_reading = [derive(r) for r in readings]
    if args.model:
        _, extra = serialize.load_path(args.model)
        if not extra.get("discretizer"):
            raise ConfigError("the model was trained without gaze tasks and holds no discretizer")
        disc = Discretizer.from_dict(extra["discretizer"])
    else:
        if not readings:
            _write("\t".join(("sent_id", "participant_id", "token_index", "form", *features)) + "\n", args.output)
            return 0
        disc = fit_discretizer(v for vecs in per_reading for v in vecs)
    lines = ["\t".join(("sent_id", "participant_id", "token_index", "form", *features))]
    for rd, vecs in zip(readings, per_reading):
        forms = rd.forms or ("_",) * len(vecs)
        for i, (vec, form) in enumerate(zip(vecs, forms), start=1):
            labels = discretize(vec, disc, features)
            lines.append("\t".join((rd.sent_id, rd.participant_id, str(i), form, *(labels[f] for f in features))))
    _write("\n".join(lines) + "\n", args.output)
    return 0


def cmd_eval(args) -> int:
    gold = parse_conllu(read_text(args.gold), pos_column=args.pos_column)
    pred = parse_conllu(read_text(args.predicted), pos_column=args.pos_column)
    _write(score(gold, pred, args.punct).tsv() + "\n", args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gazedep", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a parser from a run config")
    t.add_argument("config")
    t.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config entry")
    t.add_argument("--output", help="output directory (overrides 'output')")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="parse CoNLL-U with a trained model (no gaze input)")
    pr.add_argument("model")
    pr.add_argument("input", nargs="?", default="-")
    pr.add_argument("-o", "--output")
    pr.add_argument("--pos-column", choices=("upos", "xpos"))
    pr.set_defaults(func=cmd_predict)

    e = sub.add_parser("encode", help="print offset@pos@deprel labels, one sentence per line")
    e.add_argument("input", nargs="?", default="-")
    e.add_argument("-o", "--output")
    e.add_argument("--pos-column", choices=("upos", "xpos"), default="upos")
    e.set_defaults(func=cmd_encode)

    d = sub.add_parser("decode", help="turn label lines back into CoNLL-U arcs")
    d.add_argument("labels")
    d.add_argument("conllu", help="CoNLL-U supplying tokens and PoS tags")
    d.add_argument("-o", "--output")
    d.add_argument("--pos-column", choices=("upos", "xpos"), default="upos")
    d.set_defaults(func=cmd_decode)

    f = sub.add_parser("featurize", help="discretized gaze labels per token as TSV")
    f.add_argument("gaze")
    f.add_argument("--tasks", nargs="+", help="feature or group names (default: all twelve)")
    f.add_argument("--model", help="use the discretizer stored in this model instead of fitting one")
    f.add_argument("-o", "--output")
    f.set_defaults(func=cmd_featurize)

    ev = sub.add_parser("eval", help="UAS, LAS, evaluated and excluded token counts")
    ev.add_argument("gold")
    ev.add_argument("predicted")
    ev.add_argument("--punct", choices=PUNCT_POLICIES, default="ud-deprel")
    ev.add_argument("--pos-column", choices=("upos", "xpos"), default="upos")
    ev.add_argument("-o", "--output")
    ev.set_defaults(func=cmd_eval)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    level = os.environ.get("GAZEDEP_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"gazedep: config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"gazedep: data error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"gazedep: {exc.filename or ''}: {exc.strerror}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
