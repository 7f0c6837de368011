"""Command line: ``train``, ``tag``, ``eval``, ``gen`` and ``gradcheck``.

Exit codes: 0 success, 1 failed gradient check, 2 parse/config error,
3 numeric divergence.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .corpus import CorpusError, Sentence, load_corpus, write_corpus
from .embeddings import EmbeddingFormatError
from .encoders import ConfigurationError
from .lexicon import load_word_list
from .synthetic import gen_synthetic, parse_spec, write_synthetic
from .tagging import TagError, decode_tags, evaluate, evaluate_groups
from .train import CheckpointError, DivergenceError, load_checkpoint, load_resources, train

log = logging.getLogger("latticener")

EXIT_OK, EXIT_GRADCHECK, EXIT_FORMAT, EXIT_DIVERGED = 0, 1, 2, 3

GRADCHECK_TOLERANCE = 1e-4


def cmd_train(args) -> int:
    config = load_config(args.config).validate()
    train_set = load_corpus(args.train, args.train_words)
    dev_set = load_corpus(args.dev, args.dev_words)
    pretrained = load_resources(config)
    lexicon = load_word_list(args.lexicon) if args.lexicon else None
    result = train(config, train_set, dev_set, args.out, lexicon=lexicon, pretrained=pretrained)
    print(f"best dev F1 {result.best_f1:.4f} at epoch {result.best_epoch}")
    return EXIT_OK


def tag_sentences(model, sentences: list[Sentence]) -> list[Sentence]:
    return [Sentence(s.chars, model.predict(s), s.seg, s.words) for s in sentences]


def cmd_tag(args) -> int:
    model, _ = load_checkpoint(args.model)
    sentences = load_corpus(args.input, args.words)
    if model.word_level and any(s.words is None for s in sentences):
        raise ConfigurationError("word-based model needs a seg column or --words file")
    write_corpus(args.output, tag_sentences(model, sentences))
    return EXIT_OK


def _parse_groups(specs: list[str]) -> dict[str, list[str]]:
    groups = {}
    for spec in specs:
        name, sep, cats = spec.partition("=")
        if not sep or not name:
            raise ConfigError(f"--group expects NAME=CAT[,CAT...], got {spec!r}")
        groups[name] = [c for c in cats.split(",") if c]
    return groups


def cmd_eval(args) -> int:
    gold = load_corpus(args.gold)
    pred = load_corpus(args.pred)
    if len(gold) != len(pred) or any(g.chars != p.chars for g, p in zip(gold, pred)):
        raise CorpusError("gold and predicted files do not hold the same sentences")
    g = [decode_tags(s.tags or []) for s in gold]
    p = [decode_tags(s.tags or []) for s in pred]
    if args.group:
        for name, (P, R, F) in evaluate_groups(g, p, _parse_groups(args.group)).items():
            print(f"{name}\tP={P:.4f}\tR={R:.4f}\tF1={F:.4f}")
    else:
        P, R, F = evaluate(g, p)
        print(f"P={P:.4f}\tR={R:.4f}\tF1={F:.4f}")
    return EXIT_OK


def cmd_gen(args) -> int:
    try:
        spec = parse_spec(Path(args.spec).read_text(encoding="utf-8"))
        data = gen_synthetic(spec)
    except (OSError, ValueError) as err:
        raise ConfigError(str(err)) from None
    write_synthetic(data, spec, args.out)
    print(f"wrote {len(data.train)}/{len(data.dev)}/{len(data.test)} sentences and "
          f"{len(data.lexicon_words)} lexicon words to {args.out}")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    from .checks import gradcheck_variant

    config = load_config(args.config).validate(require_paths=False)
    worst, per = gradcheck_variant(config, args.epsilon)
    for name, err in per.items():
        print(f"{name}\t{err:.3e}")
    ok = worst < args.tolerance
    print(f"{config.variant}\tmax relative error {worst:.3e}\t{'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_GRADCHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latticener", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and keep the best dev checkpoint")
    p.add_argument("--config", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--dev", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--train-words", help="parallel file of space-separated words")
    p.add_argument("--dev-words")
    p.add_argument("--lexicon", help="word list; defaults to the word embedding vocabulary")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("tag", help="label a corpus with a trained checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--words")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("eval", help="entity-level P/R/F1 of a tagged file")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--group", action="append", default=[], metavar="NAME=CAT,...")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gen", help="write a synthetic corpus, lexicon and embeddings")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("gradcheck", help="finite-difference check of the configured model")
    p.add_argument("--config", required=True)
    p.add_argument("--epsilon", type=float, default=1e-5)
    p.add_argument("--tolerance", type=float, default=GRADCHECK_TOLERANCE)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, ConfigurationError, CorpusError, TagError, EmbeddingFormatError, CheckpointError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_FORMAT
    except DivergenceError as err:
        print(f"diverged: {err}", file=sys.stderr)
        return EXIT_DIVERGED


if __name__ == "__main__":
    sys.exit(main())
