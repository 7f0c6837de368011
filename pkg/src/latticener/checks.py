"""Finite-difference gradient checks of whole models on a toy sentence."""
from __future__ import annotations

from dataclasses import replace

import numpy as np

from . import numerics as nx
from .config import Config
from .corpus import Sentence
from .lexicon import Lexicon
from .model import SequenceLabeler, build_tables
from .tagging import TagCodec, bmes_from_words

TOY_WORDS = ["南京市", "长江"]
TOY_TAGS = ["B-LOC", "I-LOC", "E-LOC", "O", "S-PER"]
# 南京市 (1,3) and 市长 (3,4) overlap at character 3
TOY_LEXICON = ["南京市", "市长"]


def toy_sentence() -> Sentence:
    return Sentence("".join(TOY_WORDS), list(TOY_TAGS), bmes_from_words(TOY_WORDS))


def toy_model(config: Config) -> tuple[SequenceLabeler, Sentence]:
    sentence = toy_sentence()
    rng = np.random.default_rng([config.seed, 3])
    lexicon = Lexicon(TOY_LEXICON) if config.family == "lattice" else None
    tables = build_tables(config, [sentence], rng, lexicon=lexicon)
    codec = TagCodec.from_tag_sequences([sentence.tags])
    return SequenceLabeler(config, codec, tables, lexicon, rng), sentence


def gradcheck_variant(config: Config, epsilon: float = 1e-5) -> tuple[float, dict[str, float]]:
    """Worst relative error of the full regularized loss, overall and per parameter.

    Dropout is off: the loss is evaluated without a random generator.
    """
    config = replace(config, dropout=0.0)
    model, sentence = toy_model(config)
    per: dict[str, float] = {}
    worst = nx.gradient_check(lambda: model.loss([sentence]), model.params, epsilon, per_param=per)
    return worst, per
