"""Encoder + CRF sequence labeler for every configured variant."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from . import crf
from . import numerics as nx
from .config import Config
from .corpus import Sentence
from .embeddings import EmbeddingTable, bigrams
from .encoders import CharEncoder, ConfigurationError, LatticeEncoder, WordEncoder
from .lexicon import Lexicon
from .numerics import Params, Tensor
from .tagging import BMES, TagCodec


class SequenceLabeler:
    """Holds every trainable tensor of one model and exposes loss and decoding.

    ``tables`` maps ``char``/``bichar``/``seg``/``word`` to embedding tables;
    only those the variant uses are present.
    """

    def __init__(self, config: Config, codec: TagCodec, tables: dict[str, EmbeddingTable],
                 lexicon: Lexicon | None = None, rng: np.random.Generator | None = None):
        self.config = config
        self.codec = codec
        self.tables = tables
        self.lexicon = lexicon
        family, opts = config.family, config.options
        d_h = config.direction_hidden
        if family == "char":
            self.encoder = CharEncoder(
                tables["char"], d_h, rng,
                bichar_table=tables.get("bichar") if opts.get("bichar") else None,
                seg_table=tables.get("seg") if opts.get("softword") else None,
                dropout=config.dropout,
            )
        elif family == "word":
            integ = opts["char_integration"]
            self.encoder = WordEncoder(
                tables["word"], d_h, rng,
                char_integration=integ,
                char_table=tables.get("char") if integ != "none" else None,
                bichar_table=tables.get("bichar") if opts.get("bichar") else None,
                char_hidden=config.char_hidden,
                cnn_dim=config.cnn_dim,
                dropout=config.dropout,
            )
        else:
            if lexicon is None:
                raise ConfigurationError("lattice model needs a lexicon")
            self.encoder = LatticeEncoder(tables["char"], tables["word"], lexicon, d_h, rng, dropout=config.dropout)
        self.crf = crf.CrfParams(len(codec), self.encoder.output_dim, rng)
        self.params = Params()
        for name in ("char", "bichar", "seg", "word"):
            if name in tables and tables[name].trainable:
                self.params.add(f"emb.{name}", tables[name].matrix)
        self.encoder.register(self.params)
        self.crf.register(self.params)
        self._dense = [t for k, t in self.params.items() if not k.startswith("emb.")]
        self._allowed = np.array(codec.allowed_transitions()) if config.bioes_constraint else None

    @property
    def word_level(self) -> bool:
        return self.config.family == "word"

    def hidden(self, sentence: Sentence, rng=None) -> list[Tensor]:
        return self.encoder.encode(sentence, rng)

    def gold_labels(self, sentence: Sentence) -> list[int]:
        if sentence.tags is None:
            raise ValueError("sentence has no gold tags")
        tags = sentence.word_tags() if self.word_level else sentence.tags
        return self.codec.to_ids(tags)

    def rows_used(self, sentence: Sentence) -> dict[str, set[int]]:
        """Embedding rows a forward pass over ``sentence`` reads, per table."""
        used: dict[str, list[str]] = {}
        fam, opts = self.config.family, self.config.options
        if fam in ("char", "lattice") or opts.get("char_integration", "none") != "none":
            used["char"] = list(sentence.chars)
        if opts.get("bichar"):
            used["bichar"] = bigrams(sentence.chars)
        if opts.get("softword"):
            used["seg"] = list(sentence.seg or ())
        if fam == "word":
            used["word"] = list(sentence.words or ())
        elif fam == "lattice":
            used["word"] = [self.lexicon.word(s.word_id) for s in self.encoder.spans(sentence)]
        return {k: {self.tables[k].vocabulary.index(t) for t in v} for k, v in used.items() if k in self.tables}

    def regularizer(self, sentences: Sequence[Sentence]) -> Tensor:
        """Squared norm of the dense weights plus the embedding rows the batch reads."""
        terms = [nx.sum_squares(t) for t in self._dense]
        rows: dict[str, set[int]] = {}
        for s in sentences:
            for k, v in self.rows_used(s).items():
                rows.setdefault(k, set()).update(v)
        for k, idx in rows.items():
            table = self.tables[k]
            if table.trainable and idx:
                terms.append(nx.sum_squares_rows(table.matrix, idx))
        return nx.add_scalars(terms)

    def nll(self, sentence: Sentence, rng=None) -> Tensor:
        hs = self.hidden(sentence, rng)
        return crf.sequence_nll(self.crf.emissions(hs), self.crf.transition, self.gold_labels(sentence))

    def loss(self, sentences: Sequence[Sentence], lam: float | None = None, rng=None) -> Tensor:
        """Summed negative log-likelihood plus ``lam/2`` times the squared parameters."""
        lam = self.config.l2 if lam is None else lam
        total = nx.add_scalars([self.nll(s, rng) for s in sentences])
        if lam:
            total = nx.add(total, nx.scale(self.regularizer(sentences), lam / 2.0))
        return total

    def decode_ids(self, sentence: Sentence) -> list[int]:
        hs = self.hidden(sentence)
        return crf.viterbi(self.crf, hs, self._allowed)[0]

    def predict(self, sentence: Sentence) -> list[str]:
        """Character-level BIOES tags."""
        if len(sentence) == 0:
            return []
        tags = self.codec.to_tags(self.decode_ids(sentence))
        return sentence.char_tags_from_words(tags) if self.word_level else tags


def build_tables(config: Config, sentences: Sequence[Sentence], rng: np.random.Generator,
                 pretrained: dict[str, EmbeddingTable] | None = None,
                 lexicon: Lexicon | None = None) -> dict[str, EmbeddingTable]:
    """Embedding tables needed by ``config.variant``.

    Pretrained tables are extended with training tokens they lack; the rest
    are random over the training tokens.
    """
    pretrained = dict(pretrained or {})
    fam, opts = config.family, config.options
    needed = {}
    if fam in ("char", "lattice") or opts.get("char_integration", "none") != "none":
        needed["char"] = (config.char_dim, [c for s in sentences for c in s.chars])
    if opts.get("bichar"):
        needed["bichar"] = (config.bichar_dim, [b for s in sentences for b in bigrams(s.chars)])
    if opts.get("softword"):
        needed["seg"] = (config.seg_dim, list(BMES))
    if fam in ("word", "lattice"):
        if fam == "word":
            toks = [w for s in sentences for w in (s.words or ())]
        else:
            toks = lexicon.words if lexicon is not None else []
        needed["word"] = (config.word_dim, toks)
    tables = {}
    for name, (dim, tokens) in needed.items():
        if name in pretrained:
            table = pretrained[name]
            if table.dim != dim:
                raise ConfigurationError(f"{name} embeddings have dimension {table.dim}, config says {dim}")
            if name != "word" or fam == "word":
                table.extend(tokens, rng)
        else:
            table = EmbeddingTable.random(dict.fromkeys(tokens), dim, rng)
        tables[name] = table
    return tables
