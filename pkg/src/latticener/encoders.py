"""Character, word and lattice BiLSTM encoders.

Every encoder maps a sentence to one hidden vector per output position
(characters for char/lattice encoders, words for word encoders); the forward
and backward halves are concatenated.

LSTM gate blocks are packed in the order input, output, forget, candidate.
Word cells pack input, forget, candidate and have no output gate.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

import numpy as np

from . import numerics as nx
from .embeddings import EmbeddingTable, bigrams
from .lexicon import Lexicon, LatticeSpan, match_spans, reverse_spans, spans_by_end
from .numerics import Params, Tensor


class ConfigurationError(ValueError):
    pass


class LstmCell:
    def __init__(self, d_in: int, d_h: int, rng: np.random.Generator | None = None):
        self.d_in, self.d_h = d_in, d_h
        W = np.zeros((d_in + d_h, 4 * d_h)) if rng is None else nx.xavier_uniform(rng, d_in + d_h, 4 * d_h)
        self.W = nx.param(W)
        self.b = nx.param(np.zeros(4 * d_h))

    def register(self, params: Params, prefix: str) -> None:
        params.add(f"{prefix}.W", self.W)
        params.add(f"{prefix}.b", self.b)

    def zero_state(self) -> tuple[Tensor, Tensor]:
        return nx.constant(np.zeros(self.d_h)), nx.constant(np.zeros(self.d_h))


class WordCellParams:
    def __init__(self, d_w: int, d_c: int, d_h: int, rng: np.random.Generator | None = None):
        self.d_w, self.d_c, self.d_h = d_w, d_c, d_h
        if rng is None:
            Ww, Wl = np.zeros((d_w + d_h, 3 * d_h)), np.zeros((d_c + d_h, d_h))
        else:
            Ww = nx.xavier_uniform(rng, d_w + d_h, 3 * d_h)
            Wl = nx.xavier_uniform(rng, d_c + d_h, d_h)
        self.W_w = nx.param(Ww)
        self.b_w = nx.param(np.zeros(3 * d_h))
        self.W_l = nx.param(Wl)
        self.b_l = nx.param(np.zeros(d_h))

    def register(self, params: Params, prefix: str) -> None:
        params.add(f"{prefix}.W_w", self.W_w)
        params.add(f"{prefix}.b_w", self.b_w)
        params.add(f"{prefix}.W_l", self.W_l)
        params.add(f"{prefix}.b_l", self.b_l)


class Gates(NamedTuple):
    i: Tensor
    o: Tensor
    f: Tensor
    cand: Tensor


class Step(NamedTuple):
    h: Tensor
    c: Tensor
    gates: Gates


def lstm_gates(cell: LstmCell, x: Tensor, h_prev: Tensor) -> Gates:
    if x.shape != (cell.d_in,) or h_prev.shape != (cell.d_h,):
        raise nx.DimensionError(f"lstm: input {x.shape} / state {h_prev.shape} vs cell ({cell.d_in}, {cell.d_h})")
    d = cell.d_h
    z = nx.add(nx.matmul(nx.concat([x, h_prev]), cell.W), cell.b)
    s = nx.sigmoid(nx.slice_(z, 0, 3 * d))
    return Gates(
        i=nx.slice_(s, 0, d),
        o=nx.slice_(s, d, 2 * d),
        f=nx.slice_(s, 2 * d, 3 * d),
        cand=nx.tanh(nx.slice_(z, 3 * d, 4 * d)),
    )


def lstm_combine(gates: Gates, c_prev: Tensor) -> tuple[Tensor, Tensor]:
    c = nx.add(nx.mul(gates.f, c_prev), nx.mul(gates.i, gates.cand))
    return nx.mul(gates.o, nx.tanh(c)), c


def lstm_step(cell: LstmCell, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> Step:
    gates = lstm_gates(cell, x, h_prev)
    h, c = lstm_combine(gates, c_prev)
    return Step(h, c, gates)


def run_lstm(cell: LstmCell, xs: Sequence[Tensor]) -> list[Tensor]:
    h, c = cell.zero_state()
    out = []
    for x in xs:
        h, c, _ = lstm_step(cell, x, h, c)
        out.append(h)
    return out


def bilstm(fwd: LstmCell, bwd: LstmCell, xs: Sequence[Tensor]) -> list[Tensor]:
    hf = run_lstm(fwd, xs)
    hb = run_lstm(bwd, xs[::-1])[::-1]
    return [nx.concat([a, b]) for a, b in zip(hf, hb)]


def word_cell(params: WordCellParams, x_w: Tensor, h_b: Tensor, c_b: Tensor) -> Tensor:
    """Memory cell of a lexicon word, seeded from the state at its first character."""
    d = params.d_h
    z = nx.add(nx.matmul(nx.concat([x_w, h_b]), params.W_w), params.b_w)
    s = nx.sigmoid(nx.slice_(z, 0, 2 * d))
    i, f = nx.slice_(s, 0, d), nx.slice_(s, d, 2 * d)
    cand = nx.tanh(nx.slice_(z, 2 * d, 3 * d))
    return nx.add(nx.mul(f, c_b), nx.mul(i, cand))


def lattice_merge(
    params: WordCellParams,
    x_e: Tensor,
    gates: Gates,
    c_prev: Tensor,
    incoming: Sequence[tuple[int, Tensor]],
    alphas: list | None = None,
) -> tuple[Tensor, Tensor]:
    """Character state at a position where lexicon words may end.

    With incoming word cells the new cell is a per-dimension convex mix of
    the word cells and the character candidate, weighted by exp-normalized
    link gates and the character input gate; the previous cell is not used.
    Without incoming words this is the plain LSTM update.
    """
    if not incoming:
        return lstm_combine(gates, c_prev)
    links = [
        nx.sigmoid(nx.add(nx.matmul(nx.concat([x_e, cw]), params.W_l), params.b_l)) for _, cw in incoming
    ]
    weights = nx.softmax_normalize(links + [gates.i])
    if alphas is not None:
        alphas.append(np.stack([w.values for w in weights]))
    c = nx.mul(weights[-1], gates.cand)
    for w, (_, cw) in zip(weights, incoming):
        c = nx.add(c, nx.mul(w, cw))
    return nx.mul(gates.o, nx.tanh(c)), c


def lattice_pass(
    cell: LstmCell,
    wparams: WordCellParams,
    xs: Sequence[Tensor],
    spans: Sequence[LatticeSpan],
    word_inputs: dict[int, Tensor],
    alphas: list | None = None,
) -> list[Tensor]:
    """One left-to-right lattice pass; ``word_inputs`` maps word id to its embedding."""
    m = len(xs)
    groups = spans_by_end(spans, m)
    hs: list[Tensor] = []
    cs: list[Tensor] = []
    h, c = cell.zero_state()
    for j in range(m):
        gates = lstm_gates(cell, xs[j], h)
        incoming = [
            (s.begin, word_cell(wparams, word_inputs[s.word_id], hs[s.begin - 1], cs[s.begin - 1]))
            for s in groups[j]
        ]
        h, c = lattice_merge(wparams, xs[j], gates, c, incoming, alphas)
        hs.append(h)
        cs.append(c)
    return hs


# -- sentence encoders ----------------------------------------------------------

CHAR_VARIANTS = ("plain", "bichar", "softword", "bichar+softword")
CHAR_INTEGRATIONS = ("none", "char_lstm", "char_lstm_single", "char_cnn")


def _embed(table: EmbeddingTable, tokens: Sequence[str], dropout: float, rng) -> list[Tensor]:
    return [nx.dropout(table.lookup(t), dropout, rng) for t in tokens]


class CharEncoder:
    """BiLSTM over characters, optionally with bigram and segmentation-label inputs."""

    def __init__(
        self,
        char_table: EmbeddingTable,
        d_h: int,
        rng: np.random.Generator | None = None,
        bichar_table: EmbeddingTable | None = None,
        seg_table: EmbeddingTable | None = None,
        dropout: float = 0.0,
    ):
        self.char_table = char_table
        self.bichar_table = bichar_table
        self.seg_table = seg_table
        self.dropout = dropout
        d_in = char_table.dim + (bichar_table.dim if bichar_table else 0) + (seg_table.dim if seg_table else 0)
        self.d_in = d_in
        self.fwd = LstmCell(d_in, d_h, rng)
        self.bwd = LstmCell(d_in, d_h, rng)

    @property
    def output_dim(self) -> int:
        return 2 * self.fwd.d_h

    def register(self, params: Params) -> None:
        self.fwd.register(params, "char_lstm.fwd")
        self.bwd.register(params, "char_lstm.bwd")

    def inputs(self, sentence, rng=None) -> list[Tensor]:
        chars = sentence.chars
        cols = [_embed(self.char_table, chars, self.dropout, rng)]
        if self.bichar_table is not None:
            cols.append(_embed(self.bichar_table, bigrams(chars), self.dropout, rng))
        if self.seg_table is not None:
            if sentence.seg is None:
                raise ConfigurationError("softword input needs segmentation labels")
            cols.append([self.seg_table.lookup(s) for s in sentence.seg])
        return [nx.concat(list(parts)) for parts in zip(*cols)]

    def encode(self, sentence, rng=None) -> list[Tensor]:
        return bilstm(self.fwd, self.bwd, self.inputs(sentence, rng))


def encode_char(encoder: CharEncoder, sentence, rng=None) -> list[Tensor]:
    return encoder.encode(sentence, rng)


class LatticeEncoder:
    """Character BiLSTM whose cells also receive lexicon-word cells ending there."""

    def __init__(
        self,
        char_table: EmbeddingTable,
        word_table: EmbeddingTable,
        lexicon: Lexicon,
        d_h: int,
        rng: np.random.Generator | None = None,
        dropout: float = 0.0,
        char_encoder: CharEncoder | None = None,
    ):
        self.char_table = char_table
        self.word_table = word_table
        self.lexicon = lexicon
        self.dropout = dropout
        # sharing a CharEncoder's cells gives the degenerate-lattice equivalence directly
        if char_encoder is None:
            char_encoder = CharEncoder(char_table, d_h, rng, dropout=dropout)
        self.chars = char_encoder
        d_c = char_table.dim
        self.word_fwd = WordCellParams(word_table.dim, d_c, d_h, rng)
        self.word_bwd = WordCellParams(word_table.dim, d_c, d_h, rng)

    @property
    def output_dim(self) -> int:
        return self.chars.output_dim

    def register(self, params: Params) -> None:
        self.chars.register(params)
        self.word_fwd.register(params, "lattice.fwd")
        self.word_bwd.register(params, "lattice.bwd")

    def spans(self, sentence) -> list[LatticeSpan]:
        return match_spans(self.lexicon, sentence.chars)

    def encode(self, sentence, rng=None, spans: Sequence[LatticeSpan] | None = None, alphas: list | None = None) -> list[Tensor]:
        xs = self.chars.inputs(sentence, rng)
        m = len(xs)
        spans = self.spans(sentence) if spans is None else list(spans)
        word_inputs = {}
        for s in spans:
            if s.word_id not in word_inputs:
                word_inputs[s.word_id] = nx.dropout(
                    self.word_table.lookup(self.lexicon.word(s.word_id)), self.dropout, rng
                )
        hf = lattice_pass(self.chars.fwd, self.word_fwd, xs, spans, word_inputs, alphas)
        hb = lattice_pass(self.chars.bwd, self.word_bwd, xs[::-1], reverse_spans(spans, m), word_inputs, alphas)[::-1]
        return [nx.concat([a, b]) for a, b in zip(hf, hb)]


def encode_lattice(encoder: LatticeEncoder, sentence, spans=None, rng=None) -> list[Tensor]:
    return encoder.encode(sentence, rng, spans)


class CharCnn:
    """Width-3 convolution over a word's characters followed by max pooling."""

    def __init__(self, d_c: int, d_out: int, rng: np.random.Generator | None = None, width: int = 3):
        self.width = width
        self.d_c = d_c
        W = np.zeros((width * d_c, d_out)) if rng is None else nx.xavier_uniform(rng, width * d_c, d_out)
        self.W = nx.param(W)
        self.b = nx.param(np.zeros(d_out))

    def register(self, params: Params, prefix: str) -> None:
        params.add(f"{prefix}.W", self.W)
        params.add(f"{prefix}.b", self.b)

    def __call__(self, xs: Sequence[Tensor]) -> Tensor:
        half = (self.width - 1) // 2
        pad = nx.constant(np.zeros(self.d_c))
        padded = [pad] * half + list(xs) + [pad] * half
        windows = [nx.concat(padded[j : j + self.width]) for j in range(len(xs))]
        conv = nx.add_row(nx.matmul(nx.stack(windows), self.W), self.b)
        return nx.max_rows(conv)


class WordEncoder:
    """BiLSTM over words, optionally enriched with a character-level representation."""

    def __init__(
        self,
        word_table: EmbeddingTable,
        d_h: int,
        rng: np.random.Generator | None = None,
        char_integration: str = "none",
        char_table: EmbeddingTable | None = None,
        bichar_table: EmbeddingTable | None = None,
        char_hidden: int = 50,
        cnn_dim: int = 50,
        dropout: float = 0.0,
    ):
        if char_integration not in CHAR_INTEGRATIONS:
            raise ConfigurationError(f"unknown character integration {char_integration!r}")
        if char_integration != "none" and char_table is None:
            raise ConfigurationError(f"{char_integration} needs a character table")
        if bichar_table is not None and char_integration == "none":
            raise ConfigurationError("bigram features in the word model need a character sub-encoder")
        self.word_table = word_table
        self.char_table = char_table
        self.bichar_table = bichar_table
        self.char_integration = char_integration
        self.dropout = dropout
        d_char_in = (char_table.dim if char_table else 0) + (bichar_table.dim if bichar_table else 0)
        self.char_fwd = self.char_bwd = self.cnn = None
        if char_integration in ("char_lstm", "char_lstm_single"):
            self.char_fwd = LstmCell(d_char_in, char_hidden, rng)
            self.char_bwd = LstmCell(d_char_in, char_hidden, rng)
            d_extra = 2 * char_hidden
        elif char_integration == "char_cnn":
            self.cnn = CharCnn(d_char_in, cnn_dim, rng)
            d_extra = cnn_dim
        else:
            d_extra = 0
        self.fwd = LstmCell(word_table.dim + d_extra, d_h, rng)
        self.bwd = LstmCell(word_table.dim + d_extra, d_h, rng)

    @property
    def output_dim(self) -> int:
        return 2 * self.fwd.d_h

    def register(self, params: Params) -> None:
        if self.char_fwd is not None:
            self.char_fwd.register(params, "word.char_lstm.fwd")
            self.char_bwd.register(params, "word.char_lstm.bwd")
        if self.cnn is not None:
            self.cnn.register(params, "word.char_cnn")
        self.fwd.register(params, "word_lstm.fwd")
        self.bwd.register(params, "word_lstm.bwd")

    def char_inputs(self, sentence, rng=None) -> list[Tensor]:
        cols = [_embed(self.char_table, sentence.chars, self.dropout, rng)]
        if self.bichar_table is not None:
            cols.append(_embed(self.bichar_table, bigrams(sentence.chars), self.dropout, rng))
        return [nx.concat(list(parts)) for parts in zip(*cols)]

    def char_features(self, sentence, rng=None) -> list[Tensor]:
        """Character representation of each word, in word order."""
        xs = self.char_inputs(sentence, rng)
        bounds = sentence.word_bounds()
        if self.char_integration == "char_cnn":
            return [self.cnn(xs[b - 1 : e]) for b, e in bounds]
        if self.char_integration == "char_lstm_single":
            hf = run_lstm(self.char_fwd, xs)
            hb = run_lstm(self.char_bwd, xs[::-1])[::-1]
            return [nx.concat([hf[e - 1], hb[b - 1]]) for b, e in bounds]
        feats = []
        for b, e in bounds:
            seg = xs[b - 1 : e]
            hf = run_lstm(self.char_fwd, seg)
            hb = run_lstm(self.char_bwd, seg[::-1])
            feats.append(nx.concat([hf[-1], hb[-1]]))
        return feats

    def inputs(self, sentence, rng=None) -> list[Tensor]:
        if sentence.words is None:
            raise ConfigurationError("word encoder needs word boundaries")
        xw = _embed(self.word_table, sentence.words, self.dropout, rng)
        if self.char_integration == "none":
            return xw
        return [nx.concat([w, c]) for w, c in zip(xw, self.char_features(sentence, rng))]

    def encode(self, sentence, rng=None) -> list[Tensor]:
        return bilstm(self.fwd, self.bwd, self.inputs(sentence, rng))


def encode_word(encoder: WordEncoder, sentence, rng=None) -> list[Tensor]:
    return encoder.encode(sentence, rng)
