"""Vocabularies and embedding tables (character, bigram, segmentation, word)."""
from __future__ import annotations

import logging
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .numerics import Tensor, constant, take_row

log = logging.getLogger(__name__)

PAD = "<pad>"
UNK = "<unk>"
END = "</s>"  # right neighbour of the last character when forming bigrams


class EmbeddingFormatError(ValueError):
    pass


class Vocabulary:
    """Token <-> index map with reserved padding (0) and unknown (1) rows."""

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = [PAD, UNK]
        self.stoi: dict[str, int] = {PAD: 0, UNK: 1}
        for t in tokens:
            self.add(t)

    pad_index = 0
    unk_index = 1

    def add(self, token: str) -> int:
        idx = self.stoi.get(token)
        if idx is None:
            idx = self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return idx

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def index(self, token: str) -> int:
        return self.stoi.get(token, self.unk_index)

    def known(self) -> list[str]:
        return self.itos[2:]


def init_bound(dim: int) -> float:
    return float(np.sqrt(3.0 / dim))


class EmbeddingTable:
    def __init__(self, vocabulary: Vocabulary, matrix: np.ndarray, trainable: bool = True):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != len(vocabulary) or matrix.shape[1] < 1:
            raise ValueError(f"matrix shape {matrix.shape} does not fit vocabulary of {len(vocabulary)}")
        self.vocabulary = vocabulary
        self.matrix = Tensor(matrix, requires_grad=trainable)
        self.trainable = trainable

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def __len__(self) -> int:
        return self.matrix.shape[0]

    def lookup(self, token: str) -> Tensor:
        return lookup(self, token)

    def row(self, index: int) -> Tensor:
        if self.trainable:
            return take_row(self.matrix, index)
        return constant(self.matrix.values[index].copy())

    @classmethod
    def random(cls, tokens: Iterable[str], dim: int, rng: np.random.Generator, trainable: bool = True) -> "EmbeddingTable":
        vocab = Vocabulary(tokens)
        b = init_bound(dim)
        matrix = rng.uniform(-b, b, size=(len(vocab), dim))
        matrix[vocab.pad_index] = 0.0
        return cls(vocab, matrix, trainable)

    def extend(self, tokens: Iterable[str], rng: np.random.Generator) -> None:
        """Append randomly initialized rows for tokens not yet in the vocabulary."""
        new = [t for t in dict.fromkeys(tokens) if t not in self.vocabulary]
        if not new:
            return
        for t in new:
            self.vocabulary.add(t)
        b = init_bound(self.dim)
        rows = rng.uniform(-b, b, size=(len(new), self.dim))
        self.matrix.values = np.vstack([self.matrix.values, rows])


def lookup(table: EmbeddingTable, token: str) -> Tensor:
    """The token's row, or the unknown row for out-of-vocabulary tokens."""
    return table.row(table.vocabulary.index(token))


def bigrams(chars: Sequence[str]) -> list[str]:
    """Bigram token for each position; the last pairs with the end sentinel."""
    padded = list(chars) + [END]
    return [padded[j] + padded[j + 1] for j in range(len(chars))]


def read_word2vec(path, expected_dim: int) -> tuple[list[str], np.ndarray]:
    tokens: list[str] = []
    rows: list[list[float]] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    start = 0
    if lines and len(lines[0].split(" ")) == 2 and len(lines[0].split(" ")) != expected_dim + 1:
        head = lines[0].split(" ")
        if not all(h.isdigit() for h in head):
            raise EmbeddingFormatError(f"{path}:1: malformed header {lines[0]!r}")
        if int(head[1]) != expected_dim:
            raise EmbeddingFormatError(f"{path}:1: header dimension {head[1]} != expected {expected_dim}")
        start = 1
    for lineno, line in enumerate(lines[start:], start=start + 1):
        line = line.rstrip("\r")
        if not line.strip():
            continue
        fields = line.rstrip(" ").split(" ")
        if len(fields) != expected_dim + 1:
            raise EmbeddingFormatError(
                f"{path}:{lineno}: expected {expected_dim} values, found {len(fields) - 1}"
            )
        token = fields[0]
        try:
            vec = [float(x) for x in fields[1:]]
        except ValueError:
            raise EmbeddingFormatError(f"{path}:{lineno}: non-numeric value") from None
        if token in seen:
            log.warning("%s:%d: duplicate token %r ignored", path, lineno, token)
            continue
        seen.add(token)
        tokens.append(token)
        rows.append(vec)
    matrix = np.array(rows, dtype=np.float64).reshape(len(rows), expected_dim)
    return tokens, matrix


def load_pretrained(path, expected_dim: int, rng: np.random.Generator | None = None, trainable: bool = True) -> EmbeddingTable:
    """Load a word2vec text file; padding row is zero, unknown row is random."""
    rng = rng if rng is not None else np.random.default_rng(0)
    tokens, matrix = read_word2vec(path, expected_dim)
    vocab = Vocabulary(tokens)
    b = init_bound(expected_dim)
    full = np.zeros((len(vocab), expected_dim))
    full[vocab.unk_index] = rng.uniform(-b, b, size=expected_dim)
    # pretrained rows keep file order; reserved tokens occurring in the file overwrite their row
    for t, row in zip(tokens, matrix):
        full[vocab.stoi[t]] = row
    return EmbeddingTable(vocab, full, trainable)


def save_word2vec(table: EmbeddingTable, path) -> None:
    """Write known tokens in word2vec text format; ``repr`` floats round-trip exactly."""
    known = table.vocabulary.known()
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(known)} {table.dim}\n")
        for t in known:
            row = table.matrix.values[table.vocabulary.stoi[t]]
            fh.write(t + " " + " ".join(repr(float(v)) for v in row) + "\n")


def save_table(table: EmbeddingTable, path) -> None:
    np.savez(path, matrix=table.matrix.values, tokens=np.array(table.vocabulary.itos, dtype=str), trainable=table.trainable)


def load_table(path) -> EmbeddingTable:
    with np.load(path) as data:
        vocab = Vocabulary()
        itos = [str(t) for t in data["tokens"]]
        if itos[:2] != [PAD, UNK]:
            raise EmbeddingFormatError(f"{path}: reserved rows missing")
        for t in itos[2:]:
            vocab.add(t)
        return EmbeddingTable(vocab, data["matrix"], bool(data["trainable"]))
