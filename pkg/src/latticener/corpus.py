"""Sentences and the character-per-line corpus format.

Each line is ``char<TAB>tag`` with an optional third ``seg`` column holding a
BMES segmentation label; blank lines separate sentences. Input to the tagger
may carry the character column alone. Word boundaries for word-based models
come from the seg column or from a parallel file with one space-separated
sentence per line.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .tagging import Entity, TagError, decode_tags, encode_bioes, split_tag, validate_bmes, words_from_bmes


class CorpusError(ValueError):
    pass


@dataclass
class Sentence:
    chars: str
    tags: list[str] | None = None
    seg: list[str] | None = None
    words: list[str] | None = None
    _bounds: list[tuple[int, int]] | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        m = len(self.chars)
        if self.tags is not None and len(self.tags) != m:
            raise CorpusError(f"{len(self.tags)} tags for {m} characters")
        if self.seg is not None:
            if len(self.seg) != m:
                raise CorpusError(f"{len(self.seg)} segmentation labels for {m} characters")
            validate_bmes(self.seg)
            if self.words is None:
                self.words = words_from_bmes(self.chars, self.seg)
        if self.words is not None and "".join(self.words) != self.chars:
            raise CorpusError(f"words {self.words} do not spell {self.chars!r}")

    def __len__(self) -> int:
        return len(self.chars)

    def entities(self) -> list[Entity]:
        return decode_tags(self.tags) if self.tags is not None else []

    def word_bounds(self) -> list[tuple[int, int]]:
        """1-based inclusive (first, last) character index of each word."""
        if self.words is None:
            raise CorpusError("sentence has no word segmentation")
        if self._bounds is None:
            bounds, j = [], 1
            for w in self.words:
                bounds.append((j, j + len(w) - 1))
                j += len(w)
            self._bounds = bounds
        return self._bounds

    def char_index(self, i: int, k: int) -> int:
        """Global 1-based index of the k-th character of the i-th word."""
        first, last = self.word_bounds()[i - 1]
        if not 1 <= k <= last - first + 1:
            raise IndexError(f"word {i} has no character {k}")
        return first + k - 1

    def word_of_char(self) -> list[int]:
        """1-based word index for every character."""
        owner = []
        for i, (b, e) in enumerate(self.word_bounds(), start=1):
            owner.extend([i] * (e - b + 1))
        return owner

    def word_tags(self) -> list[str]:
        """Gold BIOES tags at word level; entities are widened to whole words."""
        owner = self.word_of_char()
        spans, last_end = [], 0
        for e in self.entities():
            b, f = owner[e.begin - 1], owner[e.end - 1]
            if b <= last_end:
                continue  # collides with a previous entity once widened
            spans.append(Entity(b, f, e.category))
            last_end = f
        return encode_bioes(len(self.words), spans)

    def char_tags_from_words(self, word_tags: Sequence[str]) -> list[str]:
        bounds = self.word_bounds()
        ents = [Entity(bounds[e.begin - 1][0], bounds[e.end - 1][1], e.category) for e in decode_tags(word_tags)]
        return encode_bioes(len(self.chars), ents)


def _parse_block(block: list[tuple[int, str]], path) -> Sentence:
    chars, tags, seg = [], [], []
    width = None
    for lineno, line in block:
        cols = line.split("\t") if "\t" in line else line.split()
        if width is None:
            width = len(cols)
        if len(cols) not in (1, 2, 3) or len(cols) != width:
            raise CorpusError(f"{path}:{lineno}: expected 1-3 columns consistently, got {len(cols)}")
        ch = cols[0]
        if len(ch) != 1:
            raise CorpusError(f"{path}:{lineno}: {ch!r} is not a single character")
        chars.append(ch)
        if width >= 2:
            try:
                split_tag(cols[1])
            except TagError as err:
                raise CorpusError(f"{path}:{lineno}: {err}") from None
            tags.append(cols[1])
        if width == 3:
            seg.append(cols[2])
    try:
        return Sentence("".join(chars), tags if width >= 2 else None, seg if width == 3 else None)
    except (TagError, CorpusError) as err:
        raise CorpusError(f"{path}:{block[0][0]}-{block[-1][0]}: {err}") from None


def parse_corpus(text: str, path="<string>") -> list[Sentence]:
    sentences, block = [], []
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.rstrip("\r")
        if line.strip():
            block.append((lineno, line))
        elif block:
            sentences.append(_parse_block(block, path))
            block = []
    if block:
        sentences.append(_parse_block(block, path))
    return sentences


def load_corpus(path, words_path=None) -> list[Sentence]:
    sentences = parse_corpus(Path(path).read_text(encoding="utf-8"), path)
    if words_path is not None:
        lines = [l for l in Path(words_path).read_text(encoding="utf-8").split("\n") if l.strip()]
        if len(lines) != len(sentences):
            raise CorpusError(f"{words_path}: {len(lines)} segmented lines for {len(sentences)} sentences")
        for lineno, (s, line) in enumerate(zip(sentences, lines), start=1):
            words = line.split()
            if "".join(words) != s.chars:
                raise CorpusError(f"{words_path}:{lineno}: words do not spell the sentence")
            s.words = words
            s._bounds = None
    return sentences


def format_corpus(sentences: Iterable[Sentence]) -> str:
    out = []
    for s in sentences:
        tags = s.tags if s.tags is not None else ["O"] * len(s)
        for j, ch in enumerate(s.chars):
            row = [ch, tags[j]] + ([s.seg[j]] if s.seg is not None else [])
            out.append("\t".join(row) + "\n")
        out.append("\n")
    return "".join(out)


def write_corpus(path, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_corpus(sentences))


def write_words(path, sentences: Iterable[Sentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in sentences:
            fh.write(" ".join(s.words) + "\n")
