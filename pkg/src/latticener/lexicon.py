"""Trie-backed lexicon and lattice span matching."""
from __future__ import annotations

from pathlib import Path
from typing import Iterable, NamedTuple

_END = ""  # trie key marking a complete word; never a real character


class LatticeSpan(NamedTuple):
    """A lexicon word occurring at characters ``begin..end`` (1-based, inclusive)."""

    begin: int
    end: int
    word_id: int


class Lexicon:
    """Immutable set of multi-character words with dense integer ids."""

    def __init__(self, words: Iterable[str] = ()):
        self._root: dict = {}
        self._ids: dict[str, int] = {}
        self._words: list[str] = []
        self.max_len = 0
        for w in words:
            if len(w) < 2 or w in self._ids:
                continue
            self._ids[w] = len(self._words)
            self._words.append(w)
            node = self._root
            for ch in w:
                node = node.setdefault(ch, {})
            node[_END] = self._ids[w]
            self.max_len = max(self.max_len, len(w))

    def __len__(self) -> int:
        return len(self._words)

    def __contains__(self, word: str) -> bool:
        return word in self._ids

    def __iter__(self):
        return iter(self._words)

    def lookup(self, word: str) -> int:
        return self._ids[word]

    def word(self, word_id: int) -> str:
        return self._words[word_id]

    @property
    def words(self) -> list[str]:
        return list(self._words)

    def match(self, chars) -> list[LatticeSpan]:
        return match_spans(self, chars)


def build_lexicon(words: Iterable[str]) -> Lexicon:
    """Collapse duplicates and drop single-character entries."""
    return Lexicon(words)


def load_word_list(path) -> Lexicon:
    text = Path(path).read_text(encoding="utf-8")
    return Lexicon(line.strip() for line in text.split("\n") if line.strip())


def match_spans(lexicon: Lexicon, chars) -> list[LatticeSpan]:
    """All lexicon words occurring in ``chars``, sorted by (end, begin).

    Walks the trie from every start position, so the cost is
    O(len(chars) * longest word).
    """
    spans = []
    m = len(chars)
    root = lexicon._root
    for start in range(m):
        node = root
        for stop in range(start, min(m, start + lexicon.max_len)):
            node = node.get(chars[stop])
            if node is None:
                break
            wid = node.get(_END)
            if wid is not None:
                spans.append(LatticeSpan(start + 1, stop + 1, wid))
    spans.sort(key=lambda s: (s.end, s.begin))
    return spans


def spans_by_end(spans: Iterable[LatticeSpan], length: int) -> list[list[LatticeSpan]]:
    """Group spans by end position; index ``e - 1`` holds the words ending at ``e``."""
    groups: list[list[LatticeSpan]] = [[] for _ in range(length)]
    for s in spans:
        if not 1 <= s.begin < s.end <= length:
            raise ValueError(f"span {s} out of range for sentence of length {length}")
        groups[s.end - 1].append(s)
    return groups


def reverse_spans(spans: Iterable[LatticeSpan], length: int) -> list[LatticeSpan]:
    """Map spans onto the reversed sentence: (b, e) -> (m+1-e, m+1-b)."""
    out = [LatticeSpan(length + 1 - s.end, length + 1 - s.begin, s.word_id) for s in spans]
    out.sort(key=lambda s: (s.end, s.begin))
    return out
