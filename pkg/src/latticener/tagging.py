"""BIOES entity tags, BMES segmentation labels and entity-level scoring."""
from __future__ import annotations

from typing import Iterable, Mapping, NamedTuple, Sequence

BMES = ("B", "M", "E", "S")


class TagError(ValueError):
    pass


class Entity(NamedTuple):
    begin: int  # 1-based
    end: int  # inclusive
    category: str


def split_tag(tag: str) -> tuple[str, str]:
    """``"B-PER"`` -> ``("B", "PER")``; ``"O"`` -> ``("O", "")``."""
    if tag == "O":
        return "O", ""
    prefix, sep, cat = tag.partition("-")
    if not sep or prefix not in ("B", "I", "E", "S") or not cat:
        raise TagError(f"invalid BIOES tag {tag!r}")
    return prefix, cat


def is_valid_tag(tag: str) -> bool:
    try:
        split_tag(tag)
    except TagError:
        return False
    return True


class TagCodec:
    """Bijection between label indices and BIOES tag strings for a category set."""

    def __init__(self, categories: Iterable[str]):
        self.categories = sorted(set(categories))
        self.tags = ["O"] + [f"{p}-{c}" for c in self.categories for p in ("B", "I", "E", "S")]
        self.index = {t: i for i, t in enumerate(self.tags)}

    def __len__(self) -> int:
        return len(self.tags)

    def encode(self, length: int, entities: Iterable[Entity]) -> list[str]:
        return encode_bioes(length, entities)

    def decode(self, tags: Sequence[str]) -> list[Entity]:
        return decode_tags(tags)

    def to_ids(self, tags: Sequence[str]) -> list[int]:
        try:
            return [self.index[t] for t in tags]
        except KeyError as err:
            raise TagError(f"tag {err.args[0]!r} not in codec") from None

    def to_tags(self, ids: Iterable[int]) -> list[str]:
        return [self.tags[i] for i in ids]

    @classmethod
    def from_tag_sequences(cls, sequences: Iterable[Sequence[str]]) -> "TagCodec":
        cats = set()
        for seq in sequences:
            for t in seq:
                p, c = split_tag(t)
                if c:
                    cats.add(c)
        return cls(cats)

    def allowed_transitions(self) -> list[list[bool]]:
        """Well-formed BIOES moves, including from START (row L) and into STOP (column L+1)."""
        n = len(self.tags)
        allowed = [[False] * (n + 2) for _ in range(n + 2)]
        parsed = [split_tag(t) for t in self.tags]
        for i, (pi, ci) in enumerate(parsed):
            for j, (pj, cj) in enumerate(parsed):
                if pi in ("B", "I"):
                    ok = pj in ("I", "E") and ci == cj
                else:
                    ok = pj in ("O", "B", "S")
                allowed[i][j] = ok
            allowed[i][n + 1] = pi in ("O", "E", "S")
        for j, (pj, _) in enumerate(parsed):
            allowed[n][j] = pj in ("O", "B", "S")
        return allowed


def encode_bioes(length: int, entities: Iterable[Entity]) -> list[str]:
    tags = ["O"] * length
    ordered = sorted(entities, key=lambda e: (e.begin, e.end))
    for prev, cur in zip(ordered, ordered[1:]):
        if cur.begin <= prev.end:
            raise TagError(f"overlapping entities {prev} and {cur}")
    for e in ordered:
        if not 1 <= e.begin <= e.end <= length or not e.category:
            raise TagError(f"entity {e} invalid for length {length}")
        if e.begin == e.end:
            tags[e.begin - 1] = f"S-{e.category}"
            continue
        tags[e.begin - 1] = f"B-{e.category}"
        for j in range(e.begin, e.end - 1):
            tags[j] = f"I-{e.category}"
        tags[e.end - 1] = f"E-{e.category}"
    return tags


def decode_tags(tags: Sequence[str]) -> list[Entity]:
    """Extract well-formed B I* E and S runs; anything else is dropped."""
    entities = []
    open_at, open_cat = None, None
    for j, tag in enumerate(tags, start=1):
        try:
            prefix, cat = split_tag(tag)
        except TagError:
            prefix, cat = "O", ""
        if prefix == "B":
            open_at, open_cat = j, cat
        elif prefix == "I":
            if open_cat != cat:
                open_at = open_cat = None
        elif prefix == "E":
            if open_at is not None and open_cat == cat:
                entities.append(Entity(open_at, j, cat))
            open_at = open_cat = None
        elif prefix == "S":
            entities.append(Entity(j, j, cat))
            open_at = open_cat = None
        else:
            open_at = open_cat = None
    return entities


def prf(tp: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def evaluate(gold: Sequence[Iterable[Entity]], predicted: Sequence[Iterable[Entity]]) -> tuple[float, float, float]:
    """Exact-match entity precision, recall and F1 over aligned sentences."""
    if len(gold) != len(predicted):
        raise ValueError(f"{len(gold)} gold sentences vs {len(predicted)} predicted")
    tp = n_pred = n_gold = 0
    for g, p in zip(gold, predicted):
        g, p = set(g), set(p)
        tp += len(g & p)
        n_pred += len(p)
        n_gold += len(g)
    return prf(tp, n_pred, n_gold)


def evaluate_groups(
    gold: Sequence[Iterable[Entity]],
    predicted: Sequence[Iterable[Entity]],
    groups: Mapping[str, Iterable[str]],
) -> dict[str, tuple[float, float, float]]:
    """Scores restricted to category groups (e.g. named vs nominal mentions), plus ``"all"``."""
    out = {"all": evaluate(gold, predicted)}
    for name, cats in groups.items():
        cats = set(cats)
        g = [[e for e in s if e.category in cats] for s in gold]
        p = [[e for e in s if e.category in cats] for s in predicted]
        out[name] = evaluate(g, p)
    return out


def bmes_from_words(words: Iterable[str]) -> list[str]:
    labels = []
    for w in words:
        if len(w) == 1:
            labels.append("S")
        else:
            labels.extend(["B"] + ["M"] * (len(w) - 2) + ["E"])
    return labels


def validate_bmes(labels: Sequence[str]) -> None:
    """Raise TagError unless labels form B M* E / S runs."""
    inside = False
    for j, lab in enumerate(labels, start=1):
        if lab not in BMES:
            raise TagError(f"position {j}: invalid segmentation label {lab!r}")
        if lab in ("B", "S") and inside:
            raise TagError(f"position {j}: {lab} inside an open word")
        if lab in ("M", "E") and not inside:
            raise TagError(f"position {j}: {lab} without a preceding B")
        inside = lab in ("B", "M")
    if inside:
        raise TagError("segmentation ends inside a word")


def words_from_bmes(chars: str, labels: Sequence[str]) -> list[str]:
    validate_bmes(labels)
    words, start = [], 0
    for j, lab in enumerate(labels):
        if lab in ("E", "S"):
            words.append(chars[start : j + 1])
            start = j + 1
    return words
