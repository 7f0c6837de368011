"""Desk-scale synthetic NER corpora where the entity category is carried by lexicon words.

Entities are lexicon words spelled over an "entity" alphabet; the text between
them uses a disjoint "filler" alphabet. Characters are drawn independently of
category, so the category of an entity is recoverable only from which lexicon
word it is. Pretrained word vectors cluster by category, which lets a model
that consults the lexicon label entity words it never saw in training.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from .corpus import Sentence, write_corpus, write_words
from .embeddings import EmbeddingTable, Vocabulary
from .lexicon import Lexicon, match_spans
from .tagging import Entity, bmes_from_words, encode_bioes

ENTITY_ALPHABET = "甲乙丙丁戊己庚辛壬癸子丑寅卯辰巳午未申酉"
FILLER_ALPHABET = "的了在是我有和人这中"


@dataclass
class SyntheticSpec:
    sentences: int = 20
    dev_sentences: int = 0
    test_sentences: int = 0
    categories: int = 2
    lexicon_size: int = 30
    seed: int = 7
    filler_words: int = 0  # multi-character non-entity lexicon words; 0 means a third of the lexicon
    heldout_fraction: float = 0.4  # share of entity words reserved for dev/test
    min_entities: int = 1
    max_entities: int = 3
    emb_dim: int = 50
    emb_noise: float = 0.3

    def validate(self) -> "SyntheticSpec":
        if self.sentences < 1 or self.categories < 1 or self.lexicon_size < 2:
            raise ValueError("sentences, categories and lexicon_size must be positive")
        if not 1 <= self.min_entities <= self.max_entities:
            raise ValueError("need 1 <= min_entities <= max_entities")
        return self


@dataclass
class SyntheticData:
    train: list[Sentence]
    dev: list[Sentence]
    test: list[Sentence]
    lexicon_words: list[str]
    word_category: dict[str, str]  # "O" for filler words
    embeddings: dict[str, np.ndarray]


def category_name(k: int) -> str:
    return f"C{k}"


def _make_words(rng, alphabet: str, count: int, taken: set[str]) -> list[str]:
    """Distinct words of length 2-3 where no word is a substring of another."""
    words: list[str] = []
    attempts = 0
    while len(words) < count:
        attempts += 1
        if attempts > 100000:
            raise ValueError(f"cannot draw {count} substring-free words from {len(alphabet)} characters")
        n = int(rng.integers(2, 4))
        w = "".join(alphabet[i] for i in rng.integers(0, len(alphabet), size=n))
        if any(w in t or t in w for t in taken):
            continue
        taken.add(w)
        words.append(w)
    return words


def _sentence(rng, pool: list[str], word_category, filler_pool: list[str], spec: SyntheticSpec) -> Sentence:
    n_ent = int(rng.integers(spec.min_entities, spec.max_entities + 1))
    words: list[str] = []
    entities: list[Entity] = []

    def filler(lo: int, hi: int) -> None:
        for _ in range(int(rng.integers(lo, hi + 1))):
            if filler_pool and rng.random() < 0.3:
                words.append(filler_pool[int(rng.integers(len(filler_pool)))])
            else:
                words.append(FILLER_ALPHABET[int(rng.integers(len(FILLER_ALPHABET)))])

    filler(0, 2)
    for k in range(n_ent):
        if k:
            filler(1, 3)
        w = pool[int(rng.integers(len(pool)))]
        start = sum(len(x) for x in words) + 1
        words.append(w)
        entities.append(Entity(start, start + len(w) - 1, word_category[w]))
    filler(0, 2)
    chars = "".join(words)
    return Sentence(chars, encode_bioes(len(chars), entities), bmes_from_words(words))


def gen_synthetic(spec: SyntheticSpec) -> SyntheticData:
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    n_filler = spec.filler_words or spec.lexicon_size // 3
    n_entity = spec.lexicon_size - n_filler
    if n_entity < spec.categories:
        raise ValueError("lexicon too small to give every category a word")
    taken: set[str] = set()
    entity_words = _make_words(rng, ENTITY_ALPHABET, n_entity, taken)
    filler_words = _make_words(rng, FILLER_ALPHABET, n_filler, taken)
    word_category = {w: category_name(i % spec.categories) for i, w in enumerate(entity_words)}
    word_category.update({w: "O" for w in filler_words})

    heldout = spec.dev_sentences + spec.test_sentences > 0
    train_pool, eval_pool = entity_words, entity_words
    if heldout:
        train_pool, eval_pool = [], []
        for k in range(spec.categories):
            cat = [w for w in entity_words if word_category[w] == category_name(k)]
            n_out = max(1, int(round(len(cat) * spec.heldout_fraction))) if len(cat) > 1 else 0
            train_pool += cat[n_out:]
            eval_pool += cat[:n_out] or cat

    train = [_sentence(rng, train_pool, word_category, filler_words, spec) for _ in range(spec.sentences)]
    dev = [_sentence(rng, eval_pool, word_category, filler_words, spec) for _ in range(spec.dev_sentences)]
    test = [_sentence(rng, eval_pool, word_category, filler_words, spec) for _ in range(spec.test_sentences)]

    protos = {c: rng.normal(size=spec.emb_dim) for c in sorted(set(word_category.values()))}
    embeddings = {}
    for w in entity_words + filler_words:
        v = protos[word_category[w]] + spec.emb_noise * rng.normal(size=spec.emb_dim)
        embeddings[w] = v / np.linalg.norm(v)
    return SyntheticData(train, dev, test, entity_words + filler_words, word_category, embeddings)


def covering_words(lexicon: Lexicon, sentence: Sentence) -> list[list[str]]:
    """For each gold entity, the lexicon words whose span intersects it."""
    spans = match_spans(lexicon, sentence.chars)
    out = []
    for e in sentence.entities():
        out.append([lexicon.word(s.word_id) for s in spans if s.begin <= e.end and e.begin <= s.end])
    return out


def parse_spec(text: str) -> SyntheticSpec:
    types = {f.name: f.type for f in fields(SyntheticSpec)}
    values = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or key not in types:
            raise ValueError(f"line {lineno}: unknown or malformed entry {line!r}")
        values[key] = float(raw) if types[key] == "float" else int(raw)
    return SyntheticSpec(**values)


def write_synthetic(data: SyntheticData, spec: SyntheticSpec, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, sents in (("train", data.train), ("dev", data.dev), ("test", data.test)):
        if sents or name == "train":
            write_corpus(out / f"{name}.txt", sents)
            write_words(out / f"{name}.words", sents)
    (out / "lexicon.txt").write_text("".join(w + "\n" for w in data.lexicon_words), encoding="utf-8")
    with open(out / "word_emb.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(data.embeddings)} {spec.emb_dim}\n")
        for w in data.lexicon_words:
            fh.write(w + " " + " ".join(repr(float(x)) for x in data.embeddings[w]) + "\n")
    (out / "spec.txt").write_text("".join(f"{k}={v}\n" for k, v in asdict(spec).items()), encoding="utf-8")


def word_table(data: SyntheticData, trainable: bool = True) -> EmbeddingTable:
    """The generated word vectors as an embedding table over the lexicon."""
    vocab = Vocabulary(data.lexicon_words)
    dim = len(next(iter(data.embeddings.values())))
    matrix = np.zeros((len(vocab), dim))
    for w, v in data.embeddings.items():
        matrix[vocab.stoi[w]] = v
    return EmbeddingTable(vocab, matrix, trainable)
