"""Per-sentence SGD training, evaluation and checkpoint persistence."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import numerics as nx
from .config import Config, ConfigError, parse_config
from .corpus import Sentence
from .embeddings import EmbeddingTable, Vocabulary, load_pretrained
from .lexicon import Lexicon
from .model import SequenceLabeler, build_tables
from .numerics import Params, Tape
from .tagging import TagCodec, decode_tags, evaluate

log = logging.getLogger(__name__)

# metrics.tsv columns, one line per epoch, no header
METRICS_COLUMNS = ("epoch", "lr", "train_loss", "dev_P", "dev_R", "dev_F1")


class DivergenceError(ArithmeticError):
    pass


class CheckpointError(ValueError):
    pass


@dataclass
class EpochMetrics:
    epoch: int
    lr: float
    train_loss: float
    p: float
    r: float
    f1: float

    def line(self) -> str:
        return "\t".join([str(self.epoch)] + [repr(float(v)) for v in (self.lr, self.train_loss, self.p, self.r, self.f1)])


@dataclass
class TrainResult:
    model: SequenceLabeler
    best_epoch: int
    best_f1: float
    history: list[EpochMetrics] = field(default_factory=list)


def sgd_step(params: Params, lr: float) -> None:
    for t in params.values():
        if t.grad is not None:
            t.values -= lr * t.grad


def predict_all(model: SequenceLabeler, sentences: Sequence[Sentence]) -> list[list[str]]:
    return [model.predict(s) for s in sentences]


def score_corpus(model: SequenceLabeler, sentences: Sequence[Sentence]) -> tuple[float, float, float]:
    gold = [s.entities() for s in sentences]
    pred = [decode_tags(t) for t in predict_all(model, sentences)]
    return evaluate(gold, pred)


def train_step(model: SequenceLabeler, sentence: Sentence, lr: float, rng=None) -> float:
    model.params.zero_grad()
    with Tape() as tape:
        loss = model.loss([sentence], rng=rng)
        value = float(loss.values)
        if not np.isfinite(value):
            raise DivergenceError("non-finite loss")
        tape.backward(loss)
    sgd_step(model.params, lr)
    return value


def build_model(config: Config, train: Sequence[Sentence], lexicon: Lexicon | None = None,
                pretrained: dict[str, EmbeddingTable] | None = None) -> SequenceLabeler:
    """Fresh model whose vocabularies cover ``train`` and any pretrained tables."""
    pretrained = dict(pretrained or {})
    rng = np.random.default_rng([config.seed, 0])
    if config.family == "lattice" and lexicon is None:
        if "word" in pretrained:
            lexicon = Lexicon(pretrained["word"].vocabulary.known())
        else:
            raise ConfigError("lattice model needs a lexicon or word embeddings")
    tables = build_tables(config, train, rng, pretrained, lexicon)
    codec = TagCodec.from_tag_sequences(s.tags for s in train)
    return SequenceLabeler(config, codec, tables, lexicon, rng)


def load_resources(config: Config) -> dict[str, EmbeddingTable]:
    """Pretrained tables named by the config's embedding paths."""
    rng = np.random.default_rng([config.seed, 2])
    out = {}
    for name, path, dim in (("char", config.char_emb, config.char_dim),
                            ("bichar", config.bichar_emb, config.bichar_dim),
                            ("word", config.word_emb, config.word_dim)):
        if path:
            out[name] = load_pretrained(path, dim, rng)
    return out


def train(config: Config, train_set: Sequence[Sentence], dev_set: Sequence[Sentence],
          out_dir=None, model: SequenceLabeler | None = None, lexicon: Lexicon | None = None,
          pretrained: dict[str, EmbeddingTable] | None = None,
          stop_at_f1: float | None = None) -> TrainResult:
    """Train for ``config.epochs`` epochs, keeping the best-dev-F1 parameters.

    With ``out_dir`` the best checkpoint and the metrics log (one line per
    epoch) are written there. ``stop_at_f1`` ends training early once dev F1
    reaches that value.
    """
    if not train_set:
        raise ValueError("empty training corpus")
    if model is None:
        model = build_model(config, train_set, lexicon, pretrained)
    rng = np.random.default_rng([config.seed, 1])
    metrics_fh = None
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out_dir / "metrics.tsv", "w", encoding="utf-8", newline="\n")
    result = TrainResult(model, -1, -1.0)
    best_state = model.params.state()
    try:
        for epoch in range(config.epochs):
            lr = config.lr_at(epoch)
            order = rng.permutation(len(train_set))
            total = 0.0
            for idx in order:
                try:
                    total += train_step(model, train_set[idx], lr, rng)
                except DivergenceError:
                    raise DivergenceError(f"epoch {epoch}: loss diverged on training sentence {int(idx)}") from None
            p, r, f = score_corpus(model, dev_set) if dev_set else (0.0, 0.0, 0.0)
            m = EpochMetrics(epoch, lr, total, p, r, f)
            result.history.append(m)
            log.info("epoch %d lr %.6f loss %.4f dev P %.4f R %.4f F1 %.4f", epoch, lr, total, p, r, f)
            if metrics_fh is not None:
                metrics_fh.write(m.line() + "\n")
                metrics_fh.flush()
            if f > result.best_f1:
                result.best_f1, result.best_epoch = f, epoch
                best_state = model.params.state()
                if out_dir is not None:
                    save_checkpoint(model, out_dir, epoch, f)
            if stop_at_f1 is not None and f >= stop_at_f1:
                break
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    model.params.load_state(best_state)
    return result


# -- checkpoints --------------------------------------------------------------------


def save_checkpoint(model: SequenceLabeler, out_dir, epoch: int, best_f1: float) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    arrays = {k: t.values for k, t in model.params.items()}
    for name, table in model.tables.items():
        arrays.setdefault(f"emb.{name}", table.matrix.values)
    np.savez(out_dir / "params.npz", **arrays)
    vocab = {
        "tags": model.codec.tags,
        "tables": {name: {"tokens": t.vocabulary.itos, "trainable": t.trainable} for name, t in model.tables.items()},
        "lexicon": model.lexicon.words if model.lexicon is not None else None,
    }
    (out_dir / "vocab.json").write_text(json.dumps(vocab, ensure_ascii=False), encoding="utf-8")
    model.config.save(out_dir / "config.txt")
    (out_dir / "meta.json").write_text(json.dumps({"epoch": epoch, "best_dev_f1": best_f1}), encoding="utf-8")


def load_checkpoint(path) -> tuple[SequenceLabeler, dict]:
    path = Path(path)
    try:
        config = parse_config((path / "config.txt").read_text(encoding="utf-8"))
        vocab = json.loads((path / "vocab.json").read_text(encoding="utf-8"))
        meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
        data = dict(np.load(path / "params.npz"))
    except (OSError, ValueError, KeyError) as err:
        raise CheckpointError(f"{path}: unreadable checkpoint ({err})") from None
    tables = {}
    for name, spec in vocab["tables"].items():
        itos = spec["tokens"]
        v = Vocabulary(itos[2:])
        if v.itos != itos:
            raise CheckpointError(f"{path}: vocabulary of {name} is malformed")
        matrix = data.get(f"emb.{name}")
        if matrix is None or matrix.shape[0] != len(v):
            raise CheckpointError(f"{path}: embedding rows for {name} do not match its vocabulary")
        tables[name] = EmbeddingTable(v, matrix, spec["trainable"])
    codec = TagCodec.from_tag_sequences([vocab["tags"]])
    if codec.tags != vocab["tags"]:
        raise CheckpointError(f"{path}: tag inventory is not a canonical BIOES set")
    lexicon = Lexicon(vocab["lexicon"]) if vocab["lexicon"] is not None else None
    model = SequenceLabeler(config, codec, tables, lexicon, rng=None)
    try:
        model.params.load_state({k: data[k] for k in model.params})
    except (KeyError, nx.DimensionError) as err:
        raise CheckpointError(f"{path}: parameters do not fit the configured model ({err})") from None
    return model, meta
