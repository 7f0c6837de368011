"""Acceptance criteria, one test each; every test reports a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py`` (verdicts appear in the
terminal summary) or ``python3 tests/test_acceptance.py``.
"""
import itertools
import sys
import tempfile
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from conftest import ACCEPTANCE  # noqa: E402
from latticener.checks import TOY_LEXICON, gradcheck_variant, toy_sentence  # noqa: E402
from latticener.config import VARIANTS, Config  # noqa: E402
from latticener.corpus import Sentence, load_corpus, write_corpus  # noqa: E402
from latticener.crf import CrfParams, log_partition, viterbi  # noqa: E402
from latticener.embeddings import EmbeddingTable  # noqa: E402
from latticener.encoders import CharEncoder, LatticeEncoder  # noqa: E402
from latticener.lexicon import Lexicon, build_lexicon, match_spans  # noqa: E402
from latticener.synthetic import SyntheticSpec, gen_synthetic, word_table  # noqa: E402
from latticener.tagging import Entity, TagError, bmes_from_words, decode_tags, encode_bioes, validate_bmes  # noqa: E402
from latticener.train import load_checkpoint, score_corpus, train  # noqa: E402

# small dimensions keep the full finite-difference sweep of every variant fast
GRADCHECK_DIMS = dict(char_dim=3, bichar_dim=3, seg_dim=2, word_dim=3, hidden=4, char_hidden=2, cnn_dim=2, l2=1e-2)


def report(number: int, name: str, ok: bool, detail: str) -> None:
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {name}  ({detail})"
    ACCEPTANCE.append(line)
    print(line)
    assert ok, line


def test_1_gradient_fidelity():
    start = time.time()
    spans = match_spans(Lexicon(TOY_LEXICON), toy_sentence().chars)
    overlapping = len(spans) == 2 and spans[0].end >= spans[1].begin
    worst = {}
    for variant in VARIANTS:
        worst[variant] = gradcheck_variant(Config(variant=variant, **GRADCHECK_DIMS), 1e-5)[0]
    elapsed = time.time() - start
    top = max(worst.values())
    ok = len(toy_sentence()) == 5 and overlapping and top < 1e-4 and elapsed < 30
    report(1, "gradient fidelity", ok, f"{len(worst)} variants, max rel error {top:.2e}, {elapsed:.1f} s")


def test_2_crf_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(2024)
    path_ok, z_err = 0, 0.0
    for _ in range(100):
        tau, L = int(rng.integers(1, 7)), int(rng.integers(1, 6))
        crf = CrfParams(L, 3, rng)
        crf.transition.values = rng.normal(size=(L + 2, L + 2))
        H = rng.normal(size=(tau, 3))
        E, T = H @ crf.emission.values.T, crf.transition.values
        scores = {}
        for y in itertools.product(range(L), repeat=tau):
            scores[y] = T[L, y[0]] + sum(E[i, y[i]] for i in range(tau)) + \
                sum(T[y[i - 1], y[i]] for i in range(1, tau)) + T[y[-1], L + 1]
        vals = np.array(list(scores.values()))
        z = vals.max() + np.log(np.exp(vals - vals.max()).sum())
        z_err = max(z_err, abs(log_partition(crf, H) - z))
        path_ok += tuple(viterbi(crf, H)[0]) == max(scores, key=scores.get)
    elapsed = time.time() - start
    ok = path_ok == 100 and z_err < 1e-8 and elapsed < 10
    report(2, "CRF oracle equivalence", ok, f"{path_ok}/100 argmax, max log Z error {z_err:.1e}, {elapsed:.1f} s")


def _random_lattice(rng, n_words=12, alphabet="abcdef"):
    words = ["".join(rng.choice(list(alphabet), size=int(rng.integers(2, 4)))) for _ in range(n_words)]
    return build_lexicon(words)


def test_3_alpha_normalization():
    rng = np.random.default_rng(3)
    lex = _random_lattice(rng)
    ct = EmbeddingTable.random(list("abcdef"), 5, rng)
    wt = EmbeddingTable.random(lex.words, 4, rng)
    enc = LatticeEncoder(ct, wt, lex, 6, rng)
    for cell in (enc.chars.fwd, enc.chars.bwd):
        cell.b.values = rng.normal(size=cell.b.shape)
    merges, worst = 0, 0.0
    for _ in range(50):
        chars = "".join(rng.choice(list("abcdef"), size=int(rng.integers(2, 16))))
        alphas = []
        enc.encode(Sentence(chars), alphas=alphas)
        for a in alphas:
            merges += 1
            worst = max(worst, float(np.max(np.abs(a.sum(axis=0) - 1.0))))
    report(3, "alpha normalization", merges > 0 and worst <= 1e-12, f"{merges} merge points, max |sum-1| {worst:.1e}")


def test_4_degenerate_lattice():
    rng = np.random.default_rng(4)
    ct = EmbeddingTable.random(list("abcdefgh"), 5, rng)
    chars = CharEncoder(ct, 6, rng)
    lat = LatticeEncoder(ct, EmbeddingTable.random(["ab"], 4, rng), Lexicon(), 6, rng, char_encoder=chars)
    worst = 0.0
    for _ in range(20):
        s = Sentence("".join(rng.choice(list("abcdefgh"), size=int(rng.integers(1, 20)))))
        for a, b in zip(lat.encode(s), chars.encode(s)):
            worst = max(worst, float(np.max(np.abs(a.values - b.values))))
    report(4, "degenerate-lattice equivalence", worst <= 1e-12, f"max abs difference {worst:.1e}")


def test_5_lexicon_matcher():
    rng = np.random.default_rng(5)
    agree = 0
    for _ in range(1000):
        words = ["".join(rng.choice(list("abcde"), size=int(rng.integers(1, 6)))) for _ in range(int(rng.integers(0, 20)))]
        chars = "".join(rng.choice(list("abcde"), size=int(rng.integers(0, 31))))
        vocab = {w for w in words if len(w) >= 2}
        oracle = {(b + 1, e, chars[b:e]) for b in range(len(chars)) for e in range(b + 2, len(chars) + 1) if chars[b:e] in vocab}
        lex = build_lexicon(words)
        agree += {(s.begin, s.end, lex.word(s.word_id)) for s in match_spans(lex, chars)} == oracle

    bridge = build_lexicon(["南京", "南京市", "市长", "长江", "大桥", "长江大桥"])
    bridge_spans = {(s.begin, s.end, bridge.word(s.word_id)) for s in match_spans(bridge, "南京市长江大桥")}
    bridge_ok = bridge_spans == {(1, 2, "南京"), (1, 3, "南京市"), (3, 4, "市长"), (4, 5, "长江"), (4, 7, "长江大桥"), (6, 7, "大桥")}
    example = ["卸下", "下东", "东莞", "台协会", "协会", "会长", "长职", "职务"]
    ex = build_lexicon(example)
    ex_spans = [ex.word(s.word_id) for s in match_spans(ex, "卸下东莞台协会长职务后")]
    ex_ok = sorted(ex_spans) == sorted(example)
    report(5, "lexicon matcher equivalence", agree == 1000 and bridge_ok and ex_ok,
           f"{agree}/1000 random pairs, bridge lattice {'ok' if bridge_ok else 'wrong'}, 卸下东莞 lattice {'ok' if ex_ok else 'wrong'}")


@pytest.mark.slow
def test_6_overfit():
    data = gen_synthetic(SyntheticSpec(sentences=20, categories=2, seed=7))
    start = time.time()
    res = train(Config(variant="lattice", epochs=300), data.train, data.train, lexicon=Lexicon(data.lexicon_words),
                pretrained={"word": word_table(data)}, stop_at_f1=1.0)
    elapsed = time.time() - start
    ok = res.best_f1 == 1.0 and elapsed < 300
    report(6, "overfit", ok, f"train F1 {res.best_f1:.4f} at epoch {res.best_epoch}, {elapsed:.0f} s")


@pytest.mark.slow
def test_7_directional_claim():
    f1 = {"char": [], "lattice": []}
    for seed in (1, 2, 3):
        data = gen_synthetic(SyntheticSpec(sentences=200, dev_sentences=50, test_sentences=50, lexicon_size=150, seed=seed))
        for variant in f1:
            res = train(Config(variant=variant, epochs=20, seed=seed), data.train, data.dev,
                        lexicon=Lexicon(data.lexicon_words), pretrained={"word": word_table(data)})
            f1[variant].append(score_corpus(res.model, data.test)[2])
    gap = 100 * (np.mean(f1["lattice"]) - np.mean(f1["char"]))
    report(7, "directional claim", gap >= 10,
           f"test F1 char {np.mean(f1['char']):.3f} vs lattice {np.mean(f1['lattice']):.3f}, gap {gap:.1f} points")


def test_8_determinism_and_persistence():
    data = gen_synthetic(SyntheticSpec(sentences=12, dev_sentences=4, lexicon_size=20, seed=8, emb_dim=8))
    cfg = Config(variant="lattice", epochs=3, char_dim=8, word_dim=8, hidden=16)
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for name in ("a", "b"):
            res = train(cfg, data.train, data.dev, Path(tmp) / name, lexicon=Lexicon(data.lexicon_words),
                        pretrained={"word": word_table(data)})
            runs.append((Path(tmp) / name / "metrics.tsv").read_bytes())
        model, _ = load_checkpoint(Path(tmp) / "a")
        same_tags = all(model.predict(s) == res.model.predict(s) for s in data.dev + data.train)
    report(8, "determinism and persistence", runs[0] == runs[1] and same_tags,
           f"metrics logs {'identical' if runs[0] == runs[1] else 'differ'}, reloaded tags {'identical' if same_tags else 'differ'}")


def test_9_codec_round_trips():
    rng = np.random.default_rng(9)
    bioes = 0
    for _ in range(200):
        m, ents, j = int(rng.integers(1, 30)), [], 1
        while True:
            j += int(rng.integers(0, 4))
            if j > m:
                break
            e = min(m, j + int(rng.integers(0, 4)))
            ents.append(Entity(j, e, str(rng.choice(["PER", "LOC", "ORG", "GPE"]))))
            j = e + 1
        bioes += decode_tags(encode_bioes(m, ents)) == ents

    sentences = []
    for _ in range(30):
        words = ["".join(rng.choice(list("南京市长江大桥"), size=int(rng.integers(1, 4)))) for _ in range(int(rng.integers(1, 6)))]
        chars = "".join(words)
        tags = encode_bioes(len(chars), [Entity(1, 1, "PER")] if rng.random() < 0.5 else [])
        sentences.append(Sentence(chars, tags, bmes_from_words(words)))
    with tempfile.TemporaryDirectory() as tmp:
        write_corpus(Path(tmp) / "c.txt", sentences)
        corpus_ok = load_corpus(Path(tmp) / "c.txt") == sentences

    runs_ok = True
    for s in sentences:
        validate_bmes(s.seg)
    for bad in (["B"], ["M", "E"], ["B", "S", "E"], ["E"]):
        try:
            validate_bmes(bad)
            runs_ok = False
        except TagError:
            pass
    report(9, "codec round trips", bioes == 200 and corpus_ok and runs_ok,
           f"{bioes}/200 BIOES sets, corpus round trip {'exact' if corpus_ok else 'differs'}, BMES validation {'ok' if runs_ok else 'broken'}")


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted((k, v) for k, v in globals().items() if k.startswith("test_")):
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
