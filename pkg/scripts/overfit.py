"""Train the lattice model on a 20-sentence synthetic corpus until it fits the training set."""
import argparse
import time

from latticener.config import Config
from latticener.lexicon import Lexicon
from latticener.synthetic import SyntheticSpec, gen_synthetic, word_table
from latticener.train import train


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--variant", default="lattice")
    ap.add_argument("--epochs", type=int, default=300)
    ap.add_argument("--dropout", type=float, default=0.5)
    ap.add_argument("--seed", type=int, default=7, help="corpus seed")
    args = ap.parse_args()

    data = gen_synthetic(SyntheticSpec(sentences=20, categories=2, lexicon_size=30, seed=args.seed))
    cfg = Config(variant=args.variant, epochs=args.epochs, dropout=args.dropout)
    start = time.time()
    res = train(cfg, data.train, data.train, lexicon=Lexicon(data.lexicon_words),
                pretrained={"word": word_table(data)}, stop_at_f1=1.0)
    print(f"{args.variant}: train F1 {res.best_f1:.4f} at epoch {res.best_epoch} "
          f"({time.time() - start:.1f} s)")


if __name__ == "__main__":
    main()
