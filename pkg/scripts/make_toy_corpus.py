"""Regenerate the bundled toy corpus under data/toy/."""

import argparse
from pathlib import Path

from idloc.corpus import save_corpus, save_ontology
from idloc.toy import TOY_ONTOLOGY, make_null_pool, make_toy_corpus


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data" / "toy"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(out / "train.jsonl", make_toy_corpus(20, n_null=4, n_multi=2, seed=args.seed))
    save_corpus(out / "null_pool.jsonl", make_null_pool(40, seed=args.seed))
    save_ontology(out / "ontology.json", TOY_ONTOLOGY)


if __name__ == "__main__":
    main()
