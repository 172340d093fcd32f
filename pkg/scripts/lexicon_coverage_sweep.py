"""Grid cells for one seed as the stem inventory grows.

Larger inventories leave more dev words covered by the lexicon but unseen in
training, which is where lattice input helps most.

    python3 scripts/lexicon_coverage_sweep.py --stems 800,2000,4000
"""
from __future__ import annotations

import argparse
import logging

from morpholattice.config import Config
from morpholattice.synth import SynthSpec, generate
from morpholattice.taggers.grid import run_seed


def unseen_in_lexicon(data) -> float:
    seen = {t.surface for s in data.train for t in s.tokens}
    toks = [t.surface for s in data.dev for t in s.tokens]
    return sum(w not in seen and w in data.lexicon for w in toks) / len(toks)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--stems", default="800,2000,4000")
    p.add_argument("--seed", type=int, default=1)
    args = p.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)
    cols = ["crf/ORACLE", "crf/PREDICTED", "crf/RAW_TOKENS", "perceptron/RAW_LATTICES",
            "pointer/RAW_LATTICES"]
    print("stems\tunseen_in_lex\t" + "\t".join(cols) + "\tpointer-raw")
    for n in (int(x) for x in args.stems.split(",")):
        data = generate(SynthSpec(n_stems=n))
        out = run_seed(data.train, data.dev, data.lexicon, Config(), args.seed)
        vals = [100 * out[tuple(c.split("/"))] for c in cols]
        gap = vals[4] - vals[2]
        print(f"{n}\t{unseen_in_lexicon(data):.3f}\t" + "\t".join(f"{v:.2f}" for v in vals) + f"\t{gap:+.2f}",
              flush=True)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
