"""Random lattices and toy corpora for property tests and sanity scripts."""
from __future__ import annotations

import numpy as np

from .core import Analysis, Morpheme, Sentence
from .lattice import Arc, Lattice, check_lattice, path_count
from .lexicon import Lexicon

FORMS = ("h", "w", "b", "pil", "hpil", "ild", "at", "bit", "ktb", "sfr")
TAGS = ("DET", "CONJ", "ADP", "NOUN", "VERB", "ADJ", "ACC")


def example_two() -> Sentence:
    """h+ild hpil at h+pil: the child drew the elephant."""
    return Sentence.from_gold([Analysis.parse("h/DET ild/NOUN"), Analysis.parse("hpil/VERB"),
                               Analysis.parse("at/ACC"), Analysis.parse("h/DET pil/NOUN")])


def example_two_lexicon() -> Lexicon:
    return Lexicon({
        "hild": (Analysis.parse("h/DET ild/NOUN"),),
        "hpil": (Analysis.parse("h/DET pil/NOUN"), Analysis.parse("hpil/VERB")),
        "at": (Analysis.parse("at/ACC"),),
    })


def random_lattice(rng: np.random.Generator, max_tokens: int = 4, max_inner: int = 3,
                   max_extra: int = 3, max_paths: int | None = 1000) -> Lattice:
    """A valid lattice whose token spans are small random DAGs.

    Interior nodes may be shared by several paths, unlike lexicon-built
    lattices, so decoders are exercised on general layouts.
    """
    while True:
        lat = _random_lattice(rng, max_tokens, max_inner, max_extra)
        if max_paths is None or path_count(lat) <= max_paths:
            return lat


def _morpheme(rng) -> Morpheme:
    return Morpheme(FORMS[int(rng.integers(len(FORMS)))], TAGS[int(rng.integers(len(TAGS)))])


def _random_lattice(rng, max_tokens, max_inner, max_extra) -> Lattice:
    n_tok = int(rng.integers(1, max_tokens + 1))
    edges: list[tuple[int, int, int]] = []
    boundaries = [0]
    nxt = 1
    for t in range(n_tok):
        lo = boundaries[-1]
        k = int(rng.integers(0, max_inner + 1))
        inner = list(range(nxt, nxt + k))
        hi = nxt + k
        nxt = hi + 1
        nodes = [lo] + inner + [hi]
        pairs = set()
        if k == 0 or rng.random() < 0.5:
            pairs.add((lo, hi))
        for pos, n in enumerate(inner, 1):
            # one predecessor and one successor keep every node on a path
            pairs.add((nodes[int(rng.integers(0, pos))], n))
            pairs.add((n, nodes[int(rng.integers(pos + 1, len(nodes)))]))
        for _ in range(int(rng.integers(0, max_extra + 1))):
            i, j = sorted(rng.choice(len(nodes), 2, replace=False).tolist())
            pairs.add((nodes[i], nodes[j]))
        for a, b in sorted(pairs):
            for _ in range(1 + int(rng.random() < 0.2)):  # occasional parallel arcs
                edges.append((a, b, t))
        boundaries.append(hi)
    order = rng.permutation(len(edges))  # arc ids need not follow node order
    arcs = [Arc(i, *edges[j][:2], _morpheme(rng), edges[j][2]) for i, j in enumerate(order)]
    lat = Lattice(nxt, tuple(arcs), tuple(boundaries))
    check_lattice(lat)
    return lat


def random_analysis(rng: np.random.Generator, max_len: int = 3) -> Analysis:
    return Analysis(tuple(_morpheme(rng) for _ in range(int(rng.integers(1, max_len + 1)))))


def random_gold_sentence(rng: np.random.Generator, max_tokens: int = 5) -> Sentence:
    return Sentence.from_gold([random_analysis(rng) for _ in range(int(rng.integers(1, max_tokens + 1)))])
