from __future__ import annotations

from collections import Counter
from enum import Enum

import numpy as np


class Regime(str, Enum):
    ORACLE = "ORACLE"
    PREDICTED = "PREDICTED"
    RAW_TOKENS = "RAW_TOKENS"
    RAW_LATTICES = "RAW_LATTICES"

    @classmethod
    def parse(cls, text: str) -> "Regime":
        try:
            return cls(text.strip().upper().replace("-", "_"))
        except ValueError:
            raise RegimeError(f"unknown regime {text!r}; choose from "
                              f"{', '.join(r.value for r in cls)}") from None


class RegimeError(ValueError):
    pass


COMPATIBLE: dict[str, frozenset[Regime]] = {
    "perceptron": frozenset({Regime.RAW_LATTICES}),
    "crf": frozenset({Regime.ORACLE, Regime.PREDICTED, Regime.RAW_TOKENS}),
    "pointer": frozenset({Regime.RAW_LATTICES, Regime.ORACLE}),
}
MODELS = tuple(COMPATIBLE)


def is_compatible(model: str, regime: Regime | str) -> bool:
    return Regime(regime) in COMPATIBLE[model]


def check_compatible(model: str, regime: Regime | str) -> Regime:
    if model not in COMPATIBLE:
        raise RegimeError(f"unknown model {model!r}; choose from {', '.join(MODELS)}")
    regime = Regime.parse(regime) if isinstance(regime, str) else regime
    if regime not in COMPATIBLE[model]:
        ok = ", ".join(sorted(r.value for r in COMPATIBLE[model]))
        raise RegimeError(f"model {model!r} does not support regime {regime.value} (supports {ok})")
    return regime


STREAMS = {"perceptron": 1, "crf-segmented": 2, "crf-raw": 3, "pointer": 4}


def model_rng(seed: int, stream: str) -> np.random.Generator:
    """Independent deterministic stream per (seed, model)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, STREAMS[stream]])))


def training_lattices(corpus, lex, oov_prob: float, rng: np.random.Generator):
    """Gold-completed training lattices and gold paths.

    Each token whose surface occurs once in ``corpus`` is analyzed as an unknown
    word with probability ``oov_prob``, so lattice taggers see unknown-word
    expansions during training the way the CRF sees UNK word ids.
    """
    from ..lattice import build_training_lattice

    counts = Counter(t.surface for s in corpus for t in s.tokens)
    lats, paths = [], []
    for s in corpus:
        draws = rng.random(len(s)) if oov_prob > 0 else np.ones(len(s))
        unknown = {i for i, t in enumerate(s.tokens) if counts[t.surface] == 1 and draws[i] < oov_prob}
        lat, path = build_training_lattice(s, lex, unknown)
        lats.append(lat)
        paths.append(path)
    return lats, paths
