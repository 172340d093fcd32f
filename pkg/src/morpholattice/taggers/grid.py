"""Train every compatible (model, regime) pair and average dev F1 over seeds."""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from ..config import Config
from ..core import Corpus
from ..lattice import build_lattice, oracle_lattice
from ..lexicon import Lexicon
from ..metrics import MODEL_ORDER, REGIME_ORDER, seg_pos_f1
from .base import is_compatible, model_rng
from .crf import train_crf
from .perceptron import train_perceptron
from .pointer import train_pointer

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GridSpec:
    seeds: tuple[int, ...] = (1, 2, 3)
    # tail of the training split held out for early stopping, never the dev split
    tune_size: int = 200


@dataclass
class GridResult:
    # (model, regime) -> mean dev F1, None where the pair is incompatible
    cells: dict[tuple[str, str], float | None]
    per_seed: dict[tuple[str, str], list[float]] = field(default_factory=dict)
    seconds: float = 0.0

    def rows(self):
        return [(m, r, v) for (m, r), v in self.cells.items()]


def _f1(dev, pred) -> float:
    return seg_pos_f1([s.gold for s in dev], pred).f1


def run_seed(train: Corpus, dev: Corpus, lex: Lexicon, config: Config, seed: int,
             tune_size: int = 200) -> dict[tuple[str, str], float]:
    cfg = config.replace(seed=seed)
    sents = list(train)
    tune_size = min(tune_size, len(sents) // 5)
    fit = Corpus.from_sentences(sents[:len(sents) - tune_size]) if tune_size else train
    tune = sents[len(sents) - tune_size:] if tune_size else None
    dev = list(dev)
    out = {}

    t = time.perf_counter()
    perc = train_perceptron(train, lex, cfg, model_rng(seed, "perceptron"))
    perc_dev = perc.predict(dev, lex)
    out[("perceptron", "RAW_LATTICES")] = _f1(dev, perc_dev)
    log.info("seed %d perceptron %.1fs", seed, time.perf_counter() - t)

    t = time.perf_counter()
    seg = train_crf(fit, cfg, model_rng(seed, "crf-segmented"), view="segmented", dev=tune)
    out[("crf", "ORACLE")] = _f1(dev, seg.predict(dev))
    out[("crf", "PREDICTED")] = _f1(dev, seg.predict(dev, [[a.forms for a in p] for p in perc_dev]))
    log.info("seed %d crf segmented %.1fs", seed, time.perf_counter() - t)

    t = time.perf_counter()
    raw = train_crf(fit, cfg, model_rng(seed, "crf-raw"), view="raw", dev=tune)
    out[("crf", "RAW_TOKENS")] = _f1(dev, raw.predict(dev))
    log.info("seed %d crf raw %.1fs", seed, time.perf_counter() - t)

    t = time.perf_counter()
    ptr = train_pointer(fit, lex, cfg, model_rng(seed, "pointer"), dev=tune)
    out[("pointer", "RAW_LATTICES")] = _f1(dev, ptr.predict_lattices([build_lattice(s, lex) for s in dev]))
    out[("pointer", "ORACLE")] = _f1(dev, ptr.predict_lattices([oracle_lattice(s) for s in dev]))
    log.info("seed %d pointer %.1fs", seed, time.perf_counter() - t)
    for k, v in sorted(out.items()):
        log.info("seed %d %s/%s F1 %.4f", seed, k[0], k[1], v)
    return out


def run_regime_grid(train: Corpus, dev: Corpus, lex: Lexicon, config: Config | None = None,
                    spec: GridSpec = GridSpec()) -> GridResult:
    config = config or Config()
    start = time.perf_counter()
    per_seed: dict[tuple[str, str], list[float]] = {}
    for seed in spec.seeds:
        for k, v in run_seed(train, dev, lex, config, seed, spec.tune_size).items():
            per_seed.setdefault(k, []).append(v)
    cells: dict[tuple[str, str], float | None] = {}
    for m in MODEL_ORDER:
        for r in REGIME_ORDER:
            cells[(m, r)] = float(np.mean(per_seed[(m, r)])) if is_compatible(m, r) else None
    return GridResult(cells, per_seed, time.perf_counter() - start)
