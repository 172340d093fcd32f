"""Averaged structured perceptron over lattice paths.

Path score is the sum of arc features plus a tag-bigram feature for every pair
of consecutive arcs (with sentence start/end symbols). Decoding is first-order
Viterbi over arcs; equal scores resolve to the lexicographically smallest
arc-id sequence.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..config import Config
from ..core import Analysis, Corpus, Sentence
from ..formats import load_model, save_model
from ..lattice import Arc, Lattice, LatticePath, build_lattice
from ..lexicon import Lexicon
from .base import training_lattices

log = logging.getLogger(__name__)

BOS, EOS = "<S>", "</S>"
KIND = "perceptron"


def arc_features(lat: Lattice, arc: Arc, templates: Sequence[str], affix_len: int = 3) -> list[str]:
    m, tag = arc.morpheme, arc.tag
    form = m.form
    feats = []
    tpl = set(templates)
    if "form" in tpl:
        feats.append(f"f={form}|{tag}")
    if "tag" in tpl:
        feats.append(f"t={tag}")
    if "prefix" in tpl:
        for k in range(1, min(affix_len, len(form)) + 1):
            feats.append(f"p{k}={form[:k]}|{tag}")
    if "suffix" in tpl:
        for k in range(1, min(affix_len, len(form)) + 1):
            feats.append(f"s{k}={form[-k:]}|{tag}")
    surf = lat.surfaces
    t = arc.token_index
    if surf is not None:
        if "surface" in tpl:
            feats.append(f"w={surf[t]}|{tag}")
        if "context" in tpl:
            prev = surf[t - 1] if t > 0 else BOS
            nxt = surf[t + 1] if t + 1 < len(surf) else EOS
            feats.append(f"pw={prev}|{tag}")
            feats.append(f"nw={nxt}|{tag}")
    if "position" in tpl:
        first = arc.from_node == lat.token_boundaries[t]
        last = arc.to_node == lat.token_boundaries[t + 1]
        feats.append(f"b={int(first)}{int(last)}|{tag}")
    return feats


def bigram_feature(prev_tag: str, tag: str) -> str:
    return f"bt={prev_tag}|{tag}"


@dataclass
class PerceptronModel:
    weights: dict[str, float] = field(default_factory=dict)
    templates: tuple[str, ...] = ()
    affix_len: int = 3
    errors_per_epoch: list[int] = field(default_factory=list)

    @property
    def use_bigrams(self) -> bool:
        return "bigram" in self.templates

    def local_scores(self, lat: Lattice, feats: list[list[str]] | None = None) -> dict[int, float]:
        if feats is None:
            feats = [arc_features(lat, a, self.templates, self.affix_len) for a in lat.arcs]
        w = self.weights
        out = {}
        for a, fs in zip(lat.arcs, feats):
            s = 0.0
            for f in fs:
                s += w.get(f, 0.0)
            out[a.id] = s
        return out

    def bigram(self, prev_tag: str, tag: str) -> float:
        if not self.use_bigrams:
            return 0.0
        return self.weights.get(bigram_feature(prev_tag, tag), 0.0)

    def path_score(self, lat: Lattice, path: LatticePath, local=None) -> float:
        """Score accumulated in the same order Viterbi uses."""
        local = self.local_scores(lat) if local is None else local
        s, prev = 0.0, BOS
        for aid in path.arc_ids:
            a = lat.arc_by_id[aid]
            s = s + (self.bigram(prev, a.tag) + local[aid])
            prev = a.tag
        return s + self.bigram(prev, EOS)

    def decode(self, lat: Lattice, feats=None) -> LatticePath:
        local = self.local_scores(lat, feats)
        best: dict[int, tuple[float, tuple[int, ...]]] = {}
        for a in sorted(lat.arcs, key=lambda a: (a.from_node, a.id)):
            step = local[a.id]
            if a.from_node == lat.source:
                cand = (step + self.bigram(BOS, a.tag), (a.id,))
            else:
                cand = None
                for p in lat.in_arcs[a.from_node]:
                    ps, pp = best[p.id]
                    c = (ps + (self.bigram(p.tag, a.tag) + step), pp + (a.id,))
                    if cand is None or c[0] > cand[0] or (c[0] == cand[0] and c[1] < cand[1]):
                        cand = c
            best[a.id] = cand
        final = None
        for p in lat.in_arcs[lat.sink]:
            ps, pp = best[p.id]
            c = (ps + self.bigram(p.tag, EOS), pp)
            if final is None or c[0] > final[0] or (c[0] == final[0] and c[1] < final[1]):
                final = c
        return LatticePath(final[1])

    def predict_lattice(self, lat: Lattice) -> list[Analysis]:
        return lat.project(self.decode(lat))

    def predict(self, sentences: Sequence[Sentence], lex: Lexicon) -> list[list[Analysis]]:
        return [self.predict_lattice(build_lattice(s, lex)) for s in sentences]

    # persistence

    def to_checkpoint(self, config: Config):
        keys = sorted(k for k, v in self.weights.items() if v != 0.0)
        vocab = {"features": keys, "templates": list(self.templates),
                 "errors_per_epoch": self.errors_per_epoch}
        params = {"weights": np.array([self.weights[k] for k in keys], dtype=np.float64)}
        return KIND, config.to_dict(), vocab, params

    def save(self, path, config: Config) -> None:
        save_model(path, *self.to_checkpoint(config))

    @classmethod
    def from_checkpoint(cls, config: dict, vocab: dict, params: dict) -> "PerceptronModel":
        w = params["weights"].reshape(-1)
        keys = vocab["features"]
        if len(keys) != len(w):
            raise ValueError("checkpoint feature list and weight vector differ in length")
        cfg = Config.from_dict(config)
        return cls(dict(zip(keys, (float(x) for x in w))), tuple(vocab["templates"]),
                   cfg.perceptron_affix_len, list(vocab.get("errors_per_epoch", [])))

    @classmethod
    def load(cls, path) -> tuple["PerceptronModel", Config]:
        _, config, vocab, params = load_model(path, expect_kind=KIND)
        return cls.from_checkpoint(config, vocab, params), Config.from_dict(config)


def path_features(model: PerceptronModel, lat: Lattice, path: LatticePath, feats) -> dict[str, float]:
    out: dict[str, float] = {}
    prev = BOS
    for aid in path.arc_ids:
        a = lat.arc_by_id[aid]
        for f in feats[aid]:
            out[f] = out.get(f, 0.0) + 1.0
        if model.use_bigrams:
            b = bigram_feature(prev, a.tag)
            out[b] = out.get(b, 0.0) + 1.0
        prev = a.tag
    if model.use_bigrams:
        b = bigram_feature(prev, EOS)
        out[b] = out.get(b, 0.0) + 1.0
    return out


def train_perceptron(corpus: Corpus, lex: Lexicon, config: Config,
                     rng: np.random.Generator, epochs: int | None = None) -> PerceptronModel:
    """Averaged perceptron; the returned model carries the averaged weights."""
    epochs = config.perceptron_epochs if epochs is None else epochs
    model = PerceptronModel({}, tuple(config.perceptron_templates), config.perceptron_affix_len)
    data = []
    for lat, gold in zip(*training_lattices(corpus, lex, config.lattice_oov_prob, rng)):
        feats = {a.id: arc_features(lat, a, model.templates, model.affix_len) for a in lat.arcs}
        data.append((lat, gold, feats))
    w = model.weights
    u: dict[str, float] = {}  # (step index) * update, for lazy averaging
    step = 0
    for epoch in range(epochs):
        errors = 0
        for i in rng.permutation(len(data)):
            lat, gold, feats = data[i]
            step += 1
            pred = model.decode(lat, [feats[a.id] for a in lat.arcs])
            if pred.arc_ids == gold.arc_ids:
                continue
            errors += 1
            delta = path_features(model, lat, gold, feats)
            for f, v in path_features(model, lat, pred, feats).items():
                delta[f] = delta.get(f, 0.0) - v
            for f, v in delta.items():
                if v:
                    w[f] = w.get(f, 0.0) + v
                    u[f] = u.get(f, 0.0) + (step - 1) * v
        model.errors_per_epoch.append(errors)
        log.info("perceptron epoch %d: %d training errors", epoch + 1, errors)
        if errors == 0:
            break
    if step:
        avg = {f: w[f] - u.get(f, 0.0) / step for f in w}
        model.weights = {f: v for f, v in avg.items() if v != 0.0}
    return model
