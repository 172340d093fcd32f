"""Synthetic fusional language for desk-scale experiments.

Tokens are a chain of proclitics (article, conjunction, prepositions,
subordinator) attached to an open-class stem, plus a free accusative marker.
Two kinds of ambiguity are planted on purpose:

* clitic attachment: a stem that spells like clitic + another stem (``h+pil``
  DET+NOUN against ``hpil`` VERB);
* class homographs: one stem form listed under two open classes.

The lexicon lists every (clitic chain, stem) surface the grammar can produce.
Dev sentences additionally draw a fixed share of stems that are absent from
the lexicon, which only the unknown-word rules can analyze.
"""
from __future__ import annotations

import os
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .core import Analysis, Corpus, Morpheme, Sentence
from .formats import format_gold
from .lexicon import DEFAULT_PREFIXES, Lexicon, format_lexicon

ALPHABET = "abgdhwzxviklmnsypcqreft"

DEF = ("h", "DET")
CONJ = ("w", "CONJ")
PREPS = (("b", "ADP"), ("k", "ADP"), ("l", "ADP"), ("m", "ADP"))
SUBORD = ("f", "SCONJ")
ACC = ("at", "ACC")

ROLES = ("NOUN", "VERB", "ADJ", "PROPN")
ROLE_SHARE = {"NOUN": 0.4, "VERB": 0.25, "ADJ": 0.2, "PROPN": 0.15}


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    seed: int = 7
    n_stems: int = 4000
    open_classes: tuple[str, ...] = ROLES
    ambiguity: float = 0.4
    oov: float = 0.1
    min_len: int = 3
    max_len: int = 8
    train_size: int = 2000
    dev_size: int = 500
    homograph_share: float = 0.25
    zipf: float = 1.0

    def __post_init__(self):
        for name in ("ambiguity", "oov", "homograph_share"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1], got {v}")
        for name in ("n_stems", "min_len", "train_size", "dev_size"):
            if getattr(self, name) < 1:
                raise SynthError(f"{name} must be >= 1")
        if self.max_len < self.min_len:
            raise SynthError("max_len must be >= min_len")
        if not self.open_classes:
            raise SynthError("need at least one open class")
        if self.ambiguity > 0 and len(set(self.open_classes)) < 2:
            raise SynthError("ambiguity needs at least two open-class tags to choose between")


@dataclass
class SynthData:
    train: Corpus
    dev: Corpus
    lexicon: Lexicon
    # per split: fraction of tokens whose lexicon entry has >= 2 analyses
    ambiguous_fraction: dict[str, float]
    oov_fraction: dict[str, float]


class _Gen:
    def __init__(self, spec: SynthSpec):
        self.spec = spec
        self.rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([spec.seed, 7919])))
        classes = tuple(dict.fromkeys(spec.open_classes))
        # grammar roles map onto the configured classes by position
        self.role_tag = {r: classes[min(i, len(classes) - 1)] for i, r in enumerate(ROLES)}
        self.chains = self._chains()

    def _chains(self):
        def tup(*ms):
            return tuple(ms)

        nominal_pp = [tup(p) for p in PREPS] + [tup(p, DEF) for p in PREPS]
        out = {
            "NOUN": [tup(), tup(DEF)] + nominal_pp + [(CONJ,) + c for c in nominal_pp],
            "ADJ": [tup(), tup(DEF)],
            "PROPN": [tup()] + [tup(p) for p in PREPS] + [tup(CONJ, p) for p in PREPS],
            "VERB": [tup(), tup(CONJ), tup(SUBORD)],
        }
        merged: dict[str, list] = defaultdict(list)
        for role, chains in out.items():
            tag = self.role_tag[role]
            for c in chains:
                if c not in merged[tag]:
                    merged[tag].append(c)
        return dict(merged)

    def _word(self, taken: set) -> str:
        while True:
            n = int(self.rng.integers(2, 5))
            w = "".join(ALPHABET[i] for i in self.rng.integers(0, len(ALPHABET), n))
            if w not in taken and w != ACC[0]:
                taken.add(w)
                return w

    def build_stems(self):
        spec = self.spec
        taken: set = set()
        roles = [r for r in ROLES]
        share = np.array([ROLE_SHARE[r] for r in roles])
        counts = np.floor(share / share.sum() * spec.n_stems).astype(int)
        counts[0] += spec.n_stems - counts.sum()
        stems: dict[str, list[str]] = defaultdict(list)  # tag -> stem forms
        for role, n in zip(roles, counts):
            tag = self.role_tag[role]
            for _ in range(max(int(n), 1)):
                stems[tag].append(self._word(taken))
        oov_stems: dict[str, list[str]] = defaultdict(list)
        for tag in stems:
            for _ in range(max(10, len(stems[tag]) // 3)):
                oov_stems[tag].append(self._word(taken))
        self.stems = {t: list(v) for t, v in stems.items()}
        self.oov_stems = {t: list(v) for t, v in oov_stems.items()}
        if spec.ambiguity > 0:
            self._plant_homographs(taken)
        self._weights()

    def _plant_homographs(self, taken: set):
        spec = self.spec
        tags = sorted(self.stems)
        slot_types = [(t, c) for t in tags for c in self.chains[t]]
        budget = max(len(slot_types), int(round(spec.homograph_share * spec.n_stems)))
        planted = 0
        i = 0
        while planted < budget and i < 20 * budget:
            tag, chain = slot_types[i % len(slot_types)]
            i += 1
            others = [t for t in tags if t != tag]
            base = self.stems[tag][int(self.rng.integers(len(self.stems[tag])))]
            other = others[int(self.rng.integers(len(others)))]
            form = "".join(f for f, _ in chain) + base
            if form in self.stems[other]:
                continue
            self.stems[other].append(form)
            taken.add(form)
            planted += 1

    def _weights(self):
        self.weights = {}
        for tag, forms in self.stems.items():
            ranks = self.rng.permutation(len(forms)) + 1
            w = 1.0 / ranks.astype(float) ** self.spec.zipf
            self.weights[tag] = w / w.sum()

    def build_lexicon(self) -> Lexicon:
        entries: dict[str, list[Analysis]] = defaultdict(list)
        for tag, forms in self.stems.items():
            for s in forms:
                for chain in self.chains[tag]:
                    a = Analysis(tuple(Morpheme(f, t) for f, t in chain) + (Morpheme(s, tag),))
                    entries[a.surface].append(a)
        entries[ACC[0]].append(Analysis.of(ACC))
        self.lexicon = Lexicon({k: tuple(v) for k, v in entries.items()},
                               prefix_table=DEFAULT_PREFIXES,
                               open_class_tags=tuple(dict.fromkeys(self.spec.open_classes)))
        # readings available per slot type, split by ambiguity
        self.readings: dict[tuple, tuple[list, list]] = {}
        for tag, forms in self.stems.items():
            for chain in self.chains[tag]:
                amb, unamb = [], []
                prefix = "".join(f for f, _ in chain)
                for j, s in enumerate(forms):
                    n = len(self.lexicon.lookup(prefix + s))
                    (amb if n >= 2 else unamb).append(j)
                self.readings[(tag, chain)] = (amb, unamb)
        return self.lexicon

    # sentence skeletons: lists of slots, a slot is ("acc",) or (tag, chain)

    def _np(self, definite: bool, lead=()) -> list:
        r = self.rng
        if r.random() < 0.2:
            head = (self.role_tag["PROPN"], lead)
            return [head]
        noun_chain = lead + ((DEF,) if definite else ())
        out = [(self.role_tag["NOUN"], noun_chain)]
        if r.random() < 0.4:
            out.append((self.role_tag["ADJ"], (DEF,) if definite else ()))
        return out

    def _pp(self) -> list:
        r = self.rng
        prep = PREPS[int(r.integers(len(PREPS)))]
        lead = (CONJ, prep) if r.random() < 0.2 else (prep,)
        return self._np(bool(r.random() < 0.5), lead)

    def _verb(self, first: bool) -> tuple:
        r = self.rng
        x = r.random()
        chain = () if x < 0.7 else ((CONJ,) if x < 0.9 or not first else (SUBORD,))
        return (self.role_tag["VERB"], chain)

    def _clause(self) -> list:
        r = self.rng
        subj = self._np(bool(r.random() < 0.6))
        verb = [self._verb(True)]
        out = subj + verb if r.random() < 0.8 else verb + subj
        x = r.random()
        if x < 0.5:
            out += [("acc",)] + self._np(True)
        elif x < 0.7:
            out += self._np(False)
        while r.random() < 0.35:
            out += self._pp()
        return out

    def skeleton(self) -> list:
        spec = self.spec
        for _ in range(1000):
            sk = self._clause()
            if self.rng.random() < 0.25:
                sk += [(self.role_tag["VERB"], (CONJ,))] + (
                    [("acc",)] + self._np(True) if self.rng.random() < 0.5 else [])
            if spec.min_len <= len(sk) <= spec.max_len:
                return sk
        raise SynthError(f"grammar cannot produce sentences of length {spec.min_len}..{spec.max_len}")

    def _pick(self, tag, idx):
        w = self.weights[tag][idx]
        return idx[int(self.rng.choice(len(idx), p=w / w.sum()))]

    def split(self, n_sents: int, oov: float) -> Corpus:
        spec = self.spec
        skels = [self.skeleton() for _ in range(n_sents)]
        slots = [(i, j) for i, sk in enumerate(skels) for j, s in enumerate(sk)]
        free = [k for k, (i, j) in enumerate(slots) if skels[i][j] != ("acc",)]
        can_amb = [k for k in free if self.readings[skels[slots[k][0]][slots[k][1]]][0]]
        n_amb = int(round(spec.ambiguity * len(slots)))
        if n_amb > len(can_amb):
            raise SynthError(f"ambiguity {spec.ambiguity} needs {n_amb} ambiguous tokens but only "
                             f"{len(can_amb)} slots can hold one")
        amb = set(self.rng.choice(can_amb, n_amb, replace=False).tolist()) if n_amb else set()
        rest = [k for k in free if k not in amb]
        n_oov = int(round(oov * len(slots)))
        if n_oov > len(rest):
            raise SynthError(f"oov rate {oov} leaves too few content slots")
        oovs = set(self.rng.choice(rest, n_oov, replace=False).tolist()) if n_oov else set()
        sents = []
        k = 0
        for sk in skels:
            gold = []
            for slot in sk:
                if slot == ("acc",):
                    gold.append(Analysis.of(ACC))
                else:
                    gold.append(self._realize(slot, k in amb, k in oovs))
                k += 1
            sents.append(Sentence.from_gold(gold))
        return Corpus.from_sentences(sents)

    def _realize(self, slot, ambiguous: bool, oov: bool) -> Analysis:
        tag, chain = slot
        chain_ms = tuple(Morpheme(f, t) for f, t in chain)
        prefix = "".join(f for f, _ in chain)
        if oov:
            pool = self.oov_stems[tag]
            for _ in range(100):
                s = pool[int(self.rng.integers(len(pool)))]
                if prefix + s not in self.lexicon:
                    return Analysis(chain_ms + (Morpheme(s, tag),))
            raise SynthError("could not draw an unknown stem outside the lexicon")
        amb, unamb = self.readings[slot]
        idx = amb if ambiguous else unamb
        if not idx:
            raise SynthError(f"no {'ambiguous' if ambiguous else 'unambiguous'} reading for {slot}")
        s = self.stems[tag][self._pick(tag, np.array(idx))]
        return Analysis(chain_ms + (Morpheme(s, tag),))


def ambiguous_fraction(corpus: Corpus, lex: Lexicon) -> float:
    n = amb = 0
    for s in corpus:
        for t in s.tokens:
            n += 1
            amb += len(lex.lookup(t.surface)) >= 2
    return amb / n if n else 0.0


def oov_fraction(corpus: Corpus, lex: Lexicon) -> float:
    n = miss = 0
    for s in corpus:
        for t in s.tokens:
            n += 1
            miss += t.surface not in lex
    return miss / n if n else 0.0


def generate(spec: SynthSpec) -> SynthData:
    g = _Gen(spec)
    g.build_stems()
    lex = g.build_lexicon()
    train = g.split(spec.train_size, 0.0)
    dev = g.split(spec.dev_size, spec.oov)
    return SynthData(train, dev, lex,
                     {"train": ambiguous_fraction(train, lex), "dev": ambiguous_fraction(dev, lex)},
                     {"train": oov_fraction(train, lex), "dev": oov_fraction(dev, lex)})


def write_synth(data: SynthData, out_dir: str | os.PathLike) -> dict[str, str]:
    from .formats import atomic_write_text

    os.makedirs(out_dir, exist_ok=True)
    paths = {"train": os.path.join(out_dir, "train.gold"),
             "dev": os.path.join(out_dir, "dev.gold"),
             "lexicon": os.path.join(out_dir, "lexicon.txt")}
    atomic_write_text(paths["train"], format_gold(data.train))
    atomic_write_text(paths["dev"], format_gold(data.dev))
    atomic_write_text(paths["lexicon"], format_lexicon(data.lexicon))
    return paths
