"""Domain types: morphemes, analyses, multi-tags, sentences and corpora.

Every type here is an immutable value. Equality and hashing of a
:class:`Morpheme` look only at ``(form, tag)``; lemma and features are carried
along for file fidelity but never take part in disambiguation or scoring.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

MAX_MORPHEMES_PER_TOKEN = 7
LABEL_SEP = "+"


class CorpusError(ValueError):
    pass


def _check_symbol(what: str, value: str) -> None:
    if not isinstance(value, str) or not value:
        raise ValueError(f"{what} must be a non-empty string, got {value!r}")
    if any(ch.isspace() for ch in value):
        raise ValueError(f"{what} {value!r} contains whitespace")


@dataclass(frozen=True)
class Morpheme:
    form: str
    tag: str
    lemma: str | None = field(default=None, compare=False)
    feats: tuple[tuple[str, str], ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        _check_symbol("morpheme form", self.form)
        _check_symbol("morpheme tag", self.tag)
        if isinstance(self.feats, Mapping):
            object.__setattr__(self, "feats", tuple(sorted(self.feats.items())))

    @property
    def pair(self) -> tuple[str, str]:
        return (self.form, self.tag)

    def __str__(self):
        return f"{self.form}/{self.tag}"


@dataclass(frozen=True)
class Analysis:
    """Ordered morpheme sequence for one token."""

    morphemes: tuple[Morpheme, ...]

    def __post_init__(self):
        ms = tuple(self.morphemes)
        if not ms:
            raise ValueError("an analysis needs at least one morpheme")
        object.__setattr__(self, "morphemes", ms)

    @classmethod
    def of(cls, *pairs: tuple[str, str]) -> "Analysis":
        return cls(tuple(Morpheme(f, t) for f, t in pairs))

    @classmethod
    def parse(cls, text: str) -> "Analysis":
        """Parse ``"h/DET pil/NOUN"`` style text."""
        items = text.split()
        if not items:
            raise ValueError("empty analysis")
        ms = []
        for item in items:
            form, sep, tag = item.rpartition("/")
            if not sep or not form or not tag:
                raise ValueError(f"bad morpheme item {item!r}, expected form/tag")
            ms.append(Morpheme(form, tag))
        return cls(tuple(ms))

    def __len__(self):
        return len(self.morphemes)

    def __iter__(self):
        return iter(self.morphemes)

    @property
    def forms(self) -> tuple[str, ...]:
        return tuple(m.form for m in self.morphemes)

    @property
    def tags(self) -> tuple[str, ...]:
        return tuple(m.tag for m in self.morphemes)

    @property
    def pairs(self) -> tuple[tuple[str, str], ...]:
        return tuple(m.pair for m in self.morphemes)

    @property
    def surface(self) -> str:
        return "".join(self.forms)

    def __str__(self):
        return " ".join(str(m) for m in self.morphemes)


def check_analysis(analysis: Analysis, max_morphemes: int = MAX_MORPHEMES_PER_TOKEN) -> None:
    if len(analysis) > max_morphemes:
        raise ValueError(
            f"analysis {analysis} has {len(analysis)} morphemes, limit is {max_morphemes}")


@dataclass(frozen=True)
class MultiTag:
    tags: tuple[str, ...]

    def __post_init__(self):
        tags = tuple(self.tags)
        if not tags:
            raise ValueError("a multi-tag needs at least one tag")
        object.__setattr__(self, "tags", tags)

    def __len__(self):
        return len(self.tags)

    def __str__(self):
        return canonical_label(self)


def multitag_of(analysis: Analysis) -> MultiTag:
    return MultiTag(analysis.tags)


def canonical_label(mt: MultiTag) -> str:
    for t in mt.tags:
        if LABEL_SEP in t:
            raise ValueError(f"tag {t!r} contains {LABEL_SEP!r}; label would not be invertible")
    return LABEL_SEP.join(mt.tags)


def parse_label(label: str) -> MultiTag:
    tags = tuple(label.split(LABEL_SEP))
    if any(not t for t in tags):
        raise ValueError(f"malformed multi-tag label {label!r}")
    return MultiTag(tags)


@dataclass(frozen=True)
class Token:
    surface: str
    index: int

    def __post_init__(self):
        _check_symbol("token surface", self.surface)


@dataclass(frozen=True)
class Sentence:
    tokens: tuple[Token, ...]
    gold: tuple[Analysis, ...] | None = None

    def __post_init__(self):
        toks = tuple(self.tokens)
        object.__setattr__(self, "tokens", toks)
        for i, tok in enumerate(toks):
            if tok.index != i:
                raise ValueError(f"token indices must be contiguous from 0, got {tok.index} at {i}")
        if self.gold is not None:
            gold = tuple(self.gold)
            if len(gold) != len(toks):
                raise ValueError(f"{len(gold)} gold analyses for {len(toks)} tokens")
            object.__setattr__(self, "gold", gold)

    @classmethod
    def from_surfaces(cls, surfaces: Iterable[str],
                      gold: Sequence[Analysis] | None = None) -> "Sentence":
        return cls(tuple(Token(s, i) for i, s in enumerate(surfaces)),
                   None if gold is None else tuple(gold))

    @classmethod
    def from_gold(cls, gold: Sequence[Analysis],
                  surfaces: Sequence[str] | None = None) -> "Sentence":
        if surfaces is None:
            surfaces = [a.surface for a in gold]
        return cls.from_surfaces(surfaces, gold)

    def __len__(self):
        return len(self.tokens)

    @property
    def surfaces(self) -> tuple[str, ...]:
        return tuple(t.surface for t in self.tokens)


def build_inventories(sentences: Iterable[Sentence]) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Tag and multi-tag inventories in first-occurrence order."""
    tags: dict[str, None] = {}
    labels: dict[str, None] = {}
    n = 0
    for sent in sentences:
        n += 1
        if sent.gold is None:
            raise CorpusError("cannot build inventories: sentence without gold analyses")
        for a in sent.gold:
            for t in a.tags:
                tags.setdefault(t, None)
            labels.setdefault(canonical_label(multitag_of(a)), None)
    if n == 0:
        raise CorpusError("cannot build inventories from an empty corpus")
    return tuple(tags), tuple(labels)


@dataclass(frozen=True)
class Corpus:
    sentences: tuple[Sentence, ...]
    tag_inventory: tuple[str, ...] = ()
    multitag_inventory: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        known = set(self.tag_inventory)
        for sent in self.sentences:
            for a in sent.gold or ():
                for t in a.tags:
                    if t not in known:
                        raise CorpusError(f"gold tag {t!r} missing from tag inventory")

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sentence]) -> "Corpus":
        sentences = tuple(sentences)
        if sentences and all(s.gold is not None for s in sentences):
            tags, labels = build_inventories(sentences)
        else:
            tags, labels = (), ()
        return cls(sentences, tags, labels)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    @property
    def has_gold(self) -> bool:
        return bool(self.sentences) and all(s.gold is not None for s in self.sentences)
