"""Turning a predicted multi-tag back into segment forms for raw-token input."""
from __future__ import annotations

from collections import Counter, defaultdict
from typing import Iterable

from ..core import Sentence
from ..metrics import UNREALIZED


class SegmentRealizer:
    """Learns surface splits from training gold, without any lexicon.

    Known (surface, multi-tag) pairs reuse their most frequent training split;
    otherwise non-final tags peel off the most frequent form seen for them in
    non-final position.
    """

    def __init__(self, memo=None, clitics=None):
        self.memo: dict[tuple[str, tuple[str, ...]], tuple[str, ...]] = memo or {}
        self.clitics: dict[str, list[str]] = clitics or {}

    @classmethod
    def fit(cls, sentences: Iterable[Sentence]) -> "SegmentRealizer":
        memo_counts: dict[tuple, Counter] = defaultdict(Counter)
        clitic_counts: dict[str, Counter] = defaultdict(Counter)
        for s in sentences:
            for tok, a in zip(s.tokens, s.gold):
                memo_counts[(tok.surface, a.tags)][a.forms] += 1
                for m in a.morphemes[:-1]:
                    clitic_counts[m.tag][m.form] += 1
        memo = {k: min(c, key=lambda f: (-c[f], f)) for k, c in memo_counts.items()}
        clitics = {t: sorted(c, key=lambda f: (-c[f], -len(f), f)) for t, c in clitic_counts.items()}
        return cls(memo, clitics)

    def realize(self, surface: str, tags: tuple[str, ...]) -> tuple[str, ...]:
        tags = tuple(tags)
        hit = self.memo.get((surface, tags))
        if hit is not None:
            return hit
        if len(tags) == 1:
            return (surface,)
        pos, forms = 0, []
        for i, tag in enumerate(tags[:-1]):
            need = len(tags) - i - 1  # chars that must remain for later segments
            for f in self.clitics.get(tag, ()):
                if surface.startswith(f, pos) and len(surface) - pos - len(f) >= need:
                    forms.append(f)
                    pos += len(f)
                    break
            else:
                return (UNREALIZED,) * len(tags)
        forms.append(surface[pos:])
        return tuple(forms)

    def to_dict(self) -> dict:
        return {"memo": [[s, list(t), list(f)] for (s, t), f in sorted(self.memo.items())],
                "clitics": {t: fs for t, fs in sorted(self.clitics.items())}}

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentRealizer":
        memo = {(s, tuple(t)): tuple(f) for s, t, f in d["memo"]}
        return cls(memo, {t: list(fs) for t, fs in d["clitics"].items()})
