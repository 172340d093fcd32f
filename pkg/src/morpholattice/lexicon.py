"""Token lexicon with rule-based expansion for unknown word forms.

File format (UTF-8, one surface token per line)::

    #morpholattice-v1
    #prefix h DET
    #openclass NOUN
    hpil<TAB>h/DET pil/NOUN<TAB>hpil/VERB

``#prefix FORM TAG`` and ``#openclass TAG`` configure the clitic table and the
open-class tags used for unknown words, ``#maxprefix N`` sets the longest clitic
chain and ``#noprefix`` declares an explicitly empty clitic table. Any other
line starting with ``#`` is a comment. Files without table directives get the
defaults below.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .core import MAX_MORPHEMES_PER_TOKEN, Analysis, Morpheme

FORMAT_HEADER = "#morpholattice-v1"

DEFAULT_PREFIXES: tuple[tuple[str, str], ...] = (
    ("h", "DET"),
    ("w", "CONJ"),
    ("b", "ADP"),
    ("k", "ADP"),
    ("l", "ADP"),
    ("m", "ADP"),
    ("f", "SCONJ"),
)
DEFAULT_OPEN_CLASSES: tuple[str, ...] = ("NOUN", "VERB", "ADJ", "PROPN")
DEFAULT_MAX_PREFIX_CHAIN = 3


class LexiconError(ValueError):
    pass


def analysis_key(a: Analysis) -> tuple[tuple[str, str], ...]:
    return a.pairs


def canonical_order(analyses: Iterable[Analysis]) -> tuple[Analysis, ...]:
    """Deduplicate and sort analyses by their (form, tag) sequence."""
    uniq = {analysis_key(a): a for a in analyses}
    return tuple(uniq[k] for k in sorted(uniq))


@dataclass(frozen=True)
class Lexicon:
    entries: Mapping[str, tuple[Analysis, ...]] = field(default_factory=dict)
    prefix_table: tuple[tuple[str, str], ...] = DEFAULT_PREFIXES
    open_class_tags: tuple[str, ...] = DEFAULT_OPEN_CLASSES
    max_prefix_chain: int = DEFAULT_MAX_PREFIX_CHAIN
    max_morphemes: int = MAX_MORPHEMES_PER_TOKEN

    def __post_init__(self):
        entries = {s: canonical_order(v) for s, v in self.entries.items()}
        object.__setattr__(self, "entries", entries)
        table = tuple((f, t) for f, t in self.prefix_table)
        if len(set(table)) != len(table):
            raise LexiconError("duplicate (form, tag) pair in prefix table")
        for f, t in table:
            Morpheme(f, t)
        object.__setattr__(self, "prefix_table", table)
        if not self.open_class_tags:
            raise LexiconError("open class tag set must not be empty")
        object.__setattr__(self, "open_class_tags", tuple(dict.fromkeys(self.open_class_tags)))
        if self.max_prefix_chain < 0:
            raise LexiconError("max_prefix_chain must be >= 0")

    def __contains__(self, surface: str) -> bool:
        return surface in self.entries

    def __len__(self):
        return len(self.entries)

    def lookup(self, surface: str) -> tuple[Analysis, ...]:
        return self.entries.get(surface, ())

    def analyze_oov(self, surface: str) -> tuple[Analysis, ...]:
        return analyze_oov(self, surface)

    def analyses(self, surface: str) -> tuple[Analysis, ...]:
        """Lexicon analyses, or the unknown-word expansion when there are none."""
        found = self.lookup(surface)
        return found if found else analyze_oov(self, surface)


def lookup(lex: Lexicon, surface: str) -> tuple[Analysis, ...]:
    return lex.lookup(surface)


def _prefix_chains(lex: Lexicon, surface: str):
    # every way of peeling up to max_prefix_chain clitics off the left edge
    # while leaving a non-empty remainder
    stack = [((), 0)]
    while stack:
        chain, pos = stack.pop()
        yield chain, surface[pos:]
        if len(chain) == lex.max_prefix_chain:
            continue
        nxt = []
        for form, tag in lex.prefix_table:
            if surface.startswith(form, pos) and pos + len(form) < len(surface):
                nxt.append((chain + (Morpheme(form, tag),), pos + len(form)))
        stack.extend(reversed(nxt))


def analyze_oov(lex: Lexicon, surface: str) -> tuple[Analysis, ...]:
    if not surface:
        raise ValueError("empty surface")
    out = []
    for chain, rest in _prefix_chains(lex, surface):
        if len(chain) + 1 <= lex.max_morphemes:
            for tag in lex.open_class_tags:
                out.append(Analysis(chain + (Morpheme(rest, tag),)))
        if chain:
            for a in lex.lookup(rest):
                # spliced entries must still spell the surface
                if a.surface == rest and len(chain) + len(a) <= lex.max_morphemes:
                    out.append(Analysis(chain + a.morphemes))
    return canonical_order(out)


def _fail(path, lineno, msg):
    raise LexiconError(f"{path}:{lineno}: {msg}")


def parse_lexicon(lines: Iterable[str], path: str = "<lexicon>",
                  max_morphemes: int = MAX_MORPHEMES_PER_TOKEN) -> Lexicon:
    entries: dict[str, list[Analysis]] = {}
    prefixes: list[tuple[str, str]] = []
    open_classes: list[str] = []
    saw_prefix = saw_open = False
    max_chain = DEFAULT_MAX_PREFIX_CHAIN
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n")
        if line.endswith("\r"):
            line = line[:-1]
        if not line.strip():
            continue
        if line.startswith("#"):
            parts = line.split()
            head = parts[0]
            if head == "#prefix":
                if len(parts) != 3:
                    _fail(path, lineno, "expected '#prefix FORM TAG'")
                saw_prefix = True
                if (parts[1], parts[2]) not in prefixes:
                    prefixes.append((parts[1], parts[2]))
            elif head == "#noprefix":
                saw_prefix = True
            elif head == "#openclass":
                if len(parts) != 2:
                    _fail(path, lineno, "expected '#openclass TAG'")
                saw_open = True
                if parts[1] not in open_classes:
                    open_classes.append(parts[1])
            elif head == "#maxprefix":
                if len(parts) != 2 or not parts[1].isdigit():
                    _fail(path, lineno, "expected '#maxprefix N'")
                max_chain = int(parts[1])
            continue
        cols = line.split("\t")
        surface = cols[0]
        if not surface or any(c.isspace() for c in surface):
            _fail(path, lineno, f"bad surface token {surface!r}")
        if len(cols) < 2:
            _fail(path, lineno, f"no analyses for {surface!r}")
        bucket = entries.setdefault(surface, [])
        for col in cols[1:]:
            try:
                a = Analysis.parse(col)
            except ValueError as e:
                _fail(path, lineno, str(e))
            if len(a) > max_morphemes:
                _fail(path, lineno, f"analysis with {len(a)} morphemes exceeds limit {max_morphemes}")
            bucket.append(a)
    return Lexicon(
        entries={s: tuple(v) for s, v in entries.items()},
        prefix_table=tuple(prefixes) if saw_prefix else DEFAULT_PREFIXES,
        open_class_tags=tuple(open_classes) if saw_open else DEFAULT_OPEN_CLASSES,
        max_prefix_chain=max_chain,
        max_morphemes=max_morphemes,
    )


def load_lexicon(path: str | os.PathLike, max_morphemes: int = MAX_MORPHEMES_PER_TOKEN) -> Lexicon:
    with open(path, encoding="utf-8", newline="") as f:
        return parse_lexicon(f, str(path), max_morphemes)


def format_lexicon(lex: Lexicon) -> str:
    out = [FORMAT_HEADER]
    if lex.prefix_table:
        out.extend(f"#prefix {f} {t}" for f, t in lex.prefix_table)
    else:
        out.append("#noprefix")
    out.extend(f"#openclass {t}" for t in lex.open_class_tags)
    out.append(f"#maxprefix {lex.max_prefix_chain}")
    for surface in sorted(lex.entries):
        out.append("\t".join([surface] + [str(a) for a in lex.entries[surface]]))
    return "\n".join(out) + "\n"


def save_lexicon(lex: Lexicon, path: str | os.PathLike) -> None:
    from .formats import atomic_write_text

    atomic_write_text(path, format_lexicon(lex))
