"""Morphological lattices: per-sentence DAGs whose arcs are morphemes.

Node ids increase along the sentence. Token ``t`` owns the span
``[token_boundaries[t], token_boundaries[t + 1]]``; every arc lies inside the
span of the token it belongs to, so a source-to-sink path picks exactly one
analysis per token.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Collection, Iterable, Sequence

from .core import Analysis, Morpheme, Sentence
from .lexicon import Lexicon


class LatticeError(ValueError):
    pass


class PathLimitError(LatticeError):
    def __init__(self, count: int, limit: int):
        super().__init__(f"lattice has {count} paths, more than the limit of {limit}")
        self.count = count
        self.limit = limit


@dataclass(frozen=True)
class Arc:
    id: int
    from_node: int
    to_node: int
    morpheme: Morpheme
    token_index: int

    @property
    def form(self) -> str:
        return self.morpheme.form

    @property
    def tag(self) -> str:
        return self.morpheme.tag


@dataclass(frozen=True)
class LatticePath:
    arc_ids: tuple[int, ...]


@dataclass(frozen=True, eq=False)
class Lattice:
    num_nodes: int
    arcs: tuple[Arc, ...]
    token_boundaries: tuple[int, ...]
    surfaces: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "arcs", tuple(self.arcs))
        object.__setattr__(self, "token_boundaries", tuple(self.token_boundaries))
        if self.surfaces is not None:
            object.__setattr__(self, "surfaces", tuple(self.surfaces))

    @property
    def source(self) -> int:
        return self.token_boundaries[0]

    @property
    def sink(self) -> int:
        return self.token_boundaries[-1]

    @property
    def num_tokens(self) -> int:
        return len(self.token_boundaries) - 1

    @cached_property
    def out_arcs(self) -> tuple[tuple[Arc, ...], ...]:
        """Outgoing arcs per node, ascending arc id."""
        out: list[list[Arc]] = [[] for _ in range(self.num_nodes)]
        for a in sorted(self.arcs, key=lambda a: a.id):
            out[a.from_node].append(a)
        return tuple(tuple(x) for x in out)

    @cached_property
    def in_arcs(self) -> tuple[tuple[Arc, ...], ...]:
        inc: list[list[Arc]] = [[] for _ in range(self.num_nodes)]
        for a in sorted(self.arcs, key=lambda a: a.id):
            inc[a.to_node].append(a)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def arc_by_id(self) -> dict[int, Arc]:
        return {a.id: a for a in self.arcs}

    def arc_multiset(self) -> list[tuple]:
        return sorted((a.from_node, a.to_node, a.form, a.tag, a.token_index) for a in self.arcs)

    def project(self, path: LatticePath) -> list[Analysis]:
        """Split a path into one analysis per token."""
        per_tok: list[list[Morpheme]] = [[] for _ in range(self.num_tokens)]
        for aid in path.arc_ids:
            a = self.arc_by_id[aid]
            per_tok[a.token_index].append(a.morpheme)
        return [Analysis(tuple(ms)) for ms in per_tok]


def check_lattice(lat: Lattice) -> None:
    """Raise :class:`LatticeError` unless every lattice invariant holds."""
    b = lat.token_boundaries
    if len(b) < 2:
        raise LatticeError("lattice needs at least one token")
    if b[0] != 0 or b[-1] != lat.num_nodes - 1:
        raise LatticeError("source must be node 0 and sink the last node")
    if any(x >= y for x, y in zip(b, b[1:])):
        raise LatticeError(f"token boundaries not increasing: {b}")
    ids = sorted(a.id for a in lat.arcs)
    if ids != list(range(len(ids))):
        raise LatticeError("arc ids must be dense 0..n-1")
    for a in lat.arcs:
        if not a.from_node < a.to_node:
            raise LatticeError(f"arc {a.id} does not go forward ({a.from_node}->{a.to_node})")
        if not 0 <= a.token_index < lat.num_tokens:
            raise LatticeError(f"arc {a.id} has invalid token index {a.token_index}")
        lo, hi = b[a.token_index], b[a.token_index + 1]
        if not (lo <= a.from_node and a.to_node <= hi):
            raise LatticeError(f"arc {a.id} leaves the span of token {a.token_index}")
    fwd = _reachable(lat, lat.source, forward=True)
    bwd = _reachable(lat, lat.sink, forward=False)
    dead = [n for n in range(lat.num_nodes) if not (fwd[n] and bwd[n])]
    if dead:
        raise LatticeError(f"nodes not on any source-sink path: {dead}")
    for t in range(lat.num_tokens):
        lo, hi = b[t], b[t + 1]
        for n in range(lo + 1, hi):
            for a in lat.out_arcs[n]:
                if a.token_index != t:
                    raise LatticeError(f"node {n} inside token {t} has an arc of token {a.token_index}")


def _reachable(lat: Lattice, start: int, forward: bool) -> list[bool]:
    seen = [False] * lat.num_nodes
    seen[start] = True
    stack = [start]
    adj = lat.out_arcs if forward else lat.in_arcs
    while stack:
        n = stack.pop()
        for a in adj[n]:
            m = a.to_node if forward else a.from_node
            if not seen[m]:
                seen[m] = True
                stack.append(m)
    return seen


def lattice_from_analyses(per_token: Sequence[Sequence[Analysis]],
                          surfaces: Sequence[str] | None = None) -> Lattice:
    """Lay out each token's analyses as parallel, node-disjoint sub-paths."""
    arcs: list[Arc] = []
    boundaries = [0]
    nxt = 1
    for t, analyses in enumerate(per_token):
        if not analyses:
            raise LatticeError(f"token {t} has no analyses")
        start = boundaries[-1]
        pending = []  # arcs ending at the not-yet-allocated boundary node
        for a in analyses:
            cur = start
            for i, m in enumerate(a.morphemes):
                if i == len(a) - 1:
                    pending.append((len(arcs), cur, m))
                    arcs.append(None)  # type: ignore[arg-type]
                else:
                    arcs.append(Arc(len(arcs), cur, nxt, m, t))
                    cur = nxt
                    nxt += 1
        end = nxt
        nxt += 1
        for aid, cur, m in pending:
            arcs[aid] = Arc(aid, cur, end, m, t)
        boundaries.append(end)
    return Lattice(nxt, tuple(arcs), tuple(boundaries),
                   None if surfaces is None else tuple(surfaces))


def build_lattice(sentence: Sentence, lex: Lexicon) -> Lattice:
    if not len(sentence):
        raise LatticeError("cannot build a lattice for an empty sentence")
    per_token = [lex.analyses(tok.surface) for tok in sentence.tokens]
    return lattice_from_analyses(per_token, sentence.surfaces)


def oracle_lattice(sentence: Sentence) -> Lattice:
    if sentence.gold is None:
        raise LatticeError("oracle lattice needs gold analyses")
    return lattice_from_analyses([[a] for a in sentence.gold], sentence.surfaces)


def path_count(lat: Lattice) -> int:
    counts = [0] * lat.num_nodes
    counts[lat.source] = 1
    for n in range(lat.num_nodes):
        if counts[n]:
            for a in lat.out_arcs[n]:
                counts[a.to_node] += counts[n]
    return counts[lat.sink]


def token_path_counts(lat: Lattice) -> list[int]:
    out = []
    for t in range(lat.num_tokens):
        lo, hi = lat.token_boundaries[t], lat.token_boundaries[t + 1]
        counts = {lo: 1}
        for n in range(lo, hi):
            c = counts.get(n, 0)
            if c:
                for a in lat.out_arcs[n]:
                    counts[a.to_node] = counts.get(a.to_node, 0) + c
        out.append(counts.get(hi, 0))
    return out


def enumerate_paths(lat: Lattice, limit: int = 10_000) -> list[LatticePath]:
    """All source-sink paths, depth first by ascending arc id."""
    total = path_count(lat)
    if total > limit:
        raise PathLimitError(total, limit)
    out: list[LatticePath] = []
    stack: list[int] = []

    def walk(node):
        if node == lat.sink:
            out.append(LatticePath(tuple(stack)))
            return
        for a in lat.out_arcs[node]:
            stack.append(a.id)
            walk(a.to_node)
            stack.pop()

    walk(lat.source)
    return out


def linearize(lat: Lattice) -> list[Arc]:
    return sorted(lat.arcs, key=lambda a: (a.from_node, a.to_node, a.form, a.tag, a.id))


def is_valid_path(lat: Lattice, path: LatticePath) -> bool:
    node = lat.source
    for aid in path.arc_ids:
        a = lat.arc_by_id.get(aid)
        if a is None or a.from_node != node:
            return False
        node = a.to_node
    return node == lat.sink


def _token_subpath(lat: Lattice, t: int, pairs: tuple[tuple[str, str], ...]) -> list[int] | None:
    lo, hi = lat.token_boundaries[t], lat.token_boundaries[t + 1]

    def walk(node, k):
        if k == len(pairs):
            return [] if node == hi else None
        for a in lat.out_arcs[node]:
            if a.token_index == t and (a.form, a.tag) == pairs[k]:
                rest = walk(a.to_node, k + 1)
                if rest is not None:
                    return [a.id] + rest
        return None

    return walk(lo, 0)


def align_gold(lat: Lattice, gold: Sequence[Analysis]) -> LatticePath | None:
    if len(gold) != lat.num_tokens:
        raise LatticeError(f"{len(gold)} gold analyses for a {lat.num_tokens}-token lattice")
    ids: list[int] = []
    for t, a in enumerate(gold):
        sub = _token_subpath(lat, t, a.pairs)
        if sub is None:
            return None
        ids.extend(sub)
    return LatticePath(tuple(ids))


def inject_gold(lat: Lattice, gold: Sequence[Analysis]) -> Lattice:
    """Add a fresh sub-path for every token whose gold analysis is missing."""
    if len(gold) != lat.num_tokens:
        raise LatticeError(f"{len(gold)} gold analyses for a {lat.num_tokens}-token lattice")
    missing = [t for t, a in enumerate(gold) if _token_subpath(lat, t, a.pairs) is None]
    if not missing:
        return lat
    b = lat.token_boundaries
    # provisional ids for new intra-token nodes sit past the old range
    fresh = lat.num_nodes
    new_arcs: list[tuple[int, int, Morpheme, int]] = []
    new_nodes: dict[int, list[int]] = {}
    for t in missing:
        ms = gold[t].morphemes
        chain = [b[t]]
        for _ in range(len(ms) - 1):
            chain.append(fresh)
            new_nodes.setdefault(t, []).append(fresh)
            fresh += 1
        chain.append(b[t + 1])
        for i, m in enumerate(ms):
            new_arcs.append((chain[i], chain[i + 1], m, t))
    order: list[int] = []
    for t in range(lat.num_tokens):
        order.append(b[t])
        order.extend(range(b[t] + 1, b[t + 1]))
        order.extend(new_nodes.get(t, []))
    order.append(b[-1])
    remap = {old: new for new, old in enumerate(order)}
    arcs = [Arc(a.id, remap[a.from_node], remap[a.to_node], a.morpheme, a.token_index)
            for a in sorted(lat.arcs, key=lambda a: a.id)]
    for f, to, m, t in new_arcs:
        arcs.append(Arc(len(arcs), remap[f], remap[to], m, t))
    return Lattice(len(order), tuple(arcs), tuple(remap[x] for x in b), lat.surfaces)


def build_training_lattice(sentence: Sentence, lex: Lexicon,
                           unknown: Collection[int] = ()) -> tuple[Lattice, LatticePath]:
    """Lexicon lattice completed with the gold analysis, plus the gold path.

    Tokens listed in ``unknown`` are expanded by the unknown-word rules even
    when the lexicon knows them.
    """
    if not len(sentence):
        raise LatticeError("cannot build a lattice for an empty sentence")
    per_token = [lex.analyze_oov(tok.surface) if t in unknown else lex.analyses(tok.surface)
                 for t, tok in enumerate(sentence.tokens)]
    lat = inject_gold(lattice_from_analyses(per_token, sentence.surfaces), sentence.gold)
    path = align_gold(lat, sentence.gold)
    if path is None:
        raise AssertionError("gold path missing after injection")
    return lat, path


def lattices_equal(a: Lattice, b: Lattice) -> bool:
    return (a.num_nodes == b.num_nodes and a.token_boundaries == b.token_boundaries
            and a.arc_multiset() == b.arc_multiset())


def build_lattices(sentences: Iterable[Sentence], lex: Lexicon) -> list[Lattice]:
    return [build_lattice(s, lex) for s in sentences]
