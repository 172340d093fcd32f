"""Readers and writers for lattice, gold/prediction and checkpoint files.

All text formats start with the ``#morpholattice-v1`` header, use UTF-8, ``\\n``
line endings and blank lines between sentences. A sentence block may open with
a ``#tokens`` line carrying the tab-separated surface tokens.

Lattice arc line (8 tab-separated columns, SPMRL lineage)::

    FROM  TO  FORM  LEMMA  CPOS  POS  FEATS  TOKEN_ID

``LEMMA`` and ``FEATS`` use ``_`` when empty, ``CPOS`` mirrors ``POS`` and is
ignored on input, ``TOKEN_ID`` is 1-based.

Gold/prediction morpheme line::

    TOKEN_ID  FORM  TAG
"""
from __future__ import annotations

import json
import os
import struct
import tempfile
import zlib
from typing import Iterable, Sequence

import numpy as np

from .core import Analysis, Corpus, Morpheme, Sentence
from .lattice import Arc, Lattice, LatticeError, check_lattice

HEADER = "#morpholattice-v1"
TOKENS_PREFIX = "#tokens"
CKPT_MAGIC = b"MLATCKPT"
CKPT_VERSION = 1


class FormatError(ValueError):
    pass


def _err(path, lineno, msg):
    return FormatError(f"{path}:{lineno}: {msg}")


def atomic_write_bytes(path: str | os.PathLike, data: bytes) -> None:
    """Write to a sibling temp file and rename, so failures leave nothing behind."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def _read_lines(path) -> list[str]:
    with open(path, "rb") as f:
        data = f.read()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise FormatError(f"{path}: not valid UTF-8 ({e})") from None
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return lines


def _blocks(lines: list[str], path) -> list[list[tuple[int, str]]]:
    """Split into sentence blocks after checking the header."""
    if not lines:
        return []
    if lines[0].rstrip("\r") != HEADER:
        raise _err(path, 1, f"missing {HEADER!r} header")
    blocks: list[list[tuple[int, str]]] = []
    cur: list[tuple[int, str]] = []
    for lineno, line in enumerate(lines[1:], 2):
        line = line.rstrip("\r")
        if not line.strip():
            if cur:
                blocks.append(cur)
                cur = []
            continue
        cur.append((lineno, line))
    if cur:
        blocks.append(cur)
    return blocks


def _split_tokens_line(block, path):
    surfaces = None
    body = []
    for lineno, line in block:
        if line.startswith(TOKENS_PREFIX):
            if surfaces is not None or body:
                raise _err(path, lineno, "#tokens line must open the sentence block")
            rest = line[len(TOKENS_PREFIX):]
            if not rest.startswith("\t") or not rest[1:]:
                raise _err(path, lineno, "expected '#tokens<TAB>tok<TAB>tok...'")
            surfaces = tuple(rest[1:].split("\t"))
            if any(not s or any(c.isspace() for c in s) for s in surfaces):
                raise _err(path, lineno, "empty or whitespace-bearing surface token")
        elif line.startswith("#"):
            continue
        else:
            body.append((lineno, line))
    return surfaces, body


def _int(field, path, lineno, what):
    if not field.isdigit():
        raise _err(path, lineno, f"non-numeric {what} {field!r}")
    return int(field)


# lattice files

def parse_lattice_block(block, path="<lattices>") -> Lattice:
    surfaces, body = _split_tokens_line(block, path)
    if not body:
        raise _err(path, block[0][0], "sentence block without arcs")
    raw = []
    for lineno, line in body:
        cols = line.split("\t")
        if len(cols) != 8:
            raise _err(path, lineno, f"expected 8 tab-separated columns, got {len(cols)}")
        frm = _int(cols[0], path, lineno, "node id")
        to = _int(cols[1], path, lineno, "node id")
        form, lemma, _cpos, pos, feats = cols[2], cols[3], cols[4], cols[5], cols[6]
        tok = _int(cols[7], path, lineno, "token id")
        if frm >= to:
            raise _err(path, lineno, f"arc {frm}->{to} does not go forward")
        if tok < 1:
            raise _err(path, lineno, "token ids are 1-based")
        try:
            m = Morpheme(form, pos, None if lemma == "_" else lemma, _parse_feats(feats))
        except ValueError as e:
            raise _err(path, lineno, str(e)) from None
        raw.append((lineno, frm, to, m, tok - 1))
    ntok = max(r[4] for r in raw) + 1
    present = {r[4] for r in raw}
    for t in range(ntok):
        if t not in present:
            raise _err(path, body[0][0], f"token id {t + 1} has no arcs")
    nodes = sorted({r[1] for r in raw} | {r[2] for r in raw})
    remap = {n: i for i, n in enumerate(nodes)}
    lo = [min(remap[r[1]] for r in raw if r[4] == t) for t in range(ntok)]
    hi = [max(remap[r[2]] for r in raw if r[4] == t) for t in range(ntok)]
    if lo[0] != 0:
        bad = next(r for r in raw if remap[r[1]] == 0)
        raise _err(path, bad[0], "first token does not start at the source node")
    for t in range(ntok - 1):
        if hi[t] != lo[t + 1]:
            bad = next(r for r in raw if r[4] == t + 1 and remap[r[1]] == lo[t + 1])
            raise _err(path, bad[0], f"arc spans the boundary between tokens {t + 1} and {t + 2}")
    if hi[-1] != len(nodes) - 1:
        bad = next(r for r in raw if remap[r[2]] == len(nodes) - 1)
        raise _err(path, bad[0], "last token does not end at the sink node")
    bounds = tuple(lo) + (hi[-1],)
    for lineno, frm, to, _, t in raw:
        f, g = remap[frm], remap[to]
        inner = [x for x in bounds if f < x < g]
        if inner or f < bounds[t] or g > bounds[t + 1]:
            raise _err(path, lineno, f"arc spans token boundaries (token {t + 1})")
    arcs = tuple(Arc(i, remap[r[1]], remap[r[2]], r[3], r[4]) for i, r in enumerate(raw))
    if surfaces is not None and len(surfaces) != ntok:
        raise _err(path, block[0][0], f"#tokens lists {len(surfaces)} tokens, arcs cover {ntok}")
    lat = Lattice(len(nodes), arcs, bounds, surfaces)
    try:
        check_lattice(lat)
    except LatticeError as e:
        node_hint = _dead_node_line(lat, raw, remap)
        raise _err(path, node_hint or body[0][0], str(e)) from None
    return lat


def _dead_node_line(lat, raw, remap):
    from .lattice import _reachable

    fwd = _reachable(lat, lat.source, True)
    bwd = _reachable(lat, lat.sink, False)
    for lineno, frm, to, *_ in raw:
        for n in (remap[frm], remap[to]):
            if not (fwd[n] and bwd[n]):
                return lineno
    return None


def _parse_feats(text):
    if text == "_":
        return None
    out = []
    for item in text.split("|"):
        k, sep, v = item.partition("=")
        if not sep or not k:
            raise ValueError(f"bad feature item {item!r}")
        out.append((k, v))
    return tuple(out)


def _format_feats(feats):
    if not feats:
        return "_"
    return "|".join(f"{k}={v}" for k, v in feats)


def lattice_surfaces(lat: Lattice) -> tuple[str, ...]:
    """Surface tokens, recovered from the first path of each token when not stored."""
    if lat.surfaces is not None:
        return lat.surfaces
    out = []
    for t in range(lat.num_tokens):
        node, forms = lat.token_boundaries[t], []
        while node != lat.token_boundaries[t + 1]:
            a = next(a for a in lat.out_arcs[node] if a.token_index == t)
            forms.append(a.form)
            node = a.to_node
        out.append("".join(forms))
    return tuple(out)


def format_lattices(lattices: Sequence[Lattice]) -> str:
    if not lattices:
        return ""
    out = [HEADER]
    for i, lat in enumerate(lattices):
        if i:
            out.append("")
        if lat.surfaces is not None:
            out.append("\t".join((TOKENS_PREFIX,) + lat.surfaces))
        for a in sorted(lat.arcs, key=lambda a: a.id):
            m = a.morpheme
            out.append("\t".join([str(a.from_node), str(a.to_node), m.form, m.lemma or "_",
                                  m.tag, m.tag, _format_feats(m.feats), str(a.token_index + 1)]))
    return "\n".join(out) + "\n"


def parse_lattices(lines: list[str], path="<lattices>") -> list[Lattice]:
    return [parse_lattice_block(b, path) for b in _blocks(lines, path)]


def read_lattice_file(path) -> list[Lattice]:
    return parse_lattices(_read_lines(path), str(path))


def write_lattice_file(path, lattices: Sequence[Lattice]) -> None:
    atomic_write_text(path, format_lattices(lattices))


# gold and prediction files

def parse_gold_block(block, path="<gold>") -> Sentence:
    surfaces, body = _split_tokens_line(block, path)
    if not body:
        raise _err(path, block[0][0], "sentence block without morphemes")
    per_tok: list[list[Morpheme]] = []
    for lineno, line in body:
        cols = line.split("\t")
        if len(cols) != 3:
            raise _err(path, lineno, f"expected 3 tab-separated columns, got {len(cols)}")
        tok = _int(cols[0], path, lineno, "token id")
        if tok == len(per_tok) + 1:
            per_tok.append([])
        elif tok != len(per_tok) or tok == 0:
            raise _err(path, lineno, f"token id {tok} breaks the 1..n sequence (expected "
                                     f"{len(per_tok)} or {len(per_tok) + 1})")
        try:
            per_tok[-1].append(Morpheme(cols[1], cols[2]))
        except ValueError as e:
            raise _err(path, lineno, str(e)) from None
    gold = [Analysis(tuple(ms)) for ms in per_tok]
    if surfaces is not None and len(surfaces) != len(gold):
        raise _err(path, block[0][0], f"#tokens lists {len(surfaces)} tokens, body has {len(gold)}")
    return Sentence.from_gold(gold, surfaces)


def parse_gold(lines: list[str], path="<gold>") -> Corpus:
    return Corpus.from_sentences(parse_gold_block(b, path) for b in _blocks(lines, path))


def read_gold_file(path) -> Corpus:
    return parse_gold(_read_lines(path), str(path))


def format_analyses(sentences: Sequence[Sentence], analyses: Sequence[Sequence[Analysis]]) -> str:
    if len(sentences) != len(analyses):
        raise FormatError(f"{len(analyses)} predictions for {len(sentences)} sentences")
    if not sentences:
        return ""
    out = [HEADER]
    for i, (sent, pred) in enumerate(zip(sentences, analyses)):
        if len(pred) != len(sent):
            raise FormatError(f"sentence {i + 1}: {len(pred)} analyses for {len(sent)} tokens")
        if i:
            out.append("")
        out.append("\t".join((TOKENS_PREFIX,) + sent.surfaces))
        for t, a in enumerate(pred, 1):
            for m in a.morphemes:
                out.append(f"{t}\t{m.form}\t{m.tag}")
    return "\n".join(out) + "\n"


def format_gold(corpus: Iterable[Sentence]) -> str:
    sents = list(corpus)
    return format_analyses(sents, [s.gold for s in sents])


def write_gold_file(path, corpus: Iterable[Sentence]) -> None:
    atomic_write_text(path, format_gold(corpus))


def write_predictions(path, sentences: Sequence[Sentence],
                      predictions: Sequence[Sequence[Analysis]]) -> None:
    atomic_write_text(path, format_analyses(sentences, predictions))


def read_predictions(path) -> list[list[Analysis]]:
    return [list(s.gold) for s in read_gold_file(path)]


def sniff_text_kind(path) -> str:
    """'lattice', 'gold' or 'raw' (one whitespace-tokenized sentence per line)."""
    lines = _read_lines(path)
    if not lines or lines[0].rstrip("\r") != HEADER:
        return "raw"
    for line in lines[1:]:
        if line.strip() and not line.startswith("#"):
            return "lattice" if len(line.split("\t")) == 8 else "gold"
    return "gold"


def read_raw_text(path) -> Corpus:
    sents = []
    for line in _read_lines(path):
        toks = line.split()
        if toks:
            sents.append(Sentence.from_surfaces(toks))
    return Corpus.from_sentences(sents)


# model checkpoints
#
# layout: magic(8) version(u32) header_len(u64) header(json utf-8)
#         payload(float64 little-endian arrays in manifest order) crc32(u32)

def encode_checkpoint(kind: str, config: dict, vocab: dict, params: dict[str, np.ndarray]) -> bytes:
    names = sorted(params)
    manifest = [[n, list(np.shape(params[n]))] for n in names]
    header = json.dumps({"kind": kind, "config": config, "vocab": vocab, "params": manifest},
                        sort_keys=True, ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    payload = b"".join(np.ascontiguousarray(params[n], dtype="<f8").tobytes() for n in names)
    body = CKPT_MAGIC + struct.pack("<IQ", CKPT_VERSION, len(header)) + header + payload
    return body + struct.pack("<I", zlib.crc32(body) & 0xFFFFFFFF)


def decode_checkpoint(data: bytes, path="<checkpoint>"):
    if data[:8] != CKPT_MAGIC:
        raise FormatError(f"{path}: not a checkpoint (bad magic header)")
    if len(data) < 24:
        raise FormatError(f"{path}: truncated checkpoint")
    version, hlen = struct.unpack("<IQ", data[8:20])
    if version != CKPT_VERSION:
        raise FormatError(f"{path}: checkpoint version {version}, this build reads {CKPT_VERSION}")
    (crc,) = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise FormatError(f"{path}: checksum mismatch, checkpoint is corrupted")
    header = json.loads(data[20:20 + hlen].decode("utf-8"))
    off = 20 + hlen
    params = {}
    for name, shape in header["params"]:
        n = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(data, dtype="<f8", count=n, offset=off).astype(np.float64)
        params[name] = arr.reshape(shape)
        off += 8 * n
    if off != len(data) - 4:
        raise FormatError(f"{path}: trailing bytes after checkpoint payload")
    return header["kind"], header["config"], header["vocab"], params


def save_model(path, kind: str, config: dict, vocab: dict, params: dict[str, np.ndarray]) -> None:
    atomic_write_bytes(path, encode_checkpoint(kind, config, vocab, params))


def load_model(path, expect_kind: str | None = None):
    with open(path, "rb") as f:
        data = f.read()
    kind, config, vocab, params = decode_checkpoint(data, str(path))
    if expect_kind is not None and kind != expect_kind:
        raise FormatError(f"{path}: checkpoint holds a {kind!r} model, expected {expect_kind!r}")
    return kind, config, vocab, params
