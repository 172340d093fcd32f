import numpy as np
import pytest
from hypothesis import given, strategies as st

from morpholattice.core import Analysis, Morpheme, Sentence
from morpholattice.formats import (FormatError, decode_checkpoint, encode_checkpoint, format_gold,
                                   format_lattices, load_model, parse_gold, parse_lattices,
                                   read_gold_file, read_lattice_file, read_predictions, read_raw_text,
                                   save_model, sniff_text_kind, write_gold_file, write_lattice_file,
                                   write_predictions)
from morpholattice.lattice import Lattice, build_lattice, lattices_equal, path_count
from morpholattice.testing import random_gold_sentence, random_lattice

H = "#morpholattice-v1"
HPIL = [H, "0\t1\th\t_\tDET\tDET\t_\t1", "1\t2\tpil\t_\tNOUN\tNOUN\t_\t1",
        "0\t2\thpil\t_\tVERB\tVERB\t_\t1"]


def test_hpil_lattice_file():
    lats = parse_lattices(HPIL)
    assert len(lats) == 1 and path_count(lats[0]) == 2


def test_empty_files(tmp_path):
    p = tmp_path / "e"
    p.write_text("")
    assert read_lattice_file(p) == []
    assert len(read_gold_file(p)) == 0
    write_predictions(p, [], [])
    assert p.read_bytes() == b""


def test_lattice_round_trip(tmp_path, sent2, lex2):
    lats = [build_lattice(sent2, lex2), parse_lattices(HPIL)[0]]
    p = tmp_path / "x.lat"
    write_lattice_file(p, lats)
    text = p.read_bytes()
    back = read_lattice_file(p)
    assert all(lattices_equal(a, b) and a.surfaces == b.surfaces for a, b in zip(lats, back))
    write_lattice_file(p, back)
    assert p.read_bytes() == text


def test_lattice_lemma_feats_survive():
    lines = [H, "0\t1\thpil\thpil\tVERB\tVERB\tgen=M|num=S\t1"]
    lat = parse_lattices(lines)[0]
    m = lat.arcs[0].morpheme
    assert m.lemma == "hpil" and m.feats == (("gen", "M"), ("num", "S"))
    assert format_lattices([lat]).splitlines() == lines


def test_nodes_renumbered_densely():
    lat = parse_lattices([H, "10\t20\th\t_\tDET\tDET\t_\t1", "20\t30\tpil\t_\tNOUN\tNOUN\t_\t1"])[0]
    assert lat.num_nodes == 3 and lat.token_boundaries == (0, 2)


@given(st.integers(0, 2**32 - 1))
def test_random_lattice_round_trip(seed):
    lat = random_lattice(np.random.default_rng(seed))
    text = format_lattices([lat])
    back = parse_lattices(text.splitlines())[0]
    assert lattices_equal(back, lat) and format_lattices([back]) == text


@pytest.mark.parametrize("lines,lineno", [
    ([H, "0\tx\th\t_\tDET\tDET\t_\t1"], 2),                                   # non-numeric node
    ([H, "0\t1\th\t_\tDET\tDET\t_\t1", "0\t2\tpil\t_\tNOUN\tNOUN\t_\t2"], 3),  # spans boundary
    ([H, "0\t1\ta\t_\tA\tA\t_\t1", "1\t3\tb\t_\tB\tB\t_\t1", "0\t2\tc\t_\tC\tC\t_\t1"], 4),  # dead node
    ([H, "0\t1\th\t_\tDET\tDET\t_\t1\textra"], 2),                            # trailing column
    (["#wrong-header", "0\t1\th\t_\tDET\tDET\t_\t1"], 1),
])
def test_lattice_errors_have_line_numbers(lines, lineno):
    with pytest.raises(FormatError, match=f"f.lat:{lineno}:"):
        parse_lattices(lines, "f.lat")


def test_gold_example_two(tmp_path, sent2):
    p = tmp_path / "g"
    write_gold_file(p, [sent2])
    c = read_gold_file(p)
    assert len(c) == 1 and len(c.sentences[0]) == 4
    assert sum(len(a) for a in c.sentences[0].gold) == 6
    assert c.sentences[0].surfaces == sent2.surfaces
    assert format_gold(c) == p.read_text(encoding="utf-8")


def test_gold_single_and_without_tokens_line():
    c = parse_gold([H, "1\tat\tACC"])
    assert len(c) == 1 and c.sentences[0].surfaces == ("at",)


def test_gold_errors():
    with pytest.raises(FormatError, match=":3:"):
        parse_gold([H, "1\ta\tA", "3\tb\tB"])
    with pytest.raises(FormatError, match=":2:"):
        parse_gold([H, "1\ta\tA\tjunk"])
    with pytest.raises(FormatError, match=":2:"):
        parse_gold([H, "#tokens\tx\ty", "1\ta\tA"])


@given(st.integers(0, 2**32 - 1))
def test_gold_round_trip_random(seed):
    rng = np.random.default_rng(seed)
    sents = [random_gold_sentence(rng) for _ in range(3)]
    text = format_gold(sents)
    back = parse_gold(text.splitlines())
    assert [s.gold for s in back] == [s.gold for s in sents]
    assert format_gold(back) == text


def test_predictions(tmp_path, sent2):
    gold_p, pred_p = tmp_path / "g", tmp_path / "p"
    write_gold_file(gold_p, [sent2])
    write_predictions(pred_p, [sent2], [list(sent2.gold)])
    assert pred_p.read_bytes() == gold_p.read_bytes()
    assert read_predictions(pred_p) == [list(sent2.gold)]
    with pytest.raises(FormatError):
        write_predictions(pred_p, [sent2], [list(sent2.gold)[:3]])
    assert pred_p.read_bytes() == gold_p.read_bytes()  # failed write left the old file intact


def test_sniff_and_raw(tmp_path, sent2):
    raw = tmp_path / "raw.txt"
    raw.write_text("hild hpil at hpil\n\nat\n")
    assert sniff_text_kind(raw) == "raw"
    assert [s.surfaces for s in read_raw_text(raw)] == [sent2.surfaces, ("at",)]
    g = tmp_path / "g"
    write_gold_file(g, [sent2])
    assert sniff_text_kind(g) == "gold"
    lat = tmp_path / "l"
    lat.write_text("\n".join(HPIL) + "\n")
    assert sniff_text_kind(lat) == "lattice"


def test_checkpoint_round_trip(tmp_path):
    params = {"b": np.arange(6.0).reshape(2, 3) / 7, "a": np.array([1e-300, -0.0, np.pi]), "s": np.array(2.5)}
    config = {"seed": 3, "templates": ["form", "tag"]}
    vocab = {"forms": ["<unk>", "hpil", "ילד"]}
    p = tmp_path / "m.ckpt"
    save_model(p, "toy", config, vocab, params)
    kind, c2, v2, p2 = load_model(p, expect_kind="toy")
    assert kind == "toy" and c2 == config and v2 == vocab
    assert all(np.array_equal(params[k], p2[k]) and params[k].shape == p2[k].shape for k in params)
    assert np.signbit(p2["a"][1])
    blob = p.read_bytes()
    assert encode_checkpoint(kind, c2, v2, p2) == blob


def test_checkpoint_errors(tmp_path):
    blob = encode_checkpoint("toy", {}, {}, {"w": np.ones(3)})
    with pytest.raises(FormatError, match="magic"):
        decode_checkpoint(b"XXXXXXXX" + blob[8:])
    flipped = bytearray(blob)
    flipped[-10] ^= 1
    with pytest.raises(FormatError, match="checksum"):
        decode_checkpoint(bytes(flipped))
    p = tmp_path / "m"
    p.write_bytes(blob)
    with pytest.raises(FormatError, match="expected 'crf'"):
        load_model(p, expect_kind="crf")
