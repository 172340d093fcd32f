import pytest
from hypothesis import given, strategies as st

from morpholattice.core import (Analysis, Corpus, CorpusError, Morpheme, MultiTag, Sentence,
                                build_inventories, canonical_label, check_analysis, multitag_of,
                                parse_label)

tag = st.sampled_from(["DET", "NOUN", "VERB", "ACC", "ADP", "X"])


def test_multitag_examples():
    assert canonical_label(multitag_of(Analysis.parse("h/DET pil/NOUN"))) == "DET+NOUN"
    assert canonical_label(multitag_of(Analysis.parse("hpil/VERB"))) == "VERB"
    assert multitag_of(Analysis.parse("x/TAG")).tags == ("TAG",)


def test_canonical_label_examples():
    assert canonical_label(MultiTag(("DET", "NOUN"))) == "DET+NOUN"
    assert canonical_label(MultiTag(("VERB",))) == "VERB"
    assert parse_label("DET+NOUN").tags == ("DET", "NOUN")


def test_label_rejects_plus_in_tag():
    with pytest.raises(ValueError):
        canonical_label(MultiTag(("A+B",)))
    with pytest.raises(ValueError):
        parse_label("DET++NOUN")


@given(st.lists(tag, min_size=1, max_size=7))
def test_label_round_trip(tags):
    mt = MultiTag(tuple(tags))
    assert parse_label(canonical_label(mt)) == mt


@given(st.lists(st.tuples(st.sampled_from(["h", "pil", "at"]), tag), min_size=1, max_size=7))
def test_multitag_length_preserving(pairs):
    a = Analysis.of(*pairs)
    assert len(multitag_of(a)) == len(a)


def test_inventories_example_two(sent2):
    tags, labels = build_inventories([sent2])
    assert set(tags) == {"DET", "NOUN", "VERB", "ACC"}
    assert tags == ("DET", "NOUN", "VERB", "ACC")
    assert labels == ("DET+NOUN", "VERB", "ACC")


def test_inventories_errors_and_idempotence(sent2):
    with pytest.raises(CorpusError):
        build_inventories([])
    with pytest.raises(CorpusError):
        build_inventories([Sentence.from_surfaces(["hpil"])])
    assert build_inventories([sent2, sent2]) == build_inventories([sent2])


@given(st.permutations(range(4)))
def test_inventory_membership_is_order_free(perm):
    sents = [Sentence.from_gold([Analysis.parse(x)]) for x in
             ("a/A", "b/B c/C", "d/D", "e/A f/E")]
    base = build_inventories(sents)
    shuffled = build_inventories([sents[i] for i in perm])
    assert set(base[0]) == set(shuffled[0]) and set(base[1]) == set(shuffled[1])


def test_morpheme_validation():
    for bad in ("", "a b", "a\tb"):
        with pytest.raises(ValueError):
            Morpheme(bad, "NOUN")
    with pytest.raises(ValueError):
        Morpheme("a", "")
    # lemma and feats ride along but do not affect identity
    assert Morpheme("pil", "NOUN", lemma="pil", feats={"g": "M"}) == Morpheme("pil", "NOUN")


def test_analysis_limits():
    with pytest.raises(ValueError):
        Analysis(())
    check_analysis(Analysis.of(*[("a", "X")] * 7))
    with pytest.raises(ValueError):
        check_analysis(Analysis.of(*[("a", "X")] * 8))


def test_sentence_and_corpus(sent2):
    assert sent2.surfaces == ("hild", "hpil", "at", "hpil")
    with pytest.raises(ValueError):
        Sentence.from_surfaces(["a", "b"], [Analysis.parse("a/X")])
    c = Corpus.from_sentences([sent2])
    assert c.has_gold and c.tag_inventory == ("DET", "NOUN", "VERB", "ACC")
    with pytest.raises(CorpusError):
        Corpus((sent2,), ("DET",), ())
