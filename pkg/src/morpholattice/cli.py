"""Command-line pipeline: gen-synth, build-lattices, init-config, train, predict, evaluate, grid."""
from __future__ import annotations

import argparse
import logging
import sys

from . import formats
from .config import Config, load_config, save_config
from .core import Corpus
from .lattice import build_lattice, oracle_lattice
from .lexicon import load_lexicon
from .metrics import evaluate, report_grid, report_tsv, table_grid
from .synth import SynthSpec, generate, write_synth
from .taggers.base import Regime, check_compatible, model_rng

log = logging.getLogger("morpholattice")


class CliError(Exception):
    pass


def _config(args) -> Config:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _lexicon(args, required=True):
    if args.lexicon is None:
        if required:
            raise CliError("--lexicon is required here")
        return None
    return load_lexicon(args.lexicon)


def _sentences(path) -> Corpus:
    kind = formats.sniff_text_kind(path)
    if kind == "gold":
        return formats.read_gold_file(path)
    if kind == "raw":
        return formats.read_raw_text(path)
    raise CliError(f"{path}: expected a gold or raw-text file, found a lattice file")


def _gold(path) -> Corpus:
    corpus = formats.read_gold_file(path)
    if not corpus.has_gold:
        raise CliError(f"{path}: no gold analyses")
    return corpus


def cmd_gen_synth(args) -> int:
    spec = SynthSpec(seed=args.seed if args.seed is not None else 7, n_stems=args.stems,
                     ambiguity=args.ambiguity, oov=args.oov, min_len=args.min_len,
                     max_len=args.max_len, train_size=args.train_size, dev_size=args.dev_size)
    data = generate(spec)
    paths = write_synth(data, args.out)
    for split in ("train", "dev"):
        print(f"{split}: {len(getattr(data, split))} sentences, ambiguous {data.ambiguous_fraction[split]:.3f}, "
              f"oov {data.oov_fraction[split]:.3f} -> {paths[split]}")
    print(f"lexicon: {len(data.lexicon.entries)} surfaces -> {paths['lexicon']}")
    return 0


def cmd_build_lattices(args) -> int:
    regime = Regime.parse(args.regime)
    sents = _sentences(args.input)
    if regime is Regime.ORACLE:
        if not sents.has_gold:
            raise CliError("ORACLE lattices need a gold file")
        lats = [oracle_lattice(s) for s in sents]
    elif regime is Regime.RAW_LATTICES:
        lex = _lexicon(args)
        lats = [build_lattice(s, lex) for s in sents]
    else:
        raise CliError(f"regime {regime.value} has no lattice input; use ORACLE or RAW_LATTICES")
    formats.write_lattice_file(args.out, lats)
    print(f"wrote {len(lats)} lattices to {args.out}")
    return 0


def cmd_init_config(args) -> int:
    save_config(_config(args), args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_train(args) -> int:
    from .taggers.crf import train_crf
    from .taggers.perceptron import train_perceptron
    from .taggers.pointer import train_pointer

    regime = check_compatible(args.model, args.regime)
    cfg = _config(args).replace(regime=regime.value)
    train = _gold(args.train)
    dev = None if args.dev is None else list(_gold(args.dev))
    if args.model == "perceptron":
        model = train_perceptron(train, _lexicon(args), cfg, model_rng(cfg.seed, "perceptron"))
        model.save(args.out, cfg)
    elif args.model == "crf":
        view = "raw" if regime is Regime.RAW_TOKENS else "segmented"
        model = train_crf(train, cfg, model_rng(cfg.seed, f"crf-{view}"), view=view, dev=dev)
        model.save(args.out)
    else:
        model = train_pointer(train, _lexicon(args), cfg, model_rng(cfg.seed, "pointer"), dev=dev)
        model.save(args.out)
    print(f"wrote {args.model} checkpoint to {args.out}")
    return 0


def _load(path):
    from .taggers.crf import CrfModel
    from .taggers.perceptron import PerceptronModel
    from .taggers.pointer import PointerModel

    kind, config, vocab, params = formats.load_model(path)
    if kind == "perceptron":
        return kind, PerceptronModel.from_checkpoint(config, vocab, params)
    if kind == "crf":
        return kind, CrfModel.from_checkpoint(config, vocab, params)
    if kind == "pointer":
        return kind, PointerModel.from_checkpoint(config, vocab, params)
    raise CliError(f"{path}: unknown model kind {kind!r}")


def _lattice_input(args, sents_or_none):
    """Lattices for a lattice-consuming model, from a lattice file or via the lexicon."""
    if formats.sniff_text_kind(args.input) == "lattice":
        lats = formats.read_lattice_file(args.input)
        from .core import Sentence
        return [Sentence.from_surfaces(formats.lattice_surfaces(l)) for l in lats], lats
    sents = list(sents_or_none)
    return sents, [build_lattice(s, _lexicon(args)) for s in sents]


def cmd_predict(args) -> int:
    kind, model = _load(args.model_file)
    regime = check_compatible(kind, args.regime)
    if kind == "perceptron":
        sents, lats = _lattice_input(args, None if formats.sniff_text_kind(args.input) == "lattice"
                                     else _sentences(args.input))
        pred = [model.predict_lattice(l) for l in lats]
    elif kind == "pointer":
        if regime is Regime.ORACLE:
            sents = list(_gold(args.input))
            lats = [oracle_lattice(s) for s in sents]
        else:
            sents, lats = _lattice_input(args, None if formats.sniff_text_kind(args.input) == "lattice"
                                         else _sentences(args.input))
        pred = model.predict_lattices(lats)
    else:
        sents = list(_sentences(args.input))
        want = "raw" if regime is Regime.RAW_TOKENS else "segmented"
        if model.view != want:
            raise CliError(f"checkpoint is a {model.view}-view CRF, regime {regime.value} needs {want}")
        forms = None
        if regime is Regime.ORACLE:
            if any(s.gold is None for s in sents):
                raise CliError("ORACLE prediction needs a gold file for the segmentation")
        elif regime is Regime.PREDICTED:
            forms = _predicted_segmentation(args, sents)
        pred = model.predict(sents, forms)
    formats.write_predictions(args.out, sents, pred)
    print(f"wrote predictions for {len(sents)} sentences to {args.out}")
    return 0


def _predicted_segmentation(args, sents):
    if args.segmentation is not None:
        seg = formats.read_predictions(args.segmentation)
        if len(seg) != len(sents) or any(len(a) != len(s) for a, s in zip(seg, sents)):
            raise CliError(f"{args.segmentation}: segmentation does not align with {args.input}")
        return [[a.forms for a in row] for row in seg]
    if args.segmenter is None:
        raise CliError("PREDICTED needs --segmenter CHECKPOINT or --segmentation FILE")
    kind, seg_model = _load(args.segmenter)
    if kind != "perceptron":
        raise CliError(f"--segmenter must be a perceptron checkpoint, got {kind}")
    lex = _lexicon(args)
    return [[a.forms for a in row] for row in seg_model.predict(sents, lex)]


def cmd_evaluate(args) -> int:
    gold = _gold(args.gold)
    pred = formats.read_predictions(args.pred)
    rep = evaluate([s.gold for s in gold], pred)
    rows = [(args.model, args.regime.upper(), rep)]
    sys.stdout.write(report_grid(rows))
    sys.stdout.write(f"multi-tag accuracy {100 * rep.multitag_accuracy:.2f}\n")
    tsv = report_tsv(rows)
    sys.stdout.write(tsv)
    if args.out:
        formats.atomic_write_text(args.out, tsv)
    return 0


def cmd_grid(args) -> int:
    from .taggers.grid import GridSpec, run_regime_grid

    cfg = _config(args)
    seeds = tuple(int(s) for s in args.seeds.split(","))
    res = run_regime_grid(_gold(args.train), _gold(args.dev), _lexicon(args), cfg,
                          GridSpec(seeds=seeds, tune_size=args.tune_size))
    text = table_grid(res.cells)
    tsv = report_tsv(res.rows())
    sys.stdout.write(text)
    if args.out:
        formats.atomic_write_text(args.out, text + "\n" + tsv)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="morpholattice", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log training progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, lexicon=False, config=False, regime=False, out=True):
        sp.add_argument("--seed", type=int, default=None)
        if config:
            sp.add_argument("--config", default=None, help="key=value config file")
        if lexicon:
            sp.add_argument("--lexicon", default=None)
        if regime:
            sp.add_argument("--regime", required=True, help="ORACLE, PREDICTED, RAW_TOKENS or RAW_LATTICES")
        if out:
            sp.add_argument("--out", required=True)

    g = sub.add_parser("gen-synth", help="write a synthetic train/dev/lexicon set")
    common(g)
    g.add_argument("--stems", type=int, default=4000)
    g.add_argument("--ambiguity", type=float, default=0.4)
    g.add_argument("--oov", type=float, default=0.1)
    g.add_argument("--min-len", type=int, default=3)
    g.add_argument("--max-len", type=int, default=8)
    g.add_argument("--train-size", type=int, default=2000)
    g.add_argument("--dev-size", type=int, default=500)
    g.set_defaults(func=cmd_gen_synth)

    b = sub.add_parser("build-lattices", help="gold or raw text to a lattice file")
    common(b, lexicon=True, regime=True)
    b.add_argument("input")
    b.set_defaults(func=cmd_build_lattices)

    c = sub.add_parser("init-config", help="write the default configuration")
    common(c, config=True)
    c.set_defaults(func=cmd_init_config)

    t = sub.add_parser("train", help="train a tagger and write a checkpoint")
    common(t, lexicon=True, config=True, regime=True)
    t.add_argument("--model", required=True, choices=("perceptron", "crf", "pointer"))
    t.add_argument("--train", required=True)
    t.add_argument("--dev", default=None, help="gold file for early stopping")
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("predict", help="tag an input file with a checkpoint")
    common(r, lexicon=True, regime=True)
    r.add_argument("--model-file", required=True)
    r.add_argument("--segmenter", default=None, help="perceptron checkpoint for PREDICTED segmentation")
    r.add_argument("--segmentation", default=None, help="prediction file giving PREDICTED segmentation")
    r.add_argument("input")
    r.set_defaults(func=cmd_predict)

    e = sub.add_parser("evaluate", help="Seg/POS F1 of predictions against gold")
    e.add_argument("--gold", required=True)
    e.add_argument("--pred", required=True)
    e.add_argument("--regime", default="-")
    e.add_argument("--model", default="-")
    e.add_argument("--out", default=None, help="also write the tab-delimited rows here")
    e.set_defaults(func=cmd_evaluate)

    d = sub.add_parser("grid", help="train all compatible (model, regime) pairs")
    common(d, lexicon=True, config=True, out=False)
    d.add_argument("--train", required=True)
    d.add_argument("--dev", required=True)
    d.add_argument("--seeds", default="1,2,3")
    d.add_argument("--tune-size", type=int, default=200)
    d.add_argument("--out", default=None)
    d.set_defaults(func=cmd_grid)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (CliError, ValueError, KeyError, OSError) as e:
        msg = str(e).splitlines()[0] if str(e) else type(e).__name__
        print(f"morpholattice {args.command}: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
