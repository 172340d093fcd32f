"""Seg/POS scoring over per-token multisets of (form, tag) pairs."""
from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Sequence

from .core import Analysis, canonical_label, multitag_of

# form used for segments that could not be realized; never matches gold
UNREALIZED = "_"

REGIME_ORDER = ("ORACLE", "PREDICTED", "RAW_TOKENS", "RAW_LATTICES")
MODEL_ORDER = ("perceptron", "crf", "pointer")


class MetricError(ValueError):
    pass


Pairs = Sequence[tuple[str, str]]


@dataclass(frozen=True)
class ScoreReport:
    matched: int
    pred_total: int
    gold_total: int
    precision: float
    recall: float
    f1: float
    multitag_accuracy: float | None = None


def _pairs(x) -> tuple[tuple[str, str], ...]:
    return x.pairs if isinstance(x, Analysis) else tuple(tuple(p) for p in x)


def prf(matched: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    p = matched / n_pred if n_pred else 0.0
    r = matched / n_gold if n_gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def token_match(gold, pred) -> int:
    g = Counter(_pairs(gold))
    p = Counter(pp for pp in _pairs(pred) if pp[0] != UNREALIZED)
    return sum((g & p).values())


def _check_aligned(gold, pred):
    if len(gold) != len(pred):
        raise MetricError(f"{len(pred)} predicted sentences for {len(gold)} gold sentences")
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise MetricError(f"sentence {i + 1}: {len(p)} predicted tokens for {len(g)} gold tokens")


def seg_pos_f1(gold: Sequence[Sequence], pred: Sequence[Sequence]) -> ScoreReport:
    """Score per-sentence lists of analyses (or pair sequences)."""
    _check_aligned(gold, pred)
    matched = n_pred = n_gold = 0
    for gs, ps in zip(gold, pred):
        for g, p in zip(gs, ps):
            matched += token_match(g, p)
            n_pred += len(_pairs(p))
            n_gold += len(_pairs(g))
    p, r, f = prf(matched, n_pred, n_gold)
    return ScoreReport(matched, n_pred, n_gold, p, r, f)


def _label(x) -> str:
    if isinstance(x, Analysis):
        return canonical_label(multitag_of(x))
    return "+".join(t for _, t in _pairs(x))


def multitag_accuracy(gold: Sequence[Sequence], pred: Sequence[Sequence]) -> float:
    _check_aligned(gold, pred)
    n = correct = 0
    for gs, ps in zip(gold, pred):
        for g, p in zip(gs, ps):
            n += 1
            correct += _label(g) == _label(p)
    if n == 0:
        raise MetricError("multi-tag accuracy is undefined on an empty corpus")
    return correct / n


def evaluate(gold: Sequence[Sequence], pred: Sequence[Sequence]) -> ScoreReport:
    rep = seg_pos_f1(gold, pred)
    acc = multitag_accuracy(gold, pred) if any(len(g) for g in gold) else None
    return ScoreReport(rep.matched, rep.pred_total, rep.gold_total,
                       rep.precision, rep.recall, rep.f1, acc)


def zip_segmentation(forms: Sequence[str], tags: Sequence[str]) -> tuple[tuple[str, str], ...]:
    """Pair given segment forms with predicted tags.

    A length mismatch yields unrealized pairs, so every pair of the token
    counts as a miss.
    """
    if len(forms) != len(tags):
        return tuple((UNREALIZED, t) for t in tags)
    return tuple(zip(forms, tags))


def _sort_key(row):
    model, regime = row[0], row[1]
    ri = REGIME_ORDER.index(regime) if regime in REGIME_ORDER else len(REGIME_ORDER)
    mi = MODEL_ORDER.index(model) if model in MODEL_ORDER else len(MODEL_ORDER)
    return (ri, regime, mi, model)


def _cell(rep) -> str:
    if rep is None:
        return "NA"
    f = rep.f1 if isinstance(rep, ScoreReport) else float(rep)
    return f"{100 * f:.2f}"


def report_grid(rows: Iterable[tuple[str, str, ScoreReport | float | None]]) -> str:
    """Aligned text table, one line per (regime, model) row."""
    rows = sorted(rows, key=_sort_key)
    header = ("regime", "model", "P", "R", "F1")
    body = []
    for model, regime, rep in rows:
        if isinstance(rep, ScoreReport):
            body.append((regime, model, f"{100 * rep.precision:.2f}",
                         f"{100 * rep.recall:.2f}", f"{100 * rep.f1:.2f}"))
        elif rep is None:
            body.append((regime, model, "NA", "NA", "NA"))
        else:
            body.append((regime, model, "-", "-", _cell(rep)))
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]
    fmt = lambda r: "  ".join(c.ljust(w) if i < 2 else c.rjust(w)
                              for i, (c, w) in enumerate(zip(r, widths))).rstrip()
    lines = [fmt(header), fmt(tuple("-" * w for w in widths))]
    lines.extend(fmt(r) for r in body)
    return "\n".join(lines) + "\n"


def report_tsv(rows: Iterable[tuple[str, str, ScoreReport | float | None]]) -> str:
    out = ["regime\tmodel\tprecision\trecall\tf1"]
    for model, regime, rep in sorted(rows, key=_sort_key):
        if isinstance(rep, ScoreReport):
            out.append(f"{regime}\t{model}\t{rep.precision:.6f}\t{rep.recall:.6f}\t{rep.f1:.6f}")
        elif rep is None:
            out.append(f"{regime}\t{model}\tNA\tNA\tNA")
        else:
            out.append(f"{regime}\t{model}\t-\t-\t{float(rep):.6f}")
    return "\n".join(out) + "\n"


def table_grid(cells: dict[tuple[str, str], float | None], models: Sequence[str] = MODEL_ORDER,
               regimes: Sequence[str] = REGIME_ORDER) -> str:
    """Regime-by-model F1 matrix in the layout of the published results table."""
    head = ["segmentation"] + list(models)
    rows = [head]
    for reg in regimes:
        row = [reg]
        for m in models:
            v = cells.get((m, reg), "-")
            row.append("-" if v == "-" else ("NA" if v is None else f"{100 * v:.2f}"))
        rows.append(row)
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    lines = ["  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in rows]
    return "\n".join(lines) + "\n"


# Published Hebrew dev-set F1 for the cells this toolkit models, static
# documentation values only.
REFERENCE_GRID: dict[tuple[str, str], float | None] = {
    ("perceptron", "RAW_LATTICES"): 0.955,
    ("crf", "ORACLE"): 0.9320,
    ("crf", "PREDICTED"): 0.8657,
    ("crf", "RAW_TOKENS"): 0.7926,
    ("crf", "RAW_LATTICES"): None,
    ("pointer", "RAW_LATTICES"): 0.951,
}
