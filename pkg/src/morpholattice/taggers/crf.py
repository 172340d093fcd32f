"""BiLSTM-CRF multi-tagger over tokens, with a character BiLSTM per token.

Each token gets a single complex label (its multi-tag). Two input views:

``raw``
    characters of the surface token; forms are recovered from the predicted
    multi-tag by a :class:`SegmentRealizer`.
``segmented``
    characters of the given segments joined by ``|``, and decoding is limited
    to labels with as many tags as there are segments (when any exist).
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..config import Config
from ..core import Analysis, Corpus, Sentence, canonical_label, multitag_of, parse_label
from ..formats import load_model, save_model
from ..metrics import seg_pos_f1, zip_segmentation
from .. import tensor as tn
from .segment import SegmentRealizer

log = logging.getLogger(__name__)

KIND = "crf"
SEG_SEP = "|"
UNK = "<unk>"


class CrfError(ValueError):
    pass


def logsumexp(x: np.ndarray, axis=None) -> np.ndarray:
    m = np.max(x, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis) if axis is not None else out.reshape(())


# linear-chain CRF on one sentence; transitions are (L+2, L+2) with START=L, STOP=L+1

def _masked(emit, allowed):
    if allowed is None:
        return emit
    return np.where(allowed, emit, -np.inf)


def crf_path_score(emit: np.ndarray, trans: np.ndarray, labels: Sequence[int]) -> float:
    L = emit.shape[1]
    s = trans[L, labels[0]] + emit[0, labels[0]]
    for t in range(1, len(labels)):
        s += trans[labels[t - 1], labels[t]] + emit[t, labels[t]]
    return float(s + trans[labels[-1], L + 1])


def crf_forward(emit: np.ndarray, trans: np.ndarray, allowed=None):
    """Log-space forward pass; returns (log_partition, alphas)."""
    e = _masked(emit, allowed)
    T, L = e.shape
    A = trans[:L, :L]
    alpha = np.empty((T, L))
    alpha[0] = trans[L, :L] + e[0]
    for t in range(1, T):
        alpha[t] = logsumexp(alpha[t - 1][:, None] + A, axis=0) + e[t]
    return float(logsumexp(alpha[-1] + trans[:L, L + 1], axis=0)), alpha


def crf_log_partition(emit, trans, allowed=None) -> float:
    return crf_forward(emit, trans, allowed)[0]


def crf_nll(emit: np.ndarray, trans: np.ndarray, labels: Sequence[int], allowed=None):
    """Negative log-likelihood of ``labels``; returns (loss, d_emit, d_trans)."""
    e = _masked(emit, allowed)
    T, L = e.shape
    logz, alpha = crf_forward(emit, trans, allowed)
    A = trans[:L, :L]
    beta = np.empty((T, L))
    beta[-1] = trans[:L, L + 1]
    for t in range(T - 2, -1, -1):
        beta[t] = logsumexp(A + (e[t + 1] + beta[t + 1])[None, :], axis=1)
    with np.errstate(invalid="ignore"):
        marg = np.exp(alpha + beta - logz)
    marg = np.where(np.isfinite(marg), marg, 0.0)
    d_emit = marg.copy()
    d_trans = np.zeros_like(trans)
    d_trans[L, :L] = marg[0]
    d_trans[:L, L + 1] = marg[-1]
    for t in range(1, T):
        pair = np.exp(alpha[t - 1][:, None] + A + (e[t] + beta[t])[None, :] - logz)
        d_trans[:L, :L] += pair
    gold = crf_path_score(emit, trans, labels)
    rows = np.arange(T)
    d_emit[rows, labels] -= 1.0
    d_trans[L, labels[0]] -= 1.0
    d_trans[labels[-1], L + 1] -= 1.0
    for t in range(1, T):
        d_trans[labels[t - 1], labels[t]] -= 1.0
    return logz - gold, d_emit, d_trans


def crf_viterbi(emit: np.ndarray, trans: np.ndarray, allowed=None) -> tuple[list[int], float]:
    e = _masked(emit, allowed)
    T, L = e.shape
    A = trans[:L, :L]
    delta = trans[L, :L] + e[0]
    back = np.zeros((T, L), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + A
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(L)] + e[t]
    final = delta + trans[:L, L + 1]
    y = [int(np.argmax(final))]
    score = float(final[y[0]])
    for t in range(T - 1, 0, -1):
        y.append(int(back[t, y[-1]]))
    return y[::-1], score


# model

@dataclass
class CrfBatch:
    wids: np.ndarray          # (T, B)
    wmask: np.ndarray         # (T, B)
    cids: np.ndarray          # (C, N)
    cmask: np.ndarray         # (C, N)
    tok_t: np.ndarray         # (N,) time index of each flattened token
    tok_b: np.ndarray         # (N,) batch index
    lengths: list[int]
    labels: list[list[int]] | None
    allowed: list[np.ndarray | None]


class CrfModel:
    def __init__(self, params: tn.Params, words: list[str], chars: list[str], labels: list[str],
                 view: str, config: Config, realizer: SegmentRealizer | None = None):
        if view not in ("raw", "segmented"):
            raise CrfError(f"unknown CRF input view {view!r}")
        self.params = params
        self.words = words
        self.chars = chars
        self.labels = labels
        self.view = view
        self.config = config
        self.realizer = realizer
        self.word_ix = {w: i for i, w in enumerate(words)}
        self.char_ix = {c: i for i, c in enumerate(chars)}
        self.label_ix = {l: i for i, l in enumerate(labels)}
        self.label_len = np.array([len(parse_label(l)) for l in labels])

    @classmethod
    def init(cls, words, chars, labels, view, config: Config, rng: np.random.Generator,
             realizer=None) -> "CrfModel":
        c = config
        P = tn.Params()
        P.add("E_word", tn.embedding_init(rng, len(words), c.crf_word_dim, c.embed_init_std))
        P.add("E_char", tn.embedding_init(rng, len(chars), c.crf_char_dim, c.embed_init_std))
        for d in ("f", "b"):
            W, b = tn.lstm_init(rng, c.crf_char_dim, c.crf_char_hidden)
            P.add(f"char_{d}_W", W)
            P.add(f"char_{d}_b", b)
        tok_dim = c.crf_word_dim + 2 * c.crf_char_hidden
        for d in ("f", "b"):
            W, b = tn.lstm_init(rng, tok_dim, c.crf_hidden)
            P.add(f"sent_{d}_W", W)
            P.add(f"sent_{d}_b", b)
        L = len(labels)
        P.add("out_W", tn.glorot(rng, 2 * c.crf_hidden, L))
        P.add("out_b", np.zeros(L))
        P.add("trans", np.zeros((L + 2, L + 2)))
        return cls(P, list(words), list(chars), list(labels), view, config, realizer)

    # inputs

    def token_strings(self, sent: Sentence, forms=None) -> list[str]:
        if self.view == "raw":
            return list(sent.surfaces)
        if forms is None:
            if sent.gold is None:
                raise CrfError("segmented view needs a segmentation for every token")
            forms = [a.forms for a in sent.gold]
        return [SEG_SEP.join(f) for f in forms]

    def encode(self, sents: Sequence[Sentence], forms=None, with_labels=False,
               unk_rng: np.random.Generator | None = None, singletons=frozenset()) -> CrfBatch:
        B = len(sents)
        lengths = [len(s) for s in sents]
        T = max(lengths)
        wids = np.zeros((T, B), dtype=np.int64)
        wmask = np.zeros((T, B))
        strings, tok_t, tok_b = [], [], []
        for b, s in enumerate(sents):
            toks = self.token_strings(s, None if forms is None else forms[b])
            for t, surf in enumerate(s.surfaces):
                wid = self.word_ix.get(surf, 0)
                if unk_rng is not None and surf in singletons and unk_rng.random() < \
                        self.config.crf_word_unk_prob:
                    wid = 0
                wids[t, b] = wid
                wmask[t, b] = 1.0
                strings.append(toks[t])
                tok_t.append(t)
                tok_b.append(b)
        C = max(len(x) for x in strings)
        N = len(strings)
        cids = np.zeros((C, N), dtype=np.int64)
        cmask = np.zeros((C, N))
        for n, x in enumerate(strings):
            for i, ch in enumerate(x):
                cids[i, n] = self.char_ix.get(ch, 0)
                cmask[i, n] = 1.0
        labels = None
        if with_labels:
            labels = []
            for s in sents:
                row = []
                for a in s.gold:
                    lab = canonical_label(multitag_of(a))
                    if lab not in self.label_ix:
                        raise CrfError(f"gold multi-tag {lab!r} is not in the label inventory")
                    row.append(self.label_ix[lab])
                labels.append(row)
        allowed = []
        for b, s in enumerate(sents):
            if self.view != "segmented":
                allowed.append(None)
                continue
            segs = [a.forms for a in s.gold] if forms is None else forms[b]
            rows = []
            for f in segs:
                ok = self.label_len == len(f)
                rows.append(ok if ok.any() else np.ones(len(self.labels), dtype=bool))
            allowed.append(np.array(rows))
        return CrfBatch(wids, wmask, cids, cmask, np.array(tok_t), np.array(tok_b),
                        lengths, labels, allowed)

    # network

    def emissions(self, batch: CrfBatch):
        P = self.params
        hc = self.config.crf_char_hidden
        cx = tn.embedding_forward(P["E_char"], batch.cids)
        ch, cf, cb, ccache = tn.bidirectional_encode(P["char_f_W"], P["char_f_b"], P["char_b_W"],
                                                     P["char_b_b"], cx, batch.cmask)
        crep = np.concatenate([cf, cb], axis=-1)
        wx = tn.embedding_forward(P["E_word"], batch.wids)
        T, B = batch.wids.shape
        grid = np.zeros((T, B, 2 * hc))
        grid[batch.tok_t, batch.tok_b] = crep
        x = np.concatenate([wx, grid], axis=-1)
        hs, scache = tn.bilstm_forward(P["sent_f_W"], P["sent_f_b"], P["sent_b_W"], P["sent_b_b"],
                                       x, batch.wmask)
        em = tn.linear_forward(P["out_W"], P["out_b"], hs)
        return em, (ccache, ch.shape, scache, hs, x.shape)

    def backward(self, batch: CrfBatch, dem: np.ndarray, cache) -> None:
        P, G = self.params, self.params.grads
        ccache, ch_shape, scache, hs, x_shape = cache
        hc = self.config.crf_char_hidden
        dw = self.config.crf_word_dim
        dhs, dW, db = tn.linear_backward(P["out_W"], hs, dem)
        G["out_W"] += dW
        G["out_b"] += db
        dx, dWf, dbf, dWb, dbb = tn.bilstm_backward(P["sent_f_W"], P["sent_b_W"], dhs, scache)
        G["sent_f_W"] += dWf
        G["sent_f_b"] += dbf
        G["sent_b_W"] += dWb
        G["sent_b_b"] += dbb
        tn.embedding_backward(G["E_word"], batch.wids, np.ascontiguousarray(dx[..., :dw]))
        dcrep = dx[..., dw:][batch.tok_t, batch.tok_b]
        dch = np.zeros(ch_shape)
        dch[-1, :, :hc] += dcrep[:, :hc]
        dch[0, :, hc:] += dcrep[:, hc:]
        dcx, dWf, dbf, dWb, dbb = tn.bilstm_backward(P["char_f_W"], P["char_b_W"], dch, ccache)
        G["char_f_W"] += dWf
        G["char_f_b"] += dbf
        G["char_b_W"] += dWb
        G["char_b_b"] += dbb
        tn.embedding_backward(G["E_char"], batch.cids, dcx)

    def loss_and_grads(self, batch: CrfBatch) -> float:
        """Summed NLL over the batch; gradients are written to ``params.grads``."""
        self.params.zero_grad()
        em, cache = self.emissions(batch)
        trans = self.params["trans"]
        dem = np.zeros_like(em)
        total = 0.0
        for b, n in enumerate(batch.lengths):
            loss, de, dt = crf_nll(em[:n, b], trans, batch.labels[b], batch.allowed[b])
            total += loss
            dem[:n, b] = de
            self.params.grads["trans"] += dt
        self.backward(batch, dem, cache)
        return total

    def decode_batch(self, batch: CrfBatch) -> list[list[int]]:
        em, _ = self.emissions(batch)
        trans = self.params["trans"]
        return [crf_viterbi(em[:n, b], trans, batch.allowed[b])[0] for b, n in enumerate(batch.lengths)]

    def predict_labels(self, sents: Sequence[Sentence], forms=None, batch_size=64) -> list[list[str]]:
        out = []
        for i in range(0, len(sents), batch_size):
            chunk = sents[i:i + batch_size]
            fchunk = None if forms is None else forms[i:i + batch_size]
            for row in self.decode_batch(self.encode(chunk, fchunk)):
                out.append([self.labels[y] for y in row])
        return out

    def predict(self, sents: Sequence[Sentence], forms=None) -> list[list[Analysis]]:
        """Analyses per token; ``forms`` gives the segmentation in the segmented view."""
        sents = list(sents)
        if self.view == "segmented" and forms is None:
            forms = [[a.forms for a in s.gold] for s in sents]
        out = []
        for b, (s, labs) in enumerate(zip(sents, self.predict_labels(sents, forms))):
            row = []
            for t, lab in enumerate(labs):
                tags = parse_label(lab).tags
                if self.view == "segmented":
                    pairs = zip_segmentation(forms[b][t], tags)
                else:
                    pairs = tuple(zip(self.realizer.realize(s.tokens[t].surface, tags), tags))
                row.append(Analysis.of(*pairs))
            out.append(row)
        return out

    # persistence

    def to_checkpoint(self):
        vocab = {"words": self.words, "chars": self.chars, "labels": self.labels, "view": self.view,
                 "realizer": None if self.realizer is None else self.realizer.to_dict()}
        return KIND, self.config.to_dict(), vocab, {k: self.params[k] for k in self.params.names()}

    def save(self, path) -> None:
        save_model(path, *self.to_checkpoint())

    @classmethod
    def from_checkpoint(cls, config: dict, vocab: dict, params: dict) -> "CrfModel":
        P = tn.Params()
        for k in sorted(params):
            P.add(k, params[k])
        realizer = SegmentRealizer.from_dict(vocab["realizer"]) if vocab["realizer"] else None
        model = cls(P, vocab["words"], vocab["chars"], vocab["labels"], vocab["view"],
                    Config.from_dict(config), realizer)
        expected = cls.init(model.words, model.chars, model.labels, model.view, model.config,
                            tn.make_rng(0))
        for k in expected.params.names():
            if k not in P or P[k].shape != expected.params[k].shape:
                raise CrfError(f"checkpoint parameter {k} does not match the stored config")
        return model

    @classmethod
    def load(cls, path) -> "CrfModel":
        _, config, vocab, params = load_model(path, expect_kind=KIND)
        return cls.from_checkpoint(config, vocab, params)


def build_vocab(corpus: Corpus, view: str):
    words = Counter(t.surface for s in corpus for t in s.tokens)
    chars: dict[str, None] = {}
    for s in corpus:
        for tok, a in zip(s.tokens, s.gold):
            text = tok.surface if view == "raw" else SEG_SEP.join(a.forms)
            for ch in text:
                chars.setdefault(ch, None)
    labels = list(dict.fromkeys(canonical_label(multitag_of(a)) for s in corpus for a in s.gold))
    return [UNK] + sorted(words), [UNK] + list(chars), labels, words


def _dev_f1(model: CrfModel, dev: Sequence[Sentence], dev_forms) -> float:
    pred = model.predict(dev, dev_forms)
    return seg_pos_f1([s.gold for s in dev], pred).f1


def train_crf(corpus: Corpus, config: Config, rng: np.random.Generator, view: str = "raw",
              dev: Sequence[Sentence] | None = None, dev_forms=None) -> CrfModel:
    if not corpus.has_gold:
        raise CrfError("CRF training needs a corpus with gold analyses")
    words, chars, labels, counts = build_vocab(corpus, view)
    realizer = SegmentRealizer.fit(corpus) if view == "raw" else None
    model = CrfModel.init(words, chars, labels, view, config, rng, realizer)
    singletons = frozenset(w for w, c in counts.items() if c == 1)
    sents = list(corpus)
    state = tn.AdamState()
    best_f1, best_params, bad = -1.0, None, 0
    c = config
    for epoch in range(c.crf_epochs):
        order = rng.permutation(len(sents))
        total = 0.0
        for i in range(0, len(order), c.crf_batch):
            chunk = [sents[j] for j in order[i:i + c.crf_batch]]
            batch = model.encode(chunk, with_labels=True, unk_rng=rng, singletons=singletons)
            total += model.loss_and_grads(batch)
            tn.adam_step(model.params, state, c.crf_lr, c.adam_beta1, c.adam_beta2, c.adam_eps,
                         c.grad_clip)
        if dev is None:
            log.info("crf[%s] epoch %d loss %.4f", view, epoch + 1, total)
            continue
        f1 = _dev_f1(model, dev, dev_forms)
        log.info("crf[%s] epoch %d loss %.4f dev F1 %.4f", view, epoch + 1, total, f1)
        if f1 > best_f1:
            best_f1, bad = f1, 0
            best_params = {k: v.copy() for k, v in model.params.values.items()}
        else:
            bad += 1
            if bad >= c.crf_patience:
                break
    if best_params is not None:
        for k, v in best_params.items():
            model.params.values[k][...] = v
    return model
