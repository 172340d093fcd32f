"""Lattice pointer network: a decoder that copies arcs out of the input lattice.

Arcs are read in :func:`~morpholattice.lattice.linearize` order, embedded as
form + tag + token-index vectors and contextualized by a BiLSTM. With
``pointer_path_pool`` each encoding is extended by the mean encoding of the
arcs completing its analysis inside the token (the arc itself included), so
analyses that share a first morpheme get distinct keys. At every step
the decoder state queries those encodings with dot-product attention; the
attention distribution, restricted to arcs leaving the current node, is the
output distribution. The chosen arc's encoding and the attention context feed
the next step, and decoding stops at the sink. There is no generation
vocabulary, so every output is a path of the input lattice.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..config import Config
from ..core import Analysis, Corpus, Sentence
from ..formats import load_model, save_model
from ..lattice import Lattice, LatticePath, build_lattice, linearize
from ..lexicon import Lexicon
from ..metrics import seg_pos_f1
from .. import tensor as tn
from .base import training_lattices

log = logging.getLogger(__name__)

KIND = "pointer"
UNK = "<unk>"


class PointerError(ValueError):
    pass


@dataclass
class PointerBatch:
    lattices: list[Lattice]
    fids: np.ndarray        # (N, B)
    tids: np.ndarray
    iids: np.ndarray
    amask: np.ndarray       # (N, B)
    from_node: np.ndarray   # (B, N), -1 on padding
    to_node: np.ndarray
    arc_id: np.ndarray      # (B, N), large on padding
    pool: np.ndarray | None = None      # (B, N, N) row-stochastic sub-path pooling
    targets: np.ndarray | None = None   # (B, S) linearized positions
    weights: np.ndarray | None = None   # (B, S) 1 on real steps


class PointerModel:
    def __init__(self, params: tn.Params, forms: list[str], tags: list[str], config: Config):
        self.params = params
        self.forms = forms
        self.tags = tags
        self.config = config
        self.form_ix = {f: i for i, f in enumerate(forms)}
        self.tag_ix = {t: i for i, t in enumerate(tags)}

    @classmethod
    def init(cls, forms, tags, config: Config, rng: np.random.Generator) -> "PointerModel":
        c = config
        H, Hd = c.pointer_hidden, c.pointer_hidden
        D = 4 * H if c.pointer_path_pool else 2 * H
        P = tn.Params()
        P.add("E_form", tn.embedding_init(rng, len(forms), c.pointer_form_dim, c.embed_init_std))
        P.add("E_tag", tn.embedding_init(rng, len(tags), c.pointer_tag_dim, c.embed_init_std))
        P.add("E_index", tn.embedding_init(rng, c.pointer_max_index, c.pointer_index_dim,
                                           c.embed_init_std))
        din = c.pointer_form_dim + c.pointer_tag_dim + c.pointer_index_dim
        for d in ("f", "b"):
            W, b = tn.lstm_init(rng, din, H)
            P.add(f"enc_{d}_W", W)
            P.add(f"enc_{d}_b", b)
        W, b = tn.lstm_init(rng, 2 * D, Hd)
        P.add("dec_W", W)
        P.add("dec_b", b)
        P.add("dec_start", tn.embedding_init(rng, 1, 2 * D, c.embed_init_std)[0])
        P.add("q_W", tn.glorot(rng, Hd, D))
        P.add("q_b", np.zeros(D))
        return cls(P, list(forms), list(tags), config)

    # inputs

    def encode(self, lattices: Sequence[Lattice], paths: Sequence[LatticePath] | None = None,
               unk_rng: np.random.Generator | None = None, singletons=frozenset()) -> PointerBatch:
        B = len(lattices)
        N = max(len(l.arcs) for l in lattices)
        fids = np.zeros((N, B), dtype=np.int64)
        tids = np.zeros((N, B), dtype=np.int64)
        iids = np.zeros((N, B), dtype=np.int64)
        amask = np.zeros((N, B))
        frm = np.full((B, N), -1, dtype=np.int64)
        to = np.full((B, N), -1, dtype=np.int64)
        aid = np.full((B, N), np.iinfo(np.int64).max, dtype=np.int64)
        pos_of = []
        maxi = self.config.pointer_max_index - 1
        for b, lat in enumerate(lattices):
            where = {}
            for n, a in enumerate(linearize(lat)):
                fid = self.form_ix.get(a.form, 0)
                if unk_rng is not None and a.form in singletons and unk_rng.random() < \
                        self.config.pointer_form_unk_prob:
                    fid = 0
                fids[n, b] = fid
                tids[n, b] = self.tag_ix.get(a.tag, 0)
                iids[n, b] = min(a.token_index, maxi)
                amask[n, b] = 1.0
                frm[b, n], to[b, n], aid[b, n] = a.from_node, a.to_node, a.id
                where[a.id] = n
            pos_of.append(where)
        batch = PointerBatch(list(lattices), fids, tids, iids, amask, frm, to, aid)
        if self.config.pointer_path_pool:
            batch.pool = np.zeros((B, N, N))
            for b, lat in enumerate(lattices):
                subpath_pool(lat, pos_of[b], batch.pool[b])
        if paths is not None:
            S = max(len(p.arc_ids) for p in paths)
            batch.targets = np.zeros((B, S), dtype=np.int64)
            batch.weights = np.zeros((B, S))
            for b, p in enumerate(paths):
                for s, a in enumerate(p.arc_ids):
                    batch.targets[b, s] = pos_of[b][a]
                    batch.weights[b, s] = 1.0
        return batch

    # network

    def encode_arcs(self, batch: PointerBatch):
        P = self.params
        x = np.concatenate([tn.embedding_forward(P["E_form"], batch.fids),
                            tn.embedding_forward(P["E_tag"], batch.tids),
                            tn.embedding_forward(P["E_index"], batch.iids)], axis=-1)
        enc, cache = tn.bilstm_forward(P["enc_f_W"], P["enc_f_b"], P["enc_b_W"], P["enc_b_b"],
                                       x, batch.amask)
        K = np.ascontiguousarray(enc.transpose(1, 0, 2))
        if batch.pool is not None:
            K = np.concatenate([K, batch.pool @ K], axis=-1)
        return K, cache

    def arc_encodings(self, lat: Lattice) -> np.ndarray:
        """Keys for ``lat``'s arcs in linearized order, (n_arcs, 4H) with pooling, else (n_arcs, 2H)."""
        K, _ = self.encode_arcs(self.encode([lat]))
        return K[0, :len(lat.arcs)]

    def _step(self, inp, h, c, K, mask):
        P = self.params
        h, c, sc = tn.lstm_step_forward(P["dec_W"], P["dec_b"], inp, h, c)
        q = tn.linear_forward(P["q_W"], P["q_b"], h)
        w, ctx, acache = tn.attention_forward(q, K, mask)
        return h, c, sc, w, ctx, acache

    def _start(self, B):
        return np.tile(self.params["dec_start"], (B, 1))

    def teacher_forced(self, batch: PointerBatch):
        """Forward pass on gold targets; returns (loss, caches, predictions)."""
        K, ecache = self.encode_arcs(batch)
        B, S = batch.targets.shape
        Hd = self.config.pointer_hidden
        h = np.zeros((B, Hd))
        c = np.zeros((B, Hd))
        inp = self._start(B)
        rows = np.arange(B)
        node = np.zeros(B, dtype=np.int64)
        total = 0.0
        steps = []
        preds = np.zeros((B, S), dtype=np.int64)
        for s in range(S):
            mask = (batch.from_node == node[:, None]) & (batch.weights[:, s:s + 1] > 0)
            h, c, sc, w, ctx, acache = self._step(inp, h, c, K, mask)
            loss, dsc, _ = tn.softmax_cross_entropy(acache[4], batch.targets[:, s], mask,
                                                    batch.weights[:, s])
            total += loss
            preds[:, s] = self._choose(acache[4], mask, batch)
            steps.append((sc, h, acache, dsc))
            tgt = batch.targets[:, s]
            inp = np.concatenate([K[rows, tgt], ctx], axis=-1)
            node = np.where(batch.weights[:, s] > 0, batch.to_node[rows, tgt], node)
        return total, (K, ecache, steps), preds

    def loss_and_grads(self, batch: PointerBatch) -> float:
        self.params.zero_grad()
        total, cache, _ = self.teacher_forced(batch)
        self.backward(batch, cache)
        return total

    def backward(self, batch: PointerBatch, cache) -> None:
        P, G = self.params, self.params.grads
        K, ecache, steps = cache
        B, S = batch.targets.shape
        H2 = K.shape[-1]
        rows = np.arange(B)
        dK = np.zeros_like(K)
        d_next = np.zeros((B, 2 * H2))
        dh = np.zeros((B, self.config.pointer_hidden))
        dc = np.zeros_like(dh)
        for s in range(S - 1, -1, -1):
            sc, h, acache, dsc = steps[s]
            # d_next is the gradient on step s+1's input [K[target_s], ctx_s]
            np.add.at(dK, (rows, batch.targets[:, s]), d_next[:, :H2])
            dq, dKa = tn.attention_backward(acache, dctx=d_next[:, H2:], dscores=dsc)
            dK += dKa
            dhq, dW, db = tn.linear_backward(P["q_W"], h, dq)
            G["q_W"] += dW
            G["q_b"] += db
            dx, dh, dc, dW, db = tn.lstm_step_backward(P["dec_W"], dh + dhq, dc, sc)
            G["dec_W"] += dW
            G["dec_b"] += db
            d_next = dx
        G["dec_start"] += d_next.sum(axis=0)
        if batch.pool is not None:
            H2 //= 2
            dK = dK[..., :H2] + batch.pool.transpose(0, 2, 1) @ dK[..., H2:]
        denc = np.ascontiguousarray(dK.transpose(1, 0, 2))
        dx, dWf, dbf, dWb, dbb = tn.bilstm_backward(P["enc_f_W"], P["enc_b_W"], denc, ecache)
        G["enc_f_W"] += dWf
        G["enc_f_b"] += dbf
        G["enc_b_W"] += dWb
        G["enc_b_b"] += dbb
        c = self.config
        d1, d2 = c.pointer_form_dim, c.pointer_form_dim + c.pointer_tag_dim
        tn.embedding_backward(G["E_form"], batch.fids, np.ascontiguousarray(dx[..., :d1]))
        tn.embedding_backward(G["E_tag"], batch.tids, np.ascontiguousarray(dx[..., d1:d2]))
        tn.embedding_backward(G["E_index"], batch.iids, np.ascontiguousarray(dx[..., d2:]))

    @staticmethod
    def _choose(scores, mask, batch: PointerBatch) -> np.ndarray:
        """Arg-max position per row; exact ties go to the smallest arc id."""
        s = np.where(mask, scores, -np.inf)
        best = s.max(axis=1, keepdims=True)
        tied = mask & (s == best)
        ids = np.where(tied, batch.arc_id, np.iinfo(np.int64).max)
        return np.argmin(ids, axis=1)

    def decode_batch(self, batch: PointerBatch) -> list[LatticePath]:
        K, _ = self.encode_arcs(batch)
        B = K.shape[0]
        Hd = self.config.pointer_hidden
        h = np.zeros((B, Hd))
        c = np.zeros((B, Hd))
        inp = self._start(B)
        rows = np.arange(B)
        node = np.zeros(B, dtype=np.int64)
        sinks = np.array([l.sink for l in batch.lattices])
        done = node == sinks
        paths: list[list[int]] = [[] for _ in range(B)]
        while not done.all():
            mask = (batch.from_node == node[:, None]) & ~done[:, None]
            if not mask.any(axis=1)[~done].all():
                raise PointerError("no admissible arc: lattice has a dead end")
            h, c, _, w, ctx, acache = self._step(inp, h, c, K, mask)
            pos = self._choose(acache[4], mask, batch)
            for b in np.flatnonzero(~done):
                paths[b].append(int(batch.arc_id[b, pos[b]]))
            inp = np.concatenate([K[rows, pos], ctx], axis=-1)
            node = np.where(done, node, batch.to_node[rows, pos])
            done = node == sinks
        return [LatticePath(tuple(p)) for p in paths]

    def decode(self, lattices: Sequence[Lattice], batch_size: int = 64) -> list[LatticePath]:
        out = []
        for i in range(0, len(lattices), batch_size):
            out.extend(self.decode_batch(self.encode(lattices[i:i + batch_size])))
        return out

    def predict_lattices(self, lattices: Sequence[Lattice]) -> list[list[Analysis]]:
        lattices = list(lattices)
        return [lat.project(p) for lat, p in zip(lattices, self.decode(lattices))]

    def predict(self, sents: Sequence[Sentence], lex: Lexicon) -> list[list[Analysis]]:
        return self.predict_lattices([build_lattice(s, lex) for s in sents])

    def arc_accuracy(self, lattices, paths, batch_size: int = 64) -> float:
        """Teacher-forced accuracy of the chosen arc over all decoder steps."""
        correct = total = 0
        for i in range(0, len(lattices), batch_size):
            batch = self.encode(lattices[i:i + batch_size], paths[i:i + batch_size])
            _, _, preds = self.teacher_forced(batch)
            m = batch.weights > 0
            correct += int(((preds == batch.targets) & m).sum())
            total += int(m.sum())
        return correct / total

    # persistence

    def to_checkpoint(self):
        vocab = {"forms": self.forms, "tags": self.tags}
        return KIND, self.config.to_dict(), vocab, {k: self.params[k] for k in self.params.names()}

    def save(self, path) -> None:
        save_model(path, *self.to_checkpoint())

    @classmethod
    def from_checkpoint(cls, config: dict, vocab: dict, params: dict) -> "PointerModel":
        P = tn.Params()
        for k in sorted(params):
            P.add(k, params[k])
        model = cls(P, vocab["forms"], vocab["tags"], Config.from_dict(config))
        expected = cls.init(model.forms, model.tags, model.config, tn.make_rng(0))
        for k in expected.params.names():
            if k not in P or P[k].shape != expected.params[k].shape:
                raise PointerError(f"checkpoint parameter {k} does not match the stored config")
        return model

    @classmethod
    def load(cls, path) -> "PointerModel":
        _, config, vocab, params = load_model(path, expect_kind=KIND)
        return cls.from_checkpoint(config, vocab, params)


def subpath_pool(lat: Lattice, pos: dict[int, int], out: np.ndarray) -> None:
    """Fill ``out[pos[a]]`` with mean weights over arc a and the arcs after it in its token.

    Where a node inside the token has several outgoing arcs their rows are
    averaged, so each row sums to one.
    """
    rows: dict[int, np.ndarray] = {}
    ends = set(lat.token_boundaries)
    for a in sorted(lat.arcs, key=lambda a: (-a.from_node, a.id)):
        r = np.zeros(out.shape[1])
        r[pos[a.id]] = 1.0
        if a.to_node not in ends:
            nxt = lat.out_arcs[a.to_node]
            r += sum(rows[c.id] for c in nxt) / len(nxt)
        rows[a.id] = r
    for aid, r in rows.items():
        out[pos[aid]] = r / r.sum()


def training_data(corpus: Corpus, lex: Lexicon, oov_prob: float = 0.0,
                  rng: np.random.Generator | None = None):
    return training_lattices(corpus, lex, oov_prob, rng or np.random.default_rng(0))


def build_vocab(lattices: Sequence[Lattice]):
    from collections import Counter

    # frequency counts token occurrences, so one unknown-word expansion that
    # repeats a stem under several tags still counts it once
    forms = Counter(f for lat in lattices for t in range(lat.num_tokens)
                    for f in {a.form for a in lat.arcs if a.token_index == t})
    tags = dict.fromkeys(a.tag for lat in lattices for a in lat.arcs)
    return [UNK] + sorted(forms), [UNK] + sorted(tags), forms


def train_pointer(corpus: Corpus, lex: Lexicon, config: Config, rng: np.random.Generator,
                  dev: Sequence[Sentence] | None = None) -> PointerModel:
    lats, paths = training_data(corpus, lex, config.lattice_oov_prob, rng)
    forms, tags, counts = build_vocab(lats)
    model = PointerModel.init(forms, tags, config, rng)
    singletons = frozenset(f for f, n in counts.items() if n == 1)
    dev_lats = None if dev is None else [build_lattice(s, lex) for s in dev]
    state = tn.AdamState()
    best_f1, best_params, bad = -1.0, None, 0
    c = config
    for epoch in range(c.pointer_epochs):
        order = rng.permutation(len(lats))
        total = 0.0
        for i in range(0, len(order), c.pointer_batch):
            idx = order[i:i + c.pointer_batch]
            batch = model.encode([lats[j] for j in idx], [paths[j] for j in idx],
                                 unk_rng=rng, singletons=singletons)
            total += model.loss_and_grads(batch)
            tn.adam_step(model.params, state, c.pointer_lr, c.adam_beta1, c.adam_beta2,
                         c.adam_eps, c.grad_clip)
        if dev_lats is None:
            log.info("pointer epoch %d loss %.4f", epoch + 1, total)
            continue
        pred = model.predict_lattices(dev_lats)
        f1 = seg_pos_f1([s.gold for s in dev], pred).f1
        log.info("pointer epoch %d loss %.4f dev F1 %.4f", epoch + 1, total, f1)
        if f1 > best_f1:
            best_f1, bad = f1, 0
            best_params = {k: v.copy() for k, v in model.params.values.items()}
        else:
            bad += 1
            if bad >= c.pointer_patience:
                break
    if best_params is not None:
        for k, v in best_params.items():
            model.params.values[k][...] = v
    return model
