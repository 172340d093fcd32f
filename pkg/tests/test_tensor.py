import numpy as np
import pytest
from hypothesis import given, strategies as st

from morpholattice import tensor as tn

TOL = 1e-4
EPS = 1e-5


def _check(f, values):
    return tn.grad_check(f, values, EPS)


def _rand(rng, *shape):
    return rng.normal(0.0, 0.7, shape)


def test_embedding_grad():
    rng = tn.make_rng(1)
    v = {"E": _rand(rng, 5, 3)}
    idx = np.array([[0, 2], [2, 4], [1, 2]])
    up = _rand(rng, 3, 2, 3)

    def f():
        out = tn.embedding_forward(v["E"], idx)
        g = np.zeros_like(v["E"])
        tn.embedding_backward(g, idx, up)
        return float((out * up).sum()), {"E": g}

    assert _check(f, v) < TOL


def test_linear_grad():
    rng = tn.make_rng(2)
    v = {"W": _rand(rng, 4, 3), "b": _rand(rng, 3), "x": _rand(rng, 2, 5, 4)}
    up = _rand(rng, 2, 5, 3)

    def f():
        y = tn.linear_forward(v["W"], v["b"], v["x"])
        dx, dW, db = tn.linear_backward(v["W"], v["x"], up)
        return float((y * up).sum()), {"W": dW, "b": db, "x": dx}

    assert _check(f, v) < TOL


def test_lstm_grad_through_time_with_mask():
    rng = tn.make_rng(3)
    W, b = tn.lstm_init(rng, 3, 4)
    v = {"W": W, "b": _rand(rng, 16), "xs": _rand(rng, 4, 2, 3), "h0": _rand(rng, 2, 4),
         "c0": _rand(rng, 2, 4)}
    mask = np.array([[1, 1], [1, 1], [1, 0], [1, 0]], dtype=float)
    up = _rand(rng, 4, 2, 4)
    for reverse in (False, True):
        def f():
            hs, cache = tn.lstm_forward(v["W"], v["b"], v["xs"], mask, reverse, v["h0"], v["c0"])
            dxs, dW, db, dh0, dc0 = tn.lstm_backward(v["W"], up, cache)
            return float((hs * up).sum()), {"W": dW, "b": db, "xs": dxs, "h0": dh0, "c0": dc0}

        assert _check(f, v) < TOL


def test_bilstm_grad():
    rng = tn.make_rng(4)
    Wf, _ = tn.lstm_init(rng, 2, 3)
    Wb, _ = tn.lstm_init(rng, 2, 3)
    v = {"Wf": Wf, "bf": _rand(rng, 12), "Wb": Wb, "bb": _rand(rng, 12), "xs": _rand(rng, 3, 2, 2)}
    mask = np.array([[1, 1], [1, 1], [1, 0]], dtype=float)
    up = _rand(rng, 3, 2, 6)

    def f():
        out, cache = tn.bilstm_forward(v["Wf"], v["bf"], v["Wb"], v["bb"], v["xs"], mask)
        dxs, dWf, dbf, dWb, dbb = tn.bilstm_backward(v["Wf"], v["Wb"], up, cache)
        return float((out * up).sum()), {"Wf": dWf, "bf": dbf, "Wb": dWb, "bb": dbb, "xs": dxs}

    assert _check(f, v) < TOL


def test_attention_grad():
    rng = tn.make_rng(5)
    v = {"q": _rand(rng, 2, 3), "K": _rand(rng, 2, 4, 3)}
    mask = np.array([[1, 1, 0, 1], [0, 1, 1, 1]], dtype=bool)
    uw, uc = _rand(rng, 2, 4), _rand(rng, 2, 3)

    def f():
        w, ctx, cache = tn.attention_forward(v["q"], v["K"], mask)
        dq, dK = tn.attention_backward(cache, dw=uw, dctx=uc)
        return float((w * uw).sum() + (ctx * uc).sum()), {"q": dq, "K": dK}

    assert _check(f, v) < TOL


def test_softmax_cross_entropy_grad():
    rng = tn.make_rng(6)
    v = {"z": _rand(rng, 3, 5)}
    mask = np.array([[1, 1, 1, 0, 0], [1, 1, 1, 1, 1], [0, 0, 1, 1, 0]], dtype=bool)
    target = np.array([1, 4, 2])
    weight = np.array([1.0, 0.5, 2.0])

    def f():
        loss, d, _ = tn.softmax_cross_entropy(v["z"], target, mask, weight)
        return loss, {"z": d}

    assert _check(f, v) < TOL


def test_composite_recurrence_attention_loss_grad():
    """Two recurrence steps, attention over keys, then masked cross-entropy."""
    rng = tn.make_rng(7)
    W, _ = tn.lstm_init(rng, 3, 3)
    v = {"W": W, "b": _rand(rng, 12), "xs": _rand(rng, 2, 2, 3), "K": _rand(rng, 2, 4, 3)}
    mask = np.array([[1, 1, 1, 0], [1, 0, 1, 1]], dtype=bool)
    target = np.array([2, 3])

    def f():
        hs, cache = tn.lstm_forward(v["W"], v["b"], v["xs"])
        q = hs[-1]
        _, _, acache = tn.attention_forward(q, v["K"], mask)
        scores = acache[4]
        loss, ds, _ = tn.softmax_cross_entropy(scores, target, mask)
        dq, dK = tn.attention_backward(acache, dscores=ds)
        dhs = np.zeros_like(hs)
        dhs[-1] = dq
        dxs, dW, db, _, _ = tn.lstm_backward(v["W"], dhs, cache)
        return loss, {"W": dW, "b": db, "xs": dxs, "K": dK}

    assert _check(f, v) < TOL


def test_single_unmasked_logit_has_zero_loss_and_gradient():
    logits = np.array([[3.0, -1.0, 7.5]])
    mask = np.array([[False, True, False]])
    loss, d, p = tn.softmax_cross_entropy(logits, [1], mask)
    assert loss == 0.0
    assert np.all(d == 0.0)
    assert p.tolist() == [[0.0, 1.0, 0.0]]


def test_identical_keys_give_uniform_weights():
    K = np.tile(np.array([0.3, -1.2, 2.0]), (1, 5, 1))
    w, ctx, _ = tn.attention_forward(np.array([[1.0, 2.0, 3.0]]), K)
    assert np.allclose(w, 1 / 5, atol=1e-15)
    assert np.allclose(ctx, K[:, 0])


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6), st.integers(1, 8))
def test_masked_softmax_sums_to_one_and_masks_exactly(seed, b, n):
    rng = tn.make_rng(seed)
    scores = rng.normal(0, 30, (b, n))
    mask = rng.random((b, n)) < 0.6
    mask[:, 0] = True
    p = tn.masked_softmax(scores, mask)
    assert np.all(np.abs(p.sum(axis=-1) - 1.0) < 1e-12)
    assert np.all(p[~mask] == 0.0)


def test_masked_target_is_rejected():
    with pytest.raises(ValueError):
        tn.softmax_cross_entropy(np.zeros((1, 3)), [2], np.array([[True, True, False]]))


def test_adam_zero_gradient_leaves_params_unchanged():
    rng = tn.make_rng(8)
    P = tn.Params()
    P.add("a", rng.normal(size=(3, 4)))
    P.add("b", rng.normal(size=5))
    before = {k: P[k].copy() for k in P.names()}
    state = tn.AdamState()
    for _ in range(5):
        tn.adam_step(P, state, lr=0.1, clip=1.0)
    for k in P.names():
        assert np.array_equal(P[k], before[k])


def test_adam_moves_against_gradient():
    P = tn.Params()
    P.add("x", np.array([1.0, -1.0]))
    P.grads["x"][...] = [2.0, -3.0]
    tn.adam_step(P, tn.AdamState(), lr=0.01)
    assert np.allclose(P["x"], [0.99, -0.99])


def test_shape_errors_name_both_shapes():
    with pytest.raises(tn.ShapeError, match=r"\(2, 3\).*\(4, 5\)"):
        tn.linear_forward(np.zeros((4, 5)), np.zeros(5), np.zeros((2, 3)))
    with pytest.raises(tn.ShapeError, match=r"\(2, 4\).*\(2, 3, 3\)"):
        tn.attention_forward(np.zeros((2, 4)), np.zeros((2, 3, 3)))
    with pytest.raises(tn.ShapeError):
        tn.masked_softmax(np.zeros((2, 3)), np.ones((3, 2), dtype=bool))


def test_rng_streams_are_reproducible():
    a = tn.make_rng(42).standard_normal(10)
    b = tn.make_rng(42).standard_normal(10)
    assert a.tobytes() == b.tobytes()
    # frozen first draws of the PCG64 stream
    assert tn.make_rng(0).integers(0, 1000, 3).tolist() == [850, 636, 511]


def test_params_reject_duplicates_and_track_grads():
    P = tn.Params()
    P.add("w", np.ones((2, 2)))
    assert P.grads["w"].shape == (2, 2)
    with pytest.raises(KeyError):
        P.add("w", np.ones(1))
    assert P.size() == 4


def test_init_ranges():
    rng = tn.make_rng(9)
    W = tn.glorot(rng, 10, 20)
    assert np.abs(W).max() <= np.sqrt(6 / 30)
    _, b = tn.lstm_init(rng, 3, 4)
    assert np.all(b == 0) and b.shape == (16,)
