"""Tests for the attention sequence-to-sequence autoencoder.

``straight_line_loss`` below is a deliberately separate transcription of the
model's forward recurrence — plain loops, explicit gate algebra, classic
``1/(1+exp(-x))`` sigmoid — kept free of any shared code path so that it can
serve as an independent check of the trained implementation.
"""
from __future__ import annotations

import math

import numpy as np
import pytest

from flowemb.embed import (
    EmbedderConfig,
    LstmState,
    Seq2SeqModel,
    attention_weights,
    lstm_step,
    seq2seq_encode,
    seq2seq_fit,
    seq2seq_forward,
)
from flowemb.embed.seq2seq import _forward_loss, _init_model
from flowemb.numkernel import Rng, Tape

from helpers import check_gradients


def make_model(seed: int, d: int, p: int, layers: int = 1) -> Seq2SeqModel:
    config = EmbedderConfig(p=p, epochs=1, seed=seed, lstm_layers=layers)
    return _init_model(d, config, Rng(seed).derive("seq2seq"))


# ---------------------------------------------------------------------------
# independent reference implementation
# ---------------------------------------------------------------------------

def straight_line_loss(model: Seq2SeqModel, x: np.ndarray) -> tuple[float, np.ndarray]:
    """Teacher-forced forward pass of one sequence, written from scratch."""
    p = model.config.p
    n_steps, d = x.shape

    def gate_split(z: np.ndarray) -> tuple[np.ndarray, ...]:
        i = 1.0 / (1.0 + np.exp(-z[0:p]))
        f = 1.0 / (1.0 + np.exp(-z[p : 2 * p]))
        o = 1.0 / (1.0 + np.exp(-z[2 * p : 3 * p]))
        g = np.tanh(z[3 * p : 4 * p])
        return i, f, o, g

    # Encoder: one read per window, layers bottom to top.
    hs = [np.zeros(p) for _ in model.encoder]
    cs = [np.zeros(p) for _ in model.encoder]
    enc_top = []
    for t in range(n_steps):
        u = x[t]
        for li, layer in enumerate(model.encoder):
            z = layer.wx.value @ u + layer.wh.value @ hs[li] + layer.b.value
            i, f, o, g = gate_split(z)
            cs[li] = f * cs[li] + i * g
            hs[li] = o * np.tanh(cs[li])
            u = hs[li]
        enc_top.append(u.copy())

    # Decoder starts from the encoder's final states and emits the last
    # window first, reading the true previous target (teacher forcing).
    ws = model.attention.ws.value
    wh = model.attention.wh.value
    v = model.attention.v.value
    dh = [h.copy() for h in hs]
    dc = [c.copy() for c in cs]
    prev = np.zeros(d)
    total = 0.0
    recon = np.zeros_like(x)
    for t in range(n_steps, 0, -1):
        s = dh[-1]
        scores = np.array([v @ np.tanh(ws @ s + wh @ hj) for hj in enc_top])
        e = np.exp(scores - scores.max())
        alpha = e / e.sum()
        context = np.zeros(p)
        for a, hj in zip(alpha, enc_top):
            context += a * hj
        u = prev
        for li, layer in enumerate(model.decoder):
            z = layer.wx.value @ u + layer.wh.value @ dh[li] + layer.b.value
            if layer.wc is not None:
                z = z + layer.wc.value @ context
            i, f, o, g = gate_split(z)
            dc[li] = f * dc[li] + i * g
            dh[li] = o * np.tanh(dc[li])
            u = dh[li]
        xhat = model.out_w.value @ u + model.out_b.value
        recon[t - 1] = xhat
        diff = xhat - x[t - 1]
        total += float(diff @ diff)
        prev = x[t - 1]
    return total / (n_steps * d), recon


def test_forward_matches_straight_line_reference() -> None:
    for seed in (0, 1, 2, 3):
        model = make_model(seed, d=3, p=4)
        x = Rng(seed + 50).normal_array((5, 3))
        xhat, loss = seq2seq_forward(model, x, teacher_forcing=True)
        ref_loss, ref_recon = straight_line_loss(model, x)
        assert loss == pytest.approx(ref_loss, abs=1e-10)
        assert np.allclose(xhat, ref_recon, atol=1e-10)


def test_reference_agreement_holds_after_training() -> None:
    rng = np.random.default_rng(31)
    seqs = rng.normal(size=(10, 5, 3)) * 0.5
    model = seq2seq_fit(seqs, EmbedderConfig(p=4, epochs=3, seed=7, batch_size=4))
    _, loss = seq2seq_forward(model, seqs[0], teacher_forcing=True)
    ref_loss, _ = straight_line_loss(model, seqs[0])
    assert loss == pytest.approx(ref_loss, abs=1e-10)


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------

def test_lstm_step_zero_params_zero_state() -> None:
    wx = np.zeros((8, 3))
    wh = np.zeros((8, 2))
    b = np.zeros(8)
    state = lstm_step(np.ones(3), LstmState(h=np.zeros(2), c=np.zeros(2)), wx, wh, b)
    assert np.array_equal(state.h, np.zeros(2))
    assert np.array_equal(state.c, np.zeros(2))


def test_lstm_step_scalar_hand_case() -> None:
    # p = 1, d = 1, all weights 1, zero bias, input 1, state (h=0, c=1):
    # every gate sees 1, so i = f = o = sigmoid(1), g = tanh(1).
    wx = np.ones((4, 1))
    wh = np.ones((4, 1))
    b = np.zeros(4)
    state = lstm_step(np.array([1.0]), LstmState(h=np.zeros(1), c=np.ones(1)), wx, wh, b)
    sig1 = 1.0 / (1.0 + math.exp(-1.0))
    c = sig1 * 1.0 + sig1 * math.tanh(1.0)
    h = sig1 * math.tanh(c)
    assert state.c[0] == pytest.approx(c, abs=1e-12)
    assert state.h[0] == pytest.approx(h, abs=1e-12)


def test_lstm_step_forget_gate_scales_cell() -> None:
    # With huge negative input gate and zero candidate path, the cell decays
    # by exactly sigmoid(b_f).
    p = 3
    wx = np.zeros((4 * p, 2))
    wh = np.zeros((4 * p, p))
    b = np.zeros(4 * p)
    b[0:p] = -50.0  # input gate shut
    b[p : 2 * p] = 2.0
    c0 = np.array([1.0, -2.0, 0.5])
    state = lstm_step(np.zeros(2), LstmState(h=np.zeros(p), c=c0.copy()), wx, wh, b)
    decay = 1.0 / (1.0 + math.exp(-2.0))
    assert np.allclose(state.c, decay * c0, atol=1e-12)


def test_lstm_step_context_requires_projection() -> None:
    with pytest.raises(ValueError, match="context"):
        lstm_step(
            np.zeros(2),
            LstmState(h=np.zeros(3), c=np.zeros(3)),
            np.zeros((12, 2)),
            np.zeros((12, 3)),
            np.zeros(12),
            context=np.zeros(3),
        )


def test_attention_weights_sum_to_one() -> None:
    rng = Rng(99)
    for _ in range(200):
        p = 1 + rng.randint(6)
        n = 2 + rng.randint(7)
        alpha = attention_weights(
            rng.normal_array((p,), sigma=3.0),
            rng.normal_array((n, p), sigma=3.0),
            rng.normal_array((p, p)),
            rng.normal_array((p, p)),
            rng.normal_array((p,)),
        )
        assert alpha.shape == (n,)
        assert np.all(alpha >= 0.0)
        assert abs(float(alpha.sum()) - 1.0) <= 1e-12


def test_attention_uniform_when_states_identical() -> None:
    rng = Rng(5)
    p, n = 4, 6
    h = rng.normal_array((p,))
    alpha = attention_weights(
        rng.normal_array((p,)),
        np.tile(h, (n, 1)),
        rng.normal_array((p, p)),
        rng.normal_array((p, p)),
        rng.normal_array((p,)),
    )
    assert np.allclose(alpha, 1.0 / n, atol=1e-12)


def test_attention_prefers_aligned_state() -> None:
    # With ws = 0, wh = I and v fixed, the state with the largest
    # v . tanh(h) wins.
    p = 3
    states = np.array([[0.0, 0.0, 0.0], [2.0, 2.0, 2.0], [-2.0, -2.0, -2.0]])
    alpha = attention_weights(
        np.zeros(p), states, np.zeros((p, p)), np.eye(p), np.ones(p)
    )
    assert int(np.argmax(alpha)) == 1


# ---------------------------------------------------------------------------
# gradients
# ---------------------------------------------------------------------------

def test_gradients_match_finite_differences() -> None:
    for seed in (0, 1):
        model = make_model(seed, d=3, p=4)
        x = Rng(seed + 10).normal_array((2, 5, 3))
        check_gradients(
            model.params(),
            lambda tape: _forward_loss(model, tape, x, teacher_forcing=True)[0],
        )


def test_gradients_with_own_output_feedback() -> None:
    model = make_model(3, d=3, p=4)
    x = Rng(77).normal_array((2, 4, 3))
    check_gradients(
        model.params(),
        lambda tape: _forward_loss(model, tape, x, teacher_forcing=False)[0],
    )


def test_gradients_two_layer_stack() -> None:
    model = make_model(8, d=2, p=3, layers=2)
    x = Rng(88).normal_array((2, 3, 2))
    check_gradients(
        model.params(),
        lambda tape: _forward_loss(model, tape, x, teacher_forcing=True)[0],
    )


# ---------------------------------------------------------------------------
# training behaviour
# ---------------------------------------------------------------------------

def test_loss_decreases_on_structured_sequences() -> None:
    rng = np.random.default_rng(19)
    prototypes = rng.normal(size=(2, 5, 3))
    seqs = np.concatenate(
        [prototypes[i % 2][None] + 0.05 * rng.normal(size=(1, 5, 3)) for i in range(16)]
    )
    model = seq2seq_fit(
        seqs, EmbedderConfig(p=6, epochs=40, seed=2, batch_size=8, learning_rate=5e-3)
    )
    assert len(model.loss_history) == 40
    assert model.loss_history[-1] < 0.5 * model.loss_history[0]


def test_same_seed_is_bit_identical() -> None:
    rng = np.random.default_rng(4)
    seqs = rng.normal(size=(8, 4, 3))
    cfg = EmbedderConfig(p=4, epochs=3, seed=21, batch_size=4)
    a = seq2seq_fit(seqs, cfg)
    b = seq2seq_fit(seqs, cfg)
    assert a.loss_history == b.loss_history
    for pa, pb in zip(a.params(), b.params()):
        assert np.array_equal(pa.value, pb.value)


def test_encode_matches_manual_step_chain() -> None:
    model = make_model(6, d=3, p=4)
    x = Rng(60).normal_array((5, 3))
    layer = model.encoder[0]
    state = LstmState(h=np.zeros(4), c=np.zeros(4))
    for t in range(5):
        state = lstm_step(x[t], state, layer.wx.value, layer.wh.value, layer.b.value)
    assert np.array_equal(seq2seq_encode(model, x), state.h)


def test_mean_representation_averages_encoder_states() -> None:
    cfg = EmbedderConfig(p=4, epochs=1, seed=6, representation="mean")
    model = _init_model(3, cfg, Rng(6).derive("seq2seq"))
    x = Rng(61).normal_array((5, 3))
    layer = model.encoder[0]
    state = LstmState(h=np.zeros(4), c=np.zeros(4))
    tops = []
    for t in range(5):
        state = lstm_step(x[t], state, layer.wx.value, layer.wh.value, layer.b.value)
        tops.append(state.h)
    assert np.allclose(seq2seq_encode(model, x), np.mean(tops, axis=0), atol=1e-15)


def test_teacher_forcing_changes_later_steps_only() -> None:
    model = make_model(9, d=3, p=4)
    x = Rng(90).normal_array((4, 3))
    forced, _ = seq2seq_forward(model, x, teacher_forcing=True)
    free, _ = seq2seq_forward(model, x, teacher_forcing=False)
    # First emission (last window) reads the zero vector in both modes.
    assert np.array_equal(forced[-1], free[-1])
    assert not np.allclose(forced[0], free[0])


def test_snapshots_capture_training_progress() -> None:
    rng = np.random.default_rng(8)
    seqs = rng.normal(size=(10, 4, 3)) * 0.5
    probe = seqs[:3]
    cfg = EmbedderConfig(p=4, epochs=5, seed=1, batch_size=4, snapshot_epochs=(1, 3, 5))
    model = seq2seq_fit(seqs, cfg, snapshot_input=probe)
    assert sorted(model.snapshots) == [1, 3, 5]
    for z in model.snapshots.values():
        assert z.shape == (3, 4)
    # The final snapshot is exactly the final model's encoding; earlier ones
    # came from parameters that have since moved on.
    assert np.array_equal(model.snapshots[5], seq2seq_encode(model, probe))
    assert not np.array_equal(model.snapshots[1], model.snapshots[5])


def test_no_snapshots_without_probe_input() -> None:
    rng = np.random.default_rng(12)
    seqs = rng.normal(size=(6, 4, 2))
    cfg = EmbedderConfig(p=3, epochs=2, seed=0, snapshot_epochs=(1, 2))
    model = seq2seq_fit(seqs, cfg)
    assert model.snapshots == {}


def test_batch_encode_matches_per_sequence() -> None:
    model = make_model(14, d=3, p=5)
    x = Rng(140).normal_array((7, 4, 3))
    batch = seq2seq_encode(model, x)
    assert batch.shape == (7, 5)
    for i in range(7):
        assert np.allclose(batch[i], seq2seq_encode(model, x[i]), atol=1e-12)


def test_two_layer_fit_and_encode() -> None:
    rng = np.random.default_rng(77)
    seqs = rng.normal(size=(6, 4, 3))
    cfg = EmbedderConfig(p=4, epochs=2, seed=3, lstm_layers=2, batch_size=3)
    model = seq2seq_fit(seqs, cfg)
    assert len(model.encoder) == 2
    assert model.decoder[0].wc is not None
    assert model.decoder[1].wc is None
    assert seq2seq_encode(model, seqs).shape == (6, 4)


def test_rejects_bad_input() -> None:
    cfg = EmbedderConfig(p=2, epochs=1, seed=0)
    with pytest.raises(ValueError, match=r"\(n, N, d\)"):
        seq2seq_fit(np.zeros((4, 3)), cfg)
    with pytest.raises(ValueError, match="non-finite"):
        seq2seq_fit(np.full((2, 3, 2), np.inf), cfg)
    model = seq2seq_fit(np.zeros((2, 3, 2)), cfg)
    with pytest.raises(ValueError, match="features|shape"):
        seq2seq_forward(model, np.zeros((3, 5)))
    with pytest.raises(ValueError, match="shape"):
        seq2seq_encode(model, np.zeros((3, 5)))
