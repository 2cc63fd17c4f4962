"""Attention sequence-to-sequence autoencoder over weekly window sequences.

The encoder is an LSTM read over the N windows of a week; the decoder
reproduces the windows in reverse order (last window first), conditioned on
an additive-attention context over all encoder states. The learned weekly
representation is the encoder's final hidden state (or the mean over all
encoder states, if configured).

Training builds the forward pass on a gradient tape; encoding uses a plain
array fast path that computes the identical arithmetic.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..numkernel import Param, Rng, Tape, Var, grad, softmax
from ..numkernel import autodiff as ad
from .config import EmbedderConfig
from .optim import Adam

logger = logging.getLogger(__name__)


@dataclass
class LstmState:
    """Hidden and cell state of one LSTM layer."""

    h: np.ndarray
    c: np.ndarray


@dataclass
class CellParams:
    """Weights of one LSTM layer.

    Gate rows are stacked input/forget/output/candidate. ``wc`` is the
    context projection and is present only on the decoder's first layer.
    """

    wx: Param  # (4p, in_dim)
    wh: Param  # (4p, p)
    b: Param  # (4p,)
    wc: Param | None = None  # (4p, p)

    @property
    def p(self) -> int:
        return self.wh.value.shape[1]


@dataclass
class AttentionParams:
    """Additive attention: score(s, h) = v . tanh(ws s + wh h)."""

    ws: Param  # (p, p)
    wh: Param  # (p, p)
    v: Param  # (p,)


@dataclass
class Seq2SeqModel:
    d: int
    config: EmbedderConfig
    encoder: list[CellParams]
    decoder: list[CellParams]
    attention: AttentionParams
    out_w: Param  # (d, p)
    out_b: Param  # (d,)
    loss_history: list[float] = field(default_factory=list)
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)

    def params(self) -> list[Param]:
        out: list[Param] = []
        for layer in self.encoder + self.decoder:
            out.extend([layer.wx, layer.wh, layer.b])
            if layer.wc is not None:
                out.append(layer.wc)
        out.extend([self.attention.ws, self.attention.wh, self.attention.v])
        out.extend([self.out_w, self.out_b])
        return out


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def lstm_step(
    x: np.ndarray,
    state: LstmState,
    wx: np.ndarray,
    wh: np.ndarray,
    b: np.ndarray,
    context: np.ndarray | None = None,
    wc: np.ndarray | None = None,
) -> LstmState:
    """Advance one LSTM layer by a single step.

    Accepts a single input vector or a batch of rows; the state shape must
    match. Passing ``context`` requires the matching projection ``wc``.
    """
    gates = x @ wx.T + state.h @ wh.T
    if context is not None:
        if wc is None:
            raise ValueError("context given without a context projection")
        gates = gates + context @ wc.T
    gates = gates + b
    p = wh.shape[1]
    i = _sigmoid(gates[..., 0:p])
    f = _sigmoid(gates[..., p : 2 * p])
    o = _sigmoid(gates[..., 2 * p : 3 * p])
    g = np.tanh(gates[..., 3 * p : 4 * p])
    c = f * state.c + i * g
    return LstmState(h=o * np.tanh(c), c=c)


def attention_weights(
    query: np.ndarray,
    enc_states: np.ndarray,
    ws: np.ndarray,
    wh: np.ndarray,
    v: np.ndarray,
) -> np.ndarray:
    """Attention distribution of one decoder query over the encoder states.

    ``enc_states`` has one encoder hidden state per row; the result sums
    to one.
    """
    scores = np.tanh(query @ ws.T + enc_states @ wh.T) @ v
    return softmax(scores)


def _init_model(d: int, config: EmbedderConfig, rng: Rng) -> Seq2SeqModel:
    p = config.p
    bound = 1.0 / math.sqrt(p)

    def weight(shape: tuple[int, ...], name: str) -> Param:
        return Param(rng.uniform_array(shape, -bound, bound), name=name)

    def bias(name: str) -> Param:
        b = np.zeros(4 * p)
        b[p : 2 * p] = 1.0  # start with an open forget gate
        return Param(b, name=name)

    encoder = []
    for layer in range(config.lstm_layers):
        in_dim = d if layer == 0 else p
        encoder.append(
            CellParams(
                wx=weight((4 * p, in_dim), f"enc{layer}.wx"),
                wh=weight((4 * p, p), f"enc{layer}.wh"),
                b=bias(f"enc{layer}.b"),
            )
        )
    decoder = []
    for layer in range(config.lstm_layers):
        in_dim = d if layer == 0 else p
        decoder.append(
            CellParams(
                wx=weight((4 * p, in_dim), f"dec{layer}.wx"),
                wh=weight((4 * p, p), f"dec{layer}.wh"),
                b=bias(f"dec{layer}.b"),
                wc=weight((4 * p, p), f"dec{layer}.wc") if layer == 0 else None,
            )
        )
    attention = AttentionParams(
        ws=weight((p, p), "attn.ws"),
        wh=weight((p, p), "attn.wh"),
        v=weight((p,), "attn.v"),
    )
    return Seq2SeqModel(
        d=d,
        config=config,
        encoder=encoder,
        decoder=decoder,
        attention=attention,
        out_w=weight((d, p), "out.w"),
        out_b=Param(np.zeros(d), name="out.b"),
    )


def _cell_forward(
    tape: Tape,
    layer: CellParams,
    x: Var,
    h: Var,
    c: Var,
    context: Var | None = None,
) -> tuple[Var, Var]:
    terms = [ad.linear(x, tape.param(layer.wx)), ad.linear(h, tape.param(layer.wh))]
    if layer.wc is not None and context is not None:
        terms.append(ad.linear(context, tape.param(layer.wc)))
    gates = ad.add_bias(ad.add_n(terms), tape.param(layer.b))
    p = layer.p
    i = ad.sigmoid(ad.slice_cols(gates, 0, p))
    f = ad.sigmoid(ad.slice_cols(gates, p, 2 * p))
    o = ad.sigmoid(ad.slice_cols(gates, 2 * p, 3 * p))
    g = ad.tanh(ad.slice_cols(gates, 3 * p, 4 * p))
    c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
    h_new = ad.mul(o, ad.tanh(c_new))
    return h_new, c_new


def _encode_on_tape(
    model: Seq2SeqModel, tape: Tape, x: np.ndarray
) -> tuple[list[Var], list[tuple[Var, Var]]]:
    """Tape forward of the encoder; returns top-layer states and final states."""
    batch, n_steps, _ = x.shape
    zeros = np.zeros((batch, model.config.p))
    states = [(tape.input(zeros), tape.input(zeros)) for _ in model.encoder]
    top: list[Var] = []
    for t in range(n_steps):
        inp = tape.input(np.ascontiguousarray(x[:, t, :]))
        for li, layer in enumerate(model.encoder):
            h, c = _cell_forward(tape, layer, inp, states[li][0], states[li][1])
            states[li] = (h, c)
            inp = h
        top.append(inp)
    return top, states


def _forward_loss(
    model: Seq2SeqModel, tape: Tape, x: np.ndarray, teacher_forcing: bool
) -> tuple[Var, list[Var]]:
    """Full tape forward on a batch ``x`` of shape (batch, N, d).

    Returns the batch loss (mean per-element squared reconstruction error)
    and the reconstructed windows in natural order. The decoder starts from
    the encoder's final states, reads a zero vector first, and emits the
    last window first; each later step reads the true previous target when
    teacher forcing, otherwise its own previous output.
    """
    batch, n_steps, d = x.shape
    enc_top, enc_states = _encode_on_tape(model, tape, x)
    attn_ws = tape.param(model.attention.ws)
    attn_v = tape.param(model.attention.v)
    attn_wh = tape.param(model.attention.wh)
    h_proj = [ad.linear(hj, attn_wh) for hj in enc_top]
    out_w = tape.param(model.out_w)
    out_b = tape.param(model.out_b)
    states = list(enc_states)
    prev = tape.input(np.zeros((batch, d)))
    loss_terms: list[Var] = []
    recon: list[Var | None] = [None] * n_steps
    for t in range(n_steps, 0, -1):
        query = states[-1][0]
        s_proj = ad.linear(query, attn_ws)
        scores = ad.stack_cols(
            [ad.matvec(ad.tanh(ad.add(s_proj, hp)), attn_v) for hp in h_proj]
        )
        alpha = ad.softmax_rows(scores)
        context = ad.weighted_sum(alpha, enc_top)
        inp = prev
        for li, layer in enumerate(model.decoder):
            h, c = _cell_forward(
                tape,
                layer,
                inp,
                states[li][0],
                states[li][1],
                context=context if layer.wc is not None else None,
            )
            states[li] = (h, c)
            inp = h
        xhat = ad.add_bias(ad.linear(inp, out_w), out_b)
        recon[t - 1] = xhat
        target = tape.input(np.ascontiguousarray(x[:, t - 1, :]))
        loss_terms.append(ad.sum_sq(ad.sub(xhat, target)))
        prev = target if teacher_forcing else xhat
    loss = ad.scale(ad.add_n(loss_terms), 1.0 / (n_steps * d * batch))
    return loss, recon  # type: ignore[return-value]


def seq2seq_fit(
    sequences: np.ndarray,
    config: EmbedderConfig,
    snapshot_input: np.ndarray | None = None,
) -> Seq2SeqModel:
    """Train the sequence autoencoder on ``sequences`` of shape (n, N, d).

    Deterministic for a fixed config. When ``snapshot_input`` is given, its
    encodings are captured after each epoch listed in the config's
    ``snapshot_epochs`` and stored on the model.
    """
    x = np.asarray(sequences, dtype=np.float64)
    if x.ndim != 3 or x.shape[0] == 0 or x.shape[1] == 0:
        raise ValueError(f"expected sequences of shape (n, N, d), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input contains non-finite values")
    n = x.shape[0]
    rng = Rng(config.seed).derive("seq2seq")
    model = _init_model(x.shape[2], config, rng)
    optimizer = Adam(model.params(), learning_rate=config.learning_rate)
    snap_at = set(config.snapshot_epochs) if snapshot_input is not None else set()
    order = np.arange(n)
    for epoch in range(1, config.epochs + 1):
        rng.shuffle(order)
        epoch_sq = 0.0
        for start in range(0, n, config.batch_size):
            batch = x[order[start : start + config.batch_size]]
            tape = Tape()
            loss, _ = _forward_loss(model, tape, batch, config.teacher_forcing)
            value = float(loss.value)
            if not math.isfinite(value):
                raise RuntimeError(
                    f"training diverged at epoch {epoch} (loss={value}); "
                    "consider lowering the learning rate"
                )
            epoch_sq += value * batch.shape[0]
            optimizer.step(grad(tape, loss))
        model.loss_history.append(epoch_sq / n)
        if epoch in snap_at:
            model.snapshots[epoch] = seq2seq_encode(model, snapshot_input)
    logger.debug(
        "seq2seq fit: n=%d N=%d d=%d p=%d final loss %.6f",
        n, x.shape[1], x.shape[2], config.p, model.loss_history[-1],
    )
    return model


def seq2seq_forward(
    model: Seq2SeqModel,
    x_seq: np.ndarray,
    teacher_forcing: bool | None = None,
) -> tuple[np.ndarray, float]:
    """Reconstruct one sequence; returns (windows in natural order, loss)."""
    x = np.asarray(x_seq, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected one sequence of shape (N, d), got {x.shape}")
    if x.shape[1] != model.d:
        raise ValueError(f"expected {model.d} features, got {x.shape[1]}")
    if teacher_forcing is None:
        teacher_forcing = model.config.teacher_forcing
    loss, recon = _forward_loss(model, Tape(), x[None, :, :], teacher_forcing)
    xhat = np.concatenate([step.value for step in recon], axis=0)
    return xhat, float(loss.value)


def seq2seq_encode(model: Seq2SeqModel, sequences: np.ndarray) -> np.ndarray:
    """Weekly representations: encoder pass only, no tape.

    Accepts one sequence (N, d) or a batch (n, N, d) and returns (p,) or
    (n, p) accordingly.
    """
    x = np.asarray(sequences, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None, :, :]
    if x.ndim != 3 or x.shape[2] != model.d:
        raise ValueError(f"expected sequences of shape (n, N, {model.d}), got {x.shape}")
    batch = x.shape[0]
    p = model.config.p
    states = [
        LstmState(h=np.zeros((batch, p)), c=np.zeros((batch, p)))
        for _ in model.encoder
    ]
    top: list[np.ndarray] = []
    for t in range(x.shape[1]):
        inp = x[:, t, :]
        for li, layer in enumerate(model.encoder):
            states[li] = lstm_step(
                inp, states[li], layer.wx.value, layer.wh.value, layer.b.value
            )
            inp = states[li].h
        top.append(inp)
    if model.config.representation == "mean":
        rep = np.mean(np.stack(top, axis=0), axis=0)
    else:
        rep = top[-1]
    return rep[0] if single else rep
