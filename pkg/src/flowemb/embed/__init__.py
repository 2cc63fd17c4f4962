"""Per-cluster representation learning for weekly window sequences."""
from __future__ import annotations

import numpy as np

from .ae import AeModel, ae_encode, ae_fit
from .config import EmbedderConfig
from .modelio import SavedModel, load_model, model_kind, save_model
from .optim import Adam
from .pca import PcaModel, pca_encode, pca_fit, pca_reconstruct
from .seq2seq import (
    AttentionParams,
    CellParams,
    LstmState,
    Seq2SeqModel,
    attention_weights,
    lstm_step,
    seq2seq_encode,
    seq2seq_fit,
    seq2seq_forward,
)

EMBEDDER_KINDS = ("pca", "ae", "as2s")


def encode_weeks(
    model: PcaModel | AeModel | Seq2SeqModel, sequences: np.ndarray
) -> np.ndarray:
    """Weekly representations for a batch of sequences with shape (n, N, d).

    The sequence model consumes whole weeks; the window-level embedders
    encode each window and average over the week.
    """
    x = np.asarray(sequences, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected sequences of shape (n, N, d), got {x.shape}")
    if isinstance(model, Seq2SeqModel):
        return seq2seq_encode(model, x)
    n, n_steps, d = x.shape
    flat = x.reshape(n * n_steps, d)
    if isinstance(model, PcaModel):
        z = pca_encode(model, flat)
    elif isinstance(model, AeModel):
        z = ae_encode(model, flat)
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    return z.reshape(n, n_steps, -1).mean(axis=1)


__all__ = [
    "Adam",
    "AeModel",
    "AttentionParams",
    "CellParams",
    "EMBEDDER_KINDS",
    "EmbedderConfig",
    "LstmState",
    "PcaModel",
    "SavedModel",
    "Seq2SeqModel",
    "ae_encode",
    "ae_fit",
    "attention_weights",
    "encode_weeks",
    "load_model",
    "lstm_step",
    "model_kind",
    "pca_encode",
    "pca_fit",
    "pca_reconstruct",
    "save_model",
    "seq2seq_encode",
    "seq2seq_fit",
    "seq2seq_forward",
]
