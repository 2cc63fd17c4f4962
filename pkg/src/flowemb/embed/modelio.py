"""Save and load trained embedders as JSON documents.

Arrays are stored as shape + flat values; Python's float repr round-trips
every finite double exactly, so a load restores bit-identical parameters.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any

import numpy as np

from ..ingest import Standardizer
from ..numkernel import Param
from .ae import AeModel
from .config import EmbedderConfig
from .pca import PcaModel
from .seq2seq import AttentionParams, CellParams, Seq2SeqModel


@dataclass
class SavedModel:
    """A model document read back from disk."""

    kind: str
    model: PcaModel | AeModel | Seq2SeqModel
    standardizer: Standardizer | None
    meta: dict[str, Any]


def model_kind(model: object) -> str:
    if isinstance(model, PcaModel):
        return "pca"
    if isinstance(model, AeModel):
        return "ae"
    if isinstance(model, Seq2SeqModel):
        return "as2s"
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _encode_array(a: np.ndarray) -> dict[str, Any]:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _decode_array(obj: dict[str, Any]) -> np.ndarray:
    return np.asarray(obj["data"], dtype=np.float64).reshape(obj["shape"])


def _encode_config(config: EmbedderConfig) -> dict[str, Any]:
    doc = asdict(config)
    doc["snapshot_epochs"] = list(config.snapshot_epochs)
    return doc


def _decode_config(doc: dict[str, Any]) -> EmbedderConfig:
    doc = dict(doc)
    doc["snapshot_epochs"] = tuple(doc.get("snapshot_epochs", ()))
    return EmbedderConfig(**doc)


def _encode_cell(layer: CellParams) -> dict[str, Any]:
    doc = {
        "wx": _encode_array(layer.wx.value),
        "wh": _encode_array(layer.wh.value),
        "b": _encode_array(layer.b.value),
    }
    if layer.wc is not None:
        doc["wc"] = _encode_array(layer.wc.value)
    return doc


def _decode_cell(doc: dict[str, Any], prefix: str) -> CellParams:
    return CellParams(
        wx=Param(_decode_array(doc["wx"]), name=f"{prefix}.wx"),
        wh=Param(_decode_array(doc["wh"]), name=f"{prefix}.wh"),
        b=Param(_decode_array(doc["b"]), name=f"{prefix}.b"),
        wc=Param(_decode_array(doc["wc"]), name=f"{prefix}.wc") if "wc" in doc else None,
    )


def _encode_model(model: PcaModel | AeModel | Seq2SeqModel) -> dict[str, Any]:
    if isinstance(model, PcaModel):
        return {
            "mean": _encode_array(model.mean),
            "components": _encode_array(model.components),
            "eigenvalues": _encode_array(model.eigenvalues),
        }
    if isinstance(model, AeModel):
        return {
            "w1": _encode_array(model.w1.value),
            "b1": _encode_array(model.b1.value),
            "w2": _encode_array(model.w2.value),
            "b2": _encode_array(model.b2.value),
            "config": _encode_config(model.config),
            "loss_history": list(model.loss_history),
        }
    return {
        "d": model.d,
        "encoder": [_encode_cell(layer) for layer in model.encoder],
        "decoder": [_encode_cell(layer) for layer in model.decoder],
        "attention": {
            "ws": _encode_array(model.attention.ws.value),
            "wh": _encode_array(model.attention.wh.value),
            "v": _encode_array(model.attention.v.value),
        },
        "out_w": _encode_array(model.out_w.value),
        "out_b": _encode_array(model.out_b.value),
        "config": _encode_config(model.config),
        "loss_history": list(model.loss_history),
        "snapshots": {str(e): _encode_array(z) for e, z in model.snapshots.items()},
    }


def _decode_model(kind: str, doc: dict[str, Any]) -> PcaModel | AeModel | Seq2SeqModel:
    if kind == "pca":
        return PcaModel(
            mean=_decode_array(doc["mean"]),
            components=_decode_array(doc["components"]),
            eigenvalues=_decode_array(doc["eigenvalues"]),
        )
    if kind == "ae":
        return AeModel(
            w1=Param(_decode_array(doc["w1"]), name="w1"),
            b1=Param(_decode_array(doc["b1"]), name="b1"),
            w2=Param(_decode_array(doc["w2"]), name="w2"),
            b2=Param(_decode_array(doc["b2"]), name="b2"),
            config=_decode_config(doc["config"]),
            loss_history=list(doc.get("loss_history", [])),
        )
    if kind == "as2s":
        attn = doc["attention"]
        return Seq2SeqModel(
            d=int(doc["d"]),
            config=_decode_config(doc["config"]),
            encoder=[_decode_cell(c, f"enc{i}") for i, c in enumerate(doc["encoder"])],
            decoder=[_decode_cell(c, f"dec{i}") for i, c in enumerate(doc["decoder"])],
            attention=AttentionParams(
                ws=Param(_decode_array(attn["ws"]), name="attn.ws"),
                wh=Param(_decode_array(attn["wh"]), name="attn.wh"),
                v=Param(_decode_array(attn["v"]), name="attn.v"),
            ),
            out_w=Param(_decode_array(doc["out_w"]), name="out.w"),
            out_b=Param(_decode_array(doc["out_b"]), name="out.b"),
            loss_history=list(doc.get("loss_history", [])),
            snapshots={
                int(e): _decode_array(z) for e, z in doc.get("snapshots", {}).items()
            },
        )
    raise ValueError(f"unknown model kind {kind!r}")


def save_model(
    path: str | Path,
    model: PcaModel | AeModel | Seq2SeqModel,
    standardizer: Standardizer | None = None,
    meta: dict[str, Any] | None = None,
) -> None:
    doc = {
        "kind": model_kind(model),
        "meta": dict(meta or {}),
        "standardizer": standardizer.to_dict() if standardizer is not None else None,
        "model": _encode_model(model),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_model(path: str | Path) -> SavedModel:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = doc["kind"]
    std = doc.get("standardizer")
    return SavedModel(
        kind=kind,
        model=_decode_model(kind, doc["model"]),
        standardizer=Standardizer.from_dict(std) if std is not None else None,
        meta=doc.get("meta", {}),
    )
