"""Shared training configuration for the learned embedders."""
from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class EmbedderConfig:
    """Hyperparameters for representation learning.

    ``representation`` selects what the sequence encoder hands to the scorer:
    the final encoder hidden state (default) or the mean over all encoder
    states. ``teacher_forcing`` controls the decoder input during training;
    at inference the decoder always consumes its own previous output.
    """

    p: int = 32
    epochs: int = 50
    learning_rate: float = 1e-3
    batch_size: int = 32
    seed: int = 0
    lstm_layers: int = 1
    teacher_forcing: bool = True
    representation: str = "final"  # "final" | "mean"
    snapshot_epochs: tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.lstm_layers < 1:
            raise ValueError("lstm_layers must be >= 1")
        if self.representation not in ("final", "mean"):
            raise ValueError(f"unknown representation {self.representation!r}")
        bad = [e for e in self.snapshot_epochs if not 1 <= e <= self.epochs]
        if bad:
            raise ValueError(f"snapshot epochs outside 1..{self.epochs}: {bad}")
        object.__setattr__(self, "snapshot_epochs", tuple(self.snapshot_epochs))
