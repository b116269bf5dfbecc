"""The full quality model: one shared head plus one calibrator per dataset.

Prediction is head-only by design: the calibrators exist to absorb each
dataset's annotation scale during training, and deleting all of them leaves
every prediction bitwise unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .data import stable_hash
from .layers import DualBuffer
from .monotone import MonotonicTransformer, transformer_init
from .regressor import RegressorHead, head_init, regressor_forward_batch


@dataclass
class QualityModel:
    head: RegressorHead
    transformers: dict[str, MonotonicTransformer] = field(default_factory=dict)

    @property
    def channels(self) -> int:
        return self.head.channels

    def named_parameters(self) -> list[tuple[str, DualBuffer]]:
        """Deterministic (name, buffer) order: head first, then sorted datasets."""
        out = [(f"head.{p.name}", p) for p in self.head.parameters()]
        for ds in sorted(self.transformers):
            for p in self.transformers[ds].parameters():
                out.append((f"transformer.{ds}.{p.name}", p))
        return out

    def head_parameters(self) -> list[DualBuffer]:
        return self.head.parameters()

    def transformer_parameters(self) -> list[DualBuffer]:
        out = []
        for ds in sorted(self.transformers):
            out.extend(self.transformers[ds].parameters())
        return out

    def zero_grad(self) -> None:
        for _, p in self.named_parameters():
            p.zero_grad()


def build_model(
    channels: int,
    dataset_ids: list[str],
    seed: int = 0,
    cfcl_depth: int = 5,
    cfcl_widths: list[int] | None = None,
    head_h1: int = 128,
    head_h2: int = 64,
    normalize_pooled: bool = False,
    allow_any_depth: bool = False,
) -> QualityModel:
    if len(set(dataset_ids)) != len(dataset_ids):
        raise ConfigError(f"duplicate dataset ids in {dataset_ids}")
    head = head_init(
        channels,
        h1=head_h1,
        h2=head_h2,
        seed=np.random.SeedSequence([seed, 1]).generate_state(1)[0],
        normalize_pooled=normalize_pooled,
    )
    transformers = {}
    for ds in sorted(dataset_ids):
        transformers[ds] = transformer_init(
            depth=cfcl_depth,
            widths=list(cfcl_widths) if cfcl_widths else None,
            seed=np.random.SeedSequence([seed, 2, stable_hash(ds)]).generate_state(1)[0],
            allow_any_depth=allow_any_depth,
        )
    return QualityModel(head=head, transformers=transformers)


def predict(model: QualityModel, features: list[np.ndarray]) -> np.ndarray:
    """Shared-scale qualities for raw (c, l) feature maps. Head-only path."""
    if not features:
        return np.zeros(0)
    return regressor_forward_batch(model.head, features)
