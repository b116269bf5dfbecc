"""Binary model checkpoints.

Layout: magic "MQAC", little-endian u32 header length, a canonical JSON
header (format version, training config, shapes, dataset ids, and the
declared parameter order), then every parameter as little-endian float32 in
exactly that order.

Calibrator weight matrices are stored as their *effective* (positive)
values, not the unconstrained pre-softplus form, so a checkpoint is
inspectable and the positivity invariant is checkable on the wire. Loading
inverts the reparameterization and rejects any weight at or below the
positivity floor.

save -> load -> save is byte-identical: float32 values survive the f64
round-trip exactly, and the softplus inverse/forward pair is accurate to
well under half a float32 ulp.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .config import TrainConfig, config_from_dict, config_to_dict
from .errors import (
    BadMagicError,
    BadVersionError,
    DataError,
    DimensionError,
    NonFiniteError,
    PropertyViolationError,
    TruncatedPayloadError,
)
from .model import QualityModel
from .monotone import EPS_W, CfclLayer, MonotonicTransformer, softplus, softplus_inverse
from .layers import DualBuffer
from .regressor import RegressorHead

CHECKPOINT_MAGIC = b"MQAC"
CHECKPOINT_VERSION = 1

# smallest float32 strictly above the positivity floor; weights whose float32
# rounding would dip to or below the floor are stored as this value instead
# (the shift is under one float32 ulp, i.e. within storage precision anyway)
_F32_ABOVE_FLOOR = np.nextafter(np.float32(EPS_W), np.float32(np.inf), dtype=np.float32)


def _param_table(model: QualityModel) -> list[dict]:
    table = []
    for name, buf in model.named_parameters():
        encoding = "positive" if name.endswith(".theta") else "raw"
        table.append(
            {
                "name": name,
                "rows": buf.value.shape[0],
                "cols": buf.value.shape[1],
                "encoding": encoding,
            }
        )
    return table


def dumps(model: QualityModel, config: TrainConfig) -> bytes:
    header = {
        "version": CHECKPOINT_VERSION,
        "config": config_to_dict(config),
        "channels": model.channels,
        "head": {
            "h1": model.head.fc1_w.shape[1],
            "h2": model.head.fc2_w.shape[1],
            "normalize_pooled": model.head.normalize_pooled,
        },
        "datasets": sorted(model.transformers),
        "transformers": {
            ds: {"widths": t.widths, "alpha": t.alpha}
            for ds, t in sorted(model.transformers.items())
        },
        "params": _param_table(model),
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    for name, buf in model.named_parameters():
        if name.endswith(".theta"):
            f32 = (softplus(buf.value) + EPS_W).astype(np.float32)
            f32 = np.maximum(f32, _F32_ABOVE_FLOOR)
            chunks.append(f32.astype("<f4").tobytes(order="C"))
        else:
            chunks.append(buf.value.astype("<f4").tobytes(order="C"))
    return b"".join(chunks)


def save_checkpoint(model: QualityModel, config: TrainConfig, path: str | Path) -> None:
    Path(path).write_bytes(dumps(model, config))


def _rebuild(header: dict) -> tuple[QualityModel, TrainConfig]:
    config = config_from_dict(header["config"])
    head_info = header["head"]
    c = int(header["channels"])
    d = c * c
    h1, h2 = int(head_info["h1"]), int(head_info["h2"])

    def empty(shape, name):
        return DualBuffer.of(np.zeros(shape), name=name)

    head = RegressorHead(
        channels=c,
        fc1_w=empty((d, h1), "fc1.w"),
        fc1_b=empty((1, h1), "fc1.b"),
        fc2_w=empty((h1, h2), "fc2.w"),
        fc2_b=empty((1, h2), "fc2.b"),
        fc3_w=empty((h2, 1), "fc3.w"),
        fc3_b=empty((1, 1), "fc3.b"),
        normalize_pooled=bool(head_info["normalize_pooled"]),
    )
    transformers = {}
    for ds in header["datasets"]:
        info = header["transformers"][ds]
        widths = [int(w) for w in info["widths"]]
        layers = [
            CfclLayer(
                theta=empty((widths[i], widths[i + 1]), f"layer{i}.theta"),
                bias=empty((1, widths[i + 1]), f"layer{i}.bias"),
            )
            for i in range(len(widths) - 1)
        ]
        transformers[ds] = MonotonicTransformer(layers, alpha=float(info["alpha"]))
    return QualityModel(head=head, transformers=transformers), config


def loads(blob: bytes, source: str = "<bytes>") -> tuple[QualityModel, TrainConfig]:
    if len(blob) < 8:
        raise TruncatedPayloadError(f"checkpoint {source} too short for a header")
    if blob[:4] != CHECKPOINT_MAGIC:
        raise BadMagicError(
            f"checkpoint {source} has magic {blob[:4]!r}, expected {CHECKPOINT_MAGIC!r}"
        )
    (header_len,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + header_len:
        raise TruncatedPayloadError(
            f"checkpoint {source} header declares {header_len} bytes, file has {len(blob) - 8}"
        )
    try:
        header = json.loads(blob[8 : 8 + header_len].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"checkpoint {source} header is not valid JSON: {e}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise BadVersionError(
            f"checkpoint {source} version {header.get('version')}, expected {CHECKPOINT_VERSION}"
        )

    model, config = _rebuild(header)
    named = dict(model.named_parameters())
    offset = 8 + header_len
    for entry in header["params"]:
        name, rows, cols = entry["name"], int(entry["rows"]), int(entry["cols"])
        if name not in named:
            raise DataError(f"checkpoint {source} declares unknown parameter {name!r}")
        buf = named[name]
        if buf.value.shape != (rows, cols):
            raise DimensionError(
                f"checkpoint {source} parameter {name}: declared {(rows, cols)}, "
                f"model expects {buf.value.shape}"
            )
        nbytes = 4 * rows * cols
        if offset + nbytes > len(blob):
            raise TruncatedPayloadError(
                f"checkpoint {source} blob ends inside parameter {name}"
            )
        values = (
            np.frombuffer(blob[offset : offset + nbytes], dtype="<f4")
            .astype(np.float64)
            .reshape(rows, cols)
        )
        offset += nbytes
        if not np.all(np.isfinite(values)):
            raise NonFiniteError(f"checkpoint {source} parameter {name} has non-finite values")
        if entry["encoding"] == "positive":
            if np.any(values <= EPS_W):
                raise PropertyViolationError(
                    f"checkpoint {source} parameter {name} violates the positivity floor: "
                    f"min weight {values.min()} <= {EPS_W}"
                )
            buf.value[...] = softplus_inverse(values - EPS_W)
        else:
            buf.value[...] = values
    if offset != len(blob):
        raise DataError(
            f"checkpoint {source} has {len(blob) - offset} trailing bytes after the last parameter"
        )
    return model, config


def load_checkpoint(
    path: str | Path, expect_depth: int | None = None
) -> tuple[QualityModel, TrainConfig]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"missing checkpoint {p}")
    model, config = loads(p.read_bytes(), source=str(p))
    if expect_depth is not None:
        depths = {t.depth for t in model.transformers.values()}
        if depths and depths != {expect_depth}:
            raise DimensionError(
                f"checkpoint {p} holds depth-{sorted(depths)} calibrators, "
                f"requested depth {expect_depth}"
            )
    return model, config


def quantize_like_checkpoint(model: QualityModel, config: TrainConfig) -> QualityModel:
    """The model a save/load round-trip would return (float32 parameter grid)."""
    loaded, _ = loads(dumps(model, config))
    return loaded
