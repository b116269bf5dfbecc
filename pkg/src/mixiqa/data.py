"""Dataset manifests, binary feature files, rescaling, splits, and batching.

On-disk layout under a data root, one directory per dataset:

    <root>/<dataset_id>/descriptor.json   {dataset_id, native_min, native_max, higher_is_better}
    <root>/<dataset_id>/manifest.csv      sample_id,content_id,feature_path,mos_raw
    <root>/<dataset_id>/features/*.mqaf   binary feature maps (see below)

Feature files carry magic "MQAF", a little-endian u32 version (1), u32 c and
l, then c*l little-endian float32 values row-major. ``feature_path`` entries
are relative to the data root.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    NonFiniteError,
    TruncatedPayloadError,
    ValidationError,
)

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"MQAF"
FEATURE_VERSION = 1

MOS_SCALE = 10.0  # every dataset is rescaled onto [0, 10]


def rescale_mos(mos_raw: float, native_min: float, native_max: float, higher_is_better: bool) -> float:
    """Linear map of a native score onto [0, 10], flipping DMOS-style scales."""
    if not native_min < native_max:
        raise ValidationError(f"native range [{native_min}, {native_max}] is empty")
    if not (native_min <= mos_raw <= native_max):
        raise ValidationError(
            f"mos_raw {mos_raw} outside native range [{native_min}, {native_max}]"
        )
    value = MOS_SCALE * (mos_raw - native_min) / (native_max - native_min)
    return value if higher_is_better else MOS_SCALE - value


@dataclass(frozen=True)
class SampleRecord:
    dataset_id: str
    sample_id: str
    content_id: str
    feature_path: str
    mos_raw: float
    mos: float
    higher_is_better: bool


@dataclass
class DatasetManifest:
    dataset_id: str
    native_min: float
    native_max: float
    higher_is_better: bool
    records: list[SampleRecord] = field(default_factory=list)

    @property
    def content_ids(self) -> list[str]:
        seen: dict[str, None] = {}
        for r in self.records:
            seen.setdefault(r.content_id, None)
        return list(seen)

    def __len__(self) -> int:
        return len(self.records)


def _load_descriptor(path: Path) -> dict:
    try:
        desc = json.loads(path.read_text())
    except FileNotFoundError:
        raise ValidationError(f"missing dataset descriptor {path}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"unparseable descriptor {path}: {e}")
    required = {"dataset_id", "native_min", "native_max", "higher_is_better"}
    missing = required - desc.keys()
    if missing:
        raise ValidationError(f"descriptor {path} missing keys {sorted(missing)}")
    return desc


def load_manifest(data_root: str | Path, dataset_dir: str) -> DatasetManifest:
    """Read one dataset's descriptor + manifest and rescale every score."""
    root = Path(data_root)
    desc = _load_descriptor(root / dataset_dir / "descriptor.json")
    manifest = DatasetManifest(
        dataset_id=desc["dataset_id"],
        native_min=float(desc["native_min"]),
        native_max=float(desc["native_max"]),
        higher_is_better=bool(desc["higher_is_better"]),
    )
    csv_path = root / dataset_dir / "manifest.csv"
    if not csv_path.exists():
        raise ValidationError(f"missing manifest {csv_path}")
    with open(csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        expected = ["sample_id", "content_id", "feature_path", "mos_raw"]
        if reader.fieldnames != expected:
            raise ValidationError(f"manifest {csv_path} header {reader.fieldnames} != {expected}")
        for row in reader:
            if not row["content_id"]:
                raise ValidationError(f"record {row['sample_id']} in {csv_path}: empty content_id")
            try:
                raw = float(row["mos_raw"])
            except ValueError:
                raise ValidationError(
                    f"record {row['sample_id']} in {csv_path}: bad mos_raw {row['mos_raw']!r}"
                )
            try:
                mos = rescale_mos(raw, manifest.native_min, manifest.native_max, manifest.higher_is_better)
            except ValidationError as e:
                raise ValidationError(f"record {row['sample_id']} in {csv_path}: {e}")
            manifest.records.append(
                SampleRecord(
                    dataset_id=manifest.dataset_id,
                    sample_id=row["sample_id"],
                    content_id=row["content_id"],
                    feature_path=row["feature_path"],
                    mos_raw=raw,
                    mos=mos,
                    higher_is_better=manifest.higher_is_better,
                )
            )
    return manifest


def discover_datasets(data_root: str | Path) -> list[str]:
    """Dataset directories under the root, sorted for determinism."""
    root = Path(data_root)
    if not root.is_dir():
        raise ValidationError(f"data root {root} is not a directory")
    out = sorted(p.name for p in root.iterdir() if (p / "descriptor.json").is_file())
    if not out:
        raise ValidationError(f"no dataset descriptors found under {root}")
    return out


def load_all_manifests(data_root: str | Path) -> dict[str, DatasetManifest]:
    manifests = {}
    for d in discover_datasets(data_root):
        m = load_manifest(data_root, d)
        manifests[m.dataset_id] = m
    return manifests


# ---------------------------------------------------------------------------
# content-disjoint splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitAssignment:
    train: frozenset[str]
    val: frozenset[str]
    test: frozenset[str]
    seed: int

    def subset_of(self, record: SampleRecord) -> str:
        if record.content_id in self.train:
            return "train"
        if record.content_id in self.val:
            return "val"
        return "test"


def stable_hash(text: str) -> int:
    """Platform-independent 64-bit hash for seed derivation."""
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "little")


def split_by_content(
    manifest: DatasetManifest,
    seed: int,
    proportions: tuple[float, float, float] = (0.6, 0.2, 0.2),
) -> SplitAssignment:
    """Shuffle content groups with the seed, then cut 60/20/20 by group count."""
    if abs(sum(proportions) - 1.0) > 1e-9 or any(p <= 0 for p in proportions):
        raise ConfigError(f"split proportions {proportions} must be positive and sum to 1")
    contents = sorted(manifest.content_ids)
    if len(contents) < 5:
        raise ValidationError(
            f"dataset {manifest.dataset_id} has only {len(contents)} contents (need >= 5)"
        )
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(contents))
    shuffled = [contents[i] for i in order]
    n = len(shuffled)
    # round half up so every subset lands within one group of its target
    n_train = max(1, int(np.floor(proportions[0] * n + 0.5)))
    n_val = max(1, int(np.floor(proportions[1] * n + 0.5)))
    while n_train + n_val >= n and n_train > 1:
        n_train -= 1
    if n_train + n_val >= n:
        raise ValidationError(f"cannot carve three non-empty subsets out of {n} contents")
    return SplitAssignment(
        train=frozenset(shuffled[:n_train]),
        val=frozenset(shuffled[n_train : n_train + n_val]),
        test=frozenset(shuffled[n_train + n_val :]),
        seed=seed,
    )


def records_in(manifest: DatasetManifest, split: SplitAssignment, subset: str) -> list[SampleRecord]:
    if subset not in ("train", "val", "test"):
        raise ConfigError(f"unknown subset {subset!r}")
    wanted = getattr(split, subset)
    return [r for r in manifest.records if r.content_id in wanted]


# ---------------------------------------------------------------------------
# binary feature files
# ---------------------------------------------------------------------------

def write_feature_file(path: str | Path, mat: np.ndarray) -> None:
    a = np.asarray(mat, dtype=np.float64)
    if a.ndim != 2:
        raise ValidationError(f"feature matrix must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"refusing to write non-finite features to {path}")
    c, l = a.shape
    payload = a.astype("<f4").tobytes(order="C")
    with open(path, "wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<III", FEATURE_VERSION, c, l))
        fh.write(payload)


def read_feature_file(path: str | Path) -> np.ndarray:
    """Read and validate one feature map; returns float64 (c, l)."""
    try:
        blob = Path(path).read_bytes()
    except FileNotFoundError:
        raise ValidationError(f"missing feature file {path}")
    if len(blob) < 16:
        raise TruncatedPayloadError(f"feature file {path} too short for a header")
    if blob[:4] != FEATURE_MAGIC:
        raise BadMagicError(f"feature file {path} has magic {blob[:4]!r}, expected {FEATURE_MAGIC!r}")
    version, c, l = struct.unpack("<III", blob[4:16])
    if version != FEATURE_VERSION:
        raise BadVersionError(f"feature file {path} has version {version}, expected {FEATURE_VERSION}")
    expected = 16 + 4 * c * l
    if len(blob) != expected:
        kind = TruncatedPayloadError if len(blob) < expected else ValidationError
        raise kind(
            f"feature file {path} payload is {len(blob) - 16} bytes, expected exactly {4 * c * l}"
        )
    data = np.frombuffer(blob[16:expected], dtype="<f4").astype(np.float64).reshape(c, l)
    if not np.all(np.isfinite(data)):
        raise NonFiniteError(f"feature file {path} contains non-finite values")
    return data


# ---------------------------------------------------------------------------
# batch assembly
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Batch:
    dataset_id: str
    records: tuple[SampleRecord, ...]

    def __len__(self) -> int:
        return len(self.records)


def make_batches(
    train_records: dict[str, list[SampleRecord]],
    batch_size: int,
    seed: int,
    epoch: int,
) -> list[Batch]:
    """Single-dataset batches, datasets interleaved round-robin.

    Each dataset's records are shuffled per (seed, epoch, dataset) and cut
    into batch_size chunks; a final chunk of one record is dropped because
    the norm-in-norm term needs batch statistics.
    """
    if batch_size < 2:
        raise ConfigError(f"batch_size must be >= 2 (batch statistics), got {batch_size}")
    queues: dict[str, list[Batch]] = {}
    for ds in sorted(train_records):
        records = train_records[ds]
        rng = np.random.default_rng(
            np.random.SeedSequence([seed, 3, epoch, stable_hash(ds)])
        )
        order = rng.permutation(len(records))
        shuffled = [records[i] for i in order]
        chunks = []
        for start in range(0, len(shuffled), batch_size):
            chunk = shuffled[start : start + batch_size]
            if len(chunk) < 2:
                logger.warning(
                    "dropping a leftover batch of 1 record (%s, epoch %d)", ds, epoch
                )
                continue
            chunks.append(Batch(dataset_id=ds, records=tuple(chunk)))
        queues[ds] = chunks
    out: list[Batch] = []
    i = 0
    while True:
        emitted = False
        for ds in sorted(queues):
            if i < len(queues[ds]):
                out.append(queues[ds][i])
                emitted = True
        if not emitted:
            break
        i += 1
    return out
