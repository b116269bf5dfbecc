"""End-to-end mixed-dataset training.

Every batch holds records from exactly one dataset: the shared head maps the
batch's feature maps to shared-scale qualities, that dataset's calibrator
maps them onto the dataset's score scale, and the combined loss
backpropagates through both. Two Adam groups (head at lr_regressor,
calibrators at lr_transformer) update only the tensors that received
gradients, so a batch from one dataset leaves every other calibrator
bitwise untouched.

Model selection is the epoch with the best validation weighted SRCC,
computed on the shared scale (the same head-only path used at test time).
The retained snapshot is the checkpoint encoding itself, so the model
returned by train() is bitwise the model a reader of the saved checkpoint
sees.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import checkpoint as ckpt
from .config import TrainConfig
from .data import (
    Batch,
    DatasetManifest,
    SampleRecord,
    SplitAssignment,
    make_batches,
    read_feature_file,
    records_in,
    split_by_content,
    stable_hash,
)
from .errors import ConfigError, DimensionError, NonFiniteError, ValidationError
from .losses import combined_grad, combined_loss
from .metrics import CorrelationResult, WeightedReport, correlate, median_over_splits, weighted_report
from .model import QualityModel, build_model
from .monotone import default_widths
from .optim import Adam
from .regressor import head_backward, head_forward, pool_and_flatten

LOG_FIELDS = (
    "epoch",
    "batch",
    "dataset_id",
    "loss_sl",
    "loss_nin",
    "loss_all",
    "val_weighted_srcc",
)


class FeatureStore:
    """Caches raw feature maps and their pooled flattened form per sample."""

    def __init__(self, data_root: str | Path):
        self.root = Path(data_root)
        self._raw: dict[tuple[str, str], np.ndarray] = {}
        self._flat: dict[tuple[str, str, bool], np.ndarray] = {}
        self.channels: int | None = None

    def feature(self, record: SampleRecord) -> np.ndarray:
        key = (record.dataset_id, record.sample_id)
        if key not in self._raw:
            f = read_feature_file(self.root / record.feature_path)
            if self.channels is None:
                self.channels = f.shape[0]
            elif f.shape[0] != self.channels:
                raise DimensionError(
                    f"feature file {record.feature_path} has {f.shape[0]} channels, "
                    f"expected {self.channels}"
                )
            self._raw[key] = f
        return self._raw[key]

    def flat(self, record: SampleRecord, normalize: bool) -> np.ndarray:
        key = (record.dataset_id, record.sample_id, normalize)
        if key not in self._flat:
            self._flat[key] = pool_and_flatten(self.feature(record), normalize)
        return self._flat[key]

    def flat_batch(self, records, normalize: bool) -> np.ndarray:
        return np.stack([self.flat(r, normalize) for r in records])


def check_channels(model: QualityModel, store: FeatureStore, record: SampleRecord) -> None:
    f = store.feature(record)
    if f.shape[0] != model.channels:
        raise DimensionError(
            f"feature file {record.feature_path} has {f.shape[0]} channels, "
            f"model head is configured for {model.channels}"
        )


def make_splits(manifests: dict[str, DatasetManifest], seed: int) -> dict[str, SplitAssignment]:
    """Per-dataset content-disjoint splits, seeds derived from one base seed."""
    out = {}
    for ds in sorted(manifests):
        child = np.random.SeedSequence([seed, 101, stable_hash(ds)]).generate_state(1)[0]
        out[ds] = split_by_content(manifests[ds], seed=int(child))
    return out


def qp_for_records(model: QualityModel, store: FeatureStore, records) -> np.ndarray:
    if not records:
        return np.zeros(0)
    x = store.flat_batch(records, model.head.normalize_pooled)
    qp, _ = head_forward(model.head, x)
    return qp


@dataclass
class TrainResult:
    model: QualityModel
    log: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_val_srcc: float = float("-inf")
    epochs_run: int = 0


def _validation_srcc(
    model: QualityModel,
    manifests: dict[str, DatasetManifest],
    splits: dict[str, SplitAssignment],
    store: FeatureStore,
) -> float:
    per: dict[str, CorrelationResult] = {}
    for ds in sorted(manifests):
        recs = records_in(manifests[ds], splits[ds], "val")
        qp = qp_for_records(model, store, recs)
        per[ds] = correlate(qp, [r.mos for r in recs])
    return weighted_report(per).weighted_srcc


def train(
    model: QualityModel,
    manifests: dict[str, DatasetManifest],
    splits: dict[str, SplitAssignment],
    config: TrainConfig,
    data_root: str | Path,
    store: FeatureStore | None = None,
) -> TrainResult:
    config.validate()
    store = store or FeatureStore(data_root)
    missing = sorted(set(manifests) - set(model.transformers))
    if missing:
        raise ConfigError(f"no calibrator for training datasets {missing}")
    for ds in sorted(manifests):
        if manifests[ds].records:
            check_channels(model, store, manifests[ds].records[0])

    train_records = {ds: records_in(manifests[ds], splits[ds], "train") for ds in sorted(manifests)}
    for ds, recs in train_records.items():
        if len(recs) < 2:
            raise ValidationError(f"dataset {ds} has {len(recs)} training records (need >= 2)")

    result = TrainResult(model=model)
    if config.epochs == 0:
        return result

    opt_head = Adam(
        model.head_parameters(), config.lr_regressor, (config.beta1, config.beta2), config.adam_eps
    )
    opt_cal = Adam(
        model.transformer_parameters(), config.lr_transformer, (config.beta1, config.beta2), config.adam_eps
    )

    best_blob: bytes | None = None
    epochs_since_best = 0
    for epoch in range(config.epochs):
        batches = make_batches(train_records, config.batch_size, config.seed, epoch)
        for b_idx, batch in enumerate(batches):
            parts = _train_step(model, store, batch, config, opt_head, opt_cal)
            if not np.isfinite(parts.total):
                raise NonFiniteError(
                    f"non-finite loss at epoch {epoch} batch {b_idx} ({batch.dataset_id})"
                )
            result.log.append(
                {
                    "epoch": epoch,
                    "batch": b_idx,
                    "dataset_id": batch.dataset_id,
                    "loss_sl": parts.smooth_l1,
                    "loss_nin": parts.nin,
                    "loss_all": parts.total,
                    "val_weighted_srcc": None,
                }
            )
        val = _validation_srcc(model, manifests, splits, store)
        result.log.append(
            {
                "epoch": epoch,
                "batch": None,
                "dataset_id": None,
                "loss_sl": None,
                "loss_nin": None,
                "loss_all": None,
                "val_weighted_srcc": val,
            }
        )
        result.epochs_run = epoch + 1
        if val > result.best_val_srcc:
            result.best_val_srcc = val
            result.best_epoch = epoch
            best_blob = ckpt.dumps(model, config)
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if epochs_since_best >= config.patience:
                break

    if best_blob is not None:
        result.model, _ = ckpt.loads(best_blob)
    return result


def _train_step(
    model: QualityModel,
    store: FeatureStore,
    batch: Batch,
    config: TrainConfig,
    opt_head: Adam,
    opt_cal: Adam,
):
    records = batch.records
    x = store.flat_batch(records, model.head.normalize_pooled)
    qm = np.array([r.mos for r in records])
    qp, head_cache = head_forward(model.head, x)
    calibrator = model.transformers[batch.dataset_id]
    qr, cal_cache = calibrator.forward_cached(qp)
    parts = combined_loss(qr, qm, config.loss_lambda)

    g_qr = combined_grad(qr, qm, config.loss_lambda)
    model.zero_grad()
    g_qp = calibrator.backward(cal_cache, g_qr)
    head_backward(model.head, head_cache, g_qp[:, 0])

    opt_head.step(model.head_parameters())
    opt_cal.step(calibrator.parameters())
    return parts


def write_log(log: list[dict], path: str | Path) -> None:
    with open(path, "w") as fh:
        for record in log:
            fh.write(json.dumps({k: record[k] for k in LOG_FIELDS}, sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def evaluate(
    model: QualityModel,
    manifests: dict[str, DatasetManifest],
    splits: dict[str, SplitAssignment],
    data_root: str | Path,
    subset: str = "test",
    mode: str = "raw",
    store: FeatureStore | None = None,
) -> WeightedReport:
    """Per-dataset SRCC/PLCC of predictions against rescaled scores.

    raw mode correlates the shared-scale quality directly; calibrated mode
    maps it through the dataset's calibrator first (identical SRCC by
    monotonicity, PLCC measured on the dataset's own scale).
    """
    if mode not in ("raw", "calibrated"):
        raise ConfigError(f"unknown evaluation mode {mode!r}")
    store = store or FeatureStore(data_root)
    per: dict[str, CorrelationResult] = {}
    for ds in sorted(manifests):
        recs = records_in(manifests[ds], splits[ds], subset)
        if not recs:
            raise ValidationError(f"dataset {ds} has an empty {subset} subset")
        check_channels(model, store, recs[0])
        preds = qp_for_records(model, store, recs)
        if mode == "calibrated":
            if ds not in model.transformers:
                raise ConfigError(f"calibrated evaluation: no calibrator for dataset {ds!r}")
            preds = model.transformers[ds].forward(preds)
        per[ds] = correlate(preds, [r.mos for r in recs])
    return weighted_report(per)


# ---------------------------------------------------------------------------
# harnesses: depth ablation and median-over-splits
# ---------------------------------------------------------------------------

def ablate_depth(
    manifests: dict[str, DatasetManifest],
    splits: dict[str, SplitAssignment],
    config: TrainConfig,
    data_root: str | Path,
    depths: tuple[int, ...] = (3, 5, 7),
    store: FeatureStore | None = None,
) -> list[tuple[int, WeightedReport]]:
    """Independent seeded run per depth; rows follow the input depth order."""
    store = store or FeatureStore(data_root)
    rows = []
    for depth in depths:
        run_seed = int(np.random.SeedSequence([config.seed, 4, depth]).generate_state(1)[0])
        cfg = replace(config, cfcl_depth=depth, cfcl_widths=None, seed=run_seed).validate()
        first = next(iter(sorted(manifests)))
        sample = manifests[first].records[0]
        channels = store.feature(sample).shape[0]
        model = build_model(
            channels,
            sorted(manifests),
            seed=cfg.seed,
            cfcl_depth=depth,
            cfcl_widths=default_widths(depth),
            head_h1=cfg.head_h1,
            head_h2=cfg.head_h2,
            normalize_pooled=cfg.normalize_pooled,
        )
        result = train(model, manifests, splits, cfg, data_root, store=store)
        report = evaluate(result.model, manifests, splits, data_root, store=store)
        rows.append((depth, report))
    return rows


def multi_split_eval(
    manifests: dict[str, DatasetManifest],
    config: TrainConfig,
    data_root: str | Path,
    n_splits: int,
    mode: str = "raw",
    store: FeatureStore | None = None,
) -> tuple[WeightedReport, list[WeightedReport]]:
    """Retrain on n independent splits and report the elementwise median."""
    if n_splits < 1:
        raise ConfigError(f"n_splits must be >= 1, got {n_splits}")
    store = store or FeatureStore(data_root)
    reports = []
    for i in range(n_splits):
        run_seed = int(np.random.SeedSequence([config.seed, 5, i]).generate_state(1)[0])
        cfg = replace(config, seed=run_seed).validate()
        splits = make_splits(manifests, cfg.seed)
        first = next(iter(sorted(manifests)))
        channels = store.feature(manifests[first].records[0]).shape[0]
        model = build_model(
            channels,
            sorted(manifests),
            seed=cfg.seed,
            cfcl_depth=cfg.cfcl_depth,
            cfcl_widths=list(cfg.cfcl_widths) if cfg.cfcl_widths else None,
            head_h1=cfg.head_h1,
            head_h2=cfg.head_h2,
            normalize_pooled=cfg.normalize_pooled,
            allow_any_depth=cfg.allow_any_depth,
        )
        result = train(model, manifests, splits, cfg, data_root, store=store)
        reports.append(evaluate(result.model, manifests, splits, data_root, mode=mode, store=store))
    return median_over_splits(reports), reports
