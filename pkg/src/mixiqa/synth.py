"""Synthetic heterogeneous-dataset generator.

Produces several datasets that disagree on everything a real mixed-dataset
corpus disagrees on: score range, polarity, and the (strictly monotone)
shape of the map from latent quality to annotated score. Every content draws
a latent quality q ~ uniform[0, 10]; each of its samples gets a feature map

    F = q / 10 * U + noise * N

with U one fixed random (c, l) template per run and N fresh i.i.d. noise,
so a statistic of F F^T is learnable and shared across datasets. Labels are
mos_raw = map_k(q) plus observer noise, stored in the dataset's native
range. Ground-truth latents are written next to each manifest, which is what
makes the generator usable as an end-to-end oracle.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .data import DatasetManifest, SampleRecord, rescale_mos, stable_hash, write_feature_file
from .errors import ConfigError, ValidationError


# ---------------------------------------------------------------------------
# strictly increasing label maps on q in [0, 10], normalized to [0, 1]
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LabelMap:
    """kind in {identity, logistic, gamma, piecewise}; params per kind."""

    kind: str
    slope: float = 8.0       # logistic
    midpoint: float = 5.0    # logistic
    exponent: float = 1.0    # gamma
    knots: tuple = ()        # piecewise: ((q, u), ...) with u in [0, 1]

    def validate(self) -> None:
        if self.kind == "identity":
            return
        if self.kind == "logistic":
            if self.slope <= 0:
                raise ConfigError(f"logistic slope must be > 0, got {self.slope}")
            return
        if self.kind == "gamma":
            if self.exponent <= 0:
                raise ConfigError(f"gamma exponent must be > 0, got {self.exponent}")
            return
        if self.kind == "piecewise":
            k = list(self.knots)
            if len(k) < 2 or k[0][0] != 0.0 or k[-1][0] != 10.0:
                raise ConfigError(f"piecewise knots must span q=0..10, got {self.knots}")
            for (q0, u0), (q1, u1) in zip(k, k[1:]):
                if not (q1 > q0 and u1 > u0):
                    raise ConfigError(
                        f"piecewise knots must be strictly increasing in both coordinates, got {self.knots}"
                    )
            return
        raise ConfigError(f"unknown label map kind {self.kind!r}")

    def unit(self, q) -> np.ndarray:
        """Map q in [0, 10] onto [0, 1], strictly increasing, endpoints exact."""
        q = np.asarray(q, dtype=np.float64)
        if self.kind == "identity":
            return q / 10.0
        if self.kind == "logistic":
            z = lambda v: 1.0 / (1.0 + np.exp(-self.slope * (v - self.midpoint) / 10.0))
            lo, hi = z(0.0), z(10.0)
            return (z(q) - lo) / (hi - lo)
        if self.kind == "gamma":
            return (q / 10.0) ** self.exponent
        k = np.asarray(self.knots, dtype=np.float64)
        return np.interp(q, k[:, 0], k[:, 1])

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.kind == "logistic":
            d.update(slope=self.slope, midpoint=self.midpoint)
        elif self.kind == "gamma":
            d.update(exponent=self.exponent)
        elif self.kind == "piecewise":
            d.update(knots=[list(k) for k in self.knots])
        return d

    @classmethod
    def from_json(cls, d: dict) -> "LabelMap":
        # validation happens at config level, where the dataset id is known
        return cls(
            kind=d.get("kind") or "",
            slope=float(d.get("slope", 8.0)),
            midpoint=float(d.get("midpoint", 5.0)),
            exponent=float(d.get("exponent", 1.0)),
            knots=tuple(tuple(float(v) for v in k) for k in d.get("knots", ())),
        )


@dataclass(frozen=True)
class SynthDatasetSpec:
    dataset_id: str
    n_samples: int
    native_min: float
    native_max: float
    higher_is_better: bool
    label_map: LabelMap

    def validate(self) -> None:
        if self.n_samples < 2:
            raise ConfigError(f"dataset {self.dataset_id}: n_samples must be >= 2")
        if not self.native_min < self.native_max:
            raise ConfigError(
                f"dataset {self.dataset_id}: empty native range [{self.native_min}, {self.native_max}]"
            )
        try:
            self.label_map.validate()
        except ConfigError as e:
            raise ConfigError(f"dataset {self.dataset_id}: {e}")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 7
    channels: int = 16
    length: int = 32
    # The template scale conditions the whole pipeline: pooled features scale
    # with its square, and the freshly initialized calibrator stack amplifies
    # the regressor output by a few thousand. Keeping the informative
    # component small keeps initial calibrated scores within the score range,
    # which is what lets the rank-teaching loss term act before the absolute
    # term can crush the ordering.
    template_scale: float = 0.03
    feature_noise: float = 0.0015
    observer_noise: float = 0.3  # stated on the common 10-point scale
    samples_per_content: int = 2
    datasets: tuple[SynthDatasetSpec, ...] = ()

    def validate(self) -> None:
        if self.channels < 1 or self.length < 1:
            raise ConfigError(f"channels/length must be >= 1, got {self.channels}/{self.length}")
        if self.template_scale <= 0:
            raise ConfigError(f"template_scale must be > 0, got {self.template_scale}")
        if self.feature_noise < 0 or self.observer_noise < 0:
            raise ConfigError("noise levels must be >= 0")
        if self.samples_per_content < 1:
            raise ConfigError("samples_per_content must be >= 1")
        if not self.datasets:
            raise ConfigError("at least one dataset spec is required")
        for spec in self.datasets:
            spec.validate()


def default_synth_config(seed: int = 7) -> SynthConfig:
    """Three datasets with clashing scales, polarities, and label curves."""
    return SynthConfig(
        seed=seed,
        datasets=(
            SynthDatasetSpec(
                dataset_id="synA",
                n_samples=800,
                native_min=0.0,
                native_max=100.0,
                higher_is_better=True,
                label_map=LabelMap(kind="logistic", slope=8.0, midpoint=5.0),
            ),
            SynthDatasetSpec(
                dataset_id="synB",
                n_samples=600,
                native_min=0.0,
                native_max=1.0,
                higher_is_better=False,
                label_map=LabelMap(kind="gamma", exponent=0.6),
            ),
            SynthDatasetSpec(
                dataset_id="synC",
                n_samples=400,
                native_min=1.0,
                native_max=5.0,
                higher_is_better=True,
                label_map=LabelMap(
                    kind="piecewise",
                    knots=((0.0, 0.0), (3.0, 0.45), (7.0, 0.7), (10.0, 1.0)),
                ),
            ),
        ),
    )


def load_synth_config(path: str | Path) -> SynthConfig:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"missing generator config {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"unparseable generator config {path}: {e}")
    known = {
        "seed", "channels", "length", "template_scale", "feature_noise",
        "observer_noise", "samples_per_content", "datasets",
    }
    unknown = doc.keys() - known
    if unknown:
        raise ConfigError(f"unknown generator config keys {sorted(unknown)}")
    datasets = []
    for entry in doc.get("datasets", []):
        dkn = {"dataset_id", "n_samples", "native_min", "native_max", "higher_is_better", "label_map"}
        bad = entry.keys() - dkn
        if bad:
            raise ConfigError(f"unknown dataset keys {sorted(bad)} in generator config")
        datasets.append(
            SynthDatasetSpec(
                dataset_id=entry["dataset_id"],
                n_samples=int(entry["n_samples"]),
                native_min=float(entry["native_min"]),
                native_max=float(entry["native_max"]),
                higher_is_better=bool(entry["higher_is_better"]),
                label_map=LabelMap.from_json(entry["label_map"]),
            )
        )
    cfg = SynthConfig(
        seed=int(doc.get("seed", 7)),
        channels=int(doc.get("channels", 16)),
        length=int(doc.get("length", 32)),
        template_scale=float(doc.get("template_scale", 0.03)),
        feature_noise=float(doc.get("feature_noise", 0.0015)),
        observer_noise=float(doc.get("observer_noise", 0.3)),
        samples_per_content=int(doc.get("samples_per_content", 2)),
        datasets=tuple(datasets),
    )
    cfg.validate()
    return cfg


def synth_config_to_json(cfg: SynthConfig) -> dict:
    return {
        "seed": cfg.seed,
        "channels": cfg.channels,
        "length": cfg.length,
        "template_scale": cfg.template_scale,
        "feature_noise": cfg.feature_noise,
        "observer_noise": cfg.observer_noise,
        "samples_per_content": cfg.samples_per_content,
        "datasets": [
            {
                "dataset_id": s.dataset_id,
                "n_samples": s.n_samples,
                "native_min": s.native_min,
                "native_max": s.native_max,
                "higher_is_better": s.higher_is_better,
                "label_map": s.label_map.to_json(),
            }
            for s in cfg.datasets
        ],
    }


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

@dataclass
class SynthResult:
    config: SynthConfig
    manifests: dict[str, DatasetManifest]
    latents: dict[str, dict[str, float]] = field(default_factory=dict)  # dataset -> sample -> q
    template: np.ndarray | None = None


def raw_label(spec: SynthDatasetSpec, q) -> np.ndarray:
    """Noise-free native-scale label for latent q, honoring polarity."""
    unit = spec.label_map.unit(q)
    span = spec.native_max - spec.native_min
    if spec.higher_is_better:
        return spec.native_min + span * unit
    return spec.native_max - span * unit


def label_curve(spec: SynthDatasetSpec, q_grid) -> np.ndarray:
    """Noise-free labels on the common [0, 10] scale (always increasing in q)."""
    raw = raw_label(spec, q_grid)
    return np.array(
        [rescale_mos(v, spec.native_min, spec.native_max, spec.higher_is_better) for v in np.atleast_1d(raw)]
    )


def generate(cfg: SynthConfig, out_dir: str | Path) -> SynthResult:
    """Write manifests, descriptors, latents, and feature files under out_dir."""
    cfg.validate()
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0]))
    template = rng.normal(0.0, cfg.template_scale, size=(cfg.channels, cfg.length))

    result = SynthResult(config=cfg, manifests={}, template=template)
    for spec in cfg.datasets:
        ds_rng = np.random.default_rng(
            np.random.SeedSequence([cfg.seed, 1, stable_hash(spec.dataset_id)])
        )
        ds_dir = root / spec.dataset_id
        (ds_dir / "features").mkdir(parents=True, exist_ok=True)

        n_contents = max(1, spec.n_samples // cfg.samples_per_content)
        q_content = ds_rng.uniform(0.0, 10.0, size=n_contents)
        span = spec.native_max - spec.native_min
        sigma_native = cfg.observer_noise * span / 10.0

        manifest = DatasetManifest(
            dataset_id=spec.dataset_id,
            native_min=spec.native_min,
            native_max=spec.native_max,
            higher_is_better=spec.higher_is_better,
        )
        latents: dict[str, float] = {}
        rows = []
        for i in range(spec.n_samples):
            content_idx = i % n_contents
            q = float(q_content[content_idx])
            sample_id = f"s{i:05d}"
            content_id = f"c{content_idx:05d}"
            feature = (q / 10.0) * template + cfg.feature_noise * ds_rng.normal(
                size=(cfg.channels, cfg.length)
            )
            rel_path = f"{spec.dataset_id}/features/{sample_id}.mqaf"
            write_feature_file(root / rel_path, feature)

            raw = float(raw_label(spec, q))
            if sigma_native > 0:
                raw += float(sigma_native * ds_rng.normal())
            raw = float(np.clip(raw, spec.native_min, spec.native_max))
            mos = rescale_mos(raw, spec.native_min, spec.native_max, spec.higher_is_better)
            manifest.records.append(
                SampleRecord(
                    dataset_id=spec.dataset_id,
                    sample_id=sample_id,
                    content_id=content_id,
                    feature_path=rel_path,
                    mos_raw=raw,
                    mos=mos,
                    higher_is_better=spec.higher_is_better,
                )
            )
            latents[sample_id] = q
            rows.append((sample_id, content_id, rel_path, raw))

        with open(ds_dir / "descriptor.json", "w") as fh:
            json.dump(
                {
                    "dataset_id": spec.dataset_id,
                    "native_min": spec.native_min,
                    "native_max": spec.native_max,
                    "higher_is_better": spec.higher_is_better,
                },
                fh,
                sort_keys=True,
            )
            fh.write("\n")
        with open(ds_dir / "manifest.csv", "w", newline="") as fh:
            fh.write("sample_id,content_id,feature_path,mos_raw\n")
            for sample_id, content_id, rel_path, raw in rows:
                fh.write(f"{sample_id},{content_id},{rel_path},{raw!r}\n")
        with open(ds_dir / "latents.csv", "w", newline="") as fh:
            fh.write("sample_id,content_id,q\n")
            for sample_id, content_id, _, _ in rows:
                fh.write(f"{sample_id},{content_id},{latents[sample_id]!r}\n")

        result.manifests[spec.dataset_id] = manifest
        result.latents[spec.dataset_id] = latents
    return result


def load_latents(data_root: str | Path, dataset_id: str) -> dict[str, float]:
    path = Path(data_root) / dataset_id / "latents.csv"
    if not path.exists():
        raise ValidationError(f"missing latents file {path}")
    out: dict[str, float] = {}
    for line in path.read_text().splitlines()[1:]:
        sample_id, _, q = line.split(",")
        out[sample_id] = float(q)
    return out
