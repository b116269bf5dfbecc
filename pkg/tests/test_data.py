import numpy as np
import pytest

from mixiqa.data import (
    Batch,
    DatasetManifest,
    SampleRecord,
    load_manifest,
    make_batches,
    read_feature_file,
    rescale_mos,
    split_by_content,
    write_feature_file,
)
from mixiqa.errors import (
    BadMagicError,
    BadVersionError,
    ConfigError,
    NonFiniteError,
    TruncatedPayloadError,
    ValidationError,
)
from mixiqa.metrics import srcc


# -- rescaling ----------------------------------------------------------------

def test_rescale_endpoints():
    assert rescale_mos(0.0, 0.0, 100.0, True) == 0.0
    assert rescale_mos(100.0, 0.0, 100.0, True) == 10.0


def test_rescale_dmos_flip():
    # 0.25 on a [0, 1] difference scale (lower is better) -> 7.5
    assert rescale_mos(0.25, 0.0, 1.0, False) == 7.5


def test_rescale_out_of_range_rejected():
    with pytest.raises(ValidationError):
        rescale_mos(101.0, 0.0, 100.0, True)
    with pytest.raises(ValidationError):
        rescale_mos(1.0, 2.0, 2.0, True)  # empty range


def test_rescale_preserves_rank_within_dataset():
    rng = np.random.default_rng(0)
    raw = rng.uniform(0, 1, 40)
    up = [rescale_mos(v, 0.0, 1.0, True) for v in raw]
    down = [rescale_mos(v, 0.0, 1.0, False) for v in raw]
    assert srcc(raw, up) == 1.0
    assert srcc(-raw, down) == 1.0


# -- manifests ----------------------------------------------------------------

def _record(ds, sid, cid, mos_raw=5.0, mos=5.0):
    return SampleRecord(
        dataset_id=ds, sample_id=sid, content_id=cid,
        feature_path=f"{ds}/features/{sid}.mqaf",
        mos_raw=mos_raw, mos=mos, higher_is_better=True,
    )


def _manifest(n_contents, per_content=2, ds="d0"):
    m = DatasetManifest(dataset_id=ds, native_min=0.0, native_max=10.0, higher_is_better=True)
    i = 0
    for c in range(n_contents):
        for _ in range(per_content):
            m.records.append(_record(ds, f"s{i:04d}", f"c{c:04d}"))
            i += 1
    return m


def test_manifest_round_trip(tmp_path):
    import csv
    import json

    d = tmp_path / "dsX"
    d.mkdir()
    (d / "descriptor.json").write_text(json.dumps({
        "dataset_id": "dsX", "native_min": 0.0, "native_max": 1.0, "higher_is_better": False,
    }))
    with open(d / "manifest.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample_id", "content_id", "feature_path", "mos_raw"])
        w.writerow(["s0", "c0", "dsX/features/s0.mqaf", "0.25"])
    m = load_manifest(tmp_path, "dsX")
    assert m.dataset_id == "dsX"
    assert m.records[0].mos == 7.5  # flipped


def test_manifest_rejects_bad_header(tmp_path):
    import json

    d = tmp_path / "dsY"
    d.mkdir()
    (d / "descriptor.json").write_text(json.dumps({
        "dataset_id": "dsY", "native_min": 0, "native_max": 1, "higher_is_better": True,
    }))
    (d / "manifest.csv").write_text("sample,content,path,score\na,b,c,1\n")
    with pytest.raises(ValidationError):
        load_manifest(tmp_path, "dsY")


def test_manifest_names_offending_record(tmp_path):
    import json

    d = tmp_path / "dsZ"
    d.mkdir()
    (d / "descriptor.json").write_text(json.dumps({
        "dataset_id": "dsZ", "native_min": 0, "native_max": 1, "higher_is_better": True,
    }))
    (d / "manifest.csv").write_text(
        "sample_id,content_id,feature_path,mos_raw\nbad_one,c0,p,7.0\n"
    )
    with pytest.raises(ValidationError, match="bad_one"):
        load_manifest(tmp_path, "dsZ")


# -- splits -------------------------------------------------------------------

def test_split_ten_contents_is_6_2_2():
    split = split_by_content(_manifest(10), seed=0)
    assert len(split.train) == 6 and len(split.val) == 2 and len(split.test) == 2


def test_split_deterministic_and_seed_sensitive():
    m = _manifest(100)
    a = split_by_content(m, seed=42)
    b = split_by_content(m, seed=42)
    assert a.train == b.train and a.val == b.val and a.test == b.test
    c = split_by_content(m, seed=43)
    assert a.train != c.train


def test_split_partitions_exactly():
    m = _manifest(37)
    split = split_by_content(m, seed=1)
    union = split.train | split.val | split.test
    assert union == set(m.content_ids)
    assert not (split.train & split.val) and not (split.train & split.test)
    assert not (split.val & split.test)


def test_split_proportions_within_one_group():
    for n in (5, 7, 23, 50, 101):
        split = split_by_content(_manifest(n), seed=3)
        assert abs(len(split.train) - 0.6 * n) <= 1
        assert abs(len(split.val) - 0.2 * n) <= 1
        assert abs(len(split.test) - 0.2 * n) <= 1


def test_split_rejects_too_few_contents():
    with pytest.raises(ValidationError):
        split_by_content(_manifest(4), seed=0)


# -- feature files ------------------------------------------------------------

def test_feature_file_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    mat = rng.normal(size=(3, 5))
    path = tmp_path / "f.mqaf"
    write_feature_file(path, mat)
    back = read_feature_file(path)
    assert back.shape == (3, 5)
    assert np.array_equal(back, mat.astype(np.float32).astype(np.float64))


def test_feature_file_bad_magic(tmp_path):
    path = tmp_path / "f.mqaf"
    path.write_bytes(b"XXXX" + b"\x00" * 20)
    with pytest.raises(BadMagicError):
        read_feature_file(path)


def test_feature_file_bad_version(tmp_path):
    import struct

    path = tmp_path / "f.mqaf"
    path.write_bytes(b"MQAF" + struct.pack("<III", 9, 1, 1) + b"\x00" * 4)
    with pytest.raises(BadVersionError):
        read_feature_file(path)


def test_feature_file_truncated(tmp_path):
    path = tmp_path / "f.mqaf"
    write_feature_file(path, np.ones((2, 3)))
    blob = path.read_bytes()
    path.write_bytes(blob[:-1])
    with pytest.raises(TruncatedPayloadError):
        read_feature_file(path)


def test_feature_file_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "f.mqaf"
    write_feature_file(path, np.ones((2, 3)))
    path.write_bytes(path.read_bytes() + b"\x00\x00")
    with pytest.raises(ValidationError, match="exactly"):
        read_feature_file(path)


def test_feature_file_nonfinite(tmp_path):
    import struct

    path = tmp_path / "f.mqaf"
    payload = struct.pack("<f", float("inf")) * 2
    path.write_bytes(b"MQAF" + struct.pack("<III", 1, 1, 2) + payload)
    with pytest.raises(NonFiniteError):
        read_feature_file(path)
    with pytest.raises(NonFiniteError):
        write_feature_file(tmp_path / "g.mqaf", np.array([[np.nan]]))


def test_feature_file_missing(tmp_path):
    with pytest.raises(ValidationError):
        read_feature_file(tmp_path / "absent.mqaf")


# -- batching -----------------------------------------------------------------

def _records(ds, n):
    return [_record(ds, f"{ds}-s{i}", f"{ds}-c{i}") for i in range(n)]


def test_batches_cover_single_dataset():
    batches = make_batches({"a": _records("a", 64)}, batch_size=32, seed=0, epoch=0)
    assert len(batches) == 2
    seen = {r.sample_id for b in batches for r in b.records}
    assert len(seen) == 64


def test_batches_round_robin_interleaving():
    batches = make_batches(
        {"a": _records("a", 64), "b": _records("b", 32)}, batch_size=32, seed=0, epoch=0
    )
    assert [b.dataset_id for b in batches] == ["a", "b", "a"]


def test_batches_drop_leftover_singleton(caplog):
    import logging

    with caplog.at_level(logging.WARNING):
        batches = make_batches({"a": _records("a", 33)}, batch_size=32, seed=0, epoch=0)
    assert [len(b) for b in batches] == [32]
    assert any("dropping" in r.message for r in caplog.records)


def test_batches_keep_short_final_batch_of_two():
    batches = make_batches({"a": _records("a", 34)}, batch_size=32, seed=0, epoch=0)
    assert sorted(len(b) for b in batches) == [2, 32]


def test_batches_epoch_changes_order():
    recs = {"a": _records("a", 64)}
    e0 = make_batches(recs, 32, seed=0, epoch=0)
    e1 = make_batches(recs, 32, seed=0, epoch=1)
    assert [r.sample_id for r in e0[0].records] != [r.sample_id for r in e1[0].records]
    # but each epoch still covers every record exactly once
    for batches in (e0, e1):
        ids = [r.sample_id for b in batches for r in b.records]
        assert len(ids) == len(set(ids)) == 64


def test_batches_reject_tiny_batch_size():
    with pytest.raises(ConfigError):
        make_batches({"a": _records("a", 8)}, batch_size=1, seed=0, epoch=0)


def test_batch_is_single_dataset():
    batches = make_batches(
        {"a": _records("a", 40), "b": _records("b", 40)}, batch_size=16, seed=0, epoch=0
    )
    for b in batches:
        assert len({r.dataset_id for r in b.records}) == 1
