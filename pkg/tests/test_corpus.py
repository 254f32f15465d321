import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import random_dataset
from repbias import corpus


def test_load_single_record(tmp_path):
    payload = bytes([3]) + bytes(range(256)) * 12
    assert len(payload) == 3073
    p = tmp_path / "one.bin"
    p.write_bytes(payload)
    ds = corpus.load_cifar_batch(p)
    assert len(ds) == 1
    assert ds.records[0].label == 3
    assert ds.records[0].pixels.shape == (3, 32, 32)


def test_load_ten_records(tmp_path):
    p = tmp_path / "ten.bin"
    p.write_bytes(bytes([1]) * 3073 * 10)
    assert len(corpus.load_cifar_batch(p)) == 10


def test_load_bad_size(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"\x00" * 3072)
    with pytest.raises(corpus.MalformedFileError):
        corpus.load_cifar_batch(p)


def test_load_empty_file(tmp_path):
    p = tmp_path / "empty.bin"
    p.write_bytes(b"")
    with pytest.raises(corpus.MalformedFileError):
        corpus.load_cifar_batch(p)


def test_load_bad_label_names_record(tmp_path):
    good = bytes([1]) + b"\x00" * 3072
    bad = bytes([11]) + b"\x00" * 3072
    p = tmp_path / "corrupt.bin"
    p.write_bytes(good + good + bad)
    with pytest.raises(corpus.CorruptRecordError, match="record 2"):
        corpus.load_cifar_batch(p)


def test_cifar_roundtrip(tmp_path):
    rng = np.random.default_rng(10)
    ds = random_dataset(rng, 7)
    p = tmp_path / "rt.bin"
    corpus.write_cifar_batch(ds, p)
    assert p.stat().st_size == 7 * 3073
    back = corpus.load_cifar_batch(p)
    for a, b in zip(ds.records, back.records):
        assert a.label == b.label
        assert np.array_equal(a.pixels, b.pixels)
    # byte-identity through a second write
    p2 = tmp_path / "rt2.bin"
    corpus.write_cifar_batch(back, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_write_empty_dataset_refused(tmp_path):
    with pytest.raises(ValueError):
        corpus.write_cifar_batch(corpus.Dataset([]), tmp_path / "no.bin")


def test_plane_order_is_rgb(tmp_path):
    # first pixel byte of each plane distinct: R=10, G=20, B=30
    rec = bytes([0]) + bytes([10] * 1024) + bytes([20] * 1024) + bytes([30] * 1024)
    p = tmp_path / "plane.bin"
    p.write_bytes(rec)
    img = corpus.load_cifar_batch(p).records[0]
    assert img.pixels[0, 0, 0] == 10
    assert img.pixels[1, 0, 0] == 20
    assert img.pixels[2, 0, 0] == 30


def test_features_header_and_payload(tmp_path):
    p = tmp_path / "f.rfv"
    payload = np.arange(6, dtype="<f4").tobytes()
    p.write_bytes(b"RFV1" + (2).to_bytes(4, "little") + (3).to_bytes(4, "little") + payload)
    fm = corpus.read_features(p)
    assert fm.rows.shape == (2, 3)
    assert fm.dim == 3
    assert fm.rows[1, 2] == 5.0


def test_features_bad_magic(tmp_path):
    p = tmp_path / "f.rfv"
    p.write_bytes(b"XXXX" + b"\x00" * 8)
    with pytest.raises(corpus.BadMagicError):
        corpus.read_features(p)


def test_features_truncated(tmp_path):
    p = tmp_path / "f.rfv"
    p.write_bytes(b"RFV1" + (2).to_bytes(4, "little") + (3).to_bytes(4, "little") + b"\x00" * 20)
    with pytest.raises(corpus.TruncatedPayloadError):
        corpus.read_features(p)


def test_features_non_finite(tmp_path):
    p = tmp_path / "f.rfv"
    payload = np.array([[1.0, np.nan]], dtype="<f4").tobytes()
    p.write_bytes(b"RFV1" + (1).to_bytes(4, "little") + (2).to_bytes(4, "little") + payload)
    with pytest.raises(corpus.NonFiniteValueError):
        corpus.read_features(p)


def test_features_roundtrip_bits(tmp_path):
    rng = np.random.default_rng(11)
    rows = rng.standard_normal((100, 16)).astype(np.float32)
    p = tmp_path / "f.rfv"
    corpus.write_features(corpus.FeatureMatrix(rows), p)
    back = corpus.read_features(p)
    assert back.rows.tobytes() == rows.tobytes()


def test_predictions_parse_and_roundtrip(tmp_path):
    p = tmp_path / "p.csv"
    p.write_text("0,3,3\n1,5,2\n")
    pt = corpus.read_predictions(p)
    assert pt.entries == [(0, 3, 3), (1, 5, 2)]
    p2 = tmp_path / "p2.csv"
    corpus.write_predictions(pt, p2)
    assert p.read_bytes() == p2.read_bytes()


def test_predictions_duplicate_index(tmp_path):
    p = tmp_path / "dup.csv"
    p.write_text("0,3,3\n0,5,2\n")
    with pytest.raises(corpus.CsvParseError, match="line 2"):
        corpus.read_predictions(p)


def test_predictions_label_range(tmp_path):
    p = tmp_path / "range.csv"
    p.write_text("0,3,10\n")
    with pytest.raises(corpus.CsvParseError, match="line 1"):
        corpus.read_predictions(p)


@given(
    st.lists(
        st.tuples(st.integers(0, 9), st.integers(0, 9)), min_size=0, max_size=60
    )
)
@settings(max_examples=50)
def test_predictions_roundtrip_property(tmp_path_factory, pairs):
    entries = [(i, t, p) for i, (t, p) in enumerate(pairs)]
    pt = corpus.PredictionTable("m", entries)
    path = tmp_path_factory.mktemp("pred") / "t.csv"
    corpus.write_predictions(pt, path)
    assert corpus.read_predictions(path).entries == entries


def test_manifest_roundtrip(tmp_path):
    m = corpus.SubsetManifest("sub", [0, 4, 9, 100])
    p = tmp_path / "m.txt"
    corpus.write_manifest(m, p)
    assert p.read_text() == "0\n4\n9\n100\n"
    back = corpus.read_manifest(p)
    assert back.indices == m.indices


def test_manifest_rejects_unsorted(tmp_path):
    p = tmp_path / "m.txt"
    p.write_text("4\n2\n")
    with pytest.raises(corpus.ManifestError):
        corpus.read_manifest(p)


def test_manifest_bounds():
    m = corpus.SubsetManifest("sub", [0, 5])
    with pytest.raises(corpus.ManifestError):
        m.validate(dataset_size=5)
