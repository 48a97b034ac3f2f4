import json

import numpy as np
import pytest

from grnppg import io


def test_bundle_round_trip(tmp_path):
    arrays = {"a": np.arange(12.0).reshape(3, 4), "b": np.array([3, -1, 7]),
              "empty": np.zeros((0, 5)), "flag": np.array([True, False])}
    meta = {"z": 1, "a": [1, 2], "nested": {"x": 0.5}}
    p = io.write_bundle(tmp_path / "x.grn", "thing", meta, arrays)
    header, out = io.read_bundle(p, "thing")
    assert header["meta"] == meta and header["kind"] == "thing"
    np.testing.assert_array_equal(out["a"], arrays["a"])
    np.testing.assert_array_equal(out["b"], arrays["b"])
    assert out["b"].dtype == np.dtype("<i8") and out["a"].dtype == np.dtype("<f8")
    assert out["empty"].shape == (0, 5)
    np.testing.assert_array_equal(out["flag"], [1, 0])


def test_bundle_layout_is_documented(tmp_path):
    p = io.write_bundle(tmp_path / "x.grn", "k", {"b": 1, "a": 2}, {"v": np.array([1.5])})
    data = p.read_bytes()
    assert data.startswith(b"GRNPPG-BUNDLE 1\n")
    head, body = data[len(io.MAGIC):].split(b"\n", 1)
    header = json.loads(head)
    assert list(header) == sorted(header) and list(header["meta"]) == ["a", "b"]
    assert body == np.array([1.5], dtype="<f8").tobytes()


def test_bundle_is_byte_stable(tmp_path):
    arrays = {"x": np.random.default_rng(0).normal(size=(4, 4))}
    a = io.write_bundle(tmp_path / "a.grn", "k", {"s": 1}, arrays)
    b = io.write_bundle(tmp_path / "b.grn", "k", {"s": 1}, arrays)
    assert io.sha256_file(a) == io.sha256_file(b)


def test_bundle_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        io.read_bundle(tmp_path / "missing.grn")
    bad = tmp_path / "bad.grn"
    bad.write_bytes(b"hello\n")
    with pytest.raises(io.FormatError):
        io.read_bundle(bad)
    p = io.write_bundle(tmp_path / "x.grn", "dataset", {}, {"v": np.arange(10.0)})
    with pytest.raises(io.FormatError):
        io.read_bundle(p, "checkpoint")
    p.write_bytes(p.read_bytes()[:-8])
    with pytest.raises(io.FormatError):
        io.read_bundle(p)
    wrong = io.MAGIC + json.dumps({"version": 99, "kind": "x", "meta": {}, "arrays": []}).encode() + b"\n"
    bad.write_bytes(wrong)
    with pytest.raises(io.FormatError):
        io.read_bundle(bad)


def test_csv_round_trip_and_header_check(tmp_path):
    p = io.write_csv(tmp_path / "c.csv", ("a", "b", "c"),
                     [[1, 0.1, "x"], {"a": 2, "b": float("nan"), "c": "y"}, [np.int64(3), True, "z"]])
    assert p.read_text().splitlines() == ["a,b,c", "1,0.1,x", "2,nan,y", "3,1,z"]
    rows = io.read_csv(p, ("a", "b", "c"))
    assert rows[0] == {"a": "1", "b": "0.1", "c": "x"}
    with pytest.raises(io.FormatError):
        io.read_csv(p, ("a", "b"))
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(io.FormatError):
        io.read_csv(empty)


def test_float_formatting_round_trips_exactly(tmp_path):
    vals = [0.1 + 0.2, 1e-300, -2.5e17, 1 / 3]
    p = io.write_csv(tmp_path / "f.csv", ("v",), [[v] for v in vals])
    assert [float(r["v"]) for r in io.read_csv(p)] == vals


def test_json_is_sorted_and_stable(tmp_path):
    p = io.write_json(tmp_path / "j.json", {"b": 1, "a": {"d": 2, "c": 3}})
    assert p.read_text() == '{\n  "a": {\n    "c": 3,\n    "d": 2\n  },\n  "b": 1\n}\n'
    assert io.read_json(p) == {"a": {"c": 3, "d": 2}, "b": 1}


def test_schema_constants():
    assert io.LEARNING_CURVE_COLUMNS == ("epoch", "split", "loss", "auc", "precision", "recall", "f1")
    assert io.SWEEP_COLUMNS[:1] + io.SWEEP_COLUMNS[4:] == ("Models", "Acc", "Pre", "Rec", "F1")
