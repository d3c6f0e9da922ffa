import gzip
import json
import struct

import numpy as np
import pytest
from conftest import random_model
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hmnmf.hierarchy import reconstruct_x
from hmnmf.io import (
    FormatError,
    MM_HEADER,
    load_data,
    load_idx_images,
    load_idx_labels,
    load_labels,
    load_matrix,
    load_model,
    save_matrix,
    save_model,
)
from hmnmf.matrix import NonNegativityError, ShapeError
from hmnmf.nonlinearity import Nonlinearity


def idx_images(pixels, count, rows, cols):
    return struct.pack(">IIII", 0x803, count, rows, cols) + bytes(pixels)


def idx_labels(labels):
    return struct.pack(">II", 0x801, len(labels)) + bytes(labels)


def test_csv_basic(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,4\n")
    np.testing.assert_array_equal(load_matrix(p), [[1, 2], [3, 4]])


def test_csv_negative_entry_names_location(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,-1\n")
    with pytest.raises(NonNegativityError, match=r"\(1, 1\)"):
        load_matrix(p)


def test_csv_ragged_rows_name_line(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text("1,2\n3,4,5\n")
    with pytest.raises(FormatError, match="line 2"):
        load_matrix(p)


@pytest.mark.parametrize("bad", ["nan", "inf", "x"])
def test_csv_rejects_non_finite_and_garbage(tmp_path, bad):
    p = tmp_path / "a.csv"
    p.write_text(f"1,{bad}\n")
    with pytest.raises(ValueError):
        load_matrix(p)


def test_mm_header_and_column_major(tmp_path):
    p = tmp_path / "a.mtx"
    save_matrix(np.array([[1.0, 2.0], [3.0, 4.0]]), p)
    lines = p.read_text().splitlines()
    assert lines[0] == MM_HEADER
    assert lines[1] == "2 2"
    assert lines[2:] == ["1", "3", "2", "4"]


def test_minimal_file(tmp_path):
    for name in ("z.csv", "z.mtx"):
        save_matrix(np.zeros((1, 1)), tmp_path / name)
        np.testing.assert_array_equal(load_matrix(tmp_path / name), [[0.0]])
    assert (tmp_path / "z.csv").read_text() == "0\n"


def test_empty_path_is_an_io_error():
    with pytest.raises(OSError):
        save_matrix(np.ones((1, 1)), "")


finite = st.floats(min_value=0.0, max_value=1e300, allow_nan=False, allow_infinity=False, allow_subnormal=True)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)), elements=finite), st.sampled_from(["csv", "mm"]))
def test_matrix_round_trip_is_exact(tmp_path_factory, a, fmt):
    p = tmp_path_factory.mktemp("rt") / ("m." + ("csv" if fmt == "csv" else "mtx"))
    save_matrix(a, p, fmt)
    b = load_matrix(p, fmt)
    assert b.dtype == np.float64
    np.testing.assert_array_equal(a.view(np.uint64), b.view(np.uint64))


def test_idx_minimal_image(tmp_path):
    p = tmp_path / "img"
    p.write_bytes(idx_images([0, 128, 255, 64], 1, 2, 2))
    np.testing.assert_array_equal(load_idx_images(p), [[0.0], [128 / 255], [1.0], [64 / 255]])
    np.testing.assert_array_equal(load_idx_images(p, raw=True).ravel(), [0, 128, 255, 64])


def test_idx_images_are_columns(tmp_path):
    p = tmp_path / "img"
    p.write_bytes(idx_images([1, 2, 3, 4, 5, 6], 2, 1, 3))
    np.testing.assert_array_equal(load_idx_images(p, raw=True), [[1, 4], [2, 5], [3, 6]])


def test_idx_labels(tmp_path):
    p = tmp_path / "lab"
    p.write_bytes(idx_labels([7, 2, 1]))
    np.testing.assert_array_equal(load_idx_labels(p), [7, 2, 1])
    np.testing.assert_array_equal(load_labels(p), [7, 2, 1])


def test_idx_gzip(tmp_path):
    p = tmp_path / "lab.gz"
    p.write_bytes(gzip.compress(idx_labels([3, 3])))
    np.testing.assert_array_equal(load_idx_labels(p), [3, 3])


def test_idx_errors(tmp_path):
    p = tmp_path / "img"
    p.write_bytes(idx_images([0, 1, 2], 1, 2, 2))
    with pytest.raises(FormatError, match="truncated"):
        load_idx_images(p)
    p.write_bytes(idx_labels([1, 2]))
    with pytest.raises(FormatError, match="magic"):
        load_idx_images(p)
    p.write_bytes(b"\x00\x00")
    with pytest.raises(FormatError):
        load_idx_labels(p)


def test_text_labels_and_data_sniffing(tmp_path):
    (tmp_path / "y.txt").write_text("0\n1\n1\n")
    np.testing.assert_array_equal(load_labels(tmp_path / "y.txt"), [0, 1, 1])
    (tmp_path / "img").write_bytes(idx_images([255], 1, 1, 1))
    np.testing.assert_array_equal(load_data(tmp_path / "img"), [[1.0]])
    save_matrix(np.eye(2), tmp_path / "e.txt", "mm")
    np.testing.assert_array_equal(load_data(tmp_path / "e.txt"), np.eye(2))


def test_model_round_trip_bit_exact(tmp_path, rng):
    model = random_model(rng, [7, 5, 3], 6, Nonlinearity("power", 0.3))
    model.seed = 17
    save_model(model, tmp_path / "m")
    loaded = load_model(tmp_path / "m")
    assert loaded.nonlinearity == model.nonlinearity
    assert loaded.seed == 17
    for a, b in zip(model.layers, loaded.layers):
        for key in ("w", "h", "m"):
            np.testing.assert_array_equal(getattr(a, key), getattr(b, key))
    np.testing.assert_array_equal(reconstruct_x(loaded), reconstruct_x(model))
    manifest = json.loads((tmp_path / "m" / "manifest.json").read_text())
    assert manifest["layers"][1]["W"] == "W_2.mtx"


def test_model_missing_payload(tmp_path, rng):
    save_model(random_model(rng, [4, 2], 3), tmp_path)
    (tmp_path / "H_1.mtx").unlink()
    with pytest.raises(FileNotFoundError, match="H_1.mtx"):
        load_model(tmp_path)


def test_model_tampered_negative(tmp_path, rng):
    save_model(random_model(rng, [4, 2], 3), tmp_path)
    p = tmp_path / "W_1.mtx"
    lines = p.read_text().splitlines()
    lines[3] = "-0.5"
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(NonNegativityError):
        load_model(tmp_path)


def test_model_version_and_chain(tmp_path, rng):
    save_model(random_model(rng, [4, 3, 2], 3), tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    manifest["version"] = "hmnmf-model/0"
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(FormatError, match="version"):
        load_model(tmp_path)
    manifest["version"] = "hmnmf-model/1"
    manifest["layers"][1]["W"] = "W_1.mtx"
    manifest["layers"][1]["m"] = 4
    (tmp_path / "manifest.json").write_text(json.dumps(manifest))
    with pytest.raises(ShapeError):
        load_model(tmp_path)
