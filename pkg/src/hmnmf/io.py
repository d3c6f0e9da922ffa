"""Reading and writing matrices, MNIST IDX files and trained models.

Matrices are written with 17 significant digits so that a save/load
round trip reproduces every float64 exactly. A model directory holds
``manifest.json`` plus one MatrixMarket array file per W, H and M.
"""
import csv
import gzip
import json
import struct
from pathlib import Path

import numpy as np

from .hierarchy import HierarchicalModel, Layer
from .matrix import NonNegativityError, ShapeError, as_nonneg
from .nonlinearity import Nonlinearity

MODEL_VERSION = "hmnmf-model/1"
MM_HEADER = "%%MatrixMarket matrix array real general"
FORMATS = ("csv", "mm")
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class FormatError(ValueError):
    """A file could not be parsed or has an invalid header."""


def _fmt(v):
    return "%.17g" % v


def _format_for(path, fmt):
    if fmt is not None:
        return "mm" if fmt in ("mm", "matrixmarket_array", "mtx") else fmt
    return "mm" if Path(path).suffix.lower() == ".mtx" else "csv"


def save_matrix(m, path, fmt=None):
    """Write ``m`` as CSV (one row per line) or MatrixMarket array."""
    if not str(path):
        raise OSError("empty output path")
    m = np.asarray(m, dtype=np.float64)
    fmt = _format_for(path, fmt)
    if fmt == "csv":
        text = "".join(",".join(_fmt(v) for v in row) + "\n" for row in m)
    elif fmt == "mm":
        values = "".join(_fmt(v) + "\n" for v in m.ravel(order="F"))
        text = f"{MM_HEADER}\n{m.shape[0]} {m.shape[1]}\n{values}"
    else:
        raise ValueError(f"unknown matrix format {fmt!r}; expected one of {FORMATS}")
    Path(path).write_text(text)


def _parse_float(token, where):
    try:
        return float(token)
    except ValueError:
        raise FormatError(f"{where}: cannot parse {token!r} as a number") from None


def _load_csv(path):
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if rows and len(row) != len(rows[0]):
                raise FormatError(
                    f"{path}: line {lineno}: expected {len(rows[0])} fields, found {len(row)}"
                )
            rows.append([_parse_float(c, f"{path}:{lineno}") for c in row])
    if not rows:
        raise FormatError(f"{path}: no data")
    return np.array(rows, dtype=np.float64)


def _load_mm(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise FormatError(f"{path}: missing %%MatrixMarket header")
    banner = lines[0].lower().split()
    if banner[1:4] != ["matrix", "array", "real"] or (len(banner) > 4 and banner[4] != "general"):
        raise FormatError(f"{path}: only 'matrix array real general' is supported, got {lines[0]!r}")
    body = [(i, ln) for i, ln in enumerate(lines[1:], start=2) if ln.strip() and not ln.startswith("%")]
    if not body:
        raise FormatError(f"{path}: missing size line")
    lineno, size = body[0]
    try:
        m, n = (int(t) for t in size.split())
    except ValueError:
        raise FormatError(f"{path}:{lineno}: bad size line {size!r}") from None
    values = [_parse_float(ln.strip(), f"{path}:{i}") for i, ln in body[1:]]
    if len(values) != m * n:
        raise FormatError(f"{path}: expected {m * n} values for a {m}x{n} matrix, found {len(values)}")
    return np.array(values, dtype=np.float64).reshape((m, n), order="F")


def load_matrix(path, fmt=None):
    """Load a non-negative matrix; negative, NaN or infinite entries are rejected."""
    fmt = _format_for(path, fmt)
    if fmt == "csv":
        a = _load_csv(path)
    elif fmt == "mm":
        a = _load_mm(path)
    else:
        raise ValueError(f"unknown matrix format {fmt!r}; expected one of {FORMATS}")
    try:
        return as_nonneg(a, str(path))
    except NonNegativityError as exc:
        raise NonNegativityError(f"{exc} (rows/cols are 0-based)") from None


def _read_maybe_gzip(path):
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _idx_header(data, path, magic, ndim):
    need = 4 + 4 * ndim
    if len(data) < 4:
        raise FormatError(f"{path}: truncated IDX header")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise FormatError(f"{path}: bad IDX magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(data) < need:
        raise FormatError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:need])
    count = int(np.prod(dims))
    if len(data) - need != count:
        raise FormatError(
            f"{path}: truncated or oversized payload: header promises {count} bytes, found {len(data) - need}"
        )
    return dims, np.frombuffer(data, dtype=np.uint8, offset=need)


def load_idx_images(path, raw=False):
    """IDX image file as a (pixels x images) matrix, scaled to [0, 1]
    unless ``raw``. Gzip-compressed files are accepted."""
    (count, rows, cols), payload = _idx_header(_read_maybe_gzip(path), path, IDX_IMAGES_MAGIC, 3)
    images = payload.reshape(count, rows * cols).T.astype(np.float64)
    return np.ascontiguousarray(images if raw else images / 255.0)


def load_idx_labels(path):
    _, payload = _idx_header(_read_maybe_gzip(path), path, IDX_LABELS_MAGIC, 1)
    return payload.astype(np.int64)


def load_labels(path):
    """Labels from an IDX label file or a text file with one integer per line."""
    data = _read_maybe_gzip(path)
    if data[:4] == struct.pack(">I", IDX_LABELS_MAGIC):
        return load_idx_labels(path)
    return np.array([int(t) for t in data.decode().split()], dtype=np.int64)


def load_data(path, fmt=None, raw=False):
    """Load a data matrix by content: IDX images, MatrixMarket or CSV."""
    head = _read_maybe_gzip(path)[:4]
    if head == struct.pack(">I", IDX_IMAGES_MAGIC):
        return load_idx_images(path, raw=raw)
    if fmt is None and head.startswith(b"%%"):
        fmt = "mm"
    return load_matrix(path, fmt)


def save_model(model, directory):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    layers = []
    for i, layer in enumerate(model.layers, start=1):
        names = {key: f"{key.upper()}_{i}.mtx" for key in ("w", "h", "m")}
        for key, name in names.items():
            save_matrix(getattr(layer, key), directory / name, "mm")
        layers.append(
            {
                "m": int(layer.w.shape[0]),
                "k": int(layer.w.shape[1]),
                "theta": float(layer.theta),
                "W": names["w"],
                "H": names["h"],
                "M": names["m"],
            }
        )
    manifest = {
        "version": MODEL_VERSION,
        "n_layers": model.n_layers,
        "n_samples": model.n_samples,
        "nonlinearity": {"name": model.nonlinearity.kind, "param": model.nonlinearity.param},
        "seed": int(model.seed),
        "layers": layers,
    }
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_model(directory):
    """Load and validate a model written by :func:`save_model`."""
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    if manifest.get("version") != MODEL_VERSION:
        raise FormatError(f"{directory}: unsupported model version {manifest.get('version')!r}")
    if manifest["n_layers"] != len(manifest["layers"]):
        raise FormatError(f"{directory}: n_layers does not match the layer list")
    layers = []
    for entry in manifest["layers"]:
        mats = {}
        for key in ("W", "H", "M"):
            path = directory / entry[key]
            if not path.is_file():
                raise FileNotFoundError(f"model payload missing: {path}")
            mats[key] = load_matrix(path, "mm")
        if mats["W"].shape != (entry["m"], entry["k"]):
            raise ShapeError(f"{entry['W']}: shape {mats['W'].shape} disagrees with manifest")
        layers.append(Layer(w=mats["W"], h=mats["H"], m=mats["M"], theta=entry["theta"]))
    nl = manifest["nonlinearity"]
    f = Nonlinearity(nl["name"], nl["param"]) if nl["name"] == "power" else Nonlinearity(nl["name"])
    model = HierarchicalModel(layers=layers, nonlinearity=f, seed=manifest["seed"])
    return model.validate()
