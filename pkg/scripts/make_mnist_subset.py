"""Write the stratified 2000-image MNIST subset used by the acceptance tests.

Source: the 5000-sample MNIST CSV bundled with mlxtend
(``mlxtend/data/data/mnist_5k.csv.gz``; 784 pixel columns then the label).

    python scripts/make_mnist_subset.py mnist_5k.csv.gz tests/data/mnist2k
"""
import argparse
import gzip
import struct
from pathlib import Path

import numpy as np


def write_idx(path, array, magic):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in array.shape)
    # mtime=0 keeps the gzip bytes reproducible
    with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as fh:
        fh.write(header + array.astype(np.uint8).tobytes())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("csv")
    ap.add_argument("out")
    ap.add_argument("--per-class", type=int, default=200)
    ap.add_argument("--test-per-class", type=int, default=50)
    ap.add_argument("--seed", type=int, default=2013)
    args = ap.parse_args()

    data = np.loadtxt(args.csv, delimiter=",", dtype=np.int64)
    pixels, labels = data[:, :-1], data[:, -1]
    rng = np.random.default_rng(args.seed)
    train_idx, test_idx = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))[: args.per_class]
        test_idx.extend(idx[: args.test_per_class])
        train_idx.extend(idx[args.test_per_class :])
    train_idx = rng.permutation(train_idx)
    test_idx = rng.permutation(test_idx)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for prefix, idx in (("train", train_idx), ("t10k", test_idx)):
        write_idx(out / f"{prefix}-images-idx3-ubyte.gz", pixels[idx].reshape(-1, 28, 28), 0x803)
        write_idx(out / f"{prefix}-labels-idx1-ubyte.gz", labels[idx], 0x801)
        print(prefix, len(idx))


if __name__ == "__main__":
    main()
