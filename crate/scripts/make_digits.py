"""Convert the digit samples bundled with the `mnist` npm package into IDX files.

Usage: npm pack mnist && tar xzf mnist-*.tgz
       python3 scripts/make_digits.py package/src/digits crates/core/tests/data/digits
"""
import gzip
import json
import os
import struct
import sys

import numpy as np


def write_idx(path, magic, array):
    header = struct.pack(">I", magic) + b"".join(struct.pack(">I", d) for d in array.shape)
    with gzip.GzipFile(path, "wb", mtime=0) as f:
        f.write(header + array.astype(np.uint8).tobytes())


def main(src, dst):
    train_x, train_y, test_x, test_y = [], [], [], []
    for digit in range(10):
        with open(os.path.join(src, f"{digit}.json")) as f:
            data = np.array(json.load(f)["data"], dtype=np.float64).reshape(-1, 28, 28)
        pixels = np.clip(np.rint(data * 255.0), 0, 255).astype(np.uint8)
        split = int(round(0.8 * len(pixels)))
        train_x.append(pixels[:split])
        train_y += [digit] * split
        test_x.append(pixels[split:])
        test_y += [digit] * (len(pixels) - split)

    rng = np.random.default_rng(20201014)
    for name, xs, ys in (("train", train_x, train_y), ("t10k", test_x, test_y)):
        x = np.concatenate(xs)
        y = np.array(ys, dtype=np.uint8)
        perm = rng.permutation(len(y))
        write_idx(os.path.join(dst, f"{name}-images-idx3-ubyte.gz"), 0x803, x[perm])
        write_idx(os.path.join(dst, f"{name}-labels-idx1-ubyte.gz"), 0x801, y[perm])
        print(name, len(y))


if __name__ == "__main__":
    main(sys.argv[1], sys.argv[2])
