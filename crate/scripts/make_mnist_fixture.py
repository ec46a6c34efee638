#!/usr/bin/env python3
"""Build the small raw-IDX MNIST subset used by the test suites.

Source: the `mnist` npm package (10000 MNIST digits stored as JSON grayscale
arrays). Usage:

    npm pack mnist && tar xzf mnist-*.tgz
    python3 scripts/make_mnist_fixture.py package/src/digits crates/core/tests/fixtures/mnist
"""
import json
import struct
import sys
from pathlib import Path

TRAIN_PER_CLASS = 200
TEST_PER_CLASS = 50


def write_idx(out: Path, prefix: str, glyphs):
    images = out / f"{prefix}-images-idx3-ubyte"
    labels = out / f"{prefix}-labels-idx1-ubyte"
    with open(images, "wb") as f:
        f.write(struct.pack(">IIII", 0x803, len(glyphs), 28, 28))
        for _, pixels in glyphs:
            f.write(bytes(min(255, max(0, round(v * 255))) for v in pixels))
    with open(labels, "wb") as f:
        f.write(struct.pack(">II", 0x801, len(glyphs)))
        f.write(bytes(label for label, _ in glyphs))


def main():
    src, out = Path(sys.argv[1]), Path(sys.argv[2])
    out.mkdir(parents=True, exist_ok=True)
    per_class = []
    for digit in range(10):
        data = json.load(open(src / f"{digit}.json"))["data"]
        per_class.append([data[i * 784:(i + 1) * 784] for i in range(len(data) // 784)])
    train, test = [], []
    # interleave classes so that any prefix of the pool is class balanced
    for i in range(TRAIN_PER_CLASS):
        train.extend((d, per_class[d][i]) for d in range(10))
    for i in range(TRAIN_PER_CLASS, TRAIN_PER_CLASS + TEST_PER_CLASS):
        test.extend((d, per_class[d][i]) for d in range(10))
    write_idx(out, "train", train)
    write_idx(out, "t10k", test)


if __name__ == "__main__":
    main()
