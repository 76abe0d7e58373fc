#!/usr/bin/env python3
"""Regenerate the bundled handwritten-digits IDX files under data/digits/.

Converts the scikit-learn digits dataset (1797 8x8 grayscale images,
10 classes) into standard IDX files, split per class 80/20 into
train/test. Pixel intensities 0..16 are rescaled to bytes 0..255.

The generated files are committed; this script only needs to be re-run
if the split or scaling rules change.
"""

import os
import struct

import numpy as np
from sklearn.datasets import load_digits

OUT = os.path.join(os.path.dirname(__file__), "..", "data", "digits")


def write_images(path, images):
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main():
    ds = load_digits()
    images = np.round(ds.images * (255.0 / 16.0)).astype(np.uint8)
    labels = ds.target.astype(np.uint8)

    train_idx, test_idx = [], []
    for c in range(10):
        idx = np.flatnonzero(labels == c)
        cut = int(np.ceil(0.8 * len(idx)))
        train_idx.extend(idx[:cut])
        test_idx.extend(idx[cut:])
    train_idx = np.sort(np.array(train_idx))
    test_idx = np.sort(np.array(test_idx))

    os.makedirs(OUT, exist_ok=True)
    write_images(os.path.join(OUT, "train-images-idx3-ubyte"), images[train_idx])
    write_labels(os.path.join(OUT, "train-labels-idx1-ubyte"), labels[train_idx])
    write_images(os.path.join(OUT, "test-images-idx3-ubyte"), images[test_idx])
    write_labels(os.path.join(OUT, "test-labels-idx1-ubyte"), labels[test_idx])
    print(f"train: {len(train_idx)}  test: {len(test_idx)}")


if __name__ == "__main__":
    main()
