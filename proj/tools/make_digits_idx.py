#!/usr/bin/env python3
"""Write a small handwritten-digit dataset in IDX format.

Uses scikit-learn's bundled 8x8 digits, upscaled to 28x28 with nearest-neighbor
repetition, so the loaders and the small-subset experiments can run fully
offline. Produces the four standard files (train/t10k images/labels) under the
output directory.
"""

import argparse
import struct
import sys
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits


def write_idx_images(path: Path, images: np.ndarray) -> None:
    n, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 2051, n, rows, cols))
        f.write(images.astype(np.uint8).tobytes())


def write_idx_labels(path: Path, labels: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 2049, len(labels)))
        f.write(labels.astype(np.uint8).tobytes())


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--test-count", type=int, default=297)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", type=float, default=0.0,
                    help="stddev of additive pixel noise (uint8 scale)")
    ap.add_argument("--shift", type=int, default=0,
                    help="max per-sample random translation in pixels")
    args = ap.parse_args()

    digits = load_digits()
    # 8x8 with values 0..16 -> 28x28 uint8: repeat 4x (32x32), center-crop to 28
    imgs = (digits.images * (255.0 / 16.0)).round().astype(np.uint8)
    big = imgs.repeat(4, axis=1).repeat(4, axis=2)
    big = big[:, 2:30, 2:30]
    labels = digits.target.astype(np.uint8)

    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(labels))
    big, labels = big[order], labels[order]
    if args.shift > 0:
        shifted = np.zeros_like(big)
        for i in range(len(big)):
            dy, dx = rng.integers(-args.shift, args.shift + 1, size=2)
            rolled = np.roll(np.roll(big[i], dy, axis=0), dx, axis=1)
            if dy > 0:
                rolled[:dy, :] = 0
            elif dy < 0:
                rolled[dy:, :] = 0
            if dx > 0:
                rolled[:, :dx] = 0
            elif dx < 0:
                rolled[:, dx:] = 0
            shifted[i] = rolled
        big = shifted
    if args.noise > 0:
        noisy = big.astype(np.float64) + rng.normal(0.0, args.noise, big.shape)
        big = np.clip(noisy, 0, 255).round().astype(np.uint8)

    n_test = args.test_count
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx_images(out / "train-images-idx3-ubyte", big[n_test:])
    write_idx_labels(out / "train-labels-idx1-ubyte", labels[n_test:])
    write_idx_images(out / "t10k-images-idx3-ubyte", big[:n_test])
    write_idx_labels(out / "t10k-labels-idx1-ubyte", labels[:n_test])
    print(f"wrote {len(labels) - n_test} train / {n_test} test samples to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
