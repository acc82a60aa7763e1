#!/usr/bin/env python3
"""Convert the npm `mnist` package's bundled digit JSONs to IDX files.

The package (https://www.npmjs.com/package/mnist) ships 1,000 grayscale
28x28 MNIST samples per digit class as flat [0,1] arrays, which makes a real
MNIST subset available offline wherever an npm mirror works. Output is the
four standard files with a seeded shuffle and a held-out test split.
"""

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--src", required=True,
                    help="directory holding 0.json .. 9.json")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--test-count", type=int, default=3010)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    images, labels = [], []
    for digit in range(10):
        path = Path(args.src) / f"{digit}.json"
        flat = np.asarray(json.loads(path.read_text())["data"], dtype=np.float64)
        per_class = flat.reshape(-1, 784)
        images.append(per_class)
        labels.append(np.full(len(per_class), digit, dtype=np.uint8))
    x = np.concatenate(images)
    y = np.concatenate(labels)

    rng = np.random.default_rng(args.seed)
    order = rng.permutation(len(y))
    x, y = x[order], y[order]
    pixels = np.clip(np.round(x * 255), 0, 255).astype(np.uint8).reshape(-1, 28, 28)

    n_test = args.test_count
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    def write_images(path: Path, a: np.ndarray) -> None:
        with open(path, "wb") as f:
            f.write(struct.pack(">IIII", 2051, len(a), 28, 28))
            f.write(a.tobytes())

    def write_labels(path: Path, a: np.ndarray) -> None:
        with open(path, "wb") as f:
            f.write(struct.pack(">II", 2049, len(a)))
            f.write(a.tobytes())

    write_images(out / "train-images-idx3-ubyte", pixels[n_test:])
    write_labels(out / "train-labels-idx1-ubyte", y[n_test:])
    write_images(out / "t10k-images-idx3-ubyte", pixels[:n_test])
    write_labels(out / "t10k-labels-idx1-ubyte", y[:n_test])
    print(f"wrote {len(y) - n_test} train / {n_test} test MNIST samples to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
