#!/usr/bin/env python3
"""Provision the IDX dataset used by the acceptance suite.

Preference order:
  1. an existing directory of MNIST digit JSONs (--mnist-src or a local
     node_modules/mnist installation),
  2. `npm install mnist` into a scratch directory (works against npm mirrors;
     the package bundles 10,000 real MNIST samples),
  3. scikit-learn's offline 8x8 digits, upscaled (clearly reported, since the
     subset-ordering experiment is only meaningful on real MNIST).

Writes a `SOURCE` marker file ("mnist" or "digits") next to the IDX output so
consumers can tell which dataset they got.
"""

import argparse
import subprocess
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent


def digits_json_dir(candidate: Path) -> Path | None:
    d = candidate / "node_modules" / "mnist" / "src" / "digits"
    return d if (d / "0.json").exists() else None


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", required=True)
    ap.add_argument("--mnist-src", default="",
                    help="directory holding MNIST 0.json..9.json")
    ap.add_argument("--scratch", default="",
                    help="where npm may install (default: <out>/.npm-scratch)")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scratch = Path(args.scratch) if args.scratch else out / ".npm-scratch"

    src = None
    if args.mnist_src and (Path(args.mnist_src) / "0.json").exists():
        src = Path(args.mnist_src)
    if src is None:
        for base in (scratch, Path.cwd(), HERE.parent):
            found = digits_json_dir(base)
            if found:
                src = found
                break
    if src is None:
        scratch.mkdir(parents=True, exist_ok=True)
        try:
            subprocess.run(
                ["npm", "install", "--no-audit", "--no-fund", "mnist"],
                cwd=scratch, check=True, capture_output=True, timeout=300)
            src = digits_json_dir(scratch)
        except (OSError, subprocess.SubprocessError):
            src = None

    if src is not None:
        rc = subprocess.run(
            [sys.executable, str(HERE / "make_mnist_idx.py"),
             "--src", str(src), "--out", str(out)]).returncode
        if rc == 0:
            (out / "SOURCE").write_text("mnist\n")
            return 0

    print("MNIST unavailable; falling back to the upscaled digits surrogate",
          file=sys.stderr)
    rc = subprocess.run(
        [sys.executable, str(HERE / "make_digits_idx.py"),
         "--out", str(out)]).returncode
    if rc == 0:
        (out / "SOURCE").write_text("digits\n")
    return rc


if __name__ == "__main__":
    sys.exit(main())
