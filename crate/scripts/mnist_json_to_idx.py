#!/usr/bin/env python3
"""Convert the per-digit JSON files of the `mnist` npm package into gzipped
IDX files.

Usage: mnist_json_to_idx.py DIGITS_DIR OUT_DIR

DIGITS_DIR holds 0.json .. 9.json, each {"data": [...]} with 784 floats per
image in [0, 1]. Pixels are restored as round(v * 255). Images are written
grouped by class; the bandit environment shuffles them with its own seed.
"""

import gzip
import json
import struct
import sys
from pathlib import Path

SIDE = 28


def main() -> None:
    digits_dir, out_dir = Path(sys.argv[1]), Path(sys.argv[2])
    out_dir.mkdir(parents=True, exist_ok=True)
    pixels = bytearray()
    labels = bytearray()
    for digit in range(10):
        data = json.loads((digits_dir / f"{digit}.json").read_text())["data"]
        if len(data) % (SIDE * SIDE):
            sys.exit(f"{digit}.json: {len(data)} values is not a whole number of images")
        pixels.extend(min(255, max(0, round(v * 255))) for v in data)
        labels.extend([digit] * (len(data) // (SIDE * SIDE)))
    count = len(labels)
    images = struct.pack(">IIII", 0x803, count, SIDE, SIDE) + pixels
    (out_dir / "subset-images-idx3-ubyte.gz").write_bytes(gzip.compress(images, mtime=0))
    header = struct.pack(">II", 0x801, count)
    (out_dir / "subset-labels-idx1-ubyte.gz").write_bytes(gzip.compress(header + labels, mtime=0))
    print(f"wrote {count} images to {out_dir}")


if __name__ == "__main__":
    main()
