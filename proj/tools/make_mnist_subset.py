#!/usr/bin/env python3
# Copyright 2026 The labelfill Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Write a class-balanced desk-scale MNIST subset as uncompressed IDX files.

The source is the 5000-digit MNIST sample that ships inside the mlxtend
wheel (500 digits per class, grouped by class). Digits are interleaved by
class so that every prefix of the output is close to balanced; the first
--train digits go to the train files and the next --test digits to the test
files.

    pip download mlxtend --no-deps -d /tmp/mlx
    python3 tools/make_mnist_subset.py --wheel /tmp/mlx/mlxtend-*.whl --out data/mnist-subset
"""
import argparse
import gzip
import io
import pathlib
import struct
import zipfile


def load_rows(wheel):
    with zipfile.ZipFile(wheel) as z:
        raw = z.read("mlxtend/data/data/mnist_5k.csv.gz")
    rows = []
    for line in gzip.GzipFile(fileobj=io.BytesIO(raw)).read().decode().splitlines():
        vals = [int(float(v)) for v in line.split(",")]
        rows.append((vals[:-1], vals[-1]))
    return rows


def write_images(path, images):
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, len(images), 28, 28))
        for img in images:
            f.write(bytes(img))


def write_labels(path, labels):
    with open(path, "wb") as f:
        f.write(struct.pack(">II", 0x00000801, len(labels)))
        f.write(bytes(labels))


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--wheel", required=True)
    ap.add_argument("--out", required=True)
    ap.add_argument("--train", type=int, default=1000)
    ap.add_argument("--test", type=int, default=200)
    args = ap.parse_args()

    rows = load_rows(args.wheel)
    by_class = {c: [r for r in rows if r[1] == c] for c in range(10)}
    per_class = min(len(v) for v in by_class.values())
    order = [by_class[c][j] for j in range(per_class) for c in range(10)]
    if args.train + args.test > len(order):
        raise SystemExit("requested more digits than available")

    out = pathlib.Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    train = order[: args.train]
    test = order[args.train : args.train + args.test]
    write_images(out / "train-images-idx3-ubyte", [r[0] for r in train])
    write_labels(out / "train-labels-idx1-ubyte", [r[1] for r in train])
    write_images(out / "t10k-images-idx3-ubyte", [r[0] for r in test])
    write_labels(out / "t10k-labels-idx1-ubyte", [r[1] for r in test])


if __name__ == "__main__":
    main()
