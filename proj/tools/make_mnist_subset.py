#!/usr/bin/env python3
"""Write the 5000-digit MNIST sample shipped with mlxtend as IDX files.

Every fifth digit goes to the test split, the rest to the training split:
    data/mnist5k/train-images-idx3-ubyte   (4000 x 28 x 28)
    data/mnist5k/train-labels-idx1-ubyte
    data/mnist5k/test-images-idx3-ubyte    (1000 x 28 x 28)
    data/mnist5k/test-labels-idx1-ubyte

Usage: make_mnist_subset.py [--wheel PATH] [--out DIR]
Without --wheel, the mlxtend wheel is fetched with `pip download`.
"""
import argparse
import glob
import gzip
import os
import struct
import subprocess
import tempfile
import zipfile

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def fetch_wheel(workdir):
    subprocess.run(["python3", "-m", "pip", "download", "--no-deps", "-d", workdir,
                    "mlxtend"], check=True)
    return sorted(glob.glob(os.path.join(workdir, "mlxtend-*.whl")))[-1]


def write_idx(prefix, rows):
    images = bytearray(struct.pack(">IIII", 0x00000803, len(rows), 28, 28))
    labels = bytearray(struct.pack(">II", 0x00000801, len(rows)))
    for label, pixels in rows:
        images.extend(pixels)
        labels.append(label)
    with open(prefix + "-images-idx3-ubyte", "wb") as f:
        f.write(images)
    with open(prefix + "-labels-idx1-ubyte", "wb") as f:
        f.write(labels)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--wheel")
    parser.add_argument("--out", default=os.path.join(
        os.path.dirname(os.path.abspath(__file__)), "..", "data", "mnist5k"))
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(tmp)
        text = gzip.decompress(zipfile.ZipFile(wheel).read(MEMBER)).decode()

    train, test = [], []
    for i, line in enumerate(text.splitlines()):
        fields = [int(float(v)) for v in line.split(",")]
        row = (fields[-1], bytes(fields[:-1]))
        (test if i % 5 == 4 else train).append(row)

    os.makedirs(args.out, exist_ok=True)
    write_idx(os.path.join(args.out, "train"), train)
    write_idx(os.path.join(args.out, "test"), test)
    print(f"wrote {len(train)} training and {len(test)} test digits to {args.out}")


if __name__ == "__main__":
    main()
