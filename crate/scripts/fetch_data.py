#!/usr/bin/env python3
"""Fetches and canonicalizes the experiment datasets.

Writes into the data directory (default ./data, override with --data-dir or
the NMD_DATA_DIR environment variable):

  mnist.csv     500 x 784   50 randomly selected images per digit (seed 0),
                            one flattened 28x28 image per row, raw grayscale
                            values in [0, 255]
  cbcl.csv      2429 x 361  CBCL face-training images, one flattened 19x19
                            image per row, raw grayscale values in [0, 255]
  mit_logo.csv  250 x 482   the classic low-rank logo benchmark image,
                            rescaled to [0.5, 1.0]; converted from a local
                            copy (data/mit_logo_source.pgm or .csv) because
                            no stable public mirror exists -- the image ships
                            with several matrix-completion toolboxes

The solver library never performs network access; all downloads happen here.
If a download fails (mirrors for these classic datasets come and go), place
the archive or the finished CSV into the data directory by hand; this script
skips anything that already exists.
"""

import argparse
import csv
import gzip
import io
import os
import random
import struct
import sys
import tarfile
import urllib.request

MNIST_MIRRORS = [
    "https://storage.googleapis.com/cvdf-datasets/mnist/",
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
]
MNIST_IMAGES = "train-images-idx3-ubyte.gz"
MNIST_LABELS = "train-labels-idx1-ubyte.gz"

CBCL_MIRRORS = [
    "http://www.ai.mit.edu/courses/6.899/lectures/faces.tar.gz",
    "http://cbcl.mit.edu/projects/cbcl/software-datasets/faces.tar.gz",
]


def download(url, timeout=60):
    print(f"  downloading {url}")
    with urllib.request.urlopen(url, timeout=timeout) as response:
        return response.read()


def download_any(candidates):
    last = None
    for url in candidates:
        try:
            return download(url)
        except Exception as exc:  # noqa: BLE001 - report and try the next mirror
            print(f"  failed: {exc}")
            last = exc
    raise RuntimeError(f"all mirrors failed (last error: {last})")


def write_csv(path, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerows(rows)
    print(f"  wrote {path} ({len(rows)} x {len(rows[0])})")


def parse_idx_images(blob):
    magic, count, rows, cols = struct.unpack(">IIII", blob[:16])
    assert magic == 2051, f"bad IDX image magic {magic}"
    pixels = memoryview(blob)[16:]
    return count, rows * cols, pixels


def parse_idx_labels(blob):
    magic, count = struct.unpack(">II", blob[:8])
    assert magic == 2049, f"bad IDX label magic {magic}"
    return list(blob[8 : 8 + count])


def fetch_mnist(out_path):
    images_gz = download_any([m + MNIST_IMAGES for m in MNIST_MIRRORS])
    labels_gz = download_any([m + MNIST_LABELS for m in MNIST_MIRRORS])
    count, dim, pixels = parse_idx_images(gzip.decompress(images_gz))
    labels = parse_idx_labels(gzip.decompress(labels_gz))
    assert dim == 784 and count == len(labels)

    by_digit = {d: [] for d in range(10)}
    for idx, label in enumerate(labels):
        by_digit[label].append(idx)
    rng = random.Random(0)  # documented selection seed
    selected = []
    for d in range(10):
        pool = by_digit[d][:]
        rng.shuffle(pool)
        selected.extend(sorted(pool[:50]))

    rows = []
    for idx in selected:
        start = idx * dim
        rows.append(list(pixels[start : start + dim]))
    write_csv(out_path, rows)


def fetch_cbcl(out_path, data_dir):
    local = os.path.join(data_dir, "faces.tar.gz")
    if os.path.exists(local):
        blob = open(local, "rb").read()
    else:
        blob = download_any(CBCL_MIRRORS)

    faces = []
    with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar:
        names = sorted(
            m.name
            for m in tar.getmembers()
            if m.isfile() and "face" in m.name.lower() and m.name.endswith(".pgm")
            and "non" not in m.name.lower() and "test" not in m.name.lower()
        )
        with tarfile.open(fileobj=io.BytesIO(blob), mode="r:gz") as tar2:
            for name in names:
                data = tar2.extractfile(name).read()
                faces.append(parse_pgm(data))
    if len(faces) != 2429:
        print(f"  warning: expected 2429 training faces, found {len(faces)}")
    write_csv(out_path, faces)


def parse_pgm(data):
    # P5 or P2, 19x19, maxval <= 255
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    magic, width, height, _maxval = tokens[0], int(tokens[1]), int(tokens[2]), int(tokens[3])
    if magic == b"P5":
        payload = data[pos + 1 : pos + 1 + width * height]
        return list(payload)
    if magic == b"P2":
        values = data[pos:].split()
        return [int(v) for v in values[: width * height]]
    raise ValueError(f"unsupported PGM magic {magic!r}")


def convert_logo(out_path, data_dir):
    """Converts a local copy of the logo benchmark image to CSV, rescaling
    grayscale values affinely onto [0.5, 1.0]."""
    source = None
    for candidate in ("mit_logo_source.pgm", "mit_logo_source.csv"):
        path = os.path.join(data_dir, candidate)
        if os.path.exists(path):
            source = path
            break
    if source is None:
        raise RuntimeError(
            "no local source image found; place the 250x482 grayscale logo "
            f"benchmark as {data_dir}/mit_logo_source.pgm (or .csv) -- it is "
            "distributed with several public matrix-completion toolboxes"
        )
    if source.endswith(".pgm"):
        flat = parse_pgm(open(source, "rb").read())
        # recover the shape from the header a second time
        tokens = open(source, "rb").read().split(None, 4)
        width, height = int(tokens[1]), int(tokens[2])
        img = [flat[r * width : (r + 1) * width] for r in range(height)]
    else:
        img = [[float(v) for v in line.split(",")] for line in open(source)]
    lo = min(min(r) for r in img)
    hi = max(max(r) for r in img)
    if hi <= lo:
        raise RuntimeError("source image is constant")
    scaled = [[0.5 + 0.5 * (v - lo) / (hi - lo) for v in row] for row in img]
    write_csv(out_path, scaled)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--data-dir",
        default=os.environ.get("NMD_DATA_DIR", "data"),
        help="output directory (default: $NMD_DATA_DIR or ./data)",
    )
    parser.add_argument(
        "--datasets",
        default="mnist,cbcl,mit",
        help="comma-separated subset of mnist,cbcl,mit",
    )
    args = parser.parse_args()
    os.makedirs(args.data_dir, exist_ok=True)
    wanted = set(args.datasets.split(","))

    jobs = {
        "mnist": ("mnist.csv", lambda p: fetch_mnist(p)),
        "cbcl": ("cbcl.csv", lambda p: fetch_cbcl(p, args.data_dir)),
        "mit": ("mit_logo.csv", lambda p: convert_logo(p, args.data_dir)),
    }
    failures = 0
    for key, (filename, job) in jobs.items():
        if key not in wanted:
            continue
        path = os.path.join(args.data_dir, filename)
        if os.path.exists(path):
            print(f"{filename}: already present, skipping")
            continue
        print(f"{filename}:")
        try:
            job(path)
        except Exception as exc:  # noqa: BLE001
            failures += 1
            print(f"  ERROR: {exc}", file=sys.stderr)
            print(
                f"  place {filename} into {args.data_dir} manually to proceed",
                file=sys.stderr,
            )
    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()
