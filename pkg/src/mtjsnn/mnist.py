"""MNIST ingestion: IDX files (optionally gzipped) and a compact 8-bit raw subset format."""
import gzip
import struct
from importlib import resources
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
RAW_MAGIC = b"MTJR"


def _open(path, mode):
    path = Path(path)
    return gzip.open(path, mode) if path.suffix == ".gz" else open(path, mode)


def read_idx(path):
    """Images as (n, rows, cols) uint8 or labels as (n,) uint8."""
    with _open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 8:
        raise ValueError(f"{path}: truncated IDX header")
    magic, n = struct.unpack(">ii", buf[:8])
    if magic == IMAGE_MAGIC:
        rows, cols = struct.unpack(">ii", buf[8:16])
        shape, off = (n, rows, cols), 16
    elif magic == LABEL_MAGIC:
        shape, off = (n,), 8
    else:
        raise ValueError(f"{path}: bad IDX magic {magic}")
    count = int(np.prod(shape))
    if len(buf) - off < count:
        raise ValueError(f"{path}: truncated IDX payload")
    return np.frombuffer(buf, dtype=np.uint8, count=count, offset=off).reshape(shape)


def write_idx(path, array):
    a = np.ascontiguousarray(array, dtype=np.uint8)
    if a.ndim == 3:
        head = struct.pack(">iiii", IMAGE_MAGIC, *a.shape)
    elif a.ndim == 1:
        head = struct.pack(">ii", LABEL_MAGIC, a.shape[0])
    else:
        raise ValueError("IDX writer handles (n, rows, cols) images or (n,) labels")
    with _open(path, "wb") as fh:
        fh.write(head + a.tobytes())


def write_raw8(path, images, labels):
    """``MTJR`` | uint32 n, rows, cols (little endian) | pixels | labels."""
    images = np.ascontiguousarray(images, dtype=np.uint8)
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if images.ndim != 3 or labels.shape != (images.shape[0],):
        raise ValueError("need images (n, rows, cols) and labels (n,)")
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC + struct.pack("<III", *images.shape))
        fh.write(images.tobytes())
        fh.write(labels.tobytes())


def read_raw8(path):
    buf = Path(path).read_bytes()
    if buf[:4] != RAW_MAGIC:
        raise ValueError(f"{path}: not an MTJR raw file")
    n, rows, cols = struct.unpack("<III", buf[4:16])
    npx = n * rows * cols
    if len(buf) != 16 + npx + n:
        raise ValueError(f"{path}: size does not match header")
    images = np.frombuffer(buf, np.uint8, npx, 16).reshape(n, rows, cols)
    labels = np.frombuffer(buf, np.uint8, n, 16 + npx)
    return images, labels


def load_dataset(images_path, labels_path=None):
    """Images scaled to [0, 1] and integer labels from IDX or raw8 files."""
    images_path = Path(images_path)
    if labels_path is None:
        images, labels = read_raw8(images_path)
    else:
        images, labels = read_idx(images_path), read_idx(labels_path)
        if images.ndim != 3 or labels.ndim != 1 or len(images) != len(labels):
            raise ValueError("image/label files do not match")
    return images.astype(np.float64) / 255.0, labels.astype(np.int64)


def bundled(split="test"):
    """The subset shipped with the package: 4000 training or 1000 test images."""
    prefix = {"train": "train", "test": "t10k"}[split]
    base = resources.files("mtjsnn") / "data"
    with resources.as_file(base / f"{prefix}-images-idx3-ubyte.gz") as ip, \
            resources.as_file(base / f"{prefix}-labels-idx1-ubyte.gz") as lp:
        return load_dataset(ip, lp)
