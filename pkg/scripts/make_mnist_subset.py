"""Build the bundled MNIST subset from the 5000-image sample shipped with mlxtend.

Usage::

    pip download --no-deps mlxtend==0.24.0 -d /tmp/mlx
    python3 scripts/make_mnist_subset.py /tmp/mlx/mlxtend-0.24.0-py3-none-any.whl

The sample holds 500 images per digit.  It is shuffled with a fixed seed and
split into 4000 training and 1000 test images, written as gzipped IDX files.
"""
import gzip
import io
import sys
import zipfile
from pathlib import Path

import numpy as np

from mtjsnn.mnist import write_idx

MEMBER = "mlxtend/data/data/mnist_5k.csv.gz"


def main(wheel, out=Path(__file__).resolve().parents[1] / "src" / "mtjsnn" / "data"):
    with zipfile.ZipFile(wheel) as zf:
        raw = gzip.decompress(zf.read(MEMBER))
    data = np.loadtxt(io.BytesIO(raw), delimiter=",", dtype=np.int64)
    images = data[:, :784].astype(np.uint8).reshape(-1, 28, 28)
    labels = data[:, 784].astype(np.uint8)
    order = np.random.default_rng(20240611).permutation(len(labels))
    images, labels = images[order], labels[order]
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_idx(out / "train-images-idx3-ubyte.gz", images[:4000])
    write_idx(out / "train-labels-idx1-ubyte.gz", labels[:4000])
    write_idx(out / "t10k-images-idx3-ubyte.gz", images[4000:])
    write_idx(out / "t10k-labels-idx1-ubyte.gz", labels[4000:])
    print(f"wrote {len(labels)} images to {out}")


if __name__ == "__main__":
    main(sys.argv[1])
