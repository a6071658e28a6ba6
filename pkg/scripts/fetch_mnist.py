"""Download the canonical MNIST IDX files into data/mnist/.

Tries the ossci mirror first, then the original host. Files are kept
gzip-compressed; the loader decompresses transparently.

    python scripts/fetch_mnist.py [--dest data/mnist]
"""

from __future__ import annotations

import argparse
import urllib.request
from pathlib import Path

MIRRORS = [
    "https://ossci-datasets.s3.amazonaws.com/mnist/",
    "http://yann.lecun.com/exdb/mnist/",
]
FILES = [
    "train-images-idx3-ubyte.gz",
    "train-labels-idx1-ubyte.gz",
    "t10k-images-idx3-ubyte.gz",
    "t10k-labels-idx1-ubyte.gz",
]


def fetch(dest: Path) -> None:
    dest.mkdir(parents=True, exist_ok=True)
    for name in FILES:
        target = dest / name
        if target.exists():
            print(f"{target} already present")
            continue
        last_error = None
        for mirror in MIRRORS:
            url = mirror + name
            try:
                print(f"fetching {url}")
                with urllib.request.urlopen(url, timeout=60) as resp:
                    target.write_bytes(resp.read())
                break
            except OSError as exc:
                last_error = exc
        else:
            raise SystemExit(f"could not download {name}: {last_error}")
    print(f"done; point the CLI or CONVAE_MNIST_DIR at {dest}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--dest", default="data/mnist", type=Path)
    fetch(parser.parse_args().dest)
