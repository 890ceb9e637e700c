"""MNIST / Fashion-MNIST ingestion: IDX parsing, verified fetch, batching.

Files are cached under ``<cache root>/<dataset>/<file>`` (cache root from
``$EPIWRAP_CACHE``, default ``~/.cache/epiwrap``) and verified against
pinned SHA-256 digests before a single byte is parsed. When the cache is
populated and verified no network access happens at all.
"""

from __future__ import annotations

import gzip
import hashlib
import os
import struct
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from filelock import FileLock

from .errors import ChecksumError, FetchError, IdxParseError
from .numcore import RngStream

IDX_MAGIC_VECTOR = 0x00000801
IDX_MAGIC_IMAGES = 0x00000803

CACHE_ENV_VAR = "EPIWRAP_CACHE"


@dataclass(frozen=True)
class SourceFile:
    """One remote file: where to get it and what its bytes must hash to."""

    filename: str
    url: str
    sha256: str
    n_bytes: int

    def __post_init__(self):
        if len(self.sha256) != 64 or self.sha256 != self.sha256.lower():
            raise ValueError(f"digest must be 64 lowercase hex chars: {self.sha256}")


@dataclass(frozen=True)
class SourceManifest:
    """The four canonical files of one dataset plus its cache subdirectory."""

    name: str
    train_images: SourceFile
    train_labels: SourceFile
    test_images: SourceFile
    test_labels: SourceFile

    def files_for(self, split: str) -> tuple[SourceFile, SourceFile]:
        if split == "train":
            return self.train_images, self.train_labels
        if split == "test":
            return self.test_images, self.test_labels
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")


def _mnist_manifest() -> SourceManifest:
    base = "https://storage.googleapis.com/cvdf-datasets/mnist/"
    return SourceManifest(
        name="mnist",
        train_images=SourceFile(
            "train-images-idx3-ubyte.gz", base + "train-images-idx3-ubyte.gz",
            "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609", 9912422),
        train_labels=SourceFile(
            "train-labels-idx1-ubyte.gz", base + "train-labels-idx1-ubyte.gz",
            "3552534a0a558bbed6aed32b30c495cca23d567ec52cac8be1a0730e8010255c", 28881),
        test_images=SourceFile(
            "t10k-images-idx3-ubyte.gz", base + "t10k-images-idx3-ubyte.gz",
            "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6", 1648877),
        test_labels=SourceFile(
            "t10k-labels-idx1-ubyte.gz", base + "t10k-labels-idx1-ubyte.gz",
            "f7ae60f92e00ec6debd23a6088c31dbd2371eca3ffa0defaefb259924204aec6", 4542),
    )


def _fashion_mnist_manifest() -> SourceManifest:
    base = "http://fashion-mnist.s3-website.eu-central-1.amazonaws.com/"
    return SourceManifest(
        name="fashion-mnist",
        train_images=SourceFile(
            "train-images-idx3-ubyte.gz", base + "train-images-idx3-ubyte.gz",
            "3aede38d61863908ad78613f6a32ed271626dd12800ba2636569512369268a84", 26421880),
        train_labels=SourceFile(
            "train-labels-idx1-ubyte.gz", base + "train-labels-idx1-ubyte.gz",
            "a04f17134ac03560a47e3764e11b92fc97de4d1bfaf8ba1a3aa29af54cc90845", 29515),
        test_images=SourceFile(
            "t10k-images-idx3-ubyte.gz", base + "t10k-images-idx3-ubyte.gz",
            "346e55b948d973a97e58d2351dde16a484bd415d4595297633bb08f03db6a073", 4422102),
        test_labels=SourceFile(
            "t10k-labels-idx1-ubyte.gz", base + "t10k-labels-idx1-ubyte.gz",
            "67da17c76eaffca5446c3361aaab5c3cd6d1c2608764d35dfb1850b086bf8dd5", 5148),
    )


MANIFESTS = {
    "mnist": _mnist_manifest(),
    "fashion-mnist": _fashion_mnist_manifest(),
}


@dataclass(frozen=True)
class Dataset:
    """Loaded split: images (n, 28, 28, 1) float64 in [0, 1], labels (n,) ints."""

    name: str
    split: str
    images: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError("images and labels must have equal length")

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def flat_images(self) -> np.ndarray:
        """Images flattened to (n, 784) for the dense layers."""
        return self.images.reshape(self.n, -1)

    def digest(self) -> str:
        """Content hash of the loaded arrays, recorded in run manifests."""
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.images).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()

    def subset(self, limit: int) -> "Dataset":
        """First `limit` samples, for desk-scale runs."""
        if limit <= 0:
            raise ValueError("limit must be positive")
        if limit >= self.n:
            return self
        return Dataset(self.name, self.split, self.images[:limit], self.labels[:limit])


def parse_idx(buf: bytes) -> np.ndarray:
    """Decode an IDX byte buffer (u8 payload) into a float64 array.

    Supports the two magics the datasets use: 0x00000801 (rank-1 label
    vectors) and 0x00000803 (rank-3 image stacks). Dimensions are big-endian
    32-bit ints following the magic.
    """
    if len(buf) < 4:
        raise IdxParseError(f"buffer too short for magic: {len(buf)} bytes", 0)
    (magic,) = struct.unpack(">I", buf[:4])
    if magic == IDX_MAGIC_VECTOR:
        rank = 1
    elif magic == IDX_MAGIC_IMAGES:
        rank = 3
    else:
        raise IdxParseError(f"unsupported IDX magic 0x{magic:08x}", 0)
    header_end = 4 + 4 * rank
    if len(buf) < header_end:
        raise IdxParseError(f"buffer too short for {rank} dimension fields", 4)
    dims = struct.unpack(f">{rank}I", buf[4:header_end])
    n_items = 1
    for d in dims:
        n_items *= d
    if n_items > len(buf):  # cheap overflow/corruption guard before allocating
        raise IdxParseError(
            f"dimensions {dims} imply {n_items} bytes, buffer has {len(buf)}", 4)
    payload = buf[header_end:]
    if len(payload) != n_items:
        raise IdxParseError(
            f"payload length mismatch: expected {n_items} bytes, got {len(payload)}",
            header_end)
    arr = np.frombuffer(payload, dtype=np.uint8).astype(np.float64)
    return arr.reshape(dims)


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def default_cache_root() -> Path:
    env = os.environ.get(CACHE_ENV_VAR)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "epiwrap"


def fetch_file(source: SourceFile, dest: Path, retries: int = 3, timeout: float = 60.0):
    """Download one file to `dest`, retrying on transient failures.

    Writes go through a lock file so concurrent processes do not clobber
    each other, and land in a temp name that is only renamed into place
    after the checksum verifies.
    """
    dest.parent.mkdir(parents=True, exist_ok=True)
    lock = FileLock(str(dest) + ".lock")
    with lock:
        if dest.exists() and _sha256_file(dest) == source.sha256:
            return
        tmp = dest.with_suffix(dest.suffix + ".part")
        last_err = None
        for _ in range(retries):
            try:
                with urllib.request.urlopen(source.url, timeout=timeout) as resp, \
                        open(tmp, "wb") as out:
                    while True:
                        chunk = resp.read(1 << 20)
                        if not chunk:
                            break
                        out.write(chunk)
                break
            except OSError as e:
                last_err = e
                tmp.unlink(missing_ok=True)
        else:
            raise FetchError(f"failed to download {source.url}: {last_err}")
        digest = _sha256_file(tmp)
        if digest != source.sha256:
            tmp.unlink(missing_ok=True)
            raise ChecksumError(
                f"{source.filename}: downloaded digest {digest} != pinned {source.sha256}")
        tmp.rename(dest)


def _verified_bytes(source: SourceFile, cache_dir: Path, allow_fetch: bool) -> bytes:
    """Return decompressed, checksum-verified file content."""
    path = cache_dir / source.filename
    if not path.exists():
        if not allow_fetch:
            raise FetchError(
                f"{path} missing and fetching is disabled; populate the cache manually")
        fetch_file(source, path)
    digest = _sha256_file(path)
    if digest != source.sha256:
        raise ChecksumError(
            f"{path}: digest {digest} != pinned {source.sha256}; refusing to parse")
    raw = path.read_bytes()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def load_dataset(name: str, split: str, cache_root: Path | None = None,
                 allow_fetch: bool = True) -> Dataset:
    """Load a dataset split from the verified cache, fetching if permitted.

    Pixels come out scaled by 1/255 into [0, 1]; labels stay as class
    indices (one-hot is materialized only inside the loss).
    """
    if name not in MANIFESTS:
        raise ValueError(f"unknown dataset {name!r}; available: {sorted(MANIFESTS)}")
    manifest = MANIFESTS[name]
    images_src, labels_src = manifest.files_for(split)
    cache_dir = (cache_root or default_cache_root()) / manifest.name

    images = parse_idx(_verified_bytes(images_src, cache_dir, allow_fetch))
    labels = parse_idx(_verified_bytes(labels_src, cache_dir, allow_fetch))
    if images.ndim != 3:
        raise IdxParseError(f"expected rank-3 image tensor, got rank {images.ndim}", 0)
    if labels.ndim != 1 or len(labels) != len(images):
        raise IdxParseError(
            f"label count {labels.shape} does not match image count {len(images)}", 0)
    images = (images / 255.0)[..., np.newaxis]
    return Dataset(name, split, images, labels.astype(np.int64))


def batch_iter(images: np.ndarray, labels: np.ndarray, batch_size: int,
               shuffle: bool = False, rng: RngStream | None = None):
    """Yield (images, labels) batches covering every sample exactly once.

    The final short batch is emitted. Shuffle order is a pure function of
    the supplied stream.
    """
    n = len(labels)
    if batch_size <= 0:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    if batch_size > n:
        raise ValueError(f"batch_size {batch_size} exceeds dataset size {n}")
    if shuffle:
        if rng is None:
            raise ValueError("shuffle=True requires an RngStream")
        order = rng.permutation(n)
    else:
        order = np.arange(n)
    for start in range(0, n, batch_size):
        idx = order[start:start + batch_size]
        yield images[idx], labels[idx]
