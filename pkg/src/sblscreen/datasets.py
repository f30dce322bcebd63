"""Dataset ingestion: IDX image files and UCI bag-of-words text files.

Nothing here touches the network; paths are always user-supplied.  For a
self-contained demo, :func:`load_builtin_digits` upscales scikit-learn's
bundled handwritten-digits set to any requested side length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .problem import Problem, normalize_columns

__all__ = [
    "BadMagic",
    "TruncatedFile",
    "DimensionMismatch",
    "MalformedLine",
    "IndexOutOfRange",
    "BowSubsetSpec",
    "load_idx",
    "write_idx_images",
    "write_idx_labels",
    "load_builtin_digits",
    "load_bow",
]

_IMAGE_MAGIC = 0x00000803
_LABEL_MAGIC = 0x00000801


class BadMagic(ValueError):
    """IDX file does not start with the expected magic number."""


class TruncatedFile(ValueError):
    """IDX file ends before its declared payload."""


class DimensionMismatch(ValueError):
    """Image and label files disagree on the number of items."""


class MalformedLine(ValueError):
    """A bag-of-words line is not 'docID wordID count'."""

    def __init__(self, lineno: int, line: str):
        self.lineno = lineno
        super().__init__(f"malformed line {lineno}: {line!r}")


class IndexOutOfRange(ValueError):
    """A bag-of-words triplet references a document or word beyond the header."""


def _read_exact(fh, count: int, path) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise TruncatedFile(f"{path}: expected {count} more bytes, got {len(data)}")
    return data


def _read_idx(path, expected_magic: int) -> np.ndarray:
    path = Path(path)
    with open(path, "rb") as fh:
        magic = struct.unpack(">i", _read_exact(fh, 4, path))[0]
        if magic != expected_magic:
            raise BadMagic(f"{path}: magic {magic:#010x}, expected {expected_magic:#010x}")
        n_dims = magic & 0xFF
        dims = [struct.unpack(">i", _read_exact(fh, 4, path))[0] for _ in range(n_dims)]
        payload = _read_exact(fh, int(np.prod(dims)), path)
        if fh.read(1):
            raise TruncatedFile(f"{path}: trailing bytes after declared payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label file pair.

    Returns ``(images, labels)`` with images flattened row-major and scaled
    to [0, 1] (784 values per image for 28x28 files) and labels as ints.
    """
    raw = _read_idx(images_path, _IMAGE_MAGIC)
    labels = _read_idx(labels_path, _LABEL_MAGIC)
    if raw.shape[0] != labels.shape[0]:
        raise DimensionMismatch(
            f"{raw.shape[0]} images but {labels.shape[0]} labels"
        )
    images = raw.reshape(raw.shape[0], -1).astype(float) / 255.0
    return images, labels.astype(np.intp)


def write_idx_images(path, images: np.ndarray) -> None:
    """Write uint8 images of shape (count, rows, cols) in IDX format."""
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">iiii", _IMAGE_MAGIC, count, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    """Write uint8 labels of shape (count,) in IDX format."""
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">ii", _LABEL_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())


def load_builtin_digits(side: int = 28) -> tuple[np.ndarray, np.ndarray]:
    """Bundled handwritten digits, upscaled to ``side x side``.

    Uses scikit-learn's offline digits set (1797 8x8 images, classes 0-9);
    pixel values are rescaled to [0, 1].  A stand-in for MNIST when the
    real IDX files are not on disk.
    """
    from scipy.ndimage import zoom
    from sklearn.datasets import load_digits

    data = load_digits()
    imgs = data.images / data.images.max()
    if side != 8:
        imgs = np.stack([zoom(img, side / 8, order=1) for img in imgs])
        imgs = np.clip(imgs, 0.0, 1.0)
    return imgs.reshape(len(imgs), -1), data.target.astype(np.intp)


@dataclass(frozen=True)
class BowSubsetSpec:
    """Desk-scale subsetting of a bag-of-words corpus.

    ``n_docs`` documents become dictionary columns over ``n_words`` word
    rows; one further held-out document (with at least one selected word)
    becomes the response.
    """

    n_docs: int
    n_words: int
    noise_level: float = 1.0

    def __post_init__(self):
        if self.n_docs < 1 or self.n_words < 1:
            raise ValueError("n_docs and n_words must be >= 1")


def _parse_header_int(line: str, lineno: int) -> int:
    try:
        return int(line.strip())
    except ValueError:
        raise MalformedLine(lineno, line) from None


def load_bow(docword_path, spec: BowSubsetSpec, seed: int = 0) -> Problem:
    """Subset a UCI docword file into a dense normalized Problem.

    Format: three header lines (D, W, NNZ) followed by ``docID wordID count``
    triplets (1-based ids).  Documents and words are chosen at random with
    ``seed``; all-zero columns after row subsetting are dropped before unit
    normalization.
    """
    path = Path(docword_path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if len(lines) < 3:
        raise TruncatedFile(f"{path}: missing header lines")
    n_docs_total = _parse_header_int(lines[0], 1)
    n_words_total = _parse_header_int(lines[1], 2)
    _parse_header_int(lines[2], 3)  # NNZ, unused beyond validation

    counts = np.zeros((n_words_total, n_docs_total))
    for lineno, line in enumerate(lines[3:], start=4):
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 3:
            raise MalformedLine(lineno, line)
        try:
            doc, word, cnt = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError:
            raise MalformedLine(lineno, line) from None
        if not (1 <= doc <= n_docs_total) or not (1 <= word <= n_words_total):
            raise IndexOutOfRange(f"line {lineno}: ({doc}, {word}) out of range")
        counts[word - 1, doc - 1] = cnt

    if spec.n_docs + 1 > n_docs_total:
        raise IndexOutOfRange("not enough documents for the subset plus a response")
    if spec.n_words > n_words_total:
        raise IndexOutOfRange("not enough words for the subset")

    rng = np.random.default_rng(seed)
    words = rng.choice(n_words_total, size=spec.n_words, replace=False)
    docs = rng.permutation(n_docs_total)
    columns = docs[: spec.n_docs]
    sub = counts[np.ix_(words, columns)]

    response = None
    for held_out in docs[spec.n_docs :]:
        candidate = counts[words, held_out]
        if np.any(candidate):
            response = candidate
            break
    if response is None:
        raise IndexOutOfRange("no held-out document overlaps the selected words")

    nonzero = np.flatnonzero(np.linalg.norm(sub, axis=0) > 0)
    matrix, _ = normalize_columns(sub[:, nonzero])
    return Problem(matrix, response, spec.noise_level)
