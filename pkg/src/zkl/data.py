"""Datasets: synthetic Gaussian blobs and MNIST-style IDX files."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, RejectedInputError
from .rng import StreamKey, Tag

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass(frozen=True, eq=False)
class Dataset:
    inputs: np.ndarray   # (n, input_dim)
    labels: np.ndarray   # (n,) int64
    name: str = ""
    seed: int | None = None

    def __post_init__(self):
        inputs = np.atleast_2d(np.asarray(self.inputs, dtype=np.float64))
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if inputs.shape[0] != labels.shape[0]:
            raise RejectedInputError(f"{inputs.shape[0]} inputs but {labels.shape[0]} labels")
        if np.any(labels < 0):
            raise RejectedInputError("labels must be non-negative")
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def check_labels(self, V: int) -> "Dataset":
        """Bind to a V-class model; labels >= V are rejected here, not at parse time."""
        if len(self) and int(self.labels.max()) >= V:
            raise RejectedInputError(f"label {int(self.labels.max())} out of range for {V} classes")
        return self


def synth_blobs(V: int, input_dim: int, per_class: int, separation: float, seed: int) -> Dataset:
    """Unit-covariance Gaussian blobs with means ``separation * m_k``, ``||m_k|| = 1``.

    Means are the standard basis vectors when ``V <= input_dim`` and random
    unit vectors otherwise. Samples are stored class by class.
    """
    if V < 2:
        raise RejectedInputError("need at least 2 classes")
    if per_class < 1 or input_dim < 1:
        raise RejectedInputError("per_class and input_dim must be >= 1")
    if V <= input_dim:
        means = np.eye(input_dim)[:V]
    else:
        raw = StreamKey(seed, 0, 0, Tag.DATA).generator().standard_normal((V, input_dim))
        means = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    inputs = np.empty((V * per_class, input_dim))
    for k in range(V):
        noise = StreamKey(seed, k, 1, Tag.DATA).generator().standard_normal((per_class, input_dim))
        inputs[k * per_class:(k + 1) * per_class] = separation * means[k] + noise
    labels = np.repeat(np.arange(V), per_class)
    return Dataset(inputs, labels, f"blobs-V{V}-d{input_dim}", seed)


# -- IDX -------------------------------------------------------------------

def _read_bytes(path) -> bytes:
    with open(path, "rb") as f:
        return f.read()


def _header(data: bytes, magic: int, ndims: int) -> tuple[int, ...]:
    need = 4 * (1 + ndims)
    if len(data) < 4:
        raise FormatError("file too short for IDX magic", len(data))
    (found,) = struct.unpack_from(">I", data, 0)
    if found != magic:
        raise FormatError(f"bad IDX magic 0x{found:08x}, expected 0x{magic:08x}", 0)
    if len(data) < need:
        raise FormatError("truncated IDX header", len(data))
    return struct.unpack_from(f">{ndims}I", data, 4)


def read_idx_images(path) -> np.ndarray:
    """Images as an (n, rows*cols) float array scaled to [0, 1]."""
    data = _read_bytes(path)
    n, rows, cols = _header(data, IDX_IMAGES_MAGIC, 3)
    size = n * rows * cols
    if len(data) < 16 + size:
        raise FormatError(f"truncated image payload: need {size} bytes", len(data))
    pixels = np.frombuffer(data, dtype=np.uint8, count=size, offset=16)
    return pixels.reshape(n, rows * cols).astype(np.float64) / 255.0


def read_idx_labels(path) -> np.ndarray:
    data = _read_bytes(path)
    (n,) = _header(data, IDX_LABELS_MAGIC, 1)
    if len(data) < 8 + n:
        raise FormatError(f"truncated label payload: need {n} bytes", len(data))
    return np.frombuffer(data, dtype=np.uint8, count=n, offset=8).astype(np.int64)


def write_idx_images(path, images, rows: int, cols: int) -> None:
    """Write uint8 images (n x rows*cols, values 0..255) in IDX format."""
    images = np.asarray(images)
    n = images.shape[0] if images.size else 0
    payload = np.asarray(images, dtype=np.uint8).reshape(n, rows * cols)
    with open(path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, n, rows, cols))
        f.write(payload.tobytes())


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1)
    with open(path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def load_idx_dataset(images_path, labels_path, name: str = "idx") -> Dataset:
    X = read_idx_images(images_path)
    y = read_idx_labels(labels_path)
    return Dataset(X, y, name)
