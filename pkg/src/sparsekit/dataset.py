"""Labeled sample sets and the SPDS binary file format.

SPDS layout (little-endian), symmetric with the SPWT weight container:

    magic  "SPDS" (4 bytes)
    version u8 = 1
    sample count u32
    input rank u8, rank x u32 dims
    class count u32
    per sample: product(dims) x f32 input, then u16 label
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .container import _read_exact
from .errors import FormatError, ValidationError

MAGIC = b"SPDS"
VERSION = 1


@dataclass
class Dataset:
    inputs: np.ndarray   # (n, *input_shape) float32
    labels: np.ndarray   # (n,) uint16
    class_count: int

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_shape(self) -> tuple[int, ...]:
        return self.inputs.shape[1:]

    def validate(self) -> None:
        if self.inputs.dtype != np.float32:
            raise ValidationError("dataset inputs must be float32")
        if self.inputs.ndim < 2:
            raise ValidationError("inputs must be (n, *input_shape) with rank >= 1 per sample")
        if self.labels.shape != (self.inputs.shape[0],):
            raise ValidationError("labels must be one per sample")
        if not (0 < self.class_count <= 0xFFFFFFFF):
            raise ValidationError(f"class count out of range: {self.class_count}")
        if self.labels.size and int(self.labels.max()) >= self.class_count:
            raise ValidationError(
                f"label {int(self.labels.max())} >= class count {self.class_count}")
        # Finite inputs keep max-pool and score comparisons well defined.
        if not np.all(np.isfinite(self.inputs)):
            raise ValidationError("dataset inputs contain NaN or infinity")


def read_dataset(path) -> Dataset:
    """Load an SPDS file, validating labels and finiteness."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version = _read_exact(fh, 1, "version")[0]
        if version != VERSION:
            raise FormatError(f"unsupported dataset version {version}")
        (n,) = struct.unpack("<I", _read_exact(fh, 4, "sample count"))
        rank = _read_exact(fh, 1, "input rank")[0]
        if rank == 0:
            raise ValidationError("input rank must be at least 1")
        dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, "input dims"))
        (class_count,) = struct.unpack("<I", _read_exact(fh, 4, "class count"))
        size = 1
        for d in dims:
            if d == 0:
                raise ValidationError("input dimensions must be positive")
            size *= d
        record = 4 * size + 2
        raw = _read_exact(fh, n * record, "samples")
        if fh.read(1):
            raise FormatError("trailing bytes after the last declared sample")
    records = np.frombuffer(raw, dtype=np.uint8).reshape(n, record) if n else \
        np.empty((0, record), dtype=np.uint8)
    inputs = records[:, :4 * size].copy().view("<f4").astype(np.float32, copy=False)
    inputs = inputs.reshape((n,) + tuple(dims))
    labels = records[:, 4 * size:].copy().view("<u2").reshape(n).astype(np.uint16, copy=False)
    ds = Dataset(inputs=inputs, labels=labels, class_count=class_count)
    ds.validate()
    return ds


def write_dataset(ds: Dataset, path) -> None:
    """Write an SPDS file; read_dataset round-trips bit-identically."""
    ds.validate()
    dims = ds.input_shape
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<B", VERSION)
    payload += struct.pack("<I", ds.n)
    payload += struct.pack("<B", len(dims))
    payload += struct.pack(f"<{len(dims)}I", *dims)
    payload += struct.pack("<I", ds.class_count)
    size = int(np.prod(dims, dtype=np.int64))  # reshape(n, -1) breaks at n=0
    flat = np.ascontiguousarray(ds.inputs.reshape(ds.n, size), dtype="<f4")
    labels = np.ascontiguousarray(ds.labels, dtype="<u2")
    for i in range(ds.n):
        payload += flat[i].tobytes()
        payload += labels[i:i + 1].tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(payload))
