"""Model weight container and the SPWT binary file format.

A model is an ordered sequence of named weight layers. Convolution layers
store a 4-D tensor (filters x channels x height x width), fully connected
layers a 2-D tensor (outputs x inputs); both are kept flat in memory as
row-major float32.

SPWT layout (little-endian throughout):

    magic  "SPWT" (4 bytes)
    version u8 = 1
    layer count u32
    per layer:
        name length u16, UTF-8 name
        kind u8 (0 = Conv, 1 = FullyConnected)
        rank u8 (4 for Conv, 2 for FullyConnected)
        rank x u32 dims
        product(dims) x f32 weights

Weights are written and read bit-exactly; NaN and infinite values are
rejected at load because every threshold rule compares |w| against a
cutoff and NaN comparisons would silently misclassify weights.
Bias vectors are not part of the container; the evaluator's architecture
manifest may carry biases but they are never thresholded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .errors import FormatError, TruncatedError, ValidationError

MAGIC = b"SPWT"
VERSION = 1

_U32_MAX = 2**32 - 1


class LayerKind(IntEnum):
    CONV = 0
    FULLY_CONNECTED = 1

    @property
    def rank(self) -> int:
        return 4 if self is LayerKind.CONV else 2


@dataclass
class LayerTensor:
    """One layer's weights: flat float32 data plus shape metadata."""

    name: str
    kind: LayerKind
    shape: tuple[int, ...]
    data: np.ndarray  # 1-D float32, row-major, length = prod(shape)

    @classmethod
    def from_array(cls, name: str, kind: LayerKind, array) -> "LayerTensor":
        arr = np.asarray(array, dtype=np.float32)
        return cls(name=name, kind=LayerKind(kind), shape=arr.shape,
                   data=np.ascontiguousarray(arr).reshape(-1))

    @property
    def count(self) -> int:
        return self.data.size

    @property
    def tensor(self) -> np.ndarray:
        """The weights viewed at their declared shape."""
        return self.data.reshape(self.shape)

    def validate(self) -> None:
        if not self.name:
            raise ValidationError("layer name must be non-empty")
        if len(self.name.encode("utf-8")) > 0xFFFF:
            raise ValidationError(f"layer {self.name!r}: name longer than 65535 bytes")
        kind = LayerKind(self.kind)
        if len(self.shape) != kind.rank:
            raise ValidationError(
                f"layer {self.name!r}: kind {kind.name} requires rank {kind.rank}, "
                f"got shape {self.shape}")
        for dim in self.shape:
            if not (0 < dim <= _U32_MAX):
                raise ValidationError(
                    f"layer {self.name!r}: dimensions must be positive 32-bit, got {self.shape}")
        if self.data.ndim != 1 or self.data.dtype != np.float32:
            raise ValidationError(f"layer {self.name!r}: data must be flat float32")
        expected = int(np.prod(self.shape, dtype=np.int64))
        if self.data.size != expected:
            raise ValidationError(
                f"layer {self.name!r}: data length {self.data.size} != product of shape {expected}")
        if not np.all(np.isfinite(self.data)):
            raise ValidationError(f"layer {self.name!r}: weights contain NaN or infinity")


@dataclass
class Model:
    """Ordered weight layers, first to last in the network's forward order."""

    layers: list[LayerTensor]

    def __len__(self) -> int:
        return len(self.layers)

    def layer(self, name: str) -> LayerTensor:
        for lt in self.layers:
            if lt.name == name:
                return lt
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [lt.name for lt in self.layers]

    @property
    def weight_count(self) -> int:
        return sum(lt.count for lt in self.layers)

    def validate(self) -> None:
        if not self.layers:
            raise ValidationError("model must contain at least one layer")
        seen = set()
        for lt in self.layers:
            lt.validate()
            if lt.name in seen:
                raise ValidationError(f"duplicate layer name {lt.name!r}")
            seen.add(lt.name)


def _read_exact(fh, n: int, what: str) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise TruncatedError(f"file ended while reading {what} "
                             f"(wanted {n} bytes, got {len(buf)})")
    return buf


def read_model(path) -> Model:
    """Load an SPWT file, validating every invariant. Bit-exact."""
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {MAGIC!r}")
        version = _read_exact(fh, 1, "version")[0]
        if version != VERSION:
            raise FormatError(f"unsupported container version {version}")
        (layer_count,) = struct.unpack("<I", _read_exact(fh, 4, "layer count"))
        layers = []
        for i in range(layer_count):
            (name_len,) = struct.unpack("<H", _read_exact(fh, 2, f"layer {i} name length"))
            name = _read_exact(fh, name_len, f"layer {i} name").decode("utf-8")
            kind_byte = _read_exact(fh, 1, f"layer {name!r} kind")[0]
            try:
                kind = LayerKind(kind_byte)
            except ValueError:
                raise ValidationError(f"layer {name!r}: unknown kind byte {kind_byte}")
            rank = _read_exact(fh, 1, f"layer {name!r} rank")[0]
            if rank not in (2, 4):
                raise ValidationError(f"layer {name!r}: rank must be 2 or 4, got {rank}")
            dims = struct.unpack(f"<{rank}I", _read_exact(fh, 4 * rank, f"layer {name!r} dims"))
            count = 1
            for d in dims:
                count *= d
            raw = _read_exact(fh, 4 * count, f"layer {name!r} weights")
            data = np.frombuffer(raw, dtype="<f4").astype(np.float32, copy=True)
            lt = LayerTensor(name=name, kind=kind, shape=tuple(dims), data=data)
            lt.validate()
            layers.append(lt)
        trailing = fh.read(1)
        if trailing:
            raise FormatError("trailing bytes after the last declared layer")
    model = Model(layers=layers)
    model.validate()
    return model


def write_model(model: Model, path) -> None:
    """Write an SPWT file. Validates before any bytes are written;
    read_model(write_model(m)) round-trips bit-identically."""
    model.validate()
    payload = bytearray()
    payload += MAGIC
    payload += struct.pack("<B", VERSION)
    payload += struct.pack("<I", len(model.layers))
    for lt in model.layers:
        name_bytes = lt.name.encode("utf-8")
        payload += struct.pack("<H", len(name_bytes))
        payload += name_bytes
        payload += struct.pack("<BB", int(lt.kind), len(lt.shape))
        payload += struct.pack(f"<{len(lt.shape)}I", *lt.shape)
        payload += np.ascontiguousarray(lt.data, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(bytes(payload))
