"""Minimal deterministic forward-pass evaluator for small sequential
models: enough to measure top-1 accuracy of a sparsified network on a
labeled dataset.

The architecture lives in a JSON sidecar manifest:

    {"layers": [
        {"op": "conv2d", "weights": "conv1", "stride": 1, "padding": "same",
         "bias": [...]},                        # bias optional
        {"op": "relu"},
        {"op": "maxpool2d", "window": 2, "stride": 2},
        {"op": "flatten"},
        {"op": "dense", "weights": "fc1"},      # bias optional
        {"op": "softmax"}
    ]}

Weights are looked up in the Model by name: conv2d expects a 4-D
filters x channels x height x width tensor applied as a cross-correlation,
dense a 2-D outputs x inputs tensor. "same" padding pads with zeros
symmetrically, putting any odd leftover on the bottom/right. Flatten uses
row-major (channel, row, column) order. Softmax subtracts the row max
before exponentiating. Inference is batched and, for large sample counts,
chunked across threads; the accuracy reduction is an exact count so the
result does not depend on chunking.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import backend
from .container import Model
from .dataset import Dataset
from .errors import ValidationError

_OPS = ("dense", "conv2d", "relu", "maxpool2d", "flatten", "softmax")
_MIN_SAMPLES_PER_CHUNK = 32


@dataclass
class ArchManifest:
    layers: list[dict]

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps({"layers": self.layers}, indent=indent)


def load_manifest(path) -> ArchManifest:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    return manifest_from_dict(raw)


def save_manifest(manifest: ArchManifest, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(manifest.to_json())
        fh.write("\n")


def manifest_from_dict(raw: dict) -> ArchManifest:
    if not isinstance(raw, dict) or "layers" not in raw:
        raise ValidationError("manifest must be an object with a 'layers' list")
    layers = raw["layers"]
    if not isinstance(layers, list) or not layers:
        raise ValidationError("manifest 'layers' must be a non-empty list")
    for i, item in enumerate(layers, start=1):
        op = item.get("op")
        if op not in _OPS:
            raise ValidationError(f"layer {i}: unknown op {op!r}, expected one of {_OPS}")
        if op in ("dense", "conv2d") and not item.get("weights"):
            raise ValidationError(f"layer {i} ({op}): missing 'weights' name")
        if op == "conv2d":
            if int(item.get("stride", 1)) < 1:
                raise ValidationError(f"layer {i} (conv2d): stride must be >= 1")
            if item.get("padding", "valid") not in ("valid", "same"):
                raise ValidationError(f"layer {i} (conv2d): padding must be valid or same")
        if op == "maxpool2d":
            if int(item.get("window", 0)) < 1 or int(item.get("stride", 0)) < 1:
                raise ValidationError(f"layer {i} (maxpool2d): window and stride must be >= 1")
    return ArchManifest(layers=list(layers))


def _same_padding(size: int, kernel: int, stride: int) -> tuple[int, int]:
    out = -(-size // stride)  # ceil(size / stride)
    total = max((out - 1) * stride + kernel - size, 0)
    return total // 2, total - total // 2


class _Pipeline:
    """Manifest bound to a model and an input shape, with shapes checked."""

    def __init__(self, model: Model, manifest: ArchManifest, input_shape: tuple[int, ...]):
        self.stages: list[tuple] = []
        shape = tuple(int(d) for d in input_shape)
        for i, item in enumerate(manifest.layers, start=1):
            op = item["op"]
            label = f"layer {i} ({op}"
            if item.get("weights"):
                label += f" {item['weights']!r}"
            label += ")"
            if op == "dense":
                try:
                    wt = model.layer(item["weights"])
                except KeyError:
                    raise ValidationError(f"{label}: no such weights layer in the model")
                if len(wt.shape) != 2:
                    raise ValidationError(f"{label}: dense weights must be 2-D, got {wt.shape}")
                if len(shape) != 1:
                    raise ValidationError(
                        f"{label}: dense input must be flat, got {shape} (insert a flatten op)")
                out_n, in_n = wt.shape
                if in_n != shape[0]:
                    raise ValidationError(
                        f"{label}: weights expect {in_n} inputs, got {shape[0]}")
                bias = _bias_vector(item, out_n, label)
                self.stages.append(("dense", wt.tensor, bias))
                shape = (out_n,)
            elif op == "conv2d":
                try:
                    wt = model.layer(item["weights"])
                except KeyError:
                    raise ValidationError(f"{label}: no such weights layer in the model")
                if len(wt.shape) != 4:
                    raise ValidationError(f"{label}: conv weights must be 4-D, got {wt.shape}")
                if len(shape) != 3:
                    raise ValidationError(
                        f"{label}: conv input must be (channels, height, width), got {shape}")
                filters, channels, kh, kw = wt.shape
                c, h, w = shape
                if channels != c:
                    raise ValidationError(
                        f"{label}: weights expect {channels} channels, input has {c}")
                stride = int(item.get("stride", 1))
                padding = item.get("padding", "valid")
                if padding == "same":
                    pt, pb = _same_padding(h, kh, stride)
                    pl, pr = _same_padding(w, kw, stride)
                else:
                    pt = pb = pl = pr = 0
                if h + pt + pb < kh or w + pl + pr < kw:
                    raise ValidationError(
                        f"{label}: {kh}x{kw} kernel does not fit a {h}x{w} input")
                bias = _bias_vector(item, filters, label)
                self.stages.append(("conv2d", wt.tensor, bias, stride, (pt, pb, pl, pr)))
                oh = (h + pt + pb - kh) // stride + 1
                ow = (w + pl + pr - kw) // stride + 1
                shape = (filters, oh, ow)
            elif op == "maxpool2d":
                if len(shape) != 3:
                    raise ValidationError(
                        f"{label}: pooling input must be (channels, height, width), got {shape}")
                window = int(item["window"])
                stride = int(item["stride"])
                c, h, w = shape
                if h < window or w < window:
                    raise ValidationError(
                        f"{label}: {window}x{window} window does not fit a {h}x{w} input")
                self.stages.append(("maxpool2d", window, stride))
                shape = (c, (h - window) // stride + 1, (w - window) // stride + 1)
            elif op == "relu":
                self.stages.append(("relu",))
            elif op == "flatten":
                self.stages.append(("flatten",))
                shape = (int(np.prod(shape)),)
            elif op == "softmax":
                if len(shape) != 1:
                    raise ValidationError(f"{label}: softmax input must be flat, got {shape}")
                self.stages.append(("softmax",))
        self.output_shape = shape

    def run(self, batch: np.ndarray) -> np.ndarray:
        x = batch
        for stage in self.stages:
            op = stage[0]
            if op == "dense":
                _, weights, bias = stage
                y = (x.astype(np.float64) @ weights.T.astype(np.float64)).astype(np.float32)
                x = y + bias if bias is not None else y
            elif op == "conv2d":
                _, weights, bias, stride, (pt, pb, pl, pr) = stage
                xp = np.pad(x, ((0, 0), (0, 0), (pt, pb), (pl, pr)))
                y = backend.conv2d_valid(np.ascontiguousarray(xp), weights, stride)
                x = y + bias[None, :, None, None] if bias is not None else y
            elif op == "maxpool2d":
                _, window, stride = stage
                x = backend.maxpool2d(np.ascontiguousarray(x), window, stride)
            elif op == "relu":
                x = np.maximum(x, np.float32(0.0))
            elif op == "flatten":
                x = np.ascontiguousarray(x).reshape(x.shape[0], -1)
            elif op == "softmax":
                shifted = x.astype(np.float64) - x.max(axis=1, keepdims=True)
                e = np.exp(shifted)
                x = (e / e.sum(axis=1, keepdims=True)).astype(np.float32)
        return x


def _bias_vector(item: dict, expected: int, label: str) -> np.ndarray | None:
    bias = item.get("bias")
    if bias is None:
        return None
    arr = np.asarray(bias, dtype=np.float32)
    if arr.shape != (expected,):
        raise ValidationError(f"{label}: bias length {arr.size} != {expected} outputs")
    return arr


def bind(model: Model, manifest: ArchManifest, input_shape) -> _Pipeline:
    """Shape-check the manifest against a model and input shape."""
    return _Pipeline(model, manifest, tuple(input_shape))


def forward(model: Model, manifest: ArchManifest, sample: np.ndarray) -> np.ndarray:
    """Class scores for one input, shaped as the per-sample input shape."""
    arr = np.ascontiguousarray(np.asarray(sample, dtype=np.float32))
    pipeline = bind(model, manifest, arr.shape)
    return pipeline.run(arr[None])[0]


def evaluate(model: Model, manifest: ArchManifest, data: Dataset) -> float:
    """Top-1 accuracy over the dataset; argmax ties go to the lowest class
    index. Deterministic and independent of chunk boundaries."""
    if data.n < 1:
        raise ValidationError("dataset has no samples")
    pipeline = bind(model, manifest, data.input_shape)
    if pipeline.output_shape != (data.class_count,):
        raise ValidationError(
            f"model emits {pipeline.output_shape} scores but the dataset has "
            f"{data.class_count} classes")
    workers = backend.thread_count()
    if workers > 1 and data.n >= 2 * _MIN_SAMPLES_PER_CHUNK:
        chunks = min(workers, data.n // _MIN_SAMPLES_PER_CHUNK)
        bounds = np.linspace(0, data.n, chunks + 1, dtype=int)
        def _count(lo: int, hi: int) -> int:
            scores = pipeline.run(data.inputs[lo:hi])
            return int(np.count_nonzero(scores.argmax(axis=1) == data.labels[lo:hi]))
        with ThreadPoolExecutor(max_workers=chunks) as pool:
            futures = [pool.submit(_count, int(lo), int(hi))
                       for lo, hi in zip(bounds[:-1], bounds[1:])]
            correct = sum(f.result() for f in futures)
    else:
        scores = pipeline.run(data.inputs)
        correct = int(np.count_nonzero(scores.argmax(axis=1) == data.labels))
    return correct / data.n


def normalized_accuracy(sparsified: float, baseline: float) -> float:
    """Sparsified accuracy divided by baseline accuracy (may exceed 1)."""
    if baseline <= 0.0:
        raise ValidationError(f"baseline accuracy must be > 0, got {baseline}")
    return sparsified / baseline
