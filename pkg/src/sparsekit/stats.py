"""Per-layer descriptive statistics: min/max/span, histograms, and
magnitude percentiles. Every threshold rule is driven by these numbers."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .container import LayerTensor, Model
from .errors import ValidationError

DEFAULT_HISTOGRAM_BINS = 64

# Threshold returned for an empty percentile rank: negative, so applying it
# zeroes nothing (|w| <= -1 is never true for finite w).
NO_OP_THRESHOLD = -1.0


@dataclass
class LayerStats:
    name: str
    count: int
    min: float
    max: float
    span: float        # max - min over signed weights
    zero_count: int    # exact 0.0 values, either sign bit


@dataclass
class Histogram:
    bin_count: int
    lo: float
    hi: float
    counts: list[int]  # uniform bins over [lo, hi]; hi falls in the last bin


def layer_stats(layer: LayerTensor) -> LayerStats:
    """Min/max/span over signed values plus the exact-zero count."""
    if layer.count == 0:
        raise ValidationError(f"layer {layer.name!r} is empty")
    lo = float(layer.data.min())
    hi = float(layer.data.max())
    return LayerStats(
        name=layer.name,
        count=layer.count,
        min=lo,
        max=hi,
        span=hi - lo,
        zero_count=int(np.count_nonzero(layer.data == 0.0)),
    )


def min_span(model: Model) -> tuple[int, float]:
    """Smallest per-layer span and the 1-based index of the layer that
    attains it (ties go to the lowest index)."""
    if not model.layers:
        raise ValidationError("model has no layers")
    best_index, best_span = 0, math.inf
    for i, layer in enumerate(model.layers, start=1):
        span = layer_stats(layer).span
        if span < best_span:
            best_index, best_span = i, span
    return best_index, best_span


def weight_histogram(layer: LayerTensor, bins: int = DEFAULT_HISTOGRAM_BINS) -> Histogram:
    """Uniform histogram over [min, max]. A value equal to max lands in the
    last bin; a zero-span layer puts everything in bin 0."""
    if bins < 1:
        raise ValidationError(f"bin count must be >= 1, got {bins}")
    st = layer_stats(layer)
    if st.span == 0.0:
        counts = [0] * bins
        counts[0] = st.count
    else:
        hist, _ = np.histogram(layer.data, bins=bins, range=(st.min, st.max))
        counts = [int(c) for c in hist]
    return Histogram(bin_count=bins, lo=st.min, hi=st.max, counts=counts)


def magnitude_percentile(layer: LayerTensor, delta: float) -> float:
    """Nearest-rank percentile of |w|: with magnitudes sorted ascending as
    a_1..a_n, returns a_k for k = floor(delta * n), or NO_OP_THRESHOLD when
    k = 0. delta = 1 returns the largest magnitude."""
    if not 0.0 <= delta <= 1.0:
        raise ValidationError(f"delta must be in [0, 1], got {delta}")
    if layer.count == 0:
        raise ValidationError(f"layer {layer.name!r} is empty")
    k = math.floor(delta * layer.count)
    if k < 1:
        return NO_OP_THRESHOLD
    magnitudes = np.sort(np.abs(layer.data))
    return float(magnitudes[k - 1])
