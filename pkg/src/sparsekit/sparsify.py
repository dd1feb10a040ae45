"""Threshold construction for the three sparsification methods, threshold
application, and sparsity metrics.

Applying a plan zeroes every weight whose magnitude is at or below the
layer's threshold (inclusive boundary) and leaves everything else
bit-unchanged. Zeroed positions are written as canonical +0.0 so outputs
are deterministic and zero counting is stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import backend
from .container import LayerTensor, Model
from .errors import ValidationError
from .stats import layer_stats, magnitude_percentile, min_span

METHOD_FLAT = "flat"
METHOD_TRIANGULAR = "triangular"
METHOD_RELATIVE = "relative"
METHODS = (METHOD_FLAT, METHOD_TRIANGULAR, METHOD_RELATIVE)

# Triangular interior-threshold schedules: "paper" is the literal offset
# ramp (tmax - tmin)/L * (l - 2), which starts layer 2 at zero and never
# reaches tmax before the last layer; "interpolated" ramps linearly from
# tmin at layer 1 to tmax at layer L.
TRIANGULAR_MODES = ("paper", "interpolated")

# Relative per-layer rules: "percentile" targets a fraction of zeroed
# weights via the magnitude percentile; "span" scales each layer's signed
# weight span.
RELATIVE_MODES = ("percentile", "span")


@dataclass
class SparsifyPlan:
    """A method, its parameters, and the resolved per-layer thresholds."""

    method: str
    params: dict
    thresholds: list[float]  # one per layer, in network order

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(
            {"method": self.method, "params": self.params, "thresholds": self.thresholds},
            indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "SparsifyPlan":
        raw = json.loads(text)
        return cls(method=raw["method"], params=raw["params"],
                   thresholds=[float(t) for t in raw["thresholds"]])


@dataclass
class LayerSparsity:
    name: str
    weight_count: int
    zero_count: int
    sparsity: float


@dataclass
class SparsityReport:
    per_layer: list[LayerSparsity]
    model_weight_count: int
    model_zero_count: int
    model_sparsity: float
    compression_factor: float

    def to_dict(self) -> dict:
        return {
            "layers": [
                {"name": e.name, "weight_count": e.weight_count,
                 "zero_count": e.zero_count, "sparsity": e.sparsity}
                for e in self.per_layer
            ],
            "model_weight_count": self.model_weight_count,
            "model_zero_count": self.model_zero_count,
            "model_sparsity": self.model_sparsity,
            "compression_factor": round_sig(self.compression_factor, 3),
        }


def round_sig(x: float, digits: int) -> float:
    """Round to a number of significant digits; infinities pass through."""
    if not math.isfinite(x) or x == 0.0:
        return x
    return float(f"{x:.{digits}g}")


def compression_factor(model_sparsity: float) -> float:
    """Idealized storage/compute reduction 1 / (1 - sparsity); a fully
    sparse model reports infinite compression."""
    if not 0.0 <= model_sparsity <= 1.0:
        raise ValidationError(f"model sparsity must be in [0, 1], got {model_sparsity}")
    if model_sparsity == 1.0:
        return math.inf
    return 1.0 / (1.0 - model_sparsity)


def _check_delta(value: float, name: str = "delta") -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name} must be in [0, 1], got {value}")
    return value


def plan_flat(model: Model, delta: float) -> SparsifyPlan:
    """One global threshold: the smallest per-layer span scaled by delta."""
    delta = _check_delta(delta)
    model.validate()
    _, smallest = min_span(model)
    tau = smallest * delta
    return SparsifyPlan(method=METHOD_FLAT, params={"delta": delta},
                        thresholds=[tau] * len(model.layers))


def plan_triangular(model: Model, delta_conv: float, delta_fc: float,
                    mode: str = "paper") -> SparsifyPlan:
    """Thresholds ramping from the first layer (span * delta_conv) to the
    last layer (span * delta_fc), with the interior schedule picked by
    mode (see TRIANGULAR_MODES)."""
    delta_conv = _check_delta(delta_conv, "delta_conv")
    delta_fc = _check_delta(delta_fc, "delta_fc")
    if mode not in TRIANGULAR_MODES:
        raise ValidationError(f"mode must be one of {TRIANGULAR_MODES}, got {mode!r}")
    model.validate()
    layer_count = len(model.layers)
    if layer_count < 2:
        raise ValidationError("triangular method needs at least 2 layers")
    t_min = layer_stats(model.layers[0]).span * delta_conv
    t_max = layer_stats(model.layers[-1]).span * delta_fc
    if mode == "paper" and t_max < t_min:
        raise ValidationError(
            f"triangular 'paper' mode requires the last-layer threshold "
            f"({t_max:g}) to be >= the first-layer threshold ({t_min:g}); "
            f"the interior ramp would otherwise go negative. Lower delta_conv, "
            f"raise delta_fc, or use mode='interpolated'.")
    thresholds = [0.0] * layer_count
    thresholds[0] = t_min
    thresholds[-1] = t_max
    for pos in range(1, layer_count - 1):
        l = pos + 1  # 1-based layer number
        if mode == "paper":
            thresholds[pos] = (t_max - t_min) / layer_count * (l - 2)
        else:
            thresholds[pos] = t_min + (t_max - t_min) * (l - 1) / (layer_count - 1)
    return SparsifyPlan(
        method=METHOD_TRIANGULAR,
        params={"delta_conv": delta_conv, "delta_fc": delta_fc, "mode": mode},
        thresholds=thresholds)


def plan_relative(model: Model, deltas: float | Sequence[float],
                  mode: str = "percentile") -> SparsifyPlan:
    """Per-layer thresholds: the delta_l magnitude percentile of each layer
    (mode='percentile') or each layer's span scaled by delta_l
    (mode='span'). A scalar delta broadcasts to every layer."""
    if mode not in RELATIVE_MODES:
        raise ValidationError(f"mode must be one of {RELATIVE_MODES}, got {mode!r}")
    model.validate()
    layer_count = len(model.layers)
    if isinstance(deltas, (int, float)):
        per_layer = [_check_delta(deltas)] * layer_count
        params_deltas: float | list[float] = per_layer[0]
    else:
        per_layer = [_check_delta(d, f"delta[{i}]") for i, d in enumerate(deltas)]
        if len(per_layer) != layer_count:
            raise ValidationError(
                f"got {len(per_layer)} deltas for {layer_count} layers")
        params_deltas = list(per_layer)
    thresholds = []
    for layer, d in zip(model.layers, per_layer):
        if mode == "percentile":
            thresholds.append(magnitude_percentile(layer, d))
        else:
            thresholds.append(layer_stats(layer).span * d)
    return SparsifyPlan(method=METHOD_RELATIVE,
                        params={"deltas": params_deltas, "mode": mode},
                        thresholds=thresholds)


def apply_plan(model: Model, plan: SparsifyPlan) -> Model:
    """Apply per-layer thresholds, returning a new Model; the input is not
    mutated. Surviving weights are bit-identical to the input."""
    if len(plan.thresholds) != len(model.layers):
        raise ValidationError(
            f"plan has {len(plan.thresholds)} thresholds for {len(model.layers)} layers")
    out_layers = []
    for layer, tau in zip(model.layers, plan.thresholds):
        data = backend.apply_threshold(layer.data, float(tau))
        out_layers.append(LayerTensor(name=layer.name, kind=layer.kind,
                                      shape=layer.shape, data=data))
    return Model(layers=out_layers)


def sparsity_report(model: Model) -> SparsityReport:
    """Exact zero counts per layer and model-wide, with the implied
    compression factor."""
    if not model.layers:
        raise ValidationError("model has no layers")
    entries = []
    total_weights = 0
    total_zeros = 0
    for layer in model.layers:
        zeros = int(np.count_nonzero(layer.data == 0.0)) if layer.count else 0
        entries.append(LayerSparsity(
            name=layer.name, weight_count=layer.count, zero_count=zeros,
            sparsity=zeros / layer.count if layer.count else 0.0))
        total_weights += layer.count
        total_zeros += zeros
    model_sparsity = total_zeros / total_weights
    return SparsityReport(
        per_layer=entries,
        model_weight_count=total_weights,
        model_zero_count=total_zeros,
        model_sparsity=model_sparsity,
        compression_factor=compression_factor(model_sparsity))


def aggregate_sparsity(layer_table: Iterable[tuple[int, float]]) -> float:
    """Model sparsity from (weight count, layer sparsity fraction) pairs:
    sum(count * fraction) / sum(count)."""
    total = 0.0
    zeros = 0.0
    for count, fraction in layer_table:
        if count <= 0:
            raise ValidationError(f"weight count must be positive, got {count}")
        _check_delta(fraction, "layer sparsity")
        total += count
        zeros += count * fraction
    if total == 0:
        raise ValidationError("empty layer table")
    return zeros / total


def sparsify_model(model: Model, method: str, *, delta: float | None = None,
                   delta_conv: float | None = None, delta_fc: float | None = None,
                   deltas: Sequence[float] | None = None,
                   mode: str | None = None) -> tuple[Model, SparsifyPlan]:
    """In-memory entry point: build the plan for a method and apply it in
    one call. Returns (sparsified model, plan)."""
    if method == METHOD_FLAT:
        if delta is None:
            raise ValidationError("flat method requires delta")
        plan = plan_flat(model, delta)
    elif method == METHOD_TRIANGULAR:
        dc = delta_conv if delta_conv is not None else delta
        df = delta_fc if delta_fc is not None else delta
        if dc is None or df is None:
            raise ValidationError("triangular method requires delta_conv and delta_fc")
        plan = plan_triangular(model, dc, df, mode=mode or "paper")
    elif method == METHOD_RELATIVE:
        chosen = deltas if deltas is not None else delta
        if chosen is None:
            raise ValidationError("relative method requires delta or deltas")
        plan = plan_relative(model, chosen, mode=mode or "percentile")
    else:
        raise ValidationError(f"unknown method {method!r}, expected one of {METHODS}")
    return apply_plan(model, plan), plan
