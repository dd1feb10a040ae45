"""Trade-off sweeps and the per-layer fine-tuning search.

A sweep walks a grid of sparsification strengths for one method, recording
model sparsity and normalized accuracy at each point plus the best
gate-feasible point. Fine-tuning starts every layer of the relative
(percentile) method at a base strength and, visiting layers from largest
to smallest, fixes each layer at the highest candidate strength that keeps
normalized accuracy at or above the gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .container import Model
from .dataset import Dataset
from .errors import ValidationError
from .infer import ArchManifest, evaluate, normalized_accuracy
from .sparsify import (
    METHOD_FLAT,
    METHOD_RELATIVE,
    METHOD_TRIANGULAR,
    METHODS,
    SparsifyPlan,
    apply_plan,
    compression_factor,
    plan_flat,
    plan_relative,
    plan_triangular,
    sparsity_report,
)

SWEEP_CSV_HEADER = "method,delta,s_m,accuracy,normalized_accuracy,compression_factor"
FINETUNE_CSV_HEADER = "layer,params,delta,sparsified_pct"

FINETUNE_DELTA_CAP = 0.95
DEFAULT_GATE = 0.95
DEFAULT_FINETUNE_STEP = 0.05


@dataclass
class TradeoffPoint:
    method: str
    delta: float
    model_sparsity: float
    accuracy: float
    normalized_accuracy: float
    compression_factor: float
    plan: SparsifyPlan

    def csv_row(self) -> str:
        return (f"{self.method},{self.delta:g},{self.model_sparsity:.6f},"
                f"{self.accuracy:.6f},{self.normalized_accuracy:.6f},"
                f"{self.compression_factor:.4g}")


@dataclass
class TradeoffCurve:
    points: list[TradeoffPoint]
    baseline_accuracy: float
    gate: float
    best: TradeoffPoint | None  # max sparsity among gate-feasible points

    def to_csv(self) -> str:
        lines = [SWEEP_CSV_HEADER]
        lines.extend(p.csv_row() for p in self.points)
        return "\n".join(lines) + "\n"


@dataclass
class LayerFinetune:
    name: str
    weight_count: int
    delta: float
    sparsity: float


@dataclass
class FinetuneResult:
    layers: list[LayerFinetune]          # network order
    deltas: list[float]                  # network order, one per layer
    model_sparsity: float
    accuracy: float
    normalized_accuracy: float
    baseline_sparsity: float             # sparsity of the uniform base config
    evaluations: int = field(default=0)

    def to_csv(self) -> str:
        lines = [FINETUNE_CSV_HEADER]
        for e in self.layers:
            lines.append(f"{e.name},{e.weight_count},{e.delta:g},{100.0 * e.sparsity:.1f}%")
        total = sum(e.weight_count for e in self.layers)
        lines.append(f"TOTAL,{total},,{100.0 * self.model_sparsity:.1f}%")
        return "\n".join(lines) + "\n"


def _build_plan(model: Model, method: str, delta: float, mode: str | None,
                delta_conv: float | None = None, delta_fc: float | None = None) -> SparsifyPlan:
    if method == METHOD_FLAT:
        return plan_flat(model, delta)
    if method == METHOD_TRIANGULAR:
        dc = delta if delta_conv is None else delta_conv
        df = delta if delta_fc is None else delta_fc
        return plan_triangular(model, dc, df, mode=mode or "paper")
    if method == METHOD_RELATIVE:
        return plan_relative(model, delta, mode=mode or "percentile")
    raise ValidationError(f"unknown method {method!r}, expected one of {METHODS}")


def sweep(model: Model, manifest: ArchManifest, data: Dataset, method: str,
          grid: list[float], gate: float = DEFAULT_GATE, mode: str | None = None,
          delta_conv: float | None = None, delta_fc: float | None = None) -> TradeoffCurve:
    """Evaluate one method across a grid of delta values, in grid order.
    For the triangular method the grid delta feeds both endpoint fractions
    unless delta_conv/delta_fc pin one of them."""
    if not grid:
        raise ValidationError("grid must be non-empty")
    for d in grid:
        if not 0.0 <= d <= 1.0:
            raise ValidationError(f"grid value {d} outside [0, 1]")
    baseline = evaluate(model, manifest, data)
    if baseline <= 0.0:
        raise ValidationError("baseline accuracy is 0; normalized accuracy is undefined")
    points = []
    best: TradeoffPoint | None = None
    for delta in grid:
        plan = _build_plan(model, method, delta, mode, delta_conv, delta_fc)
        sparsified = apply_plan(model, plan)
        report = sparsity_report(sparsified)
        accuracy = evaluate(sparsified, manifest, data)
        point = TradeoffPoint(
            method=method,
            delta=delta,
            model_sparsity=report.model_sparsity,
            accuracy=accuracy,
            normalized_accuracy=normalized_accuracy(accuracy, baseline),
            compression_factor=report.compression_factor,
            plan=plan)
        points.append(point)
        if point.normalized_accuracy >= gate and (
                best is None or point.model_sparsity > best.model_sparsity):
            best = point
    return TradeoffCurve(points=points, baseline_accuracy=baseline, gate=gate, best=best)


def _candidate_deltas(step: float, cap: float = FINETUNE_DELTA_CAP) -> list[float]:
    count = math.floor(cap / step + 1e-9)
    return [round(i * step, 10) for i in range(count + 1)]


def finetune_layers(model: Model, manifest: ArchManifest, data: Dataset,
                    base_delta: float, step: float = DEFAULT_FINETUNE_STEP,
                    gate: float = DEFAULT_GATE) -> FinetuneResult:
    """Single-pass per-layer search over the relative (percentile) method.

    Every layer starts at base_delta. Layers are visited in descending
    weight-count order (ties by position); each is fixed at the largest
    candidate in {0, step, 2*step, ... <= 0.95} whose full-model evaluation
    stays at or above the gate, or 0 when none does. If the end state
    still misses the gate, all layers fall back to 0 (an unchanged model).
    """
    if not 0.0 <= base_delta <= 1.0:
        raise ValidationError(f"base_delta must be in [0, 1], got {base_delta}")
    if not 0.0 < step < 1.0:
        raise ValidationError(f"step must be in (0, 1), got {step}")
    if gate <= 0.0:
        raise ValidationError(f"gate must be > 0, got {gate}")
    baseline = evaluate(model, manifest, data)
    if baseline <= 0.0:
        raise ValidationError("baseline accuracy is 0; normalized accuracy is undefined")

    layer_count = len(model.layers)
    deltas = [base_delta] * layer_count
    evaluations = 0

    def _normalized(config: list[float]) -> float:
        nonlocal evaluations
        plan = plan_relative(model, config, mode="percentile")
        accuracy = evaluate(apply_plan(model, plan), manifest, data)
        evaluations += 1
        return normalized_accuracy(accuracy, baseline)

    baseline_sparsity = sparsity_report(
        apply_plan(model, plan_relative(model, deltas, mode="percentile"))).model_sparsity

    visit_order = sorted(range(layer_count),
                         key=lambda i: (-model.layers[i].count, i))
    candidates = _candidate_deltas(step)
    for idx in visit_order:
        chosen = 0.0
        for cand in reversed(candidates):
            trial = list(deltas)
            trial[idx] = cand
            if _normalized(trial) >= gate:
                chosen = cand
                break
        deltas[idx] = chosen

    final_plan = plan_relative(model, deltas, mode="percentile")
    final_model = apply_plan(model, final_plan)
    accuracy = evaluate(final_model, manifest, data)
    evaluations += 1
    norm = normalized_accuracy(accuracy, baseline)
    if norm < gate:
        # Unreachable when accuracy responds monotonically to per-layer
        # sparsity; kept so the result invariant holds unconditionally.
        deltas = [0.0] * layer_count
        final_model = model
        accuracy = baseline
        norm = 1.0

    report = sparsity_report(final_model)
    layers = [LayerFinetune(name=e.name, weight_count=e.weight_count,
                            delta=deltas[i], sparsity=e.sparsity)
              for i, e in enumerate(report.per_layer)]
    return FinetuneResult(
        layers=layers,
        deltas=deltas,
        model_sparsity=report.model_sparsity,
        accuracy=accuracy,
        normalized_accuracy=norm,
        baseline_sparsity=baseline_sparsity,
        evaluations=evaluations)
