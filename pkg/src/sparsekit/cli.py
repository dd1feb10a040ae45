"""Command-line entry point.

Subcommands cover the full workflow: stats, sparsify, report, eval, sweep,
finetune. Exit codes: 0 success, 1 runtime/validation failure, 2 usage
error. Output files are written to a temp file and renamed on success, so
a failing command never leaves a partial file behind. SPARSEKIT_THREADS
caps evaluation parallelism (0 = auto).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

from . import __version__
from .container import read_model, write_model
from .dataset import read_dataset
from .errors import SparsekitError
from .infer import evaluate, load_manifest, normalized_accuracy
from .sparsify import (
    METHODS,
    RELATIVE_MODES,
    TRIANGULAR_MODES,
    round_sig,
    sparsify_model,
    sparsity_report,
)
from .stats import DEFAULT_HISTOGRAM_BINS, layer_stats, weight_histogram
from .sweep import DEFAULT_FINETUNE_STEP, DEFAULT_GATE, finetune_layers, sweep

GRID_TOLERANCE = 1e-9


def _atomic_write_text(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sparsekit-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_model(model, path: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".sparsekit-", suffix=".tmp")
    os.close(fd)
    try:
        write_model(model, tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        _atomic_write_text(out, text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def parse_grid(text: str) -> list[float]:
    """start:end:step, endpoints inclusive within 1e-9."""
    parts = text.split(":")
    if len(parts) != 3:
        raise ValueError(f"grid must be start:end:step, got {text!r}")
    try:
        start, end, step = (float(p) for p in parts)
    except ValueError:
        raise ValueError(f"grid values must be numbers, got {text!r}")
    if step <= 0:
        if start == end:
            return [start]
        raise ValueError(f"grid step must be positive, got {step}")
    if end < start:
        raise ValueError(f"grid end {end} is below start {start}")
    values = []
    i = 0
    while True:
        v = start + i * step
        if v > end + GRID_TOLERANCE:
            break
        values.append(round(v, 10))
        i += 1
    return values


def _check_fraction(parser: argparse.ArgumentParser, value: float | None, flag: str) -> None:
    if value is not None and not 0.0 <= value <= 1.0:
        parser.error(f"{flag} must be in [0, 1], got {value}")


def _stats_payload(model, bins: int) -> list[dict]:
    payload = []
    for layer in model.layers:
        st = layer_stats(layer)
        hist = weight_histogram(layer, bins)
        payload.append({
            "name": st.name, "count": st.count, "min": st.min, "max": st.max,
            "span": st.span, "zero_count": st.zero_count,
            "histogram": {"bin_count": hist.bin_count, "lo": hist.lo,
                          "hi": hist.hi, "counts": hist.counts},
        })
    return payload


def _stats_csv(payload: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["name", "count", "min", "max", "span", "zero_count",
                     "hist_lo", "hist_hi", "hist_counts"])
    for entry in payload:
        hist = entry["histogram"]
        writer.writerow([entry["name"], entry["count"], entry["min"], entry["max"],
                         entry["span"], entry["zero_count"], hist["lo"], hist["hi"],
                         " ".join(str(c) for c in hist["counts"])])
    return buf.getvalue()


def _report_csv(report) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["name", "weight_count", "zero_count", "sparsity", "compression_factor"])
    for e in report.per_layer:
        writer.writerow([e.name, e.weight_count, e.zero_count, f"{e.sparsity:.6f}", ""])
    writer.writerow(["TOTAL", report.model_weight_count, report.model_zero_count,
                     f"{report.model_sparsity:.6f}",
                     f"{round_sig(report.compression_factor, 3):g}"])
    return buf.getvalue()


def cmd_stats(args, parser) -> int:
    if args.bins < 1:
        parser.error(f"--bins must be >= 1, got {args.bins}")
    model = read_model(args.model)
    payload = _stats_payload(model, args.bins)
    if args.format == "json":
        _emit(json.dumps({"layers": payload}, indent=2) + "\n", args.out)
    else:
        _emit(_stats_csv(payload), args.out)
    return 0


def cmd_report(args, parser) -> int:
    model = read_model(args.model)
    report = sparsity_report(model)
    if args.format == "json":
        _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    else:
        _emit(_report_csv(report), args.out)
    return 0


def _method_params(args, parser) -> dict:
    _check_fraction(parser, args.delta, "--delta")
    _check_fraction(parser, args.delta_conv, "--delta-conv")
    _check_fraction(parser, args.delta_fc, "--delta-fc")
    deltas = None
    if args.deltas:
        try:
            deltas = [float(p) for p in args.deltas.split(",")]
        except ValueError:
            parser.error(f"--deltas must be comma-separated numbers, got {args.deltas!r}")
        for i, d in enumerate(deltas):
            _check_fraction(parser, d, f"--deltas[{i}]")
    if args.method == "flat" and args.delta is None:
        parser.error("--method flat requires --delta")
    if args.method == "triangular" and (args.delta_conv is None or args.delta_fc is None) \
            and args.delta is None:
        parser.error("--method triangular requires --delta-conv and --delta-fc (or --delta)")
    if args.method == "relative" and args.delta is None and deltas is None:
        parser.error("--method relative requires --delta or --deltas")
    if args.mode is not None:
        allowed = TRIANGULAR_MODES if args.method == "triangular" else RELATIVE_MODES
        if args.method == "flat":
            parser.error("--mode does not apply to the flat method")
        if args.mode not in allowed:
            parser.error(f"--mode for {args.method} must be one of {', '.join(allowed)}")
    return {"delta": args.delta, "delta_conv": args.delta_conv,
            "delta_fc": args.delta_fc, "deltas": deltas, "mode": args.mode}


def cmd_sparsify(args, parser) -> int:
    params = _method_params(args, parser)
    model = read_model(args.model)
    sparsified, plan = sparsify_model(model, args.method, **params)
    report = sparsity_report(sparsified)
    _atomic_write_model(sparsified, args.out)
    _atomic_write_text(args.out + ".plan.json", plan.to_json() + "\n")
    if args.format == "json":
        sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        sys.stdout.write(_report_csv(report))
    return 0


def cmd_eval(args, parser) -> int:
    model = read_model(args.model)
    manifest = load_manifest(args.manifest)
    data = read_dataset(args.dataset)
    accuracy = evaluate(model, manifest, data)
    if args.baseline_model:
        baseline = evaluate(read_model(args.baseline_model), manifest, data)
    else:
        baseline = accuracy
    sys.stdout.write(f"accuracy: {accuracy:.6f}\n")
    sys.stdout.write(f"normalized_accuracy: {normalized_accuracy(accuracy, baseline):.6f}\n")
    return 0


def cmd_sweep(args, parser) -> int:
    try:
        grid = parse_grid(args.grid)
    except ValueError as exc:
        parser.error(str(exc))
    for d in grid:
        _check_fraction(parser, d, "grid value")
    _check_fraction(parser, args.delta_conv, "--delta-conv")
    _check_fraction(parser, args.delta_fc, "--delta-fc")
    if not 0.0 < args.gate:
        parser.error(f"--gate must be > 0, got {args.gate}")
    if args.mode is not None:
        allowed = TRIANGULAR_MODES if args.method == "triangular" else RELATIVE_MODES
        if args.method == "flat":
            parser.error("--mode does not apply to the flat method")
        if args.mode not in allowed:
            parser.error(f"--mode for {args.method} must be one of {', '.join(allowed)}")
    model = read_model(args.model)
    manifest = load_manifest(args.manifest)
    data = read_dataset(args.dataset)
    curve = sweep(model, manifest, data, args.method, grid, gate=args.gate,
                  mode=args.mode, delta_conv=args.delta_conv, delta_fc=args.delta_fc)
    _emit(curve.to_csv(), args.out)
    sys.stdout.write(f"baseline_accuracy: {curve.baseline_accuracy:.6f}\n")
    if curve.best is None:
        sys.stdout.write(f"best: none qualifies (gate {args.gate:g})\n")
    else:
        b = curve.best
        sys.stdout.write(
            f"best: delta={b.delta:g} s_m={b.model_sparsity:.6f} "
            f"normalized_accuracy={b.normalized_accuracy:.6f} "
            f"compression_factor={b.compression_factor:.4g}\n")
    return 0


def cmd_finetune(args, parser) -> int:
    _check_fraction(parser, args.base, "--base")
    if not 0.0 < args.step < 1.0:
        parser.error(f"--step must be in (0, 1), got {args.step}")
    if not 0.0 < args.gate:
        parser.error(f"--gate must be > 0, got {args.gate}")
    model = read_model(args.model)
    manifest = load_manifest(args.manifest)
    data = read_dataset(args.dataset)
    result = finetune_layers(model, manifest, data, args.base,
                             step=args.step, gate=args.gate)
    _emit(result.to_csv(), args.out)
    if args.out_model:
        from .sparsify import apply_plan, plan_relative
        plan = plan_relative(model, result.deltas, mode="percentile")
        _atomic_write_model(apply_plan(model, plan), args.out_model)
        _atomic_write_text(args.out_model + ".plan.json", plan.to_json() + "\n")
    sys.stdout.write(
        f"model_sparsity: {result.model_sparsity:.6f} "
        f"(baseline {result.baseline_sparsity:.6f} at delta {args.base:g})\n")
    sys.stdout.write(f"normalized_accuracy: {result.normalized_accuracy:.6f}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sparsekit",
        description="Retraining-free CNN weight sparsification toolkit.",
        epilog="SPARSEKIT_THREADS caps evaluation parallelism (0 = auto); "
               "SPARSEKIT_BACKEND forces the python or cython kernels.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_model(p):
        p.add_argument("--model", required=True, help="SPWT weight container")

    def add_eval_inputs(p):
        add_model(p)
        p.add_argument("--manifest", required=True, help="architecture manifest JSON")
        p.add_argument("--dataset", required=True, help="SPDS dataset")

    def add_format(p):
        p.add_argument("--format", choices=("json", "csv"), default="json")

    p = sub.add_parser("stats", help="per-layer statistics and histograms")
    add_model(p)
    p.add_argument("--bins", type=int, default=DEFAULT_HISTOGRAM_BINS,
                   help=f"histogram bin count (default {DEFAULT_HISTOGRAM_BINS})")
    add_format(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sparsify", help="build a plan, apply it, save the result")
    add_model(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--delta", type=float)
    p.add_argument("--delta-conv", type=float)
    p.add_argument("--delta-fc", type=float)
    p.add_argument("--deltas", help="comma-separated per-layer values (relative method)")
    p.add_argument("--mode", help="triangular: paper|interpolated; relative: percentile|span")
    p.add_argument("--out", required=True, help="output SPWT path; the resolved plan "
                   "is saved alongside as <out>.plan.json")
    add_format(p)
    p.set_defaults(func=cmd_sparsify)

    p = sub.add_parser("report", help="sparsity report for a saved model")
    add_model(p)
    add_format(p)
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("eval", help="top-1 accuracy on a dataset")
    add_eval_inputs(p)
    p.add_argument("--baseline-model", help="unsparsified SPWT for normalized accuracy")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="sparsity/accuracy trade-off curve")
    add_eval_inputs(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--grid", required=True, help="delta grid as start:end:step, inclusive")
    p.add_argument("--gate", type=float, default=DEFAULT_GATE,
                   help=f"normalized accuracy gate (default {DEFAULT_GATE})")
    p.add_argument("--mode", help="triangular: paper|interpolated; relative: percentile|span")
    p.add_argument("--delta-conv", type=float, help="pin the triangular first-layer fraction")
    p.add_argument("--delta-fc", type=float, help="pin the triangular last-layer fraction")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("finetune", help="per-layer search for extra sparsity under the gate")
    add_eval_inputs(p)
    p.add_argument("--base", type=float, required=True, help="starting per-layer delta")
    p.add_argument("--step", type=float, default=DEFAULT_FINETUNE_STEP,
                   help=f"candidate grid step (default {DEFAULT_FINETUNE_STEP})")
    p.add_argument("--gate", type=float, default=DEFAULT_GATE,
                   help=f"normalized accuracy gate (default {DEFAULT_GATE})")
    p.add_argument("--out", help="CSV output (default stdout)")
    p.add_argument("--out-model", help="also save the fine-tuned model here")
    p.set_defaults(func=cmd_finetune)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except SparsekitError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
