"""Shared fixtures plus the acceptance-summary report.

Tests marked @pytest.mark.acceptance(num=..., summary=...) feed a final
one-line-per-criterion PASS/FAIL table printed after the run.
"""

from __future__ import annotations

import os

import numpy as np
import pytest

import sparsekit as sk

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")

_acceptance_results: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers",
        "acceptance(num, summary): tracked acceptance criterion, reported "
        "as a PASS/FAIL line after the run")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or report.when != "call":
        return
    num = marker.kwargs["num"]
    summary = marker.kwargs["summary"]
    status = "PASS" if report.passed else "FAIL"
    # A criterion may be split across tests; any failing part fails the line.
    if _acceptance_results.get(num, ("", "PASS"))[1] == "PASS":
        _acceptance_results[num] = (summary, status)


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for num in sorted(_acceptance_results):
        summary, status = _acceptance_results[num]
        terminalreporter.write_line(f"[{status}] criterion {num}: {summary}")


def fixture_path(name: str) -> str:
    return os.path.join(FIXTURE_DIR, name)


@pytest.fixture(scope="session")
def separable():
    model = sk.read_model(fixture_path("separable.spwt"))
    manifest = sk.load_manifest(fixture_path("separable.manifest.json"))
    data = sk.read_dataset(fixture_path("separable.spds"))
    return model, manifest, data


@pytest.fixture(scope="session")
def lenet():
    model = sk.read_model(fixture_path("lenet.spwt"))
    manifest = sk.load_manifest(fixture_path("lenet.manifest.json"))
    data = sk.read_dataset(fixture_path("lenet.spds"))
    return model, manifest, data


def make_layer(rng: np.random.Generator, name: str = "layer",
               kind: sk.LayerKind | None = None,
               shape: tuple[int, ...] | None = None,
               scale: float = 0.5) -> sk.LayerTensor:
    """Random layer; shape defaults to a small random conv or fc tensor."""
    if kind is None:
        kind = sk.LayerKind(int(rng.integers(0, 2)))
    if shape is None:
        if kind == sk.LayerKind.CONV:
            shape = tuple(int(d) for d in rng.integers(1, 5, size=4))
        else:
            shape = tuple(int(d) for d in rng.integers(1, 17, size=2))
    values = rng.normal(0.0, scale, shape).astype(np.float32)
    return sk.LayerTensor.from_array(name, kind, values)


def make_model(rng: np.random.Generator, layer_count: int = 3,
               ascending_span: bool = False) -> sk.Model:
    """Random model; ascending_span plants exact extremes so each layer's
    span strictly grows with depth (the last dominates the first)."""
    layers = []
    for i in range(layer_count):
        kind = sk.LayerKind.CONV if i < layer_count - 1 else sk.LayerKind.FULLY_CONNECTED
        if ascending_span:
            scale = np.float32(0.25 * (i + 1))
            shape = (2, 6) if kind == sk.LayerKind.FULLY_CONNECTED else (2, 1, 2, 3)
            values = rng.uniform(-0.9 * scale, 0.9 * scale, shape).astype(np.float32)
            values.flat[0] = scale
            values.flat[1] = -scale
            layers.append(sk.LayerTensor.from_array(f"layer{i + 1}", kind, values))
        else:
            layers.append(make_layer(rng, name=f"layer{i + 1}", kind=kind))
    return sk.Model(layers)
