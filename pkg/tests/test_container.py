import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import sparsekit as sk
from sparsekit.container import MAGIC, VERSION

from conftest import make_layer, make_model


def write_read(model, tmp_path):
    path = tmp_path / "m.spwt"
    sk.write_model(model, path)
    return sk.read_model(path)


def test_round_trip_preserves_bits(tmp_path):
    rng = np.random.default_rng(1)
    model = make_model(rng, layer_count=4)
    # Denormals, negative zero, and extremes must all survive untouched.
    edge = np.array([0.0, -0.0, 1e-45, -1e-45, 3.4e38, -3.4e38, 1.0, -1.0],
                    dtype=np.float32)
    model.layers[0].data[:edge.size] = edge
    back = write_read(model, tmp_path)
    assert back.names == model.names
    for a, b in zip(model.layers, back.layers):
        assert a.kind == b.kind
        assert a.shape == b.shape
        assert a.data.tobytes() == b.data.tobytes()


def test_second_write_is_byte_identical(tmp_path):
    rng = np.random.default_rng(2)
    model = make_model(rng)
    p1, p2 = tmp_path / "a.spwt", tmp_path / "b.spwt"
    sk.write_model(model, p1)
    sk.write_model(sk.read_model(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


@settings(max_examples=40, deadline=None)
@given(st.lists(
    st.tuples(
        st.sampled_from([sk.LayerKind.CONV, sk.LayerKind.FULLY_CONNECTED]),
        st.lists(st.floats(width=32, allow_nan=False, allow_infinity=False),
                 min_size=1, max_size=24)),
    min_size=1, max_size=4))
def test_round_trip_property(tmp_path_factory, specs):
    layers = []
    for i, (kind, values) in enumerate(specs):
        arr = np.array(values, dtype=np.float32)
        shape = (arr.size, 1, 1, 1) if kind == sk.LayerKind.CONV else (arr.size, 1)
        layers.append(sk.LayerTensor.from_array(f"l{i}", kind, arr.reshape(shape)))
    model = sk.Model(layers)
    path = tmp_path_factory.mktemp("rt") / "m.spwt"
    sk.write_model(model, path)
    back = sk.read_model(path)
    for a, b in zip(model.layers, back.layers):
        assert a.data.tobytes() == b.data.tobytes()
        assert a.shape == b.shape and a.kind == b.kind


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.spwt"
    path.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(sk.FormatError, match="magic"):
        sk.read_model(path)


def test_bad_version(tmp_path):
    path = tmp_path / "bad.spwt"
    path.write_bytes(MAGIC + bytes([9]) + struct.pack("<I", 0))
    with pytest.raises(sk.FormatError, match="version"):
        sk.read_model(path)


def test_truncated_weights(tmp_path):
    rng = np.random.default_rng(3)
    path = tmp_path / "m.spwt"
    sk.write_model(make_model(rng), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-5])
    with pytest.raises(sk.TruncatedError):
        sk.read_model(path)


def test_truncated_header(tmp_path):
    path = tmp_path / "m.spwt"
    path.write_bytes(MAGIC + bytes([VERSION]))
    with pytest.raises(sk.TruncatedError, match="layer count"):
        sk.read_model(path)


def test_trailing_bytes(tmp_path):
    rng = np.random.default_rng(4)
    path = tmp_path / "m.spwt"
    sk.write_model(make_model(rng), path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(sk.FormatError, match="trailing"):
        sk.read_model(path)


def test_non_finite_weights_rejected(tmp_path):
    rng = np.random.default_rng(5)
    model = make_model(rng)
    model.layers[0].data[0] = np.float32(np.nan)
    with pytest.raises(sk.ValidationError, match="NaN"):
        sk.write_model(model, tmp_path / "m.spwt")
    # The same poison arriving from disk must be caught at load.
    model.layers[0].data[0] = 1.0
    path = tmp_path / "ok.spwt"
    sk.write_model(model, path)
    blob = bytearray(path.read_bytes())
    blob[-4:] = struct.pack("<f", np.inf)
    path.write_bytes(bytes(blob))
    with pytest.raises(sk.ValidationError):
        sk.read_model(path)


def test_unknown_kind_byte(tmp_path):
    payload = MAGIC + bytes([VERSION]) + struct.pack("<I", 1)
    payload += struct.pack("<H", 1) + b"x" + bytes([7, 2])
    payload += struct.pack("<II", 1, 1) + struct.pack("<f", 0.5)
    path = tmp_path / "m.spwt"
    path.write_bytes(payload)
    with pytest.raises(sk.ValidationError, match="kind"):
        sk.read_model(path)


def test_kind_rank_mismatch(tmp_path):
    # Conv kind declaring a rank-2 shape is structurally invalid.
    payload = MAGIC + bytes([VERSION]) + struct.pack("<I", 1)
    payload += struct.pack("<H", 1) + b"x" + bytes([0, 2])
    payload += struct.pack("<II", 1, 1) + struct.pack("<f", 0.5)
    path = tmp_path / "m.spwt"
    path.write_bytes(payload)
    with pytest.raises(sk.ValidationError, match="rank"):
        sk.read_model(path)


def test_duplicate_names_rejected(tmp_path):
    rng = np.random.default_rng(6)
    layer = make_layer(rng, name="dup")
    model = sk.Model([layer, make_layer(rng, name="dup")])
    with pytest.raises(sk.ValidationError, match="duplicate"):
        sk.write_model(model, tmp_path / "m.spwt")


def test_empty_model_rejected(tmp_path):
    with pytest.raises(sk.ValidationError):
        sk.write_model(sk.Model(layers=[]), tmp_path / "m.spwt")


def test_layer_lookup():
    rng = np.random.default_rng(7)
    model = make_model(rng, layer_count=2)
    assert model.layer("layer2").name == "layer2"
    with pytest.raises(KeyError):
        model.layer("missing")
    assert model.weight_count == sum(lt.count for lt in model.layers)
    assert len(model) == 2


def test_utf8_names_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    layer = make_layer(rng, name="convolución/第一")
    back = write_read(sk.Model([layer]), tmp_path)
    assert back.names == ["convolución/第一"]
