import numpy as np
import pytest

import sparsekit as sk
from sparsekit.infer import _same_padding, bind

from conftest import make_layer


def conv_model(weights, name="c"):
    return sk.Model([sk.LayerTensor.from_array(name, sk.LayerKind.CONV, weights)])


def dense_model(weights, name="d"):
    return sk.Model([sk.LayerTensor.from_array(name, sk.LayerKind.FULLY_CONNECTED, weights)])


def conv_oracle(x, w, stride, pads):
    """Direct nested-loop cross-correlation in float64, cast once."""
    pt, pb, pl, pr = pads
    xp = np.pad(x.astype(np.float64), ((0, 0), (0, 0), (pt, pb), (pl, pr)))
    n, c, h, wd = xp.shape
    f, _, kh, kw = w.shape
    oh = (h - kh) // stride + 1
    ow = (wd - kw) // stride + 1
    out = np.zeros((n, f, oh, ow))
    for b in range(n):
        for fo in range(f):
            for i in range(oh):
                for j in range(ow):
                    patch = xp[b, :, i * stride:i * stride + kh, j * stride:j * stride + kw]
                    out[b, fo, i, j] = (patch * w[fo].astype(np.float64)).sum()
    return out.astype(np.float32)


# ---------------------------------------------------------------- manifest

def test_manifest_requires_known_ops():
    with pytest.raises(sk.ValidationError, match="unknown op"):
        sk.manifest_from_dict({"layers": [{"op": "groupnorm"}]})
    with pytest.raises(sk.ValidationError, match="layers"):
        sk.manifest_from_dict({"layers": []})
    with pytest.raises(sk.ValidationError, match="weights"):
        sk.manifest_from_dict({"layers": [{"op": "dense"}]})
    with pytest.raises(sk.ValidationError, match="padding"):
        sk.manifest_from_dict({"layers": [
            {"op": "conv2d", "weights": "c", "padding": "reflect"}]})
    with pytest.raises(sk.ValidationError, match="window"):
        sk.manifest_from_dict({"layers": [{"op": "maxpool2d", "window": 0, "stride": 1}]})


def test_manifest_json_round_trip(tmp_path):
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "dense", "weights": "d", "bias": [0.0, 1.0]},
        {"op": "softmax"},
    ]})
    path = tmp_path / "arch.json"
    sk.save_manifest(manifest, path)
    back = sk.load_manifest(path)
    assert back.layers == manifest.layers


# ------------------------------------------------------------ shape checks

def test_bind_rejects_missing_weights():
    model = dense_model(np.ones((2, 3), dtype=np.float32))
    manifest = sk.manifest_from_dict({"layers": [{"op": "dense", "weights": "ghost"}]})
    with pytest.raises(sk.ValidationError, match="no such weights"):
        bind(model, manifest, (3,))


def test_bind_rejects_shape_mismatch():
    model = dense_model(np.ones((2, 3), dtype=np.float32))
    manifest = sk.manifest_from_dict({"layers": [{"op": "dense", "weights": "d"}]})
    with pytest.raises(sk.ValidationError, match="expect 3 inputs"):
        bind(model, manifest, (4,))
    with pytest.raises(sk.ValidationError, match="flatten"):
        bind(model, manifest, (1, 2, 2))


def test_bind_rejects_channel_mismatch():
    model = conv_model(np.ones((2, 3, 2, 2), dtype=np.float32))
    manifest = sk.manifest_from_dict({"layers": [{"op": "conv2d", "weights": "c"}]})
    with pytest.raises(sk.ValidationError, match="channels"):
        bind(model, manifest, (1, 4, 4))


def test_bind_rejects_kernel_too_big():
    model = conv_model(np.ones((1, 1, 5, 5), dtype=np.float32))
    manifest = sk.manifest_from_dict({"layers": [{"op": "conv2d", "weights": "c"}]})
    with pytest.raises(sk.ValidationError, match="does not fit"):
        bind(model, manifest, (1, 4, 4))


def test_bind_rejects_bad_bias_length():
    model = dense_model(np.ones((2, 3), dtype=np.float32))
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "dense", "weights": "d", "bias": [1.0, 2.0, 3.0]}]})
    with pytest.raises(sk.ValidationError, match="bias"):
        bind(model, manifest, (3,))


def test_output_shape_tracking():
    model = sk.Model([
        sk.LayerTensor.from_array("c", sk.LayerKind.CONV,
                                  np.ones((6, 3, 3, 3), dtype=np.float32)),
        sk.LayerTensor.from_array("d", sk.LayerKind.FULLY_CONNECTED,
                                  np.ones((4, 54), dtype=np.float32)),
    ])
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "conv2d", "weights": "c", "stride": 1, "padding": "same"},
        {"op": "maxpool2d", "window": 2, "stride": 2},
        {"op": "flatten"},
        {"op": "dense", "weights": "d"},
        {"op": "softmax"},
    ]})
    pipeline = bind(model, manifest, (3, 7, 7))  # same conv: 7x7 -> 7x7, pool -> 3x3
    assert pipeline.output_shape == (4,)


# ------------------------------------------------------------- op behavior

def test_same_padding_ceil_and_tail_heavy():
    # 5 wide, kernel 3, stride 2: output ceil(5/2)=3 needs 2 extra, split 1/1.
    assert _same_padding(5, 3, 2) == (1, 1)
    # 4 wide, kernel 2, stride 1: 1 extra pad goes to the bottom/right side.
    assert _same_padding(4, 2, 1) == (0, 1)
    assert _same_padding(8, 1, 1) == (0, 0)
    # Kernel larger than the input: total of 4 splits evenly.
    assert _same_padding(2, 5, 1) == (2, 2)
    # Odd total: 3 extra for a 4-wide stride-1 kernel-4 conv, tail-heavy.
    assert _same_padding(4, 4, 1) == (1, 2)


@pytest.mark.parametrize("stride,padding", [(1, "valid"), (2, "valid"),
                                            (1, "same"), (2, "same")])
def test_conv2d_matches_loop_oracle(stride, padding):
    rng = np.random.default_rng(50)
    w = rng.normal(0, 0.5, (3, 2, 3, 3)).astype(np.float32)
    x = rng.normal(0, 1, (4, 2, 7, 6)).astype(np.float32)
    model = conv_model(w)
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "conv2d", "weights": "c", "stride": stride, "padding": padding}]})
    got = bind(model, manifest, x.shape[1:]).run(x)
    if padding == "same":
        pads = _same_padding(7, 3, stride) + _same_padding(6, 3, stride)
    else:
        pads = (0, 0, 0, 0)
    want = conv_oracle(x, w, stride, pads)
    assert got.shape == want.shape
    np.testing.assert_allclose(got, want, rtol=1e-6, atol=1e-7)


def test_conv2d_bias_broadcasts_per_filter():
    w = np.zeros((2, 1, 1, 1), dtype=np.float32)
    model = conv_model(w)
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "conv2d", "weights": "c", "bias": [1.5, -2.0]}]})
    out = bind(model, manifest, (1, 2, 2)).run(np.ones((1, 1, 2, 2), dtype=np.float32))
    assert (out[0, 0] == 1.5).all() and (out[0, 1] == -2.0).all()


def test_dense_matches_matmul():
    rng = np.random.default_rng(51)
    w = rng.normal(0, 1, (4, 6)).astype(np.float32)
    x = rng.normal(0, 1, (5, 6)).astype(np.float32)
    model = dense_model(w)
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "dense", "weights": "d", "bias": [0.0, 1.0, -1.0, 0.5]}]})
    got = bind(model, manifest, (6,)).run(x)
    want = (x.astype(np.float64) @ w.T.astype(np.float64)).astype(np.float32) \
        + np.array([0.0, 1.0, -1.0, 0.5], dtype=np.float32)
    np.testing.assert_array_equal(got, want)


def test_maxpool_odd_input_drops_tail():
    x = np.arange(25, dtype=np.float32).reshape(1, 1, 5, 5)
    model = sk.Model([make_layer(np.random.default_rng(0), name="unused")])
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "maxpool2d", "window": 2, "stride": 2}]})
    out = bind(model, manifest, (1, 5, 5)).run(x)
    np.testing.assert_array_equal(out[0, 0], [[6.0, 8.0], [16.0, 18.0]])


def test_relu_and_flatten_order():
    x = np.array([[[[-1.0, 2.0], [3.0, -4.0]],
                   [[5.0, -6.0], [-7.0, 8.0]]]], dtype=np.float32)
    model = sk.Model([make_layer(np.random.default_rng(0), name="unused")])
    manifest = sk.manifest_from_dict({"layers": [{"op": "relu"}, {"op": "flatten"}]})
    out = bind(model, manifest, (2, 2, 2)).run(x)
    # Row-major (channel, row, column) order after clamping negatives.
    np.testing.assert_array_equal(out[0], [0, 2, 3, 0, 5, 0, 0, 8])


def test_softmax_rows_sum_to_one_and_handle_large_scores():
    x = np.array([[1000.0, 1001.0, 999.0], [-1000.0, -1000.0, -1000.0]],
                 dtype=np.float32)
    model = sk.Model([make_layer(np.random.default_rng(0), name="unused")])
    manifest = sk.manifest_from_dict({"layers": [{"op": "softmax"}]})
    out = bind(model, manifest, (3,)).run(x)
    assert np.isfinite(out).all()
    np.testing.assert_allclose(out.sum(axis=1), [1.0, 1.0], atol=1e-6)
    np.testing.assert_allclose(out[1], [1 / 3] * 3, atol=1e-7)


# --------------------------------------------------------------- evaluate

def test_forward_runs_one_sample(separable):
    model, manifest, data = separable
    probs = sk.forward(model, manifest, data.inputs[0])
    assert probs.shape == (2,)
    assert abs(float(probs.sum()) - 1.0) < 1e-6


def test_evaluate_counts_top1(separable):
    model, manifest, data = separable
    assert sk.evaluate(model, manifest, data) == 1.0


def test_argmax_ties_take_lowest_index():
    w = np.zeros((3, 2), dtype=np.float32)
    model = dense_model(w)
    manifest = sk.manifest_from_dict({"layers": [{"op": "dense", "weights": "d"}]})
    inputs = np.ones((4, 2), dtype=np.float32)
    labels = np.array([0, 0, 1, 2], dtype=np.uint16)
    data = sk.Dataset(inputs=inputs, labels=labels, class_count=3)
    # All scores are equal, so every prediction resolves to class 0.
    assert sk.evaluate(model, manifest, data) == 0.5


def test_evaluate_rejects_class_count_mismatch(separable):
    model, manifest, data = separable
    bad = sk.Dataset(inputs=data.inputs, labels=data.labels, class_count=3)
    with pytest.raises(sk.ValidationError, match="classes"):
        sk.evaluate(model, manifest, bad)


def test_evaluate_rejects_empty_dataset(separable):
    model, manifest, _ = separable
    empty = sk.Dataset(inputs=np.empty((0, 4), dtype=np.float32),
                       labels=np.empty((0,), dtype=np.uint16), class_count=2)
    with pytest.raises(sk.ValidationError, match="no samples"):
        sk.evaluate(model, manifest, empty)


def test_evaluate_independent_of_thread_count(lenet, monkeypatch):
    model, manifest, data = lenet
    results = []
    for threads in ("1", "3", "16"):
        monkeypatch.setenv("SPARSEKIT_THREADS", threads)
        results.append(sk.evaluate(model, manifest, data))
    assert results[0] == results[1] == results[2]


def test_normalized_accuracy():
    assert sk.normalized_accuracy(0.5, 1.0) == 0.5
    assert sk.normalized_accuracy(0.97, 0.97) == 1.0
    assert sk.normalized_accuracy(0.99, 0.9) > 1.0
    with pytest.raises(sk.ValidationError):
        sk.normalized_accuracy(0.5, 0.0)
