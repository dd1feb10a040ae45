#!/usr/bin/env python3
"""Generate the binary test fixtures under tests/fixtures/.

Two fixture families are produced, each as a .spwt model, a .spds dataset,
and a .manifest.json architecture file:

* separable: a 2-class linear problem with a dense 2x4 weight matrix built
  as [u; -u]. The weight column for the dead input feature is exactly zero
  in both rows, so the saved model has a known pre-existing zero fraction
  (0.25) and a baseline accuracy of 1.0 by construction.

* lenet: a small bias-free convnet (conv 8@3x3 / pool / conv 16@3x3 /
  pool / fc 64 / fc 4) trained here with a plain numpy SGD loop on
  synthetic 16x16 pattern images (horizontal bars, vertical bars, blob,
  cross). Bias-free matters: the all-zero model emits a uniform softmax,
  so its top-1 accuracy equals the class-0 frequency of the dataset.

The script is deterministic (fixed seeds), verifies the saved fixtures
through the package's own evaluator, and re-checks the sweep/fine-tune
dominance property the test suite relies on before writing anything.
"""

from __future__ import annotations

import json
import os
import sys

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

import sparsekit as sk  # noqa: E402

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "..", "tests", "fixtures")


# ---------------------------------------------------------------- separable

def build_separable():
    rng = np.random.default_rng(314159)
    u = np.array([1.0, -0.5, 0.25, 0.0], dtype=np.float64)
    weights = np.stack([u, -u]).astype(np.float32)  # (2, 4), column 3 all zero

    n0, n1 = 40, 24
    samples = []
    labels = []
    while len(samples) < n0 + n1:
        x = rng.normal(0.0, 1.0, 4)
        score = float(u @ x)
        if abs(score) < 0.25:  # keep a clear margin so f32 eval cannot flip labels
            continue
        label = 0 if score > 0 else 1
        if label == 0 and labels.count(0) >= n0:
            continue
        if label == 1 and labels.count(1) >= n1:
            continue
        samples.append(x)
        labels.append(label)
    inputs = np.array(samples, dtype=np.float32)
    labels = np.array(labels, dtype=np.uint16)

    order = rng.permutation(len(labels))
    inputs, labels = inputs[order], labels[order]

    model = sk.Model([sk.LayerTensor.from_array(
        "fc", sk.LayerKind.FULLY_CONNECTED, weights)])
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "dense", "weights": "fc"},
        {"op": "softmax"},
    ]})
    data = sk.Dataset(inputs=inputs, labels=labels, class_count=2)
    return model, manifest, data


# ------------------------------------------------------------ lenet fixture

def make_pattern(rng, label):
    img = np.zeros((16, 16), dtype=np.float64)
    if label == 0:  # horizontal bars
        phase = rng.integers(0, 4)
        img[phase::4, :] = 1.0
    elif label == 1:  # vertical bars
        phase = rng.integers(0, 4)
        img[:, phase::4] = 1.0
    elif label == 2:  # filled blob
        cy, cx = rng.integers(5, 11, size=2)
        r = rng.integers(3, 6)
        yy, xx = np.mgrid[0:16, 0:16]
        img[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 1.0
    else:  # cross
        row, col = rng.integers(2, 14, size=2)
        img[row, :] = 1.0
        img[:, col] = 1.0
    img += rng.normal(0.0, 0.15, img.shape)
    return np.clip(img, 0.0, 1.0) * 2.0 - 1.0


def make_pattern_set(rng, counts):
    images, labels = [], []
    for label, count in enumerate(counts):
        for _ in range(count):
            images.append(make_pattern(rng, label))
            labels.append(label)
    order = rng.permutation(len(labels))
    images = np.array(images, dtype=np.float64)[order][:, None, :, :]
    return images, np.array(labels, dtype=np.int64)[order]


def im2col(x, k, stride):
    win = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, oh, ow = win.shape[:4]
    return win.transpose(0, 2, 3, 1, 4, 5).reshape(n, oh, ow, c * k * k), oh, ow


def col2im(gcol, xshape, k, stride, oh, ow):
    n, c, h, w = xshape
    gx = np.zeros(xshape, dtype=gcol.dtype)
    g = gcol.reshape(n, oh, ow, c, k, k)
    for ky in range(k):
        for kx in range(k):
            gx[:, :, ky:ky + oh * stride:stride, kx:kx + ow * stride:stride] += \
                g[:, :, :, :, ky, kx].transpose(0, 3, 1, 2)
    return gx


def pool_forward(x, win, stride):
    w = sliding_window_view(x, (win, win), axis=(2, 3))[:, :, ::stride, ::stride]
    n, c, oh, ow = w.shape[:4]
    flat = w.reshape(n, c, oh, ow, win * win)
    idx = flat.argmax(axis=4)
    out = np.take_along_axis(flat, idx[..., None], axis=4)[..., 0]
    return out, idx


def pool_backward(gout, idx, xshape, win, stride):
    gx = np.zeros(xshape, dtype=gout.dtype)
    n, c, oh, ow = gout.shape
    ky, kx = np.divmod(idx, win)
    rows = np.arange(oh)[None, None, :, None] * stride + ky
    cols = np.arange(ow)[None, None, None, :] * stride + kx
    ni = np.arange(n)[:, None, None, None]
    ci = np.arange(c)[None, :, None, None]
    np.add.at(gx, (ni, ci, rows, cols), gout)
    return gx


class TinyNet:
    """Bias-free trainer mirroring the lenet manifest, float64 throughout."""

    def __init__(self, rng):
        def he(shape, fan_in):
            return rng.normal(0.0, np.sqrt(2.0 / fan_in), shape)

        self.conv1 = he((8, 1, 3, 3), 9)
        self.conv2 = he((16, 8, 3, 3), 72)
        self.fc1 = he((64, 64), 64)
        self.fc2 = he((4, 64), 64)
        self.params = ["conv1", "conv2", "fc1", "fc2"]
        self.vel = {p: np.zeros_like(getattr(self, p)) for p in self.params}

    def forward(self, x, keep=False):
        c = {}
        col1, oh1, ow1 = im2col(x, 3, 1)
        z1 = (col1 @ self.conv1.reshape(8, -1).T).transpose(0, 3, 1, 2)
        a1 = np.maximum(z1, 0.0)
        p1, idx1 = pool_forward(a1, 2, 2)
        col2, oh2, ow2 = im2col(p1, 3, 1)
        z2 = (col2 @ self.conv2.reshape(16, -1).T).transpose(0, 3, 1, 2)
        a2 = np.maximum(z2, 0.0)
        p2, idx2 = pool_forward(a2, 2, 2)
        flat = p2.reshape(p2.shape[0], -1)
        z3 = flat @ self.fc1.T
        a3 = np.maximum(z3, 0.0)
        z4 = a3 @ self.fc2.T
        if keep:
            c.update(x=x, col1=col1, z1=z1, a1=a1, idx1=idx1, p1=p1,
                     col2=col2, z2=z2, a2=a2, idx2=idx2, p2=p2,
                     flat=flat, z3=z3, a3=a3, oh1=oh1, ow1=ow1,
                     oh2=oh2, ow2=ow2)
        return z4, c

    def step(self, x, y, lr, momentum=0.9):
        n = x.shape[0]
        logits, c = self.forward(x, keep=True)
        shifted = logits - logits.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        probs = e / e.sum(axis=1, keepdims=True)
        loss = -np.log(probs[np.arange(n), y] + 1e-12).mean()

        g4 = probs.copy()
        g4[np.arange(n), y] -= 1.0
        g4 /= n
        gfc2 = g4.T @ c["a3"]
        ga3 = g4 @ self.fc2
        gz3 = ga3 * (c["z3"] > 0)
        gfc1 = gz3.T @ c["flat"]
        gflat = gz3 @ self.fc1
        gp2 = gflat.reshape(c["p2"].shape)
        ga2 = pool_backward(gp2, c["idx2"], c["a2"].shape, 2, 2)
        gz2 = ga2 * (c["z2"] > 0)
        gz2f = gz2.transpose(0, 2, 3, 1).reshape(-1, 16)
        gconv2 = (gz2f.T @ c["col2"].reshape(-1, 72)).reshape(self.conv2.shape)
        gcol2 = (gz2f @ self.conv2.reshape(16, -1)).reshape(
            n, c["oh2"], c["ow2"], -1)
        gp1 = col2im(gcol2, c["p1"].shape, 3, 1, c["oh2"], c["ow2"])
        ga1 = pool_backward(gp1, c["idx1"], c["a1"].shape, 2, 2)
        gz1 = ga1 * (c["z1"] > 0)
        gz1f = gz1.transpose(0, 2, 3, 1).reshape(-1, 8)
        gconv1 = (gz1f.T @ c["col1"].reshape(-1, 9)).reshape(self.conv1.shape)

        grads = {"conv1": gconv1, "conv2": gconv2, "fc1": gfc1, "fc2": gfc2}
        for p in self.params:
            self.vel[p] = momentum * self.vel[p] - lr * grads[p]
            setattr(self, p, getattr(self, p) + self.vel[p])
        return loss

    def accuracy(self, x, y):
        logits, _ = self.forward(x)
        return float((logits.argmax(axis=1) == y).mean())


def build_lenet():
    rng = np.random.default_rng(271828)
    train_x, train_y = make_pattern_set(rng, (128, 128, 128, 128))
    eval_x, eval_y = make_pattern_set(rng, (40, 32, 28, 28))

    net = TinyNet(rng)
    batch = 64
    for epoch in range(60):
        order = rng.permutation(len(train_y))
        for start in range(0, len(train_y), batch):
            sel = order[start:start + batch]
            net.step(train_x[sel], train_y[sel], lr=0.05)
        if epoch >= 20 and net.accuracy(train_x, train_y) >= 0.999:
            break
    train_acc = net.accuracy(train_x, train_y)
    eval_acc = net.accuracy(eval_x, eval_y)
    print(f"lenet trainer: train_acc={train_acc:.4f} eval_acc={eval_acc:.4f}")
    if eval_acc < 0.95:
        raise SystemExit("lenet fixture did not train well enough, adjust seed")

    model = sk.Model([
        sk.LayerTensor.from_array("conv1", sk.LayerKind.CONV,
                                  net.conv1.astype(np.float32)),
        sk.LayerTensor.from_array("conv2", sk.LayerKind.CONV,
                                  net.conv2.astype(np.float32)),
        sk.LayerTensor.from_array("fc1", sk.LayerKind.FULLY_CONNECTED,
                                  net.fc1.astype(np.float32)),
        sk.LayerTensor.from_array("fc2", sk.LayerKind.FULLY_CONNECTED,
                                  net.fc2.astype(np.float32)),
    ])
    manifest = sk.manifest_from_dict({"layers": [
        {"op": "conv2d", "weights": "conv1", "stride": 1, "padding": "valid"},
        {"op": "relu"},
        {"op": "maxpool2d", "window": 2, "stride": 2},
        {"op": "conv2d", "weights": "conv2", "stride": 1, "padding": "valid"},
        {"op": "relu"},
        {"op": "maxpool2d", "window": 2, "stride": 2},
        {"op": "flatten"},
        {"op": "dense", "weights": "fc1"},
        {"op": "relu"},
        {"op": "dense", "weights": "fc2"},
        {"op": "softmax"},
    ]})
    data = sk.Dataset(inputs=eval_x.astype(np.float32),
                      labels=eval_y.astype(np.uint16), class_count=4)
    return model, manifest, data


# ----------------------------------------------------------------- checks

def verify_separable(model, manifest, data):
    acc = sk.evaluate(model, manifest, data)
    assert acc == 1.0, f"separable baseline accuracy {acc}, expected 1.0"
    report = sk.sparsity_report(model)
    assert report.model_sparsity == 0.25, report.model_sparsity
    zero_model, _ = sk.sparsify_model(model, "relative", delta=1.0,
                                      mode="percentile")
    zero_acc = sk.evaluate(zero_model, manifest, data)
    class0 = float(np.mean(data.labels == 0))
    assert zero_acc == class0, (zero_acc, class0)
    print(f"separable: baseline=1.0 preexisting_zeros=0.25 class0_freq={class0}")


def verify_lenet(model, manifest, data):
    baseline = sk.evaluate(model, manifest, data)
    print(f"lenet: evaluator baseline accuracy {baseline:.4f}")
    assert baseline >= 0.95, baseline

    grid = [round(0.05 * i, 10) for i in range(20)]
    curve = sk.sweep(model, manifest, data, "relative", grid, gate=0.95)
    assert curve.best is not None
    best = curve.best
    result = sk.finetune_layers(model, manifest, data, best.delta,
                                step=0.05, gate=0.95)
    print(f"lenet: sweep best delta={best.delta} s_m={best.model_sparsity:.4f}; "
          f"finetune s_m={result.model_sparsity:.4f} "
          f"norm={result.normalized_accuracy:.4f} "
          f"({result.evaluations} evaluations)")
    assert result.model_sparsity >= best.model_sparsity
    assert result.normalized_accuracy >= 0.95


def save(tag, model, manifest, data):
    sk.write_model(model, os.path.join(FIXTURE_DIR, f"{tag}.spwt"))
    sk.write_dataset(data, os.path.join(FIXTURE_DIR, f"{tag}.spds"))
    sk.save_manifest(manifest, os.path.join(FIXTURE_DIR, f"{tag}.manifest.json"))
    print(f"wrote {tag}.spwt / {tag}.spds / {tag}.manifest.json")


def main():
    os.makedirs(FIXTURE_DIR, exist_ok=True)
    model, manifest, data = build_separable()
    verify_separable(model, manifest, data)
    save("separable", model, manifest, data)

    model, manifest, data = build_lenet()
    verify_lenet(model, manifest, data)
    save("lenet", model, manifest, data)


if __name__ == "__main__":
    main()
