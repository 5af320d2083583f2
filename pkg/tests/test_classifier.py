import numpy as np
import pytest

from mobilecharger import classifier as C
from mobilecharger import nn
from mobilecharger import tactile as T
from mobilecharger.errors import ShapeMismatch, WrongKind


def naive_conv(x, w, b):
    n, ci, h, wd = x.shape
    co, _, k, _ = w.shape
    out = np.zeros((n, co, h - k + 1, wd - k + 1))
    for s in range(n):
        for o in range(co):
            for i in range(h - k + 1):
                for j in range(wd - k + 1):
                    acc = b[o]
                    for c in range(ci):
                        for di in range(k):
                            for dj in range(k):
                                acc += x[s, c, i + di, j + dj] * w[o, c, di, dj]
                    out[s, o, i, j] = acc
    return out


def naive_logits(m, x):
    """Eval-mode forward pass written with loops and explicit formulas."""
    L = m.layers
    h = x
    for conv, bn in (("conv1", "bn1"), ("conv2", "bn2")):
        h = naive_conv(h, L[conv].params["weight"], L[conv].params["bias"])
        g, be = L[bn].params["gamma"], L[bn].params["beta"]
        mu, var = L[bn].running_mean, L[bn].running_var
        for c in range(h.shape[1]):
            h[:, c] = g[c] * (h[:, c] - mu[c]) / np.sqrt(var[c] + 1e-5) + be[c]
        h = np.maximum(h, 0)
    h = h.reshape(len(h), -1)
    for fc in ("fc1", "fc2"):
        h = np.maximum(h @ L[fc].params["weight"].T + L[fc].params["bias"], 0)
    return h @ L["fc3"].params["weight"].T + L["fc3"].params["bias"]


def test_conv_matches_naive(rng):
    layer = nn.Conv2D(2, 3, 3, rng)
    x = rng.normal(size=(2, 2, 6, 5))
    assert np.allclose(layer.forward(x), naive_conv(x, layer.params["weight"], layer.params["bias"]))


def test_logits_match_naive_oracle(rng):
    m = C.CnnModel("angular", seed=1)
    # non-trivial running statistics
    for name in ("bn1", "bn2"):
        bn = m.layers[name]
        bn.running_mean = rng.normal(size=bn.running_mean.shape)
        bn.running_var = rng.uniform(0.5, 2, size=bn.running_var.shape)
    x = rng.uniform(0, 9, size=(3, 2, 10, 10))
    assert np.allclose(m.logits(x), naive_logits(m, x), atol=1e-10)


def test_batchnorm_train_statistics(rng):
    bn = nn.BatchNorm2D(4)
    x = rng.normal(3, 2, size=(5, 4, 6, 6))
    y = bn.forward(x, train=True)
    assert np.allclose(y.mean(axis=(0, 2, 3)), 0, atol=1e-12)
    assert np.allclose(y.var(axis=(0, 2, 3)), 1, atol=1e-3)
    m = 5 * 36
    assert np.allclose(bn.running_var, 0.9 + 0.1 * x.var(axis=(0, 2, 3)) * m / (m - 1))


def test_softmax_and_cross_entropy(rng):
    z = rng.normal(size=(4, 6))
    p = nn.softmax(z)
    assert np.allclose(p.sum(axis=1), 1)
    y = np.array([0, 5, 2, 2])
    loss, d = nn.cross_entropy(z, y)
    assert loss == pytest.approx(-np.mean(np.log(p[np.arange(4), y])))
    assert np.allclose(d.sum(axis=1), 0)


def test_forward_single_frame():
    m = C.CnnModel("vertical")
    f = T.synthesize("vertical", 0, 0, 5, noise_sigma=0.0)
    p = C.forward(m, f)
    assert p.shape == (5,) and p.sum() == pytest.approx(1)
    with pytest.raises(ShapeMismatch):
        C.forward(m, np.zeros((2, 9, 10)))


def test_train_mode_forward_leaves_buffers():
    m = C.CnnModel("angular")
    before = {k: v.copy() for k, v in m.buffers().items()}
    C.forward(m, T.synthesize("angular", 2, noise_sigma=0.0), mode="train")
    for k, v in m.buffers().items():
        assert np.array_equal(v, before[k])


def test_gradient_check_small_model(rng):
    m = C.CnnModel("angular", conv_channels=(2, 3), fc_widths=(8, 6), seed=4)
    ds = T.generate_dataset("angular", 2, seed=4)
    err = C.gradient_check(m, ds.frames[:3], ds.labels[:3])
    assert err < 1e-4


def test_gradient_check_detects_a_broken_backward(rng, monkeypatch):
    m = C.CnnModel("angular", conv_channels=(2, 2), fc_widths=(4, 4), seed=0)
    ds = T.generate_dataset("angular", 1, seed=0)
    monkeypatch.setattr(nn.ReLU, "backward", lambda self, d: d)
    assert C.gradient_check(m, ds.frames[:2], ds.labels[:2]) > 1e-2


def test_training_loss_decreases_without_momentum():
    ds = T.generate_dataset("angular", 20, seed=0)
    m = C.train(ds, C.TrainConfig(learning_rate=1e-3, momentum=0.0, epochs=6, seed=0))
    losses = [h["train_loss"] for h in m.history]
    assert all(b <= a for a, b in zip(losses, losses[1:]))


def test_training_learns_noiseless_angles():
    ds = T.generate_dataset("angular", 20, noise_sigma=0.0, seed=0)
    m = C.train(ds, C.TrainConfig(epochs=15))
    assert m.best_val_accuracy == 1.0
    x, y = ds.validation()
    assert C.accuracy(m, x, y) == 1.0


def test_training_is_deterministic():
    ds = T.generate_dataset("vertical", 6, seed=0)
    a = C.train(ds, C.TrainConfig(epochs=2))
    b = C.train(ds, C.TrainConfig(epochs=2))
    for (k, v), (_, w) in zip(a.state().items(), b.state().items()):
        assert np.array_equal(v, w), k


def test_model_json_round_trip(tmp_path, rng):
    ds = T.generate_dataset("horizontal", 5, seed=0)
    m = C.train(ds, C.TrainConfig(epochs=2))
    p = tmp_path / "m.json"
    m.save(p)
    back = C.CnnModel.load(p)
    x = rng.uniform(0, 9, size=(4, 2, 10, 10))
    assert np.array_equal(back.logits(x), m.logits(x))
    assert back.kind is T.Kind.HORIZONTAL


def test_model_json_rejects_foreign_documents():
    with pytest.raises(ValueError):
        C.CnnModel.from_json({"format": "other"})


def test_safety_gate():
    assert C.safety_gate(T.MisalignmentLabel("angular", 2)) is C.GateDecision.CHARGE
    assert C.safety_gate(T.MisalignmentLabel("angular", 3)) is C.GateDecision.ABORT
    assert C.safety_gate(T.MisalignmentLabel("angular", 5), 6.0) is C.GateDecision.CHARGE
    with pytest.raises(WrongKind):
        C.safety_gate(T.MisalignmentLabel("vertical", 2))
