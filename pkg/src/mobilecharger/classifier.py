"""Tactile misalignment classifier and the post-docking charge/abort gate.

Architecture, per conv block: 3x3 valid conv -> batch norm -> ReLU, twice
(10x10 -> 8x8 -> 6x6), then three fully connected layers with ReLU between
them and a softmax on top. One network is trained per misalignment kind.
"""
from __future__ import annotations

import copy
import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import nn
from .errors import Diverged, ShapeMismatch, WrongKind
from .tactile import FRAME_SHAPE, Kind, MisalignmentLabel, TactileDataset, TactileFrame

MODEL_FORMAT = "mobilecharger.cnn"
MODEL_VERSION = 1
DEFAULT_CRITICAL_ANGLE_DEG = 3.0


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 60
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


class CnnModel:
    def __init__(self, kind, conv_channels=(8, 16), fc_widths=(128, 64), seed: int = 0):
        self.kind = Kind.parse(kind)
        self.n_classes = self.kind.n_classes
        self.conv_channels = tuple(conv_channels)
        self.fc_widths = tuple(fc_widths)
        c1, c2 = self.conv_channels
        h1, h2 = self.fc_widths
        rng = np.random.default_rng(seed)
        spatial = FRAME_SHAPE[1] - 4
        self.layers = {
            "conv1": nn.Conv2D(FRAME_SHAPE[0], c1, 3, rng),
            "bn1": nn.BatchNorm2D(c1),
            "relu1": nn.ReLU(),
            "conv2": nn.Conv2D(c1, c2, 3, rng),
            "bn2": nn.BatchNorm2D(c2),
            "relu2": nn.ReLU(),
            "flatten": nn.Flatten(),
            "fc1": nn.Linear(c2 * spatial * spatial, h1, rng),
            "relu3": nn.ReLU(),
            "fc2": nn.Linear(h1, h2, rng),
            "relu4": nn.ReLU(),
            "fc3": nn.Linear(h2, self.n_classes, rng),
        }
        self.history: list[dict] = []
        self.best_val_accuracy: float | None = None

    # -- parameter access ------------------------------------------------

    def named_params(self):
        for lname, layer in self.layers.items():
            for pname, p in layer.params.items():
                yield f"{lname}.{pname}", p

    def named_grads(self):
        for lname, layer in self.layers.items():
            for pname, g in layer.grads.items():
                yield f"{lname}.{pname}", g

    def buffers(self):
        return {f"{n}.{b}": getattr(l, b) for n, l in self.layers.items()
                if isinstance(l, nn.BatchNorm2D) for b in ("running_mean", "running_var")}

    def state(self) -> dict:
        s = {n: p.copy() for n, p in self.named_params()}
        s.update({n: b.copy() for n, b in self.buffers().items()})
        return s

    def load_state(self, state: dict) -> None:
        for key, value in state.items():
            lname, attr = key.split(".", 1)
            layer = self.layers[lname]
            value = np.array(value, dtype=float)
            if attr in layer.params:
                if layer.params[attr].shape != value.shape:
                    raise ShapeMismatch(f"{key}: expected {layer.params[attr].shape}, got {value.shape}")
                layer.params[attr] = value
            else:
                setattr(layer, attr, value)

    def num_params(self) -> int:
        return sum(p.size for _, p in self.named_params())

    # -- computation ----------------------------------------------------

    def logits(self, x, train=False, start=0, cache=None):
        """Run layers ``start..end``. When ``cache`` is a list, the input of
        every layer is recorded in it."""
        layers = list(self.layers.values())
        for layer in layers[start:]:
            if cache is not None:
                cache.append(x)
            x = layer.forward(x, train)
        return x

    def backward(self, dlogits):
        g = dlogits
        for layer in reversed(list(self.layers.values())):
            g = layer.backward(g)
        return g

    def set_track_stats(self, flag: bool) -> None:
        for layer in self.layers.values():
            if isinstance(layer, nn.BatchNorm2D):
                layer.track_stats = flag

    # -- serialization --------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "kind": self.kind.value,
            "n_classes": self.n_classes,
            "conv_channels": list(self.conv_channels),
            "fc_widths": list(self.fc_widths),
            "best_val_accuracy": self.best_val_accuracy,
            "tensors": {k: {"shape": list(v.shape), "data": v.ravel().tolist()}
                        for k, v in self.state().items()},
        }

    @classmethod
    def from_json(cls, doc: dict) -> CnnModel:
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError("not a CNN model document")
        if doc.get("version") != MODEL_VERSION:
            raise ValueError(f"unsupported model version {doc.get('version')}")
        m = cls(doc["kind"], doc["conv_channels"], doc["fc_widths"])
        if m.n_classes != doc["n_classes"]:
            raise ShapeMismatch("class count does not match kind")
        m.load_state({k: np.array(v["data"], dtype=float).reshape(v["shape"])
                      for k, v in doc["tensors"].items()})
        m.best_val_accuracy = doc.get("best_val_accuracy")
        return m

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path) -> CnnModel:
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _as_batch(frames) -> np.ndarray:
    if isinstance(frames, TactileFrame):
        frames = frames.pressure
    x = np.asarray(frames, dtype=float)
    if x.shape == FRAME_SHAPE:
        x = x[None]
    if x.ndim != 4 or x.shape[1:] != FRAME_SHAPE:
        raise ShapeMismatch(f"expected frames of shape {FRAME_SHAPE}, got {x.shape}")
    return x


def predict_proba(m: CnnModel, frames, mode: str = "eval") -> np.ndarray:
    x = _as_batch(frames)
    train = mode == "train"
    if train:
        m.set_track_stats(False)
        try:
            z = m.logits(x, train=True)
        finally:
            m.set_track_stats(True)
    else:
        z = m.logits(x, train=False)
    return nn.softmax(z)


def forward(m: CnnModel, frame, mode: str = "eval") -> np.ndarray:
    """Class probabilities for a single 2x10x10 frame.

    ``mode="train"`` normalises with the statistics of this one frame and
    leaves the running averages untouched.
    """
    x = frame.pressure if isinstance(frame, TactileFrame) else np.asarray(frame, dtype=float)
    if x.shape != FRAME_SHAPE:
        raise ShapeMismatch(f"expected a {FRAME_SHAPE} frame, got {x.shape}")
    return predict_proba(m, x, mode)[0]


def classify(m: CnnModel, frame) -> MisalignmentLabel:
    p = forward(m, frame, "eval")
    return MisalignmentLabel(m.kind, int(np.argmax(p)))


def classify_batch(m: CnnModel, frames) -> np.ndarray:
    return np.argmax(predict_proba(m, frames, "eval"), axis=1)


def accuracy(m: CnnModel, frames, labels) -> float:
    if len(labels) == 0:
        return float("nan")
    return float(np.mean(classify_batch(m, frames) == np.asarray(labels)))


def loss_and_grads(m: CnnModel, x, y) -> float:
    """Train-mode cross-entropy; leaves gradients in every layer."""
    z = m.logits(x, train=True)
    loss, dz = nn.cross_entropy(z, y)
    m.backward(dz)
    return loss


def train(dataset: TactileDataset, cfg: TrainConfig = TrainConfig(),
          conv_channels=(8, 16), fc_widths=(128, 64)) -> CnnModel:
    """Minibatch SGD with momentum on the training split.

    Returns the weights from the epoch with the best validation accuracy
    (earliest epoch wins ties). Per-epoch metrics end up in ``model.history``;
    ``train_loss`` there is the loss over the full training split at the end
    of the epoch, ``batch_loss`` the mean over that epoch's minibatches.
    """
    m = CnnModel(dataset.kind, conv_channels, fc_widths, seed=cfg.seed)
    x_tr, y_tr = dataset.train()
    x_va, y_va = dataset.validation()
    if len(y_tr) == 0:
        raise ValueError("empty training split")
    rng = np.random.default_rng(cfg.seed)
    velocity = {n: np.zeros_like(p) for n, p in m.named_params()}
    best_acc, best_state = -1.0, m.state()

    for epoch in range(cfg.epochs):
        order = rng.permutation(len(y_tr))
        batch_losses = []
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            if len(idx) < 2:
                # batch norm needs at least two samples to estimate variance
                continue
            loss = loss_and_grads(m, x_tr[idx], y_tr[idx])
            if not math.isfinite(loss):
                raise Diverged(f"loss became {loss} at epoch {epoch}")
            batch_losses.append(loss)
            grads = dict(m.named_grads())
            for lname, layer in m.layers.items():
                for pname in layer.params:
                    key = f"{lname}.{pname}"
                    v = velocity[key]
                    v *= cfg.momentum
                    v += grads[key]
                    layer.params[pname] = layer.params[pname] - cfg.learning_rate * v
        split_loss = _split_loss(m, x_tr, y_tr)
        if not math.isfinite(split_loss):
            raise Diverged(f"training-split loss became {split_loss} at epoch {epoch}")
        val_acc = accuracy(m, x_va, y_va) if len(y_va) else accuracy(m, x_tr, y_tr)
        m.history.append({
            "epoch": epoch,
            "batch_loss": float(np.mean(batch_losses)) if batch_losses else float("nan"),
            "train_loss": split_loss,
            "val_accuracy": val_acc,
        })
        if val_acc > best_acc:
            best_acc, best_state = val_acc, m.state()

    m.load_state(best_state)
    m.best_val_accuracy = best_acc
    return m


def _split_loss(m: CnnModel, frames, labels) -> float:
    """Train-mode cross-entropy over a whole split, running stats untouched."""
    m.set_track_stats(False)
    try:
        z = m.logits(_as_batch(frames), train=True)
    finally:
        m.set_track_stats(True)
    return nn.cross_entropy(z, np.asarray(labels))[0]


def _ce(logits, labels):
    """Mean cross-entropy kept in the logits' dtype."""
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return np.mean(lse - z[np.arange(len(labels)), labels])


def _relu_masks(model: CnnModel):
    return [l._mask.copy() for l in model.layers.values() if isinstance(l, nn.ReLU)]


def _extended_copy(m: CnnModel) -> CnnModel:
    ext = copy.deepcopy(m)
    for layer in ext.layers.values():
        for k, v in layer.params.items():
            layer.params[k] = v.astype(np.longdouble)
    ext.set_track_stats(False)
    return ext


def _refine(ext: CnnModel, x, y, lname: str, pname: str, i: int, h: float,
            h_min: float = 1e-9) -> float:
    """Central difference in extended precision, shrinking ``h`` while the
    +/-h interval straddles a ReLU boundary (the derivative is only defined
    on one side of a kink, so a wider stencil does not estimate it)."""
    flat = ext.layers[lname].params[pname].reshape(-1)
    orig = flat[i]
    ext.logits(x, True)
    base = _relu_masks(ext)
    while True:
        flat[i] = orig + h
        lp = _ce(ext.logits(x, True), y)
        mp = _relu_masks(ext)
        flat[i] = orig - h
        lm = _ce(ext.logits(x, True), y)
        mm = _relu_masks(ext)
        flat[i] = orig
        crossed = any((a != b).any() or (a != c).any() for a, b, c in zip(base, mp, mm))
        if not crossed or h / 10.0 < h_min:
            return float((lp - lm) / (2 * np.longdouble(h)))
        h /= 10.0


def gradient_check(m: CnnModel, frames, labels, h: float = 1e-5,
                   floor: float = 1e-8, recheck_above: float = 1e-6) -> float:
    """Largest relative gap between backprop and central differences.

    Covers every trainable tensor, batch-norm scale and shift included. The
    loss is the train-mode cross-entropy over ``frames``; running statistics
    are not modified. Relative error is ``|a - n| / max(|a|, |n|, floor)``.

    Every parameter is first probed in float64 with step ``h``. Entries whose
    error exceeds ``recheck_above`` are re-measured in extended precision,
    where the loss difference is not swamped by rounding, with ``h`` cut
    down if the stencil crosses a ReLU kink.
    """
    x = _as_batch(frames)
    y = np.atleast_1d(np.asarray(labels, dtype=int))
    model = copy.deepcopy(m)
    model.set_track_stats(False)

    cache: list = []
    z = model.logits(x, train=True, cache=cache)
    _, dz = nn.cross_entropy(z, y)
    model.backward(dz)
    analytic = {n: g.copy() for n, g in model.named_grads()}

    def rel(a, n):
        return abs(a - n) / max(abs(a), abs(n), floor)

    suspects = []
    worst = 0.0
    for li, lname in enumerate(model.layers):
        layer = model.layers[lname]
        for pname, p in layer.params.items():
            a = analytic[f"{lname}.{pname}"].reshape(-1)
            flat = p.reshape(-1)
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                lp = _ce(model.logits(cache[li], True, start=li), y)
                flat[i] = orig - h
                lm = _ce(model.logits(cache[li], True, start=li), y)
                flat[i] = orig
                err = rel(a[i], (lp - lm) / (2.0 * h))
                if err > recheck_above:
                    suspects.append((lname, pname, i))
                else:
                    worst = max(worst, err)

    if suspects:
        ext = _extended_copy(m)
        x_ext = x.astype(np.longdouble)
        for lname, pname, i in suspects:
            num = _refine(ext, x_ext, y, lname, pname, i, h)
            worst = max(worst, rel(analytic[f"{lname}.{pname}"].reshape(-1)[i], num))
    return float(worst)


class GateDecision(str, enum.Enum):
    CHARGE = "Charge"
    ABORT = "Abort"


def safety_gate(angular: MisalignmentLabel,
                critical_angle: float = DEFAULT_CRITICAL_ANGLE_DEG) -> GateDecision:
    """Charge only when the classified tilt is strictly below the critical angle."""
    if angular.kind is not Kind.ANGULAR:
        raise WrongKind(f"safety gate needs an angular label, got {angular.kind.value}")
    return GateDecision.CHARGE if angular.value < critical_angle else GateDecision.ABORT
