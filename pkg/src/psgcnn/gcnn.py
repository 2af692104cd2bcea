"""A three-stage graph convolutional network with hand-written backpropagation.

Each stage computes ``X_l = act_l(S @ X_{l-1} @ W_l + b_l)`` with weights of
shape ``F_{l-1} x F_l``. Hidden stages use ReLU; the readout is a sigmoid for
regression (MSE loss) and the identity for classification (two logits with
class-weighted softmax cross-entropy). Passing ``shift=None`` skips the graph
aggregation, which is exactly the row-wise MLP.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError, TrainingError

log = logging.getLogger(__name__)

HIDDEN_WIDTHS = (32, 16)
CHECKPOINT_VERSION = 1
TASKS = ("regression", "classification")


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


_ACT = {
    "relu": lambda z: np.maximum(z, 0.0),
    "sigmoid": _sigmoid,
    "identity": lambda z: z,
}


def _act_grad(name, z, a):
    if name == "relu":
        return (z > 0).astype(z.dtype)
    if name == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(z)


@dataclass
class GcnModel:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: tuple[str, ...]
    use_bias: bool = True

    def __post_init__(self):
        if len(self.weights) != 3 or len(self.biases) != 3 or len(self.activations) != 3:
            raise ShapeError("a GcnModel has exactly three weight stages")
        for a in self.activations:
            if a not in _ACT:
                raise ValueError(f"unknown activation {a!r}")
        for k in range(3):
            w, b = self.weights[k], self.biases[k]
            if b.shape != (w.shape[1],):
                raise ShapeError(f"stage {k}: bias {b.shape} does not match weight {w.shape}")
            if k and self.weights[k - 1].shape[1] != w.shape[0]:
                raise ShapeError(f"stage {k}: widths do not chain")

    @classmethod
    def init(cls, in_features, out_features, task="regression", seed=0,
             hidden=HIDDEN_WIDTHS, use_bias=True):
        """Glorot-uniform weights and zero biases from ``seed``."""
        if task not in TASKS:
            raise ValueError(f"unknown task {task!r}")
        rng = np.random.default_rng(seed)
        widths = (in_features, *hidden, out_features)
        weights, biases = [], []
        for fan_in, fan_out in zip(widths[:-1], widths[1:]):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(rng.uniform(-lim, lim, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        readout = "sigmoid" if task == "regression" else "identity"
        return cls(weights, biases, ("relu", "relu", readout), use_bias)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def params(self) -> list[np.ndarray]:
        """Flat parameter list ``[W1, b1, W2, b2, W3, b3]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def with_params(self, params) -> "GcnModel":
        return replace(self, weights=list(params[0::2]), biases=list(params[1::2]))

    def copy(self) -> "GcnModel":
        return self.with_params([p.copy() for p in self.params()])


def forward(model: GcnModel, shift, x):
    """Run the network. Returns ``(output, cache)``; ``cache`` feeds :func:`backward`."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.widths[0]:
        raise ShapeError(f"features {x.shape} do not match input width {model.widths[0]}")
    if shift is not None:
        shift = np.asarray(shift)
        if shift.shape != (x.shape[0], x.shape[0]):
            raise ShapeError(f"shift {shift.shape} does not match {x.shape[0]} nodes")
    cache = {"shift": shift, "layers": []}
    h = x
    for w, b, act in zip(model.weights, model.biases, model.activations):
        agg = h if shift is None else shift @ h
        z = agg @ w
        if model.use_bias:
            z = z + b
        a = _ACT[act](z)
        cache["layers"].append({"agg": agg, "pre": z, "out": a})
        h = a
    return h, cache


def backward(model: GcnModel, cache, grad_output):
    """Gradients ``[dW1, db1, dW2, db2, dW3, db3]`` for an upstream ``dLoss/dOutput``."""
    layers = cache["layers"]
    shift = cache["shift"]
    g = np.asarray(grad_output, dtype=np.float64)
    if len(layers) != 3 or g.shape != layers[-1]["out"].shape:
        raise ShapeError("cache does not match the upstream gradient; rerun forward")
    grads = [None] * 6
    for k in reversed(range(3)):
        lay = layers[k]
        if lay["agg"].shape[1] != model.weights[k].shape[0]:
            raise ShapeError("stale cache: widths changed since forward")
        dz = g * _act_grad(model.activations[k], lay["pre"], lay["out"])
        grads[2 * k] = lay["agg"].T @ dz
        grads[2 * k + 1] = dz.sum(axis=0) if model.use_bias else np.zeros_like(model.biases[k])
        if k:
            g = dz @ model.weights[k].T
            if shift is not None:
                g = shift.T @ g
    return grads


def _mask_rows(mask, n):
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ShapeError(f"mask of shape {mask.shape} for {n} nodes")
    if not mask.any():
        raise DataError("mask selects no nodes")
    return mask


def loss_regression(pred, target, mask, return_grad=False):
    """Mean squared error over masked nodes and all output features."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"pred {pred.shape} vs target {target.shape}")
    mask = _mask_rows(mask, pred.shape[0])
    diff = (pred - target) * mask[:, None]
    count = mask.sum() * pred.shape[1]
    loss = float(np.sum(diff * diff) / count)
    if return_grad:
        return loss, 2.0 * diff / count
    return loss


def loss_classification(logits, labels, class_weights, mask, return_grad=False):
    """Class-weighted softmax cross-entropy, averaged over the masked nodes."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels).astype(int)
    w = np.asarray(class_weights, dtype=np.float64)
    n, c = logits.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels {labels.shape} for {n} nodes")
    mask = _mask_rows(mask, n)
    if np.any((labels[mask] < 0) | (labels[mask] >= c)):
        raise DataError("labels must be class indices")
    if w.shape != (c,) or np.any(w <= 0):
        raise DataError("class weights must be positive, one per class")
    shifted = logits - logits.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1))
    safe = np.where(mask, labels, 0)
    nll = logz - shifted[np.arange(n), safe]
    row_w = np.where(mask, w[safe], 0.0)
    count = mask.sum()
    loss = float(np.sum(row_w * nll) / count)
    if not return_grad:
        return loss
    probs = np.exp(shifted - logz[:, None])
    probs[np.arange(n), safe] -= 1.0
    return loss, probs * (row_w / count)[:, None]


def inverse_frequency_weights(labels, mask, classes=2):
    """``n / (classes * n_c)`` per class over the masked nodes; absent classes get 1."""
    y = np.asarray(labels).astype(int)[np.asarray(mask, dtype=bool)]
    counts = np.bincount(y, minlength=classes).astype(float)
    w = np.ones(classes)
    present = counts > 0
    w[present] = y.size / (classes * counts[present])
    return w


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 0.005
    epochs: int = 300
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    task: str = "regression"
    folds: int = 4
    trials: int = 10
    seed: int = 0
    use_bias: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0 or self.epochs < 0:
            raise ValueError("learning rate must be positive, weight decay and epochs non-negative")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")


@dataclass
class AdamState:
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """Bias-corrected Adam with decoupled weight decay. Returns ``(params, state)``."""
    if not state.m:
        state = AdamState(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])
    b1, b2 = config.betas
    t = state.step + 1
    lr = config.learning_rate
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient {g.shape} for parameter {p.shape}")
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * (g * g)
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p = p - lr * config.weight_decay * p
        p = p - lr * m_hat / (np.sqrt(v_hat) + config.eps)
        new_p.append(p)
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(t, new_m, new_v)


def _loss_and_grad(model, shift, x, targets, mask, task, class_weights):
    out, cache = forward(model, shift, x)
    if task == "regression":
        loss, g = loss_regression(out, targets, mask, return_grad=True)
    else:
        loss, g = loss_classification(out, targets, class_weights, mask, return_grad=True)
    return loss, g, cache


def train(model: GcnModel, shift, x, targets, masks, config: TrainConfig, class_weights=None):
    """Full-batch training for ``config.epochs`` epochs.

    Args:
        masks: dict with a ``"train"`` mask and optionally ``"val"``.
        class_weights: classification only; defaults to inverse class frequency
            on the training mask.

    Returns:
        ``(trained_model, curve)`` where ``curve`` has per-epoch ``"train"`` and
        ``"val"`` loss lists (``val`` empty without a validation mask).
    """
    train_mask = masks["train"]
    val_mask = masks.get("val")
    if config.task == "classification" and class_weights is None:
        class_weights = inverse_frequency_weights(targets, train_mask)
    params = [p.copy() for p in model.params()]
    state = AdamState()
    curve = {"train": [], "val": []}
    for epoch in range(config.epochs):
        current = model.with_params(params)
        loss, g, cache = _loss_and_grad(current, shift, x, targets, train_mask, config.task, class_weights)
        if not np.isfinite(loss):
            raise TrainingError(f"training loss became {loss} at epoch {epoch}", epoch=epoch)
        grads = backward(current, cache, g)
        params, state = adam_step(params, grads, state, config)
        curve["train"].append(loss)
        if val_mask is not None and np.any(val_mask):
            out, _ = forward(model.with_params(params), shift, x)
            if config.task == "regression":
                curve["val"].append(loss_regression(out, targets, val_mask))
            else:
                curve["val"].append(loss_classification(out, targets, class_weights, val_mask))
    trained = model.with_params(params)
    if not all(np.all(np.isfinite(p)) for p in params):
        raise TrainingError("parameters became non-finite", epoch=config.epochs - 1)
    return trained, curve


def predict(model, shift, x):
    return forward(model, shift, x)[0]


def regression_metrics(pred, target, mask):
    mask = _mask_rows(mask, np.shape(pred)[0])
    err = np.asarray(pred)[mask] - np.asarray(target)[mask]
    return {"mse": float(np.mean(err**2)), "mae": float(np.mean(np.abs(err)))}


def classification_metrics(predicted, labels, mask):
    """Accuracy, precision, recall and F1 with class 1 as the positive class."""
    mask = _mask_rows(mask, np.shape(predicted)[0])
    p = np.asarray(predicted).astype(int)[mask]
    y = np.asarray(labels).astype(int)[mask]
    tp = int(np.sum((p == 1) & (y == 1)))
    fp = int(np.sum((p == 1) & (y == 0)))
    fn = int(np.sum((p == 0) & (y == 1)))
    out = {"accuracy": float(np.mean(p == y))}
    out["precision_undefined"] = tp + fp == 0
    out["precision"] = 0.0 if tp + fp == 0 else tp / (tp + fp)
    out["recall"] = 0.0 if tp + fn == 0 else tp / (tp + fn)
    denom = out["precision"] + out["recall"]
    out["f1"] = 0.0 if denom == 0 else 2 * out["precision"] * out["recall"] / denom
    return out


def evaluate(model, shift, x, targets, mask, task, unscale=None):
    """Metrics on the masked nodes.

    For regression ``unscale`` maps network outputs back to target units before
    MSE/MAE; ``targets`` must already be in those units.
    """
    out = predict(model, shift, x)
    if task == "regression":
        if unscale is not None:
            out = unscale(out)
        return regression_metrics(out, targets, mask)
    return classification_metrics(np.argmax(out, axis=1), targets, mask)


def kfold_split(labeled_node_ids, folds=4, trial_seed=0, labels=None, node_count=None):
    """Shuffled, class-stratified K-fold split of the labeled nodes.

    Args:
        labeled_node_ids: indices of nodes that carry a target.
        labels: class of each labeled node (same order); ``None`` disables
            stratification.
        node_count: length of the returned masks; defaults to ``max(id) + 1``.

    Returns:
        A list of ``(train_mask, test_mask)`` boolean arrays; each labeled node
        is in exactly one test mask.
    """
    ids = np.asarray(labeled_node_ids, dtype=int)
    if ids.size < folds:
        raise DataError(f"{ids.size} labeled nodes cannot fill {folds} folds")
    n = int(node_count if node_count is not None else ids.max() + 1)
    rng = np.random.default_rng(trial_seed)
    if labels is not None:
        labels = np.asarray(labels)
        classes, counts = np.unique(labels, return_counts=True)
        if np.any(counts < folds):
            warnings.warn(
                f"a class has fewer than {folds} members; falling back to an unstratified split",
                stacklevel=2,
            )
            labels = None
    if labels is None:
        order = ids[rng.permutation(ids.size)]
    else:
        order = np.concatenate([rng.permutation(ids[labels == c]) for c in classes])
    assign = np.arange(order.size) % folds
    splits = []
    for f in range(folds):
        test = np.zeros(n, dtype=bool)
        test[order[assign == f]] = True
        train_m = np.zeros(n, dtype=bool)
        train_m[order[assign != f]] = True
        splits.append((train_m, test))
    return splits


def save_checkpoint(model: GcnModel, path):
    """Write an ``.npz`` checkpoint; parameters round-trip bit-exactly."""
    arrays = {f"p{i}": p for i, p in enumerate(model.params())}
    with open(path, "wb") as fh:
        np.savez(
            fh,
            version=np.array(CHECKPOINT_VERSION),
            widths=np.array(model.widths),
            activations=np.array(model.activations),
            use_bias=np.array(model.use_bias),
            **arrays,
        )
    return Path(path)


def load_checkpoint(path) -> GcnModel:
    with np.load(path, allow_pickle=False) as data:
        version = int(data["version"])
        if version != CHECKPOINT_VERSION:
            raise DataError(f"unsupported checkpoint version {version}")
        params = [data[f"p{i}"] for i in range(6)]
        acts = tuple(str(a) for a in data["activations"])
        use_bias = bool(data["use_bias"])
    return GcnModel(list(params[0::2]), list(params[1::2]), acts, use_bias)
