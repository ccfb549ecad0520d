"""Recurrent sequence encoder: gated cell over encoded events plus an
affine prediction head.

The cell is a standard single-layer LSTM. Each event vector is
concatenated with the previous hidden state; input/forget/output gates
and the candidate update produce the next cell and hidden state. The
final hidden state is the sequence embedding.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import (
    CLASSIFICATION,
    REGRESSION,
    FieldSchema,
    Record,
    SequenceDataset,
    encode_dataset,
    encode_record,
    fit_field_schema,
)
from .exceptions import DimensionError, TaskMismatchError
from .ioutil import read_json, write_json_atomic

GATES = ("i", "f", "o", "g")


@dataclass
class EncoderModel:
    schema: FieldSchema
    task: str  # classification | regression
    num_classes: int  # head width; 1 for regression
    hidden_dim: int
    weights: dict[str, np.ndarray]

    @property
    def input_dim(self) -> int:
        return self.schema.width

    def copy_weights(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.weights.items()}


def init_encoder(schema: FieldSchema, task: str, num_classes: int,
                 hidden_dim: int, rng: np.random.Generator) -> EncoderModel:
    if task == REGRESSION:
        num_classes = 1
    width = schema.width + hidden_dim
    weights: dict[str, np.ndarray] = {}
    for gate in GATES:
        weights[f"w_{gate}"] = T.glorot_uniform(rng, width, hidden_dim)
        weights[f"b_{gate}"] = np.zeros((1, hidden_dim))
    weights["w_head"] = T.glorot_uniform(rng, hidden_dim, num_classes)
    weights["b_head"] = np.zeros((1, num_classes))
    return EncoderModel(schema, task, num_classes, hidden_dim, weights)


# ---------------------------------------------------------------------------
# numpy forward (inference)


def _sigmoid_np(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _scan_np(weights: dict[str, np.ndarray], steps: np.ndarray) -> np.ndarray:
    """Run the cell over a (T, input_dim) event matrix; returns (1, F_s)."""
    hidden = weights["w_i"].shape[1]
    h = np.zeros((1, hidden))
    c = np.zeros((1, hidden))
    for t in range(steps.shape[0]):
        z = np.concatenate([steps[t:t + 1], h], axis=1)
        i = _sigmoid_np(z @ weights["w_i"] + weights["b_i"])
        f = _sigmoid_np(z @ weights["w_f"] + weights["b_f"])
        o = _sigmoid_np(z @ weights["w_o"] + weights["b_o"])
        g = np.tanh(z @ weights["w_g"] + weights["b_g"])
        c = f * c + i * g
        h = o * np.tanh(c)
    return h


def encode_sequence(model: EncoderModel, record: Record) -> np.ndarray:
    """Final hidden state for one record, shape (hidden_dim,)."""
    steps = encode_record(model.schema, record)
    return _scan_np(model.weights, steps)[0]


def embed_all(model: EncoderModel, dataset: SequenceDataset) -> np.ndarray:
    """Row i is exactly encode_sequence(record i); a pure per-record map."""
    return np.stack([encode_sequence(model, r) for r in dataset.records])


def predict_head_seq(model: EncoderModel, h: np.ndarray):
    """Probability vector (classification) or scalar (regression)."""
    h = np.asarray(h, dtype=np.float64).reshape(1, -1)
    if h.shape[1] != model.hidden_dim:
        raise DimensionError(f"embedding length {h.shape[1]} != hidden_dim {model.hidden_dim}")
    logits = h @ model.weights["w_head"] + model.weights["b_head"]
    if model.task == CLASSIFICATION:
        shifted = logits - logits.max()
        ex = np.exp(shifted)
        return (ex / ex.sum())[0]
    return float(logits[0, 0])


# ---------------------------------------------------------------------------
# taped forward (training)


def _scan_tensor(params: dict[str, T.Tensor], steps: np.ndarray) -> T.Tensor:
    """Batched scan over (B, T, input_dim); returns the (B, F_s) tensor."""
    batch, length = steps.shape[0], steps.shape[1]
    hidden = params["w_i"].cols
    h = T.constant(np.zeros((batch, hidden)))
    c = T.constant(np.zeros((batch, hidden)))
    for t in range(length):
        z = T.concat_cols(T.constant(steps[:, t, :]), h)
        i = T.sigmoid(T.add(T.matmul(z, params["w_i"]), params["b_i"]))
        f = T.sigmoid(T.add(T.matmul(z, params["w_f"]), params["b_f"]))
        o = T.sigmoid(T.add(T.matmul(z, params["w_o"]), params["b_o"]))
        g = T.tanh(T.add(T.matmul(z, params["w_g"]), params["b_g"]))
        c = T.add(T.mul(f, c), T.mul(i, g))
        h = T.mul(o, T.tanh(c))
    return h


def _head_tensor(params: dict[str, T.Tensor], h: T.Tensor, task: str) -> T.Tensor:
    logits = T.add(T.matmul(h, params["w_head"]), params["b_head"])
    if task == CLASSIFICATION:
        return T.row_softmax(logits)
    return logits


def encoder_loss(params: dict[str, T.Tensor], steps: np.ndarray,
                 targets: np.ndarray, task: str) -> T.Tensor:
    pred = _head_tensor(params, _scan_tensor(params, steps), task)
    if task == CLASSIFICATION:
        return T.ce_loss(pred, T.constant(targets))
    return T.mse_loss(pred, T.constant(targets))


def _as_tensors(model: EncoderModel) -> dict[str, T.Tensor]:
    """Tensor views sharing the model's weight buffers."""
    return {k: T.Tensor(v) for k, v in model.weights.items()}


def _targets_for(dataset: SequenceDataset, task: str, num_classes: int) -> np.ndarray:
    labels = dataset.labels_array()
    if task == CLASSIFICATION:
        return np.eye(num_classes)[labels.astype(np.intp)]
    return labels.reshape(-1, 1)


def _mean_loss(params, encoded, targets, task, batch_size) -> float:
    total = 0.0
    for start in range(0, encoded.shape[0], batch_size):
        stop = min(start + batch_size, encoded.shape[0])
        loss = encoder_loss(params, encoded[start:stop], targets[start:stop], task)
        total += loss.item() * (stop - start)
    return total / encoded.shape[0]


def train_encoder(train: SequenceDataset, val: SequenceDataset, *,
                  hidden_dim: int, rng: np.random.Generator,
                  lr: float = 1e-5, batch_size: int = 64,
                  max_epochs: int = 50, patience: int = 10,
                  schema: FieldSchema | None = None) -> tuple[EncoderModel, dict]:
    """Mini-batch Adam with early stopping on validation loss.

    Stops once the epochs since the best validation loss exceed
    `patience` and restores the best snapshot. Returns the model and a
    history dict with per-epoch losses.
    """
    if train.task != val.task:
        raise TaskMismatchError(f"train task {train.task} != val task {val.task}")
    task = train.task
    if schema is None:
        schema = fit_field_schema(train)
    num_classes = 1
    if task == CLASSIFICATION:
        labels = [int(r.label) for r in train.records] + [int(r.label) for r in val.records]
        num_classes = max(labels) + 1

    model = init_encoder(schema, task, num_classes, hidden_dim, rng)
    params = _as_tensors(model)
    param_list = list(params.values())
    opt = T.Adam(param_list, lr=lr)

    x_train = encode_dataset(schema, train)
    y_train = _targets_for(train, task, num_classes)
    x_val = encode_dataset(schema, val)
    y_val = _targets_for(val, task, num_classes)

    history: dict = {"train_loss": [], "val_loss": [], "best_epoch": 0}
    best_val = np.inf
    best_weights = model.copy_weights()
    stale = 0
    n = x_train.shape[0]
    for epoch in range(max_epochs):
        order = rng.permutation(n)
        epoch_total = 0.0
        for start in range(0, n, batch_size):
            take = order[start:start + batch_size]
            tape = T.Tape()
            tape.watch(*param_list)
            loss = encoder_loss(params, x_train[take], y_train[take], task)
            opt.zero_grad()
            tape.backward(loss)
            tape.release()
            opt.step()
            epoch_total += loss.item() * take.size
        history["train_loss"].append(epoch_total / n)
        val_loss = _mean_loss(params, x_val, y_val, task, batch_size)
        history["val_loss"].append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best_weights = model.copy_weights()
            history["best_epoch"] = epoch
            stale = 0
        else:
            stale += 1
            if stale > patience:
                break
    model.weights = best_weights
    return model, history


# ---------------------------------------------------------------------------
# serialization


def encoder_to_dict(model: EncoderModel) -> dict:
    return {
        "kind": "sequence-encoder",
        "task": model.task,
        "num_classes": model.num_classes,
        "hidden_dim": model.hidden_dim,
        "schema": model.schema.to_dict(),
        "weights": {k: v.tolist() for k, v in model.weights.items()},
    }


def encoder_from_dict(d: dict) -> EncoderModel:
    weights = {k: np.array(v, dtype=np.float64) for k, v in d["weights"].items()}
    return EncoderModel(
        schema=FieldSchema.from_dict(d["schema"]),
        task=d["task"],
        num_classes=d["num_classes"],
        hidden_dim=d["hidden_dim"],
        weights=weights,
    )


def save_encoder(path, model: EncoderModel) -> None:
    write_json_atomic(path, encoder_to_dict(model))


def load_encoder(path) -> EncoderModel:
    return encoder_from_dict(read_json(path))
