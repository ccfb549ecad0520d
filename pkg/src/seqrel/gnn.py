"""One-layer message-passing models over relation graphs.

Four convolution kinds share a single forward path: symmetric-normalized
sum (gcn), self/neighbor concatenation with mean or max pooling
(sage_mean, sage_max), and single-head attention (gat, leaky-relu slope
0.2). One convolution, then ReLU; convolutions carry no bias, the
affine prediction head does.

Views are directed: an edge (src, dst) moves a message from src to dst.
Training on a compressed graph symmetrizes its undirected edges; query
attachment keeps only compressed-to-query edges, so a node's output
depends solely on its own features and its in-neighbors. That is what
makes single-sample scoring independent of the original corpus size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .compress import CompressedGraph
from .exceptions import (
    DimensionError,
    EmptyInputError,
    ParameterError,
    TaskMismatchError,
)
from .graph import connect_to_compressed
from .ioutil import read_json, write_json_atomic

CONV_KINDS = ("gcn", "sage_mean", "sage_max", "gat")
LEAKY_SLOPE = 0.2


@dataclass
class GnnModel:
    kind: str
    task: str  # classification | regression
    in_dim: int
    hidden_dim: int
    out_dim: int
    weights: dict[str, np.ndarray]

    def copy_weights(self) -> dict[str, np.ndarray]:
        return {k: v.copy() for k, v in self.weights.items()}


def init_gnn(kind: str, task: str, in_dim: int, hidden_dim: int, out_dim: int,
             rng: np.random.Generator) -> GnnModel:
    if kind not in CONV_KINDS:
        raise ParameterError(f"unknown conv kind {kind!r}, expected one of {CONV_KINDS}")
    weights: dict[str, np.ndarray] = {}
    conv_in = 2 * in_dim if kind.startswith("sage") else in_dim
    weights["w_conv"] = T.glorot_uniform(rng, conv_in, hidden_dim)
    if kind == "gat":
        weights["att_self"] = T.glorot_uniform(rng, hidden_dim, 1)
        weights["att_neigh"] = T.glorot_uniform(rng, hidden_dim, 1)
    weights["w_head"] = T.glorot_uniform(rng, hidden_dim, out_dim)
    weights["b_head"] = np.zeros((1, out_dim))
    return GnnModel(kind, task, in_dim, hidden_dim, out_dim, weights)


# ---------------------------------------------------------------------------
# message-passing views


@dataclass
class GraphView:
    """Directed edges sorted by (dst, src), plus per-node degrees
    (in-degree + 1 self-loop) and the target rows to produce."""

    features: np.ndarray
    edge_src: np.ndarray
    edge_dst: np.ndarray
    degrees: np.ndarray
    targets: np.ndarray

    @property
    def num_nodes(self) -> int:
        return self.features.shape[0]


def _sort_edges(src: np.ndarray, dst: np.ndarray):
    order = np.lexsort((src, dst))
    return src[order], dst[order]


def compressed_view(cg: CompressedGraph) -> GraphView:
    """Symmetric view of the compressed graph; every node is a target."""
    e = cg.edges
    src = np.concatenate([e[:, 0], e[:, 1]])
    dst = np.concatenate([e[:, 1], e[:, 0]])
    src, dst = _sort_edges(src, dst)
    return GraphView(
        features=cg.features, edge_src=src, edge_dst=dst,
        degrees=cg.degrees() + 1, targets=np.arange(cg.k, dtype=np.intp))


def attach_view(cg: CompressedGraph, x_query: np.ndarray,
                connect_edges: np.ndarray,
                comp_degrees: np.ndarray | None = None) -> GraphView:
    """Queries appended after the compressed nodes, receiving messages
    only from compressed nodes. Query-to-query edges never exist, so a
    query's output is independent of what else is in the batch.
    Compressed degrees still count the compressed adjacency; pass
    cg.degrees() as comp_degrees to skip recounting per call."""
    x_query = np.asarray(x_query, dtype=np.float64)
    if x_query.shape[1] != cg.dim:
        raise DimensionError(f"query width {x_query.shape[1]} != compressed width {cg.dim}")
    k, b = cg.k, x_query.shape[0]
    connect_edges = np.asarray(connect_edges, dtype=np.int64).reshape(-1, 2)
    src, dst = _sort_edges(connect_edges[:, 1], k + connect_edges[:, 0])
    q_deg = np.bincount(connect_edges[:, 0], minlength=b)
    if comp_degrees is None:
        comp_degrees = cg.degrees()
    return GraphView(
        features=np.concatenate([cg.features, x_query]),
        edge_src=src, edge_dst=dst,
        degrees=np.concatenate([comp_degrees + 1, q_deg + 1]),
        targets=k + np.arange(b, dtype=np.intp))


# ---------------------------------------------------------------------------
# forward


def _params_of(model: GnnModel) -> dict[str, T.Tensor]:
    return {k: T.Tensor(v) for k, v in model.weights.items()}


def _target_edges(view: GraphView):
    """Edges landing on a target row, with dst remapped to target position.

    A single conv layer only ever reads messages arriving at the rows it
    outputs, so aggregation can skip every other destination.
    """
    idx_of = np.full(view.num_nodes, -1, dtype=np.intp)
    idx_of[view.targets] = np.arange(view.targets.size, dtype=np.intp)
    keep = idx_of[view.edge_dst] >= 0
    return view.edge_src[keep], view.edge_dst[keep], idx_of[view.edge_dst[keep]]


def gnn_forward(params: dict[str, T.Tensor], kind: str, view: GraphView) -> T.Tensor:
    """Representations of the view's target rows, (len(targets), F_w)."""
    n = view.num_nodes
    x = T.constant(view.features)
    src, dst = view.edge_src, view.edge_dst
    if kind == "gcn":
        if view.features.shape[1] != params["w_conv"].rows:
            raise DimensionError(f"feature width {view.features.shape[1]} != "
                                 f"conv input {params['w_conv'].rows}")
        d = view.degrees.astype(np.float64)
        src_t, dst_orig, dst_t = _target_edges(view)
        coef = 1.0 / np.sqrt(d[src_t] * d[dst_orig])
        msgs = T.mul(T.gather_rows(x, src_t), T.constant(coef.reshape(-1, 1)))
        agg = T.segment_sum(msgs, dst_t, view.targets.size)
        self_term = T.mul(T.gather_rows(x, view.targets),
                          T.constant((1.0 / d[view.targets]).reshape(-1, 1)))
        h = T.matmul(T.add(agg, self_term), params["w_conv"])
    elif kind in ("sage_mean", "sage_max"):
        if 2 * view.features.shape[1] != params["w_conv"].rows:
            raise DimensionError(f"feature width {view.features.shape[1]} != "
                                 f"conv input {params['w_conv'].rows} / 2")
        src_t, _, dst_t = _target_edges(view)
        gathered = T.gather_rows(x, src_t)
        pool = T.segment_mean if kind == "sage_mean" else T.segment_max
        neigh = pool(gathered, dst_t, view.targets.size)
        both = T.concat_cols(T.gather_rows(x, view.targets), neigh)
        h = T.matmul(both, params["w_conv"])
    elif kind == "gat":
        if view.features.shape[1] != params["w_conv"].rows:
            raise DimensionError(f"feature width {view.features.shape[1]} != "
                                 f"conv input {params['w_conv'].rows}")
        z = T.matmul(x, params["w_conv"])
        s_self = T.matmul(z, params["att_self"])
        s_neigh = T.matmul(z, params["att_neigh"])
        loops = np.arange(n, dtype=np.intp)
        asrc, adst = _sort_edges(np.concatenate([src, loops]),
                                 np.concatenate([dst, loops]))
        e = T.leaky_relu(T.add(T.gather_rows(s_self, adst), T.gather_rows(s_neigh, asrc)),
                         alpha=LEAKY_SLOPE)
        # max-shift per destination for stable exponentials; softmax is
        # shift-invariant so treating the shift as a constant is exact
        shift = np.zeros((n, 1))
        uniq, starts = np.unique(adst, return_index=True)
        shift[uniq, 0] = np.maximum.reduceat(e.data[:, 0], starts)
        ex = T.exp(T.sub(e, T.constant(shift[adst])))
        denom = T.segment_sum(ex, adst, n)
        alpha = T.div(ex, T.gather_rows(denom, adst))
        h_all = T.segment_sum(T.mul(T.gather_rows(z, asrc), alpha), adst, n)
        h = T.gather_rows(h_all, view.targets)
    else:
        raise ParameterError(f"unknown conv kind {kind!r}")
    return T.relu(h)


def predict_tensor(params: dict[str, T.Tensor], h: T.Tensor, task: str) -> T.Tensor:
    if h.cols != params["w_head"].rows:
        raise DimensionError(f"representation width {h.cols} != head input "
                             f"{params['w_head'].rows}")
    logits = T.add(T.matmul(h, params["w_head"]), params["b_head"])
    if task == "classification":
        return T.row_softmax(logits)
    return logits


def forward_view(model: GnnModel, view: GraphView) -> np.ndarray:
    return gnn_forward(_params_of(model), model.kind, view).data


def gnn_predict(model: GnnModel, w: np.ndarray) -> np.ndarray:
    """Head over precomputed representations: probability rows or values."""
    return predict_tensor(_params_of(model), T.constant(np.asarray(w, dtype=np.float64)),
                          model.task).data


def predict_view(model: GnnModel, view: GraphView) -> np.ndarray:
    params = _params_of(model)
    return predict_tensor(params, gnn_forward(params, model.kind, view), model.task).data


# ---------------------------------------------------------------------------
# training


def _loss_fn(pred: T.Tensor, target: np.ndarray, loss_kind: str) -> T.Tensor:
    if loss_kind == "ce":
        return T.ce_loss(pred, T.constant(target))
    return T.mse_loss(pred, T.constant(target))


def _class_targets(labels: np.ndarray, num_classes: int) -> np.ndarray:
    return np.eye(num_classes)[np.asarray(labels, dtype=np.intp)]


def train_on_compressed(model: GnnModel, cg: CompressedGraph, *,
                        lr: float = 5e-3, epochs: int = 50,
                        val: tuple[np.ndarray, np.ndarray] | None = None,
                        patience: int = 10, fallback_m: int = 1) -> dict:
    """Full-batch training on the compressed graph.

    Loss: cross entropy when the compressed labels are exactly one-hot,
    mean squared error when averaging produced soft labels, and always
    MSE for regression. With a validation pair (embeddings, labels) the
    epoch budget turns into early stopping on validation loss.
    """
    if model.task != cg.task:
        raise TaskMismatchError(f"model task {model.task} != compressed task {cg.task}")
    if model.in_dim != cg.dim:
        raise DimensionError(f"model input {model.in_dim} != compressed width {cg.dim}")
    loss_kind = "mse"
    if cg.task == "classification" and cg.label_onehot:
        loss_kind = "ce"
    params = _params_of(model)
    param_list = list(params.values())
    opt = T.Adam(param_list, lr=lr)
    view = compressed_view(cg)
    target = cg.labels

    val_view = val_target = None
    if val is not None:
        x_val, y_val = val
        edges = connect_to_compressed(x_val, cg.features, cg.metric, cg.epsilon, fallback_m)
        val_view = attach_view(cg, x_val, edges)
        if cg.task == "classification":
            val_target = _class_targets(y_val, cg.labels.shape[1])
            val_loss_kind = "ce"
        else:
            val_target = np.asarray(y_val, dtype=np.float64).reshape(-1, 1)
            val_loss_kind = "mse"

    history: dict = {"loss": [], "loss_kind": loss_kind, "val_loss": [], "best_epoch": 0}
    best_val = np.inf
    best_weights = model.copy_weights()
    stale = 0
    for epoch in range(epochs):
        tape = T.Tape()
        tape.watch(*param_list)
        pred = predict_tensor(params, gnn_forward(params, model.kind, view), model.task)
        loss = _loss_fn(pred, target, loss_kind)
        opt.zero_grad()
        tape.backward(loss)
        tape.release()
        opt.step()
        history["loss"].append(loss.item())
        if val_view is None:
            continue
        val_pred = predict_tensor(params, gnn_forward(params, model.kind, val_view),
                                  model.task)
        val_loss = _loss_fn(val_pred, val_target, val_loss_kind).item()
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
    if val_view is not None:
        model.weights = best_weights
    return history


def finetune_correlation(model: GnnModel, h_real: np.ndarray, y_real, cg: CompressedGraph,
                         *, metric: str | None = None, epsilon: float | None = None,
                         fallback_m: int = 1, batch_size: int = 64, epochs: int = 1,
                         lr: float = 5e-3, rng: np.random.Generator) -> dict:
    """Refine the model by predicting real nodes from compressed messages.

    Real embeddings are batched; each batch connects to the compressed
    graph and the loss compares real-node predictions against their
    labels. Compressed features are inputs only and are never updated.
    """
    if cg.k < 1:
        raise EmptyInputError("cannot fine-tune against an empty compressed graph")
    if model.in_dim != cg.dim:
        raise DimensionError(f"model input {model.in_dim} != compressed width {cg.dim}")
    metric = cg.metric if metric is None else metric
    epsilon = cg.epsilon if epsilon is None else epsilon
    h_real = np.asarray(h_real, dtype=np.float64)
    n = h_real.shape[0]
    if model.task == "classification":
        targets = _class_targets(y_real, cg.labels.shape[1])
        loss_kind = "ce"
    else:
        targets = np.asarray(y_real, dtype=np.float64).reshape(-1, 1)
        loss_kind = "mse"
    params = _params_of(model)
    param_list = list(params.values())
    opt = T.Adam(param_list, lr=lr)
    history: dict = {"loss": [], "loss_kind": loss_kind}
    comp_deg = cg.degrees()
    for _ in range(epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            take = order[start:start + batch_size]
            edges = connect_to_compressed(h_real[take], cg.features, metric,
                                          epsilon, fallback_m)
            view = attach_view(cg, h_real[take], edges, comp_degrees=comp_deg)
            tape = T.Tape()
            tape.watch(*param_list)
            pred = predict_tensor(params, gnn_forward(params, model.kind, view), model.task)
            loss = _loss_fn(pred, targets[take], loss_kind)
            opt.zero_grad()
            tape.backward(loss)
            tape.release()
            opt.step()
            total += loss.item() * take.size
        history["loss"].append(total / n)
    return history


# ---------------------------------------------------------------------------
# serialization


def gnn_to_dict(model: GnnModel) -> dict:
    return {
        "kind": "relation-model",
        "conv": model.kind,
        "task": model.task,
        "in_dim": model.in_dim,
        "hidden_dim": model.hidden_dim,
        "out_dim": model.out_dim,
        "weights": {k: v.tolist() for k, v in model.weights.items()},
    }


def gnn_from_dict(d: dict) -> GnnModel:
    return GnnModel(
        kind=d["conv"], task=d["task"], in_dim=d["in_dim"],
        hidden_dim=d["hidden_dim"], out_dim=d["out_dim"],
        weights={k: np.array(v, dtype=np.float64) for k, v in d["weights"].items()},
    )


def save_gnn(path, model: GnnModel) -> None:
    write_json_atomic(path, gnn_to_dict(model))


def load_gnn(path) -> GnnModel:
    return gnn_from_dict(read_json(path))
