"""Dense 2-D float64 matrices with a reverse-mode gradient tape.

The tape covers exactly the primitives the pipeline composes: matmul,
broadcast add/sub, hadamard/column products, the usual nonlinearities,
row softmax, column concatenation, row gather, segment reductions, and
the two losses. Everything is float64; no NaN or Inf may escape a loss.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .exceptions import DimensionError, NumericFailureError


def _as_matrix(values) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {arr.shape}")
    return np.ascontiguousarray(arr)


class Tensor:
    """A rows x cols float64 matrix, optionally tracked for gradients."""

    __slots__ = ("data", "grad", "requires_grad", "tape")

    def __init__(self, values, requires_grad: bool = False, tape: "Tape | None" = None):
        self.data = _as_matrix(values)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.tape = tape

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    def item(self) -> float:
        if self.data.size != 1:
            raise DimensionError(f"item() needs a 1x1 matrix, got {self.shape}")
        return float(self.data[0, 0])

    def __add__(self, other: "Tensor") -> "Tensor":
        return add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        return sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        return mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return matmul(self, other)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def parameter(values) -> Tensor:
    return Tensor(values, requires_grad=True)


def constant(values) -> Tensor:
    return Tensor(values)


class Tape:
    """Ordered record of primitive ops; backward replays it in reverse.

    Ops append in construction order, which is a topological order of the
    expression graph, so the reverse sweep sees every node after all its
    consumers. Outputs that never feed the loss keep a None gradient and
    are skipped.
    """

    def __init__(self):
        self._records: list[tuple[Tensor, list[tuple[Tensor, Callable]]]] = []
        self._watched: list[Tensor] = []

    def watch(self, *tensors: Tensor) -> None:
        for t in tensors:
            t.requires_grad = True
            t.tape = self
            t.grad = None
            self._watched.append(t)

    def release(self) -> None:
        """Detach watched tensors so later forward passes stop recording."""
        for t in self._watched:
            t.tape = None
        self._watched.clear()
        self._records.clear()

    def _record(self, out: Tensor, pulls: list[tuple[Tensor, Callable]]) -> None:
        self._records.append((out, pulls))

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise DimensionError(f"backward needs a scalar loss, got {loss.shape}")
        loss.grad = np.ones((1, 1))
        for out, pulls in reversed(self._records):
            g = out.grad
            if g is None:
                continue
            for parent, pull in pulls:
                contrib = pull(g)
                if parent.grad is None:
                    parent.grad = contrib
                else:
                    parent.grad += contrib
            out.grad = None  # free intermediate adjoints as we go


def _make(data: np.ndarray, pulls: list[tuple[Tensor, Callable]]) -> Tensor:
    live = [(t, fn) for t, fn in pulls if t.requires_grad]
    if not live:
        return Tensor(data)
    tape = None
    for t, _ in live:
        if t.tape is not None:
            tape = t.tape
            break
    out = Tensor(data, requires_grad=True, tape=tape)
    if tape is not None:
        tape._record(out, live)
    return out


# ---------------------------------------------------------------------------
# primitives


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.cols != b.rows:
        raise DimensionError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    data = a.data @ b.data
    return _make(data, [
        (a, lambda g: g @ b.data.T),
        (b, lambda g: a.data.T @ g),
    ])


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        return _make(a.data + b.data, [
            (a, lambda g: g),
            (b, lambda g: g),
        ])
    if b.rows == 1 and b.cols == a.cols:  # bias row broadcast
        return _make(a.data + b.data, [
            (a, lambda g: g),
            (b, lambda g: g.sum(axis=0, keepdims=True)),
        ])
    raise DimensionError(f"add shape mismatch: {a.shape} + {b.shape}")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape == b.shape:
        return _make(a.data - b.data, [
            (a, lambda g: g),
            (b, lambda g: -g),
        ])
    if b.rows == 1 and b.cols == a.cols:
        return _make(a.data - b.data, [
            (a, lambda g: g),
            (b, lambda g: -g.sum(axis=0, keepdims=True)),
        ])
    raise DimensionError(f"sub shape mismatch: {a.shape} - {b.shape}")


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Hadamard product; b may also be a per-row column (n x 1)."""
    if a.shape == b.shape:
        return _make(a.data * b.data, [
            (a, lambda g: g * b.data),
            (b, lambda g: g * a.data),
        ])
    if b.cols == 1 and b.rows == a.rows:
        return _make(a.data * b.data, [
            (a, lambda g: g * b.data),
            (b, lambda g: (g * a.data).sum(axis=1, keepdims=True)),
        ])
    raise DimensionError(f"mul shape mismatch: {a.shape} * {b.shape}")


def div(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise quotient; b may be a per-row column (n x 1)."""
    if not (a.shape == b.shape or (b.cols == 1 and b.rows == a.rows)):
        raise DimensionError(f"div shape mismatch: {a.shape} / {b.shape}")
    data = a.data / b.data
    return _make(data, [
        (a, lambda g: g / b.data),
        (b, lambda g: _div_b_grad(g, a.data, b.data)),
    ])


def _div_b_grad(g, a_data, b_data):
    full = -g * a_data / (b_data * b_data)
    if b_data.shape[1] == 1 and a_data.shape[1] != 1:
        return full.sum(axis=1, keepdims=True)
    return full


def scale(a: Tensor, s: float) -> Tensor:
    return _make(a.data * s, [(a, lambda g: g * s)])


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0.0
    return _make(np.where(mask, a.data, 0.0), [(a, lambda g: g * mask)])


def leaky_relu(a: Tensor, alpha: float = 0.01) -> Tensor:
    slope = np.where(a.data > 0.0, 1.0, alpha)
    return _make(a.data * slope, [(a, lambda g: g * slope)])


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return _make(out, [(a, lambda g: g * out * (1.0 - out))])


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)
    return _make(out, [(a, lambda g: g * (1.0 - out * out))])


def exp(a: Tensor) -> Tensor:
    out = np.exp(a.data)
    return _make(out, [(a, lambda g: g * out)])


_ELEMENTWISE = {"relu": relu, "sigmoid": sigmoid, "tanh": tanh, "leaky_relu": leaky_relu}


def elementwise(op: str, a: Tensor, alpha: float = 0.01) -> Tensor:
    """Dispatch by name; `leaky_relu` takes the negative-side slope."""
    try:
        fn = _ELEMENTWISE[op]
    except KeyError:
        raise DimensionError(f"unknown elementwise op {op!r}") from None
    if op == "leaky_relu":
        return fn(a, alpha)
    return fn(a)


def row_softmax(a: Tensor) -> Tensor:
    shifted = a.data - a.data.max(axis=1, keepdims=True)
    ex = np.exp(shifted)
    out = ex / ex.sum(axis=1, keepdims=True)

    def pull(g):
        inner = (g * out).sum(axis=1, keepdims=True)
        return out * (g - inner)

    return _make(out, [(a, pull)])


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    if a.rows != b.rows:
        raise DimensionError(f"concat_cols row mismatch: {a.shape} vs {b.shape}")
    split = a.cols
    data = np.concatenate([a.data, b.data], axis=1)
    return _make(data, [
        (a, lambda g: g[:, :split]),
        (b, lambda g: np.ascontiguousarray(g[:, split:])),
    ])


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    idx = np.asarray(idx, dtype=np.intp)
    data = a.data[idx]

    def pull(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return out

    return _make(data, [(a, pull)])


def _segment_spans(segments: np.ndarray, num_segments: int):
    """Segment ids must be sorted non-decreasing; returns run boundaries."""
    uniq, starts = np.unique(segments, return_index=True)
    return uniq, starts


def segment_sum(a: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    segments = np.asarray(segments, dtype=np.intp)
    out = np.zeros((num_segments, a.cols))
    if segments.size:
        uniq, starts = _segment_spans(segments, num_segments)
        out[uniq] = np.add.reduceat(a.data, starts, axis=0)
    return _make(out, [(a, lambda g: g[segments] if segments.size else np.zeros_like(a.data))])


def segment_mean(a: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Row mean per segment; empty segments yield zero rows."""
    segments = np.asarray(segments, dtype=np.intp)
    out = np.zeros((num_segments, a.cols))
    counts = np.ones(num_segments)
    if segments.size:
        uniq, starts = _segment_spans(segments, num_segments)
        counts[uniq] = np.diff(np.append(starts, segments.size))
        out[uniq] = np.add.reduceat(a.data, starts, axis=0)
        out /= counts[:, None]

    def pull(g):
        if not segments.size:
            return np.zeros_like(a.data)
        return g[segments] / counts[segments, None]

    return _make(out, [(a, pull)])


def segment_max(a: Tensor, segments: np.ndarray, num_segments: int) -> Tensor:
    """Columnwise max per segment; empty segments yield zero rows.

    Gradient flows to the first row attaining the max in each column,
    which keeps tie-breaking deterministic.
    """
    segments = np.asarray(segments, dtype=np.intp)
    out = np.zeros((num_segments, a.cols))
    spans = []
    if segments.size:
        uniq, starts = _segment_spans(segments, num_segments)
        ends = np.append(starts[1:], segments.size)
        spans = list(zip(uniq.tolist(), starts.tolist(), ends.tolist()))
        out[uniq] = np.maximum.reduceat(a.data, starts, axis=0)

    def pull(g):
        ga = np.zeros_like(a.data)
        for seg, start, end in spans:
            block = a.data[start:end]
            winners = np.argmax(block, axis=0)
            ga[start + winners, np.arange(a.cols)] += g[seg]
        return ga

    return _make(out, [(a, pull)])


LOG_CLAMP = 1e-12


def ce_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean-over-rows cross entropy with the log clamped at 1e-12."""
    if pred.shape != target.shape:
        raise DimensionError(f"ce_loss shape mismatch: {pred.shape} vs {target.shape}")
    n = pred.rows
    clipped = np.maximum(pred.data, LOG_CLAMP)
    value = -(target.data * np.log(clipped)).sum() / n
    _check_loss(value)

    def pull_pred(g):
        grad = np.where(pred.data > LOG_CLAMP, -target.data / clipped / n, 0.0)
        return g[0, 0] * grad

    def pull_target(g):
        return g[0, 0] * (-np.log(clipped) / n)

    return _make(np.array([[value]]), [(pred, pull_pred), (target, pull_target)])


def mse_loss(pred: Tensor, target: Tensor) -> Tensor:
    """Mean over all entries of the squared difference."""
    if pred.shape != target.shape:
        raise DimensionError(f"mse_loss shape mismatch: {pred.shape} vs {target.shape}")
    diff = pred.data - target.data
    total = diff.size
    value = (diff * diff).sum() / total
    _check_loss(value)
    return _make(np.array([[value]]), [
        (pred, lambda g: g[0, 0] * 2.0 * diff / total),
        (target, lambda g: g[0, 0] * -2.0 * diff / total),
    ])


def _check_loss(value: float) -> None:
    if not np.isfinite(value):
        raise NumericFailureError(f"loss is not finite: {value}")


# ---------------------------------------------------------------------------
# optimizer and gradient checking


class Adam:
    """Standard Adam over a fixed parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m = [np.zeros_like(p.data) for p in self.params]
        self._v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1 ** self.t
        bias2 = 1.0 - b2 ** self.t
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            if g.shape != p.data.shape:
                raise DimensionError(f"gradient shape {g.shape} != parameter shape {p.data.shape}")
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p.data -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def finite_diff_check(build_loss: Callable[["Tape | None"], Tensor],
                      params: Sequence[Tensor], h: float = 1e-5) -> float:
    """Compare tape gradients against central finite differences.

    `build_loss(tape)` must construct the scalar loss from `params`; it is
    called once with a live tape for the analytic pass and repeatedly with
    None while entries are perturbed in place. Returns the max over all
    parameter entries of |analytic - numeric| / max(1, |numeric|).
    """
    tape = Tape()
    tape.watch(*params)
    loss = build_loss(tape)
    tape.backward(loss)
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    tape.release()
    for p in params:
        p.grad = None

    worst = 0.0
    for p, grad in zip(params, analytic):
        flat = p.data.reshape(-1)
        gflat = grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            up = build_loss(None).item()
            flat[i] = orig - h
            down = build_loss(None).item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * h)
            err = abs(gflat[i] - numeric) / max(1.0, abs(numeric))
            worst = max(worst, err)
    return worst


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))
