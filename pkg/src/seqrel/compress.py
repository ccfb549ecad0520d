"""Coreset compression of a relation graph via class-balanced k-means.

Original nodes are clustered per class (classification) or in one pool
(regression). Each cluster becomes one compressed node whose feature and
label rows are transported through the assignment matrix: the cluster
average in centroid mode, or the medoid member row in medoid mode. The
compressed adjacency reuses the threshold graph rule on the compressed
features, keeping one similarity definition end to end.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DimensionError,
    EmptyInputError,
    InfeasibleBalanceError,
    ParameterError,
)
from .graph import build_epsilon_graph, similarity_matrix
from .ioutil import read_json, write_json_atomic

CENTROID = "centroid"
MEDOID = "medoid"
MODES = (CENTROID, MEDOID)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


# ---------------------------------------------------------------------------
# k-means on one pool


def _sq_dists_to(x: np.ndarray, x2: np.ndarray, center: np.ndarray) -> np.ndarray:
    d2 = x2 - 2.0 * (x @ center) + float(center @ center)
    return np.maximum(d2, 0.0)


def _kmeanspp(x: np.ndarray, x2: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = _sq_dists_to(x, x2, centers[0])
    for j in range(1, k):
        total = d2.sum()
        if total > 0.0:
            pick = int(rng.choice(n, p=d2 / total))
        else:
            pick = int(rng.integers(n))
        centers[j] = x[pick]
        np.minimum(d2, _sq_dists_to(x, x2, centers[j]), out=d2)
    return centers


_ASSIGN_BLOCK = 8192


def _assign_points(x: np.ndarray, x2: np.ndarray, centers: np.ndarray):
    """Nearest center per point (ties to the lower center index)."""
    n = x.shape[0]
    c2 = (centers * centers).sum(axis=1)
    labels = np.empty(n, dtype=np.intp)
    best = np.empty(n)
    for start in range(0, n, _ASSIGN_BLOCK):
        stop = min(start + _ASSIGN_BLOCK, n)
        d2 = x2[start:stop, None] - 2.0 * (x[start:stop] @ centers.T) + c2[None, :]
        lab = np.argmin(d2, axis=1)
        labels[start:stop] = lab
        best[start:stop] = d2[np.arange(stop - start), lab]
    return labels, np.maximum(best, 0.0)


def _cluster_sums(x: np.ndarray, labels: np.ndarray, k: int):
    order = np.argsort(labels, kind="stable")
    sorted_labels = labels[order]
    uniq, starts = np.unique(sorted_labels, return_index=True)
    sums = np.zeros((k, x.shape[1]))
    sums[uniq] = np.add.reduceat(x[order], starts, axis=0)
    counts = np.zeros(k, dtype=np.intp)
    counts[uniq] = np.diff(np.append(starts, labels.size))
    return sums, counts


def kmeans_pool(x: np.ndarray, k: int, rng: np.random.Generator,
                max_iters: int = 100) -> tuple[np.ndarray, list[float]]:
    """Lloyd's algorithm with k-means++ seeding on one point pool.

    Returns (cluster index per point, per-iteration SSE trace). An empty
    cluster is re-seeded to the point farthest from its old centroid.
    """
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ParameterError(f"cluster count must satisfy 1 <= k <= n, got k={k}, n={n}")
    if k == n:
        return np.arange(n, dtype=np.intp), [0.0]
    x = np.asarray(x, dtype=np.float64)
    x2 = (x * x).sum(axis=1)
    centers = _kmeanspp(x, x2, k, rng)
    labels = np.full(n, -1, dtype=np.intp)
    trace: list[float] = []
    for _ in range(max_iters):
        new_labels, best = _assign_points(x, x2, centers)
        trace.append(float(best.sum()))
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        sums, counts = _cluster_sums(x, labels, k)
        occupied = counts > 0
        centers[occupied] = sums[occupied] / counts[occupied, None]
        for j in np.nonzero(~occupied)[0]:
            farthest = int(np.argmax(_sq_dists_to(x, x2, centers[j])))
            centers[j] = x[farthest]
    else:
        labels, _ = _assign_points(x, x2, centers)
    # the iteration budget can end right after a reseed; steal the farthest
    # point from any multi-member cluster so the partition stays total
    counts = np.bincount(labels, minlength=k)
    for j in np.nonzero(counts == 0)[0]:
        d2 = _sq_dists_to(x, x2, centers[j])
        movable = counts[labels] > 1
        pick = int(np.argmax(np.where(movable, d2, -np.inf)))
        counts[labels[pick]] -= 1
        labels[pick] = j
        counts[j] += 1
    return labels, trace


# ---------------------------------------------------------------------------
# class-balanced clustering


def class_allotments(class_counts: dict[int, int], k: int,
                     pos_ratio: float | None) -> dict[int, int]:
    """Clusters per class. Binary: positives get round(pos_ratio*k).
    Multi-class: proportional, remainder to the largest classes."""
    classes = sorted(class_counts)
    if k < len(classes):
        raise InfeasibleBalanceError(f"k={k} is smaller than {len(classes)} classes")
    if classes == [0, 1]:
        if pos_ratio is None or not 0.0 < pos_ratio < 1.0:
            raise ParameterError(f"binary labels need pos_ratio in (0,1), got {pos_ratio}")
        k_pos = round_half_up(pos_ratio * k)
        if not 1 <= k_pos <= k - 1:
            raise InfeasibleBalanceError(
                f"pos_ratio {pos_ratio} with k={k} leaves a class without clusters")
        allot = {0: k - k_pos, 1: k_pos}
    else:
        total = sum(class_counts.values())
        allot = {c: max(1, int(np.floor(k * class_counts[c] / total))) for c in classes}
        by_size = sorted(classes, key=lambda c: (-class_counts[c], c))
        spare = k - sum(allot.values())
        i = 0
        while spare > 0:
            allot[by_size[i % len(by_size)]] += 1
            spare -= 1
            i += 1
        while spare < 0:
            donor = max(classes, key=lambda c: (allot[c], class_counts[c]))
            if allot[donor] <= 1:
                raise InfeasibleBalanceError(f"cannot allot {k} clusters over {classes}")
            allot[donor] -= 1
            spare += 1
    for c in classes:
        if class_counts[c] < allot[c]:
            raise InfeasibleBalanceError(
                f"class {c} has {class_counts[c]} nodes but needs {allot[c]} clusters")
    return allot


def balanced_kmeans(x: np.ndarray, labels: np.ndarray | None, k: int, *,
                    pos_ratio: float | None, rng: np.random.Generator,
                    max_iters: int = 100) -> tuple[list[np.ndarray], dict]:
    """Cluster per class (labels given) or in a single pool (labels None).

    Returns (member index arrays, info). Clusters are ordered class by
    class ascending; member arrays are sorted original indices.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise EmptyInputError("nothing to compress")
    members: list[np.ndarray] = []
    info: dict = {"sse": {}, "allotments": {}}
    if labels is None:
        pool_labels, trace = kmeans_pool(x, k, rng, max_iters)
        members.extend(np.sort(np.nonzero(pool_labels == j)[0]) for j in range(k))
        info["sse"]["all"] = trace
        info["allotments"]["all"] = k
        return members, info
    labels = np.asarray(labels)
    classes = sorted(int(c) for c in np.unique(labels))
    counts = {c: int((labels == c).sum()) for c in classes}
    allot = class_allotments(counts, k, pos_ratio)
    for c in classes:
        idx = np.nonzero(labels == c)[0]
        pool_labels, trace = kmeans_pool(x[idx], allot[c], rng, max_iters)
        members.extend(np.sort(idx[pool_labels == j]) for j in range(allot[c]))
        info["sse"][str(c)] = trace
        info["allotments"][str(c)] = allot[c]
    return members, info


# ---------------------------------------------------------------------------
# assignment matrix


@dataclass
class AssignmentMatrix:
    """Hard-partition node->cluster map with transport weights.

    Centroid mode weights every member of cluster j at 1/|C_j|; medoid
    mode keeps a single weight of 1 on the medoid row. Columns sum to 1
    in both modes.
    """

    n: int
    mode: str  # centroid | medoid
    members: list[np.ndarray]
    medoids: np.ndarray  # (K,) original index per cluster

    @property
    def k(self) -> int:
        return len(self.members)

    def to_dense(self) -> np.ndarray:
        phi = np.zeros((self.n, self.k))
        for j, idx in enumerate(self.members):
            if self.mode == "centroid":
                phi[idx, j] = 1.0 / idx.size
            else:
                phi[self.medoids[j], j] = 1.0
        return phi


def _medoid_of(x: np.ndarray, idx: np.ndarray) -> int:
    """Member with the highest cosine similarity to the cluster mean;
    ties go to the lowest original index."""
    mean = x[idx].mean(axis=0, keepdims=True)
    sims = similarity_matrix(x[idx], mean)[:, 0]
    return int(idx[int(np.argmax(sims))])


def build_assignment(members: list[np.ndarray], mode: str, x: np.ndarray) -> AssignmentMatrix:
    if mode not in MODES:
        raise ParameterError(f"unknown assignment mode {mode!r}")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    seen = np.zeros(n, dtype=bool)
    for idx in members:
        if idx.size == 0:
            raise ParameterError("empty cluster in partition")
        if seen[idx].any():
            raise ParameterError("partition assigns a node twice")
        seen[idx] = True
    if not seen.all():
        raise ParameterError("partition does not cover all nodes")
    medoids = np.array([_medoid_of(x, idx) for idx in members], dtype=np.intp)
    return AssignmentMatrix(n=n, mode=mode, members=members, medoids=medoids)


def compress_features_labels(assign: AssignmentMatrix, x: np.ndarray,
                             y: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
    """Transport features and labels through the assignment: cluster
    averages (centroid) or medoid rows (medoid). Also reports whether
    the compressed labels are still exactly one-hot."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if y.ndim == 1:
        y = y.reshape(-1, 1)
    if x.shape[0] != assign.n or y.shape[0] != assign.n:
        raise DimensionError(f"assignment covers {assign.n} rows, got features "
                             f"{x.shape[0]} and labels {y.shape[0]}")
    k = assign.k
    x_tilde = np.empty((k, x.shape[1]))
    y_tilde = np.empty((k, y.shape[1]))
    for j, idx in enumerate(assign.members):
        if assign.mode == "centroid":
            x_tilde[j] = x[idx].mean(axis=0)
            y_tilde[j] = y[idx].mean(axis=0)
        else:
            x_tilde[j] = x[assign.medoids[j]]
            y_tilde[j] = y[assign.medoids[j]]
    onehot = bool(y_tilde.shape[1] > 1
                  and np.all((y_tilde == 0.0) | (y_tilde == 1.0))
                  and np.all(y_tilde.sum(axis=1) == 1.0))
    return x_tilde, y_tilde, onehot


def compress_adjacency(x_tilde: np.ndarray, metric: str, epsilon: float) -> np.ndarray:
    return build_epsilon_graph(x_tilde, metric, epsilon).edges


# ---------------------------------------------------------------------------
# compressed graph artifact


@dataclass
class CompressedGraph:
    mode: str
    task: str  # classification | regression
    metric: str
    epsilon: float
    features: np.ndarray  # (K, D)
    labels: np.ndarray  # (K, c) or (K, 1)
    edges: np.ndarray  # (E, 2), src < dst
    members: list[list[str]]  # original record ids per compressed node
    medoid_ids: list[str]
    label_onehot: bool

    @property
    def k(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def degrees(self) -> np.ndarray:
        """Undirected degree per compressed node."""
        return np.bincount(self.edges.ravel(), minlength=self.k).astype(np.intp)


def trace_representatives(cg: CompressedGraph, j: int) -> tuple[str, list[str]]:
    """Representative (medoid) record id and the full member id list."""
    if not 0 <= j < cg.k:
        raise IndexError(f"compressed node {j} out of range [0, {cg.k})")
    return cg.medoid_ids[j], list(cg.members[j])


def compress_graph(x: np.ndarray, labels, ids: list[str], *, k: int, mode: str,
                   task: str, metric: str, epsilon: float, pos_ratio: float | None,
                   rng: np.random.Generator, max_iters: int = 100,
                   per_class: bool = True) -> tuple[CompressedGraph, dict]:
    """Full compression: cluster, assign, transport, rebuild adjacency.

    Classification clusters each class separately unless per_class is
    off (single pool yields soft compressed labels). Regression always
    uses a single pool.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if len(ids) != n:
        raise DimensionError(f"{n} feature rows but {len(ids)} ids")
    if not 1 <= k < n:
        raise ParameterError(f"compressed size must satisfy 1 <= K < N, got K={k}, N={n}")
    if task == "classification":
        class_labels = np.asarray(labels, dtype=np.intp)
        num_classes = int(class_labels.max()) + 1
        y = np.eye(num_classes)[class_labels]
        pool_labels = class_labels if per_class else None
    else:
        y = np.asarray(labels, dtype=np.float64).reshape(-1, 1)
        pool_labels = None
    members, info = balanced_kmeans(x, pool_labels, k, pos_ratio=pos_ratio,
                                    rng=rng, max_iters=max_iters)
    assign = build_assignment(members, mode, x)
    x_tilde, y_tilde, onehot = compress_features_labels(assign, x, y)
    edges = compress_adjacency(x_tilde, metric, epsilon)
    cg = CompressedGraph(
        mode=mode, task=task, metric=metric, epsilon=epsilon,
        features=x_tilde, labels=y_tilde, edges=edges,
        members=[[ids[i] for i in idx] for idx in assign.members],
        medoid_ids=[ids[i] for i in assign.medoids],
        label_onehot=onehot,
    )
    return cg, info


# ---------------------------------------------------------------------------
# serialization


def compressed_to_dict(cg: CompressedGraph) -> dict:
    return {
        "kind": "compressed-graph",
        "mode": cg.mode,
        "task": cg.task,
        "metric": cg.metric,
        "epsilon": cg.epsilon,
        "features": cg.features.tolist(),
        "labels": cg.labels.tolist(),
        "edges": cg.edges.tolist(),
        "members": cg.members,
        "medoid_ids": cg.medoid_ids,
        "label_onehot": cg.label_onehot,
    }


def compressed_from_dict(d: dict) -> CompressedGraph:
    edges = np.array(d["edges"], dtype=np.int64).reshape(-1, 2)
    return CompressedGraph(
        mode=d["mode"], task=d["task"], metric=d["metric"], epsilon=d["epsilon"],
        features=np.array(d["features"], dtype=np.float64),
        labels=np.array(d["labels"], dtype=np.float64),
        edges=edges, members=[list(m) for m in d["members"]],
        medoid_ids=list(d["medoid_ids"]), label_onehot=d["label_onehot"],
    )


def save_compressed(path, cg: CompressedGraph) -> None:
    write_json_atomic(path, compressed_to_dict(cg))


def load_compressed(path) -> CompressedGraph:
    return compressed_from_dict(read_json(path))
