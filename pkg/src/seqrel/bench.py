"""Benchmark harness: time the compression, training, fine-tuning, and
batch-scoring phases on one dataset and render aligned report tables.

Timing numbers are hardware-specific, so every report carries a hardware
descriptor. Memory is an estimate summing the byte sizes of the model and
compressed-graph structures themselves (not process RSS).
"""

from __future__ import annotations

import platform
from dataclasses import asdict, dataclass
from time import perf_counter

import numpy as np

from . import compress as C
from . import data as D
from . import gnn as G
from . import infer as I
from .config import PipelineConfig
from .exceptions import ParameterError, SeqrelError
from .ioutil import read_json, write_json_atomic
from .pipeline import evaluate_scores, stage_rng

REPORT_VERSION = 1
TABLE_COLUMNS = ("#Nodes", "AUPRC/RMSE", "R@P/sMAPE", "Compression(s)",
                 "Training(s)", "Inference(s/sample)")


@dataclass
class BenchReport:
    n_nodes: int
    k_nodes: int
    task: str
    metrics: dict
    compression_time_s: float
    gnn_training_time_s: float
    finetune_time_s: float
    inference_mean_s: float
    inference_p99_s: float
    memory_bytes: int
    hardware: dict

    def validate(self) -> "BenchReport":
        if not self.k_nodes < self.n_nodes:
            raise ParameterError(
                f"compressed node count {self.k_nodes} must be below the "
                f"original {self.n_nodes}")
        for name in ("compression_time_s", "gnn_training_time_s",
                     "finetune_time_s", "inference_mean_s", "inference_p99_s"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be nonnegative")
        return self


def hardware_descriptor() -> dict:
    return {
        "platform": platform.platform(),
        "processor": platform.processor() or platform.machine(),
        "python": platform.python_version(),
        "numpy": np.__version__,
    }


def _structure_bytes(cg: C.CompressedGraph, model: G.GnnModel) -> int:
    total = cg.features.nbytes + cg.labels.nbytes + cg.edges.nbytes
    total += sum(w.nbytes for w in model.weights.values())
    return int(total)


def _phase(name: str):
    class _Wrap:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, SeqrelError):
                raise type(exc)(f"[{name}] {exc}") from exc
            return False

    return _Wrap()


def run_benchmark(cfg: PipelineConfig, train_x, train_y, train_ids,
                  test_x, test_y) -> BenchReport:
    """Compress, train, fine-tune, and batch-score once, timing each phase."""
    train_x = np.asarray(train_x, dtype=np.float64)
    test_x = np.asarray(test_x, dtype=np.float64)

    with _phase("compress"):
        start = perf_counter()
        cg, _ = C.compress_graph(
            train_x, train_y, list(train_ids), k=cfg.clusters, mode=cfg.mode,
            task=cfg.task, metric=cfg.metric, epsilon=cfg.epsilon,
            pos_ratio=cfg.pos_ratio, rng=stage_rng(cfg.seed, "compress"),
            per_class=cfg.per_class)
        compression_s = perf_counter() - start

    with _phase("train"):
        out_classes = cg.labels.shape[1] if cfg.task == D.CLASSIFICATION else 1
        model = G.init_gnn(cfg.conv, cfg.task, cg.dim, cfg.gnn_hidden,
                           out_classes, stage_rng(cfg.seed, "gnn"))
        start = perf_counter()
        G.train_on_compressed(model, cg, lr=cfg.gnn_lr, epochs=cfg.gnn_epochs,
                              fallback_m=cfg.fallback_m)
        training_s = perf_counter() - start

    with _phase("finetune"):
        start = perf_counter()
        G.finetune_correlation(
            model, train_x, train_y, cg, metric=cfg.metric,
            epsilon=cfg.epsilon, fallback_m=cfg.fallback_m,
            batch_size=cfg.batch_size, epochs=cfg.finetune_epochs,
            lr=cfg.finetune_lr, rng=stage_rng(cfg.seed, "finetune"))
        finetune_s = perf_counter() - start

    with _phase("score"):
        bundle = I.build_bundle(None, model, cg, metric=cfg.metric,
                                epsilon=cfg.epsilon, fallback_m=cfg.fallback_m)
        results, agg = I.score_batch(bundle, list(test_x))
        metrics = evaluate_scores(cfg.task, [r.score for r in results], test_y)

    return BenchReport(
        n_nodes=train_x.shape[0], k_nodes=cg.k, task=cfg.task, metrics=metrics,
        compression_time_s=compression_s, gnn_training_time_s=training_s,
        finetune_time_s=finetune_s, inference_mean_s=agg["mean_s"],
        inference_p99_s=agg["p99_s"],
        memory_bytes=_structure_bytes(cg, model),
        hardware=hardware_descriptor()).validate()


def sweep_benchmark(cfg: PipelineConfig, cluster_counts, train_x, train_y,
                    train_ids, test_x, test_y) -> list:
    from dataclasses import replace

    return [run_benchmark(replace(cfg, clusters=int(k)), train_x, train_y,
                          train_ids, test_x, test_y)
            for k in cluster_counts]


def report_to_dict(report: BenchReport) -> dict:
    out = asdict(report)
    out["format_version"] = REPORT_VERSION
    return out


def report_from_dict(obj: dict) -> BenchReport:
    data = {k: v for k, v in obj.items() if k != "format_version"}
    return BenchReport(**data).validate()


def save_reports(path, reports) -> None:
    write_json_atomic(path, [report_to_dict(r) for r in reports])


def load_reports(path) -> list:
    return [report_from_dict(obj) for obj in read_json(path)]


def _row_of(report: BenchReport) -> tuple:
    if report.task == D.CLASSIFICATION:
        first = report.metrics["auprc"]
        second = report.metrics["recall_at_precision"]
    else:
        first = report.metrics["rmse"]
        second = report.metrics["smape"]
    return (str(report.k_nodes), f"{first:.4f}", f"{second:.4f}",
            f"{report.compression_time_s:.3f}",
            f"{report.gnn_training_time_s + report.finetune_time_s:.3f}",
            f"{report.inference_mean_s:.2e}")


def format_table(reports) -> str:
    """Aligned text table, one row per report, fixed column order."""
    rows = [TABLE_COLUMNS] + [_row_of(r) for r in reports]
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
