"""Cross-validated training protocol: stratified folds, per-epoch curves,
model selection at one shared epoch, and table/curve CSV emission with the
subtree-kernel baseline row."""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .datasets import Dataset
from .gnn import GnnConfig, GnnModel, build_batch, model_forward
from .graphs import CategoricalFeatures, Graph
from .nn import Adam
from .tensor import Tape, predictions, softmax_cross_entropy

BATCH_GRID = (32, 128)
HIDDEN_GRID = (16, 32, 64)
DROPOUT_GRID = (0.0, 0.5)
PROTOCOL_FOLDS = 10


class StratificationError(ValueError):
    """A class has fewer members than the requested number of folds."""


@dataclass(frozen=True)
class TrainSpec:
    """One training configuration; fields come from the standard grid unless
    allow_off_grid is set."""

    config: GnnConfig
    epochs: int = 350
    batch_size: int = 128
    folds: int = PROTOCOL_FOLDS
    seed: int = 0
    allow_off_grid: bool = False

    def __post_init__(self):
        if self.epochs < 1 or self.folds < 1:
            raise ValueError("epochs and folds must be >= 1")
        if self.allow_off_grid:
            return
        if self.batch_size not in BATCH_GRID:
            raise ValueError(f"batch_size {self.batch_size} not in grid {BATCH_GRID}")
        if self.config.hidden_dim not in HIDDEN_GRID:
            raise ValueError(f"hidden_dim {self.config.hidden_dim} not in grid {HIDDEN_GRID}")
        if self.config.dropout_p not in DROPOUT_GRID:
            raise ValueError(f"dropout_p {self.config.dropout_p} not in grid {DROPOUT_GRID}")
        if self.folds != PROTOCOL_FOLDS:
            raise ValueError(f"folds must be {PROTOCOL_FOLDS} (set allow_off_grid to deviate)")


def stratified_kfold(dataset: Dataset, folds: int, seed: int) -> np.ndarray:
    """Per-class proportional fold assignment, deterministic per seed.

    Folds are disjoint and covering; per class the fold sizes differ by at
    most one. Raises StratificationError when a class is smaller than folds.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    labels = np.array(dataset.labels())
    rng = np.random.default_rng(seed)
    assignment = np.full(len(labels), -1, dtype=np.intp)
    for cls in range(dataset.num_classes):
        idx = np.nonzero(labels == cls)[0]
        if len(idx) < folds:
            raise StratificationError(
                f"class {cls} has {len(idx)} graphs, fewer than {folds} folds"
            )
        rng.shuffle(idx)
        assignment[idx] = np.arange(len(idx)) % folds
    return assignment


@dataclass
class FoldCurves:
    """Per-epoch trajectories for one fold."""

    train_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)


@dataclass
class RunRecord:
    """Full 10-fold outcome; the reported statistic lives at one shared epoch."""

    dataset_name: str
    config: GnnConfig
    folds: list[FoldCurves]
    selected_epoch: int
    val_mean: float
    val_std: float

    def val_matrix(self) -> np.ndarray:
        return np.array([fc.val_acc for fc in self.folds])

    def final_train_acc_mean(self) -> float:
        return float(np.mean([fc.train_acc[-1] for fc in self.folds]))


def evaluate_accuracy(model: GnnModel, batch) -> float:
    if batch is None or batch.num_graphs == 0:
        return float("nan")
    _, logits = model_forward(model, batch, mode="eval", canonical=False)
    return float(np.mean(predictions(logits) == batch.labels))


def _fit(
    config: GnnConfig,
    train_graphs: list[Graph],
    val_graphs: list[Graph],
    epochs: int,
    batch_size: int,
    seed: int,
    num_classes: int,
) -> tuple[FoldCurves, GnnModel]:
    feats = train_graphs[0].features
    input_dim = feats.vocab_size if isinstance(feats, CategoricalFeatures) else feats.dim
    model = GnnModel(config, input_dim, num_classes, seed)
    opt = Adam(model.parameters())
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xD0]))
    train_eval = build_batch(train_graphs)
    val_eval = build_batch(val_graphs) if val_graphs else None
    curves = FoldCurves()
    n = len(train_graphs)
    for epoch in range(epochs):
        order = rng.permutation(n)
        total_loss = 0.0
        for start in range(0, n, batch_size):
            chunk = order[start : start + batch_size]
            batch = build_batch([train_graphs[i] for i in chunk])
            tape = Tape()
            _, logits = model_forward(
                model, batch, mode="train", tape=tape, canonical=False, dropout_rng=rng
            )
            loss = softmax_cross_entropy(logits, batch.labels, tape)
            tape.backward(loss)
            opt.step(epoch)
            opt.zero_grad()
            total_loss += float(loss.values) * len(chunk)
        curves.train_loss.append(total_loss / n)
        curves.train_acc.append(evaluate_accuracy(model, train_eval))
        curves.val_acc.append(evaluate_accuracy(model, val_eval))
    return curves, model


def train_model(spec: TrainSpec, dataset: Dataset) -> RunRecord:
    """Stratified k-fold training; deterministic per seed, one tape per fold.

    Per-fold seeds are spec.seed + fold_index so folds could run concurrently
    and still merge deterministically.
    """
    assignment = stratified_kfold(dataset, spec.folds, spec.seed)
    folds: list[FoldCurves] = []
    for f in range(spec.folds):
        train_graphs = [g for g, a in zip(dataset.graphs, assignment) if a != f]
        val_graphs = [g for g, a in zip(dataset.graphs, assignment) if a == f]
        curves, _ = _fit(
            spec.config,
            train_graphs,
            val_graphs,
            spec.epochs,
            spec.batch_size,
            spec.seed + f,
            dataset.num_classes,
        )
        folds.append(curves)
    val = np.array([fc.val_acc for fc in folds])
    mean_by_epoch = val.mean(axis=0)
    selected = int(np.argmax(mean_by_epoch))
    return RunRecord(
        dataset_name=dataset.name,
        config=spec.config,
        folds=folds,
        selected_epoch=selected,
        val_mean=float(val[:, selected].mean()),
        val_std=float(val[:, selected].std()),
    )


def fit_training_curve(spec: TrainSpec, dataset: Dataset) -> tuple[FoldCurves, GnnModel]:
    """Training-curve mode: one model fit on the whole dataset.

    val_acc mirrors train_acc here (there is no held-out split); the curve is
    the per-epoch training trajectory.
    """
    curves, model = _fit(
        spec.config,
        list(dataset.graphs),
        [],
        spec.epochs,
        spec.batch_size,
        spec.seed,
        dataset.num_classes,
    )
    curves.val_acc = list(curves.train_acc)
    return curves, model


def default_readout(dataset: Dataset) -> str:
    """Mean pooling when node features are uninformative (one-symbol vocab),
    sum pooling otherwise."""
    uniform = all(
        isinstance(g.features, CategoricalFeatures) and g.features.vocab_size == 1
        for g in dataset.graphs
    )
    return "mean" if uniform else "sum"


# ---------------------------------------------------------------------------
# CSV emission

WL_ROW_NAME = "wl-subtree"


def run_table(
    dataset: Dataset,
    specs: list[tuple[str, TrainSpec]],
    wl_iterations: int = 4,
    wl_seed: int = 0,
) -> tuple[list[dict], list[dict]]:
    """Train every spec plus the kernel baseline; returns (long_rows, summary_rows).

    Long rows have columns dataset, config, fold, epoch, split, metric, value.
    Summary rows mirror the results table: config, mean, std, selected_epoch.
    """
    from .wl import wl_classify

    long_rows: list[dict] = []
    summary_rows: list[dict] = []
    for name, spec in specs:
        record = train_model(spec, dataset)
        for f, fc in enumerate(record.folds):
            for epoch in range(len(fc.train_acc)):
                for split, metric, value in (
                    ("train", "loss", fc.train_loss[epoch]),
                    ("train", "accuracy", fc.train_acc[epoch]),
                    ("val", "accuracy", fc.val_acc[epoch]),
                ):
                    long_rows.append(
                        dict(dataset=dataset.name, config=name, fold=f, epoch=epoch,
                             split=split, metric=metric, value=value)
                    )
        summary_rows.append(
            dict(config=name, mean=record.val_mean, std=record.val_std,
                 selected_epoch=record.selected_epoch)
        )
    wl_result = wl_classify(dataset, wl_iterations, folds=PROTOCOL_FOLDS, seed=wl_seed)
    summary_rows.append(
        dict(config=WL_ROW_NAME, mean=wl_result.accuracy_mean,
             std=wl_result.accuracy_std, selected_epoch="")
    )
    return long_rows, summary_rows


def run_curves(
    dataset: Dataset,
    specs: list[tuple[str, TrainSpec]],
    wl_iterations: int = 4,
) -> list[dict]:
    """Training-curve rows for every spec plus the flat kernel baseline."""
    from .wl import wl_training_accuracy

    rows: list[dict] = []
    for name, spec in specs:
        curves, _ = fit_training_curve(spec, dataset)
        for epoch in range(len(curves.train_acc)):
            rows.append(
                dict(dataset=dataset.name, config=name, fold=0, epoch=epoch,
                     split="train", metric="loss", value=curves.train_loss[epoch])
            )
            rows.append(
                dict(dataset=dataset.name, config=name, fold=0, epoch=epoch,
                     split="train", metric="accuracy", value=curves.train_acc[epoch])
            )
    rows.append(
        dict(dataset=dataset.name, config=WL_ROW_NAME, fold=0, epoch="",
             split="train", metric="accuracy",
             value=wl_training_accuracy(dataset, wl_iterations))
    )
    return rows


def rows_to_csv(rows: list[dict], columns: list[str]) -> str:
    """UTF-8, LF, header row, '.' decimals; floats via repr for stability."""
    buf = io.StringIO()
    buf.write(",".join(columns) + "\n")
    for row in rows:
        cells = []
        for col in columns:
            val = row[col]
            if isinstance(val, float):
                cells.append(repr(val))
            else:
                cells.append(str(val))
        buf.write(",".join(cells) + "\n")
    return buf.getvalue()
