"""Measurement apparatus: stratified CV, F-measure, ROC area, purity.

Cross-validation pools the predictions of all folds into one confusion
matrix and computes metrics on the pool, which keeps results exact and
deterministic even for classes with a handful of members. Per-fold
standardization happens inside model training, so no test-fold statistics
ever leak into a fold's model.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .classify import train_knn, train_svm
from .entropy import FeatureVector
from .trace_model import CLASS_ORDER, ActivityClass


@dataclass
class ConfusionMatrix:
    """Counts indexed by (predicted row, true column)."""

    row_keys: tuple
    col_keys: tuple
    counts: np.ndarray

    @classmethod
    def from_pairs(cls, predicted, truths, row_keys=None, col_keys=None):
        if len(predicted) != len(truths):
            raise ValueError("predicted and true sequences differ in length")
        if row_keys is None:
            row_keys = tuple(sorted(set(predicted), key=_key_order))
        if col_keys is None:
            col_keys = tuple(sorted(set(truths), key=_key_order))
        row_index = {k: i for i, k in enumerate(row_keys)}
        col_index = {k: i for i, k in enumerate(col_keys)}
        counts = np.zeros((len(row_keys), len(col_keys)), dtype=np.int64)
        for p, t in zip(predicted, truths):
            counts[row_index[p], col_index[t]] += 1
        return cls(tuple(row_keys), tuple(col_keys), counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def write_csv(self, stream: TextIO, corner: str = "predicted") -> None:
        cols = ",".join(_key_name(k) for k in self.col_keys)
        stream.write(f"{corner},{cols}\n")
        for i, row_key in enumerate(self.row_keys):
            cells = ",".join(str(int(c)) for c in self.counts[i])
            stream.write(f"{_key_name(row_key)},{cells}\n")


def _key_order(key):
    if isinstance(key, ActivityClass):
        return (0, CLASS_ORDER.index(key))
    return (1, key)


def _key_name(key) -> str:
    return key.value if isinstance(key, ActivityClass) else str(key)


def precision_recall(conf: ConfusionMatrix, cls) -> tuple[float, float]:
    if cls not in conf.col_keys:
        raise ValueError(f"class {cls} not present in confusion columns")
    col = conf.col_keys.index(cls)
    tp = 0.0
    if cls in conf.row_keys:
        row = conf.row_keys.index(cls)
        tp = float(conf.counts[row, col])
        predicted = float(conf.counts[row, :].sum())
    else:
        predicted = 0.0
    actual = float(conf.counts[:, col].sum())
    precision = tp / predicted if predicted > 0 else 0.0
    recall = tp / actual if actual > 0 else 0.0
    return precision, recall


def f_measure(conf: ConfusionMatrix, cls) -> float:
    """Harmonic mean of precision and recall; 0 when both vanish."""
    precision, recall = precision_recall(conf, cls)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def roc_area(scores, truths, cls) -> float:
    """One-vs-rest AUC by the rank statistic; score ties count one half.

    Equivalent to the probability that a random positive outranks a
    random negative. Raises when the ground truth is single-class, where
    the area is undefined.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.array([t == cls for t in truths], dtype=bool)
    n_pos = int(positive.sum())
    n_neg = len(positive) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError(
            f"AUC undefined for {_key_name(cls)}: ground truth has a single class"
        )
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    rank_sum = float(ranks[positive].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def stratified_folds(
    labels: Sequence, folds: int = 10, seed: int = 0
) -> np.ndarray:
    """Assign items to folds, balancing sizes and per-class counts.

    Fold sizes differ by at most one overall, and each class's members
    spread across folds with counts differing by at most one. The
    remainder folds rotate across classes so no fold systematically
    collects the extras. Deterministic given the seed.
    """
    n = len(labels)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if folds > n:
        raise ValueError(f"folds={folds} exceeds dataset size {n}")
    rng = np.random.default_rng(seed)
    by_class: dict = defaultdict(list)
    for idx, label in enumerate(labels):
        by_class[label].append(idx)

    fold_ids = np.empty(n, dtype=np.int64)
    extra_ptr = 0
    for label in sorted(by_class, key=_key_order):
        members = np.array(by_class[label], dtype=np.int64)
        rng.shuffle(members)
        base, extras = divmod(len(members), folds)
        sizes = np.full(folds, base)
        for off in range(extras):
            sizes[(extra_ptr + off) % folds] += 1
        extra_ptr += extras
        start = 0
        for f in range(folds):
            fold_ids[members[start : start + sizes[f]]] = f
            start += sizes[f]
    return fold_ids


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f_measure: float
    roc_auc: float | None


@dataclass
class ClassifierSpec:
    """Which classifier to cross-validate, with its hyperparameters."""

    kind: str  # "knn" | "svm"
    k: int = 3
    C: float = 1.0
    gamma: float = 0.5
    tol: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("knn", "svm"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")

    def train(self, vectors, labels, classes=None, threads: int = 1):
        if self.kind == "knn":
            return train_knn(vectors, labels, k=self.k, classes=classes)
        return train_svm(
            vectors,
            labels,
            C=self.C,
            gamma=self.gamma,
            tol=self.tol,
            threads=threads,
            classes=classes,
        )

    def describe(self) -> str:
        if self.kind == "knn":
            return f"k-NN (k={self.k})"
        return f"SVM (RBF, C={self.C}, gamma={self.gamma})"


@dataclass
class ClassReport:
    """Pooled cross-validation results in Table-style layout."""

    model_desc: str
    classes: tuple[ActivityClass, ...]
    per_class: dict[ActivityClass, ClassMetrics]
    macro_f: float
    macro_auc: float | None
    confusion: ConfusionMatrix
    n_items: int
    folds: int
    seed: int
    skipped_pairs: list[str] = field(default_factory=list)
    predictions: list[tuple[str, str, str]] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "model": self.model_desc,
            "n_items": self.n_items,
            "folds": self.folds,
            "seed": self.seed,
            "classes": [c.value for c in self.classes],
            "per_class": {
                c.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f_measure": m.f_measure,
                    "roc_auc": m.roc_auc,
                }
                for c, m in self.per_class.items()
            },
            "macro_f": self.macro_f,
            "macro_auc": self.macro_auc,
            "skipped_pairs": list(self.skipped_pairs),
            "predictions": [
                {"url": u, "true": t, "predicted": p}
                for u, t, p in self.predictions
            ],
        }

    def to_text_table(self) -> str:
        """Aligned columns: one column per class, F and ROC rows."""
        names = [c.value for c in self.classes] + ["macro"]
        f_row = [f"{self.per_class[c].f_measure:.3f}" for c in self.classes]
        f_row.append(f"{self.macro_f:.3f}")
        roc_row = [
            "n/a"
            if self.per_class[c].roc_auc is None
            else f"{self.per_class[c].roc_auc:.3f}"
            for c in self.classes
        ]
        roc_row.append("n/a" if self.macro_auc is None else f"{self.macro_auc:.3f}")
        widths = [
            max(len(n), len(f), len(r), 5)
            for n, f, r in zip(names, f_row, roc_row)
        ]
        label_width = max(len("F-measure"), len("ROC area"), len("metric"))
        header = (
            f"{self.model_desc}, {self.folds}-fold stratified CV, "
            f"{self.n_items} traces (seed {self.seed})"
        )
        lines = [header]
        lines.append(
            "metric".ljust(label_width)
            + "  "
            + "  ".join(n.rjust(w) for n, w in zip(names, widths))
        )
        lines.append(
            "F-measure".ljust(label_width)
            + "  "
            + "  ".join(v.rjust(w) for v, w in zip(f_row, widths))
        )
        lines.append(
            "ROC area".ljust(label_width)
            + "  "
            + "  ".join(v.rjust(w) for v, w in zip(roc_row, widths))
        )
        if self.skipped_pairs:
            lines.append(f"skipped pairwise machines: {len(self.skipped_pairs)}")
        return "\n".join(lines) + "\n"

    def write_json(self, stream: TextIO) -> None:
        json.dump(self.to_json_dict(), stream, indent=2)
        stream.write("\n")


def cross_validate(
    spec: ClassifierSpec,
    vectors: Sequence[FeatureVector],
    labels: Sequence[ActivityClass],
    folds: int = 10,
    seed: int = 0,
    threads: int = 1,
) -> ClassReport:
    """Stratified k-fold evaluation with pooled predictions.

    Each fold's model (including its standardizer) is fitted on the other
    folds only; the fold's items are then predicted and pooled. Pairwise
    SVM machines that cannot train because a class is absent from a
    fold's training split are skipped and listed in the report.
    """
    if len(vectors) != len(labels):
        raise ValueError("features and labels differ in length")
    fold_ids = stratified_folds(labels, folds=folds, seed=seed)
    classes = tuple(c for c in CLASS_ORDER if c in set(labels))
    class_pos = {c: i for i, c in enumerate(classes)}

    n = len(vectors)
    predicted: list = [None] * n
    scores = np.zeros((n, len(classes)))
    skipped: list[str] = []

    for f in range(folds):
        train_idx = [i for i in range(n) if fold_ids[i] != f]
        test_idx = [i for i in range(n) if fold_ids[i] == f]
        model = spec.train(
            [vectors[i] for i in train_idx],
            [labels[i] for i in train_idx],
            classes=classes,
            threads=threads,
        )
        test_vecs = [vectors[i] for i in test_idx]
        fold_labels = model.predict_labels(test_vecs)
        fold_scores = model.predict_scores(test_vecs)
        for row, i in enumerate(test_idx):
            predicted[i] = fold_labels[row]
            scores[i] = fold_scores[row]
        for pair in getattr(model, "skipped_pairs", ()):
            a, b = pair
            skipped.append(
                f"fold {f}: {classes[a].value} vs {classes[b].value}"
            )

    confusion = ConfusionMatrix.from_pairs(
        predicted, list(labels), row_keys=classes, col_keys=classes
    )
    per_class: dict[ActivityClass, ClassMetrics] = {}
    for c in classes:
        prec, rec = precision_recall(confusion, c)
        f_val = f_measure(confusion, c)
        try:
            auc = roc_area(scores[:, class_pos[c]], list(labels), c)
        except ValueError:
            auc = None
        per_class[c] = ClassMetrics(prec, rec, f_val, auc)

    macro_f = float(np.mean([m.f_measure for m in per_class.values()]))
    defined_aucs = [m.roc_auc for m in per_class.values() if m.roc_auc is not None]
    macro_auc = float(np.mean(defined_aucs)) if defined_aucs else None

    return ClassReport(
        model_desc=spec.describe(),
        classes=classes,
        per_class=per_class,
        macro_f=macro_f,
        macro_auc=macro_auc,
        confusion=confusion,
        n_items=n,
        folds=folds,
        seed=seed,
        skipped_pairs=skipped,
        predictions=[
            (vectors[i].url_id, labels[i].value, predicted[i].value)
            for i in range(n)
        ],
    )


def cluster_confusion(assignments, truths) -> ConfusionMatrix:
    """Rows are cluster ids, columns are true classes."""
    rows = tuple(sorted(set(int(a) for a in assignments)))
    cols = tuple(c for c in CLASS_ORDER if c in set(truths))
    return ConfusionMatrix.from_pairs(
        [int(a) for a in assignments], list(truths), row_keys=rows, col_keys=cols
    )


def purity(conf: ConfusionMatrix) -> float:
    """Fraction of items whose cluster's majority class matches theirs."""
    total = conf.total
    if total == 0:
        return 0.0
    return float(conf.counts.max(axis=1).sum()) / total
