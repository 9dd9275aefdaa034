"""k-NN and RBF-kernel SVM over the 2-D entropy feature space.

Both classifiers standardize features first (z-scores fitted on the
training set), use euclidean geometry, and expose per-class scores so the
evaluation layer can compute ROC areas. The SVM is trained with a
sequential-minimal-optimization solver (see ``_kernels.smo_solve``) and
wired one-vs-one for the multiclass problem.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .entropy import FeatureVector, feature_matrix
from .trace_model import CLASS_ORDER, ActivityClass

FEATURE_DIMS = ("h_time", "h_user")


@dataclass(frozen=True, eq=False)
class Standardizer:
    """Per-dimension z-score transform fitted on training features."""

    means: np.ndarray
    stds: np.ndarray

    @classmethod
    def fit(cls, points: np.ndarray) -> "Standardizer":
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] < 2:
            raise ValueError("standardizer needs at least 2 points")
        means = points.mean(axis=0)
        stds = points.std(axis=0)
        for dim, s in enumerate(stds):
            if s <= 0.0:
                name = (
                    FEATURE_DIMS[dim]
                    if len(stds) == len(FEATURE_DIMS)
                    else str(dim)
                )
                raise ValueError(f"zero variance in dimension {name!r}")
        return cls(means=means, stds=stds)

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        return (points - self.means) / self.stds


def _as_points(features) -> np.ndarray:
    """Accept FeatureVectors, a single (2,) point, or an (n, 2) array."""
    if isinstance(features, FeatureVector):
        return np.array([[features.h_time, features.h_user]])
    if isinstance(features, Sequence) and features and isinstance(
        features[0], FeatureVector
    ):
        return feature_matrix(features)
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :]
    if arr.ndim == 2:
        return arr
    raise ValueError("expected FeatureVector(s) or a 2-D point array")


def _class_indices(
    labels: Sequence[ActivityClass],
    classes: Sequence[ActivityClass] | None = None,
) -> tuple[tuple[ActivityClass, ...], np.ndarray]:
    """Map labels to indices into a class tuple.

    Without an explicit ``classes`` universe the observed classes are used
    in fixed enum order. Cross-validation passes the full universe so
    per-fold models agree on indexing even when a fold's training split
    misses a class.
    """
    observed = set(labels)
    if classes is None:
        out = tuple(c for c in CLASS_ORDER if c in observed)
    else:
        out = tuple(classes)
        missing = observed - set(out)
        if missing:
            raise ValueError(f"labels outside class universe: {missing}")
    index = {c: i for i, c in enumerate(out)}
    return out, np.array([index[l] for l in labels], dtype=np.int64)


# ---------------------------------------------------------------------------
# k-NN
# ---------------------------------------------------------------------------


@dataclass
class KnnModel:
    """Stored standardized training points with labels; k-neighbor votes."""

    k: int
    standardizer: Standardizer
    points: np.ndarray
    labels: np.ndarray
    classes: tuple[ActivityClass, ...]

    def neighbor_indices(self, raw_points) -> np.ndarray:
        """(m, k) indices of each query's nearest training points.

        Distance ties at the cut are resolved toward the earlier-indexed
        training point (stable sort), which makes the neighbor set a pure
        function of the inputs.
        """
        queries = self.standardizer.apply(_as_points(raw_points))
        dists = _kernels.pairwise_sq_dists(queries, self.points)
        out = np.empty((len(queries), self.k), dtype=np.int64)
        for row, d in enumerate(dists):
            out[row] = np.argsort(d, kind="stable")[: self.k]
        return out

    def _votes(self, raw_points) -> tuple[np.ndarray, np.ndarray]:
        """Per-class vote counts and summed inverse distances."""
        queries = self.standardizer.apply(_as_points(raw_points))
        dists = _kernels.pairwise_sq_dists(queries, self.points)
        n_classes = len(self.classes)
        votes = np.zeros((len(queries), n_classes))
        inv = np.zeros((len(queries), n_classes))
        for row, d in enumerate(dists):
            nearest = np.argsort(d, kind="stable")[: self.k]
            for idx in nearest:
                c = self.labels[idx]
                votes[row, c] += 1.0
                inv[row, c] += 1.0 / max(np.sqrt(d[idx]), 1e-300)
        return votes, inv

    def predict_scores(self, raw_points) -> np.ndarray:
        """(m, n_classes) vote fractions, the scores used for ROC."""
        votes, _ = self._votes(raw_points)
        return votes / self.k

    def predict_labels(self, raw_points) -> list[ActivityClass]:
        """Majority vote; ties fall to the larger summed inverse distance,
        then to the fixed class order."""
        votes, inv = self._votes(raw_points)
        out = []
        for row in range(len(votes)):
            best = 0
            for c in range(1, len(self.classes)):
                if (votes[row, c], inv[row, c]) > (votes[row, best], inv[row, best]):
                    best = c
            out.append(self.classes[best])
        return out

    def predict(self, point) -> tuple[ActivityClass, dict[ActivityClass, float]]:
        label = self.predict_labels(point)[0]
        scores = self.predict_scores(point)[0]
        return label, {c: float(s) for c, s in zip(self.classes, scores)}


def train_knn(
    vectors: Sequence[FeatureVector],
    labels: Sequence[ActivityClass],
    k: int = 3,
    classes: Sequence[ActivityClass] | None = None,
) -> KnnModel:
    if len(vectors) == 0:
        raise ValueError("cannot train k-NN on an empty dataset")
    if len(vectors) != len(labels):
        raise ValueError("features and labels differ in length")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(vectors):
        raise ValueError(f"k={k} exceeds training size {len(vectors)}")
    standardizer = Standardizer.fit(feature_matrix(vectors))
    classes, label_idx = _class_indices(labels, classes)
    return KnnModel(
        k=k,
        standardizer=standardizer,
        points=standardizer.apply(feature_matrix(vectors)),
        labels=label_idx,
        classes=classes,
    )


# ---------------------------------------------------------------------------
# SVM (RBF kernel, SMO training, one-vs-one multiclass)
# ---------------------------------------------------------------------------


@dataclass
class BinarySvm:
    """One trained binary machine: support vectors, multipliers, bias."""

    sv_points: np.ndarray
    sv_labels: np.ndarray  # +/-1
    alpha: np.ndarray
    bias: float
    gamma: float
    C: float

    def decision(self, points: np.ndarray) -> np.ndarray:
        kmat = _kernels.rbf_kernel(points, self.sv_points, self.gamma)
        return kmat @ (self.alpha * self.sv_labels) + self.bias


def smo_train(
    points: np.ndarray,
    labels: np.ndarray,
    C: float = 1.0,
    gamma: float = 0.5,
    tol: float = 1e-3,
    max_passes: int = 10_000,
) -> BinarySvm:
    """Train one binary RBF machine on (already standardized) points.

    ``labels`` must be +/-1 with both classes present. The returned
    machine satisfies the KKT conditions within ``tol``: a verification
    sweep against exactly recomputed decision values runs after the
    solver, and failure to meet it raises rather than returning a model
    that silently misses the contract.
    """
    points = np.asarray(points, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise ValueError("binary SVM training needs both classes (+1 and -1)")
    if C <= 0 or gamma <= 0:
        raise ValueError(f"C and gamma must be positive (C={C}, gamma={gamma})")

    kmat = _kernels.rbf_kernel(points, points, gamma)
    alpha, bias, passes, status = _kernels.smo_solve(
        kmat, y, C, tol, max_passes=max_passes
    )
    if status != 0:
        raise RuntimeError(
            f"SMO did not converge within {max_passes} passes "
            f"(n={len(y)}, C={C}, gamma={gamma}, tol={tol})"
        )
    # verify KKT against exact decision values
    fx = kmat @ (alpha * y) + bias
    margin = y * fx
    bad = int(
        np.sum(
            ((alpha <= 0.0) & (margin < 1.0 - tol))
            | ((alpha >= C) & (margin > 1.0 + tol))
            | ((alpha > 0.0) & (alpha < C) & (np.abs(margin - 1.0) > tol))
        )
    )
    if bad:
        raise RuntimeError(
            f"SMO converged but {bad} KKT violations above tol={tol} remain "
            f"(n={len(y)}, passes={passes})"
        )
    sv = alpha > 0.0
    return BinarySvm(
        sv_points=points[sv].copy(),
        sv_labels=y[sv].copy(),
        alpha=alpha[sv].copy(),
        bias=float(bias),
        gamma=float(gamma),
        C=float(C),
    )


def _sigmoid(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(x, -500, 500)))


@dataclass
class SvmModel:
    """One-vs-one multiclass wrapper around binary RBF machines.

    ``machines`` maps a class-index pair (i, j), i < j, to the machine
    trained with class i as +1 and class j as -1. Pairs with no training
    data for one side are recorded in ``skipped_pairs`` and simply do not
    vote.
    """

    standardizer: Standardizer
    classes: tuple[ActivityClass, ...]
    machines: dict[tuple[int, int], BinarySvm]
    C: float
    gamma: float
    skipped_pairs: tuple[tuple[int, int], ...] = field(default_factory=tuple)

    def _votes(self, raw_points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Vote counts, signed decision-value sums, and machines per class."""
        queries = self.standardizer.apply(_as_points(raw_points))
        n_classes = len(self.classes)
        votes = np.zeros((len(queries), n_classes))
        dv = np.zeros((len(queries), n_classes))
        involved = np.zeros(n_classes)
        for (i, j), machine in self.machines.items():
            d = machine.decision(queries)
            involved[i] += 1
            involved[j] += 1
            wins_i = d > 0
            votes[wins_i, i] += 1.0
            votes[~wins_i, j] += 1.0
            dv[:, i] += d
            dv[:, j] -= d
        return votes, dv, involved

    def vote_fractions(self, raw_points) -> np.ndarray:
        """(m, n_classes) fraction of pairwise contests won per class."""
        votes, _, involved = self._votes(raw_points)
        return votes / np.maximum(involved, 1.0)

    def predict_scores(self, raw_points) -> np.ndarray:
        """Vote fractions refined by decision values, used for ROC.

        The refinement adds sigmoid(decision sum) before normalizing, so
        the score stays monotone in the vote count while breaking vote
        ties by how far the point sits from the pairwise boundaries.
        """
        votes, dv, involved = self._votes(raw_points)
        return (votes + _sigmoid(dv)) / (np.maximum(involved, 1.0) + 1.0)

    def predict_labels(self, raw_points) -> list[ActivityClass]:
        votes, dv, involved = self._votes(raw_points)
        frac = votes / np.maximum(involved, 1.0)
        out = []
        for row in range(len(frac)):
            best = 0
            for c in range(1, len(self.classes)):
                if (frac[row, c], dv[row, c]) > (frac[row, best], dv[row, best]):
                    best = c
            out.append(self.classes[best])
        return out

    def predict(self, point) -> tuple[ActivityClass, dict[ActivityClass, float]]:
        label = self.predict_labels(point)[0]
        fractions = self.vote_fractions(point)[0]
        return label, {c: float(s) for c, s in zip(self.classes, fractions)}


def train_svm(
    vectors: Sequence[FeatureVector],
    labels: Sequence[ActivityClass],
    C: float = 1.0,
    gamma: float = 0.5,
    tol: float = 1e-3,
    threads: int = 1,
    classes: Sequence[ActivityClass] | None = None,
) -> SvmModel:
    """Train the one-vs-one machine set over standardized features.

    The pairwise subproblems are independent; with ``threads > 1`` they
    train concurrently, and the assembled model is identical regardless
    of thread count. Pairs whose classes have no training data (possible
    when an explicit ``classes`` universe is wider than the observed
    labels) are skipped and recorded instead of trained.
    """
    if len(vectors) != len(labels):
        raise ValueError("features and labels differ in length")
    if len(set(labels)) < 2:
        raise ValueError("SVM training needs at least 2 classes")
    classes, label_idx = _class_indices(labels, classes)
    standardizer = Standardizer.fit(feature_matrix(vectors))
    points = standardizer.apply(feature_matrix(vectors))

    pairs = [
        (i, j) for i in range(len(classes)) for j in range(i + 1, len(classes))
    ]

    def train_pair(pair):
        i, j = pair
        mask = (label_idx == i) | (label_idx == j)
        if not np.any(label_idx == i) or not np.any(label_idx == j):
            return pair, None
        sub = points[mask]
        suby = np.where(label_idx[mask] == i, 1.0, -1.0)
        return pair, smo_train(sub, suby, C=C, gamma=gamma, tol=tol)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(train_pair, pairs))
    else:
        results = [train_pair(p) for p in pairs]

    machines = {pair: m for pair, m in results if m is not None}
    skipped = tuple(pair for pair, m in results if m is None)
    return SvmModel(
        standardizer=standardizer,
        classes=classes,
        machines=machines,
        C=float(C),
        gamma=float(gamma),
        skipped_pairs=skipped,
    )
