"""Gaussian-mixture clustering of feature points, fitted with EM.

Components carry diagonal covariances: with two features that is the
numerically stable choice, and a variance floor keeps components alive
when many traces share identical features (bot traces frequently collapse
onto h_time = h_user = 0). Cluster-count selection is greedy
cross-validated likelihood: grow k while held-out likelihood improves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels
from .classify import Standardizer
from .entropy import FeatureVector, feature_matrix

VARIANCE_FLOOR = 1e-6


@dataclass
class GmmModel:
    """A fitted mixture: weights, means, diagonal variances, fit metadata."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    log_likelihood: float
    n_iter: int
    converged: bool
    ll_history: tuple[float, ...]

    @property
    def k(self) -> int:
        return len(self.weights)


def _log_responsibilities(points, weights, means, variances):
    """Row-normalized log responsibilities plus the total log-likelihood."""
    log_pdf = _kernels.gmm_log_pdf(points, means, variances)
    joint = log_pdf + np.log(np.maximum(weights, 1e-300))[None, :]
    peak = joint.max(axis=1)
    lse = peak + np.log(np.exp(joint - peak[:, None]).sum(axis=1))
    return joint - lse[:, None], float(lse.sum())


def _kmeanspp_centers(points, k, rng):
    """Distance-weighted greedy seeding; far-apart clusters each get one."""
    n = len(points)
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[int(rng.integers(n))]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total > 0.0:
            probs = d2 / total
            idx = int(rng.choice(n, p=probs))
        else:
            idx = int(rng.integers(n))
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def _kmeans_init(points, k, rng, n_iter=10):
    """Seeded k-means, then moment-match each cluster into a component."""
    n, d = points.shape
    centers = _kmeanspp_centers(points, k, rng)
    assign = np.zeros(n, dtype=np.int64)
    for _ in range(n_iter):
        dists = _kernels.pairwise_sq_dists(points, centers)
        assign = np.argmin(dists, axis=1)
        for c in range(k):
            members = points[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)

    global_var = np.maximum(points.var(axis=0), VARIANCE_FLOOR)
    weights = np.empty(k)
    means = centers.copy()
    variances = np.empty((k, d))
    for c in range(k):
        members = points[assign == c]
        if len(members):
            weights[c] = len(members)
            means[c] = members.mean(axis=0)
            variances[c] = np.maximum(members.var(axis=0), VARIANCE_FLOOR)
        else:
            # empty cluster: keep its center alive with a broad component
            weights[c] = 1.0
            variances[c] = global_var
    weights /= weights.sum()
    return weights, means, variances


def _em_loop(points, weights, means, variances, max_iter, ll_tol):
    """Alternate E and M steps from the given parameters until the
    log-likelihood improvement drops below ``ll_tol``."""
    n = len(points)
    history: list[float] = []
    converged = False
    prev_ll = -np.inf
    for _ in range(max_iter):
        log_resp, ll = _log_responsibilities(points, weights, means, variances)
        history.append(ll)
        if len(history) > 1 and ll - prev_ll < ll_tol:
            converged = True
            break
        prev_ll = ll

        resp = np.exp(log_resp)
        bulk = resp.sum(axis=0)
        weights = bulk / n
        alive = bulk > 1e-12
        safe = np.maximum(bulk, 1e-12)
        new_means = (resp.T @ points) / safe[:, None]
        diff = points[:, None, :] - new_means[None, :, :]
        new_vars = (resp[:, :, None] * diff * diff).sum(axis=0) / safe[:, None]
        means = np.where(alive[:, None], new_means, means)
        variances = np.where(
            alive[:, None], np.maximum(new_vars, VARIANCE_FLOOR), variances
        )
    return GmmModel(
        weights=weights,
        means=means,
        variances=variances,
        log_likelihood=history[-1],
        n_iter=len(history),
        converged=converged,
        ll_history=tuple(history),
    )


def em_fit(
    points,
    k: int,
    seed=0,
    max_iter: int = 200,
    ll_tol: float = 1e-6,
    n_init: int = 5,
) -> GmmModel:
    """Fit a k-component diagonal gaussian mixture.

    Initialization is seeded k-means++ followed by per-cluster moment
    matching; the best of ``n_init`` restarts (by final log-likelihood)
    wins, which keeps isolated bad seedings from sticking in a poor local
    optimum. Deterministic given the seed. Collapsing components are
    rescued by the variance floor, never raised as errors; the
    per-iteration log-likelihood trail is kept on the model.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k > len(points):
        raise ValueError(f"k={k} exceeds point count {len(points)}")
    rng = np.random.default_rng(seed)
    restarts = 1 if k == 1 else max(1, n_init)
    best: GmmModel | None = None
    for _ in range(restarts):
        weights, means, variances = _kmeans_init(points, k, rng)
        model = _em_loop(points, weights, means, variances, max_iter, ll_tol)
        if best is None or model.log_likelihood > best.log_likelihood:
            best = model
    return best


def em_assign(model: GmmModel, points) -> tuple[np.ndarray, np.ndarray]:
    """Hard cluster ids (argmax responsibility, ties to the lowest id)
    plus the full responsibility matrix."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    log_resp, _ = _log_responsibilities(
        points, model.weights, model.means, model.variances
    )
    resp = np.exp(log_resp)
    return np.argmax(resp, axis=1), resp


def _plain_folds(n: int, folds: int, rng) -> np.ndarray:
    """Unstratified fold ids: chunks of a seeded permutation."""
    perm = rng.permutation(n)
    ids = np.empty(n, dtype=np.int64)
    sizes = np.full(folds, n // folds)
    sizes[: n % folds] += 1
    start = 0
    for f, size in enumerate(sizes):
        ids[perm[start : start + size]] = f
        start += size
    return ids


def em_select_k(
    points,
    k_max: int = 15,
    folds: int = 10,
    seed=0,
    scan_all: bool = False,
) -> tuple[int, GmmModel]:
    """Pick the component count by cross-validated held-out likelihood.

    Starting at k=1, the mean per-point held-out log-likelihood over the
    folds is computed; k grows while the score improves and the last
    improving k wins (with ``scan_all`` every k up to ``k_max`` is scored
    and the argmax wins). The returned model is refit on all points.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    n = len(points)
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if n < folds:
        raise ValueError(f"folds={folds} exceeds point count {n}")
    rng = np.random.default_rng(seed)
    fold_ids = _plain_folds(n, folds, rng)

    def cv_score(k: int) -> float:
        per_fold = []
        for f in range(folds):
            train = points[fold_ids != f]
            test = points[fold_ids == f]
            model = em_fit(train, k, seed=_derive_seed(seed, k, f + 1))
            _, ll = _log_responsibilities(
                test, model.weights, model.means, model.variances
            )
            per_fold.append(ll / len(test))
        return float(np.mean(per_fold))

    best_k = 1
    best_score = cv_score(1)
    for k in range(2, k_max + 1):
        score = cv_score(k)
        if score > best_score:
            best_score = score
            best_k = k
        elif not scan_all:
            break
    return best_k, em_fit(points, best_k, seed=_derive_seed(seed, best_k, 0))


def _derive_seed(seed, k: int, fold: int):
    if isinstance(seed, (int, np.integer)):
        return [int(seed), k, fold]
    return list(seed) + [k, fold]


@dataclass
class StandardizedGmm:
    """A mixture fitted on z-scored features, bundled with its transform."""

    standardizer: Standardizer
    gmm: GmmModel

    def assign(self, vectors: Sequence[FeatureVector]):
        points = self.standardizer.apply(feature_matrix(vectors))
        return em_assign(self.gmm, points)


def fit_standardized_gmm(
    vectors: Sequence[FeatureVector],
    k: int,
    seed=0,
    max_iter: int = 200,
    ll_tol: float = 1e-6,
) -> StandardizedGmm:
    """Standardize feature vectors, then EM-fit a k-component mixture."""
    standardizer = Standardizer.fit(feature_matrix(vectors))
    points = standardizer.apply(feature_matrix(vectors))
    gmm = em_fit(points, k, seed=seed, max_iter=max_iter, ll_tol=ll_tol)
    return StandardizedGmm(standardizer=standardizer, gmm=gmm)
