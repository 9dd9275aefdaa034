"""Independent reference implementations used to cross-check the library.

Everything here is deliberately written on a different code path from the
package: plain-python counting and math.fsum for entropies, an O(n^2)
pair count for AUC, an exhaustive-scan neighbor search, and a dense
active-set enumeration for the SVM dual. Keep it that way; these exist to
catch bugs in the fast paths, not to share them.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter

import numpy as np


def gap_histogram(timestamps) -> dict[int, int]:
    counts: dict[int, int] = {}
    for a, b in zip(timestamps, timestamps[1:]):
        gap = b - a
        counts[gap] = counts.get(gap, 0) + 1
    return counts


def user_histogram(users) -> dict[str, int]:
    return dict(Counter(users))


def entropy_bits(counts) -> float:
    """Shannon entropy in bits from raw outcome counts, via fsum."""
    total = sum(counts)
    terms = []
    for c in counts:
        if c > 0:
            p = c / total
            terms.append(-p * math.log2(p))
    return math.fsum(terms)


def trace_entropies(timestamps, users) -> tuple[float, float]:
    h_time = entropy_bits(list(gap_histogram(timestamps).values()))
    h_user = entropy_bits(list(user_histogram(users).values()))
    return h_time, h_user


def nearest_neighbors(train_points, query, k) -> list[int]:
    """Exhaustive scan; ties on distance go to the lower index."""
    scored = []
    for idx, p in enumerate(train_points):
        d2 = 0.0
        for a, b in zip(p, query):
            d2 += (a - b) ** 2
        scored.append((d2, idx))
    scored.sort()
    return [idx for _, idx in scored[:k]]


def auc_all_pairs(scores, positives) -> float:
    """AUC as the fraction of (positive, negative) pairs ranked correctly,
    ties counting one half."""
    pos = [s for s, p in zip(scores, positives) if p]
    neg = [s for s, p in zip(scores, positives) if not p]
    if not pos or not neg:
        raise ValueError("need both positives and negatives")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def svm_dual_objective(K, y, alpha) -> float:
    q = (y[:, None] * y[None, :]) * K
    return float(alpha.sum() - 0.5 * alpha @ q @ alpha)


def svm_dual_optimum(K, y, C) -> float:
    """Global maximum of the soft-margin dual by active-set enumeration.

    Every variable is pinned to 0, pinned to C, or left free; for each of
    the 3^n assignments the equality-constrained stationary point of the
    free block is solved densely, feasible candidates are scored, and the
    best feasible objective is the optimum (the true optimum's active set
    is among the assignments). Only viable for small n.
    """
    n = len(y)
    q = (y[:, None] * y[None, :]) * K
    best = -np.inf
    for assignment in itertools.product((0, 1, 2), repeat=n):
        free = [i for i, a in enumerate(assignment) if a == 2]
        bound = [i for i, a in enumerate(assignment) if a != 2]
        alpha = np.zeros(n)
        for i in bound:
            if assignment[i] == 1:
                alpha[i] = C
        if free:
            m = len(free)
            a_mat = np.zeros((m + 1, m + 1))
            a_mat[:m, :m] = q[np.ix_(free, free)]
            a_mat[:m, m] = -y[free]
            a_mat[m, :m] = y[free]
            rhs = np.zeros(m + 1)
            if bound:
                rhs[:m] = 1.0 - q[np.ix_(free, bound)] @ alpha[bound]
                rhs[m] = -(y[bound] @ alpha[bound])
            else:
                rhs[:m] = 1.0
            sol, *_ = np.linalg.lstsq(a_mat, rhs, rcond=None)
            if not np.allclose(a_mat @ sol, rhs, atol=1e-7):
                continue
            cand = sol[:m]
            if np.any(cand < -1e-9) or np.any(cand > C + 1e-9):
                continue
            alpha[free] = np.clip(cand, 0.0, C)
        if abs(float(y @ alpha)) > 1e-8:
            continue
        val = svm_dual_objective(K, y, alpha)
        if val > best:
            best = val
    return float(best)


def gaussian_density(x, mean, var) -> float:
    """Diagonal-covariance gaussian density at one point, direct form."""
    out = 1.0
    for xd, md, vd in zip(x, mean, var):
        out *= math.exp(-((xd - md) ** 2) / (2.0 * vd)) / math.sqrt(
            2.0 * math.pi * vd
        )
    return out


def responsibilities(x, weights, means, variances) -> list[float]:
    dens = [
        w * gaussian_density(x, m, v)
        for w, m, v in zip(weights, means, variances)
    ]
    total = sum(dens)
    return [d / total for d in dens]
