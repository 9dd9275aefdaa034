"""The two trace features: time-interval entropy and user entropy.

A trace's temporal regularity is summarized by the Shannon entropy of its
empirical gap distribution (gaps are the integer-second differences
between consecutive events), and the breadth of participation by the
entropy of its per-user event-count distribution. Both are measured in
bits. Regular, automated timing gives near-zero time-interval entropy;
a handful of dedicated accounts gives low user entropy.
"""

from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .trace_model import Trace


@dataclass(frozen=True)
class IntervalDistribution:
    """Empirical distribution of gaps between consecutive events.

    Only observed gap lengths are stored, so every probability is
    positive and they sum to one. ``total_intervals`` is the number of
    gaps, one less than the trace length.
    """

    gaps: dict[int, float]
    total_intervals: int


@dataclass(frozen=True)
class UserDistribution:
    """Empirical distribution of events over the users producing them."""

    users: dict[str, float]
    total_events: int


@dataclass(frozen=True)
class FeatureVector:
    """The classifier input for one trace: both entropies plus counts."""

    url_id: str
    h_time: float
    h_user: float
    n_events: int
    n_users: int


def _entropy_bits(probs: Iterable[float]) -> float:
    p = np.fromiter(probs, dtype=np.float64)
    # probabilities are all positive by construction, so p*log2(p) is
    # finite everywhere; +0.0 normalizes the -0.0 of single-support cases
    return float(-(p * np.log2(p)).sum()) + 0.0


def interval_distribution(trace: Trace) -> IntervalDistribution:
    """Count the exact integer gaps between consecutive events.

    Gaps are not binned or smoothed: 604 and 605 seconds are distinct
    outcomes, and zero-second gaps (simultaneous events) are a meaningful
    outcome of their own.
    """
    if len(trace) < 2:
        raise ValueError(
            f"trace {trace.url_id!r} too short for intervals "
            f"({len(trace)} event)"
        )
    times = np.asarray(trace.timestamps, dtype=np.int64)
    diffs = np.diff(times)
    values, counts = np.unique(diffs, return_counts=True)
    total = int(counts.sum())
    gaps = {int(v): int(c) / total for v, c in zip(values, counts)}
    return IntervalDistribution(gaps=gaps, total_intervals=total)


def time_interval_entropy(dist: IntervalDistribution) -> float:
    """Shannon entropy (bits) of the gap distribution."""
    return _entropy_bits(dist.gaps.values())


def user_distribution(trace: Trace) -> UserDistribution:
    """Normalize per-user event counts over the trace length."""
    counts = Counter(trace.user_ids)
    total = len(trace)
    users = {u: c / total for u, c in counts.items()}
    return UserDistribution(users=users, total_events=total)


def user_entropy(dist: UserDistribution) -> float:
    """Shannon entropy (bits) of the user distribution."""
    return _entropy_bits(dist.users.values())


def featurize(trace: Trace) -> FeatureVector:
    """Compute both entropies for a trace of at least two events."""
    interval = interval_distribution(trace)
    users = user_distribution(trace)
    return FeatureVector(
        url_id=trace.url_id,
        h_time=time_interval_entropy(interval),
        h_user=user_entropy(users),
        n_events=len(trace),
        n_users=len(users.users),
    )


def feature_matrix(vectors: Iterable[FeatureVector]) -> np.ndarray:
    """Stack feature vectors into an (n, 2) array of (h_time, h_user)."""
    return np.array([[v.h_time, v.h_user] for v in vectors], dtype=np.float64)


FEATURE_HEADER = ["url", "h_time", "h_user", "n_events", "n_users"]


def write_features(stream: TextIO, vectors: Iterable[FeatureVector]) -> None:
    """Write the feature CSV; entropies carry 6 decimal places."""
    stream.write(",".join(FEATURE_HEADER) + "\n")
    for v in vectors:
        stream.write(
            f"{v.url_id},{v.h_time:.6f},{v.h_user:.6f},"
            f"{v.n_events},{v.n_users}\n"
        )


def read_features(stream) -> list[FeatureVector]:
    data = stream.read()
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return []
    if [h.strip() for h in header] != FEATURE_HEADER:
        raise ValueError(
            f"expected feature header {','.join(FEATURE_HEADER)!r}, "
            f"got {','.join(header)!r}"
        )
    out = []
    for row in reader:
        if not row:
            continue
        if len(row) != 5:
            raise ValueError(
                f"expected 5 fields in feature row, got {len(row)} "
                f"at line {reader.line_num}"
            )
        out.append(
            FeatureVector(
                url_id=row[0],
                h_time=float(row[1]),
                h_user=float(row[2]),
                n_events=int(row[3]),
                n_users=int(row[4]),
            )
        )
    return out
