"""Labeled synthetic traces with class-shaped retweeting dynamics.

Each activity class gets the temporal/user signature that distinguishes
it in the entropy plane:

* news_blogs: arrivals slow down over the trace (fast rise, slow
  saturation) and every event comes from a distinct user.
* auto_tweet: a fixed inter-event period with a whisper of jitter, from
  a single account or from many distinct accounts (collective feeds).
* campaign: a few dedicated zealot accounts with human-like, heavy-tailed
  gaps.
* ads_promotion: one or two accounts posting in zero-second bursts
  separated by long pauses.
* parasitic_ads: distinct users posting once each, with gaps drawn from
  a per-trace mixture of the other classes' gap processes, so the class
  deliberately smears across the feature plane instead of clustering.

Generation is a pure function of the spec (seed included), so corpora are
byte-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import TextIO

import numpy as np

from .trace_model import CLASS_ORDER, ActivityClass, Trace

SECONDS_PER_DAY = 86_400


@dataclass(frozen=True)
class GenSpec:
    """Knobs for one generated trace.

    ``n_events=None`` draws uniformly from [100, 1000]. ``user_pool``
    bounds the distinct accounts available; classes that need one account
    per event reject pools smaller than the trace.
    """

    activity_class: ActivityClass
    n_events: int | None = None
    user_pool: int | None = None
    seed: int | tuple = 0
    # news knobs
    gap_mean_start: float = 60.0
    rate_halvings: float = 1.0
    # auto-tweet knobs
    bot_period: int = 604
    jitter_frac: float = 0.02
    collective: bool | None = None
    # ads knobs
    burst_size_mean: float = 4.0
    # campaign knobs
    zealot_count: int | None = None

    def validate(self) -> None:
        if self.n_events is not None and self.n_events < 100:
            raise ValueError(
                f"n_events must be >= 100, got {self.n_events}"
            )
        if self.user_pool is not None and self.user_pool < 1:
            raise ValueError("user_pool must be >= 1")
        if self.bot_period < 1:
            raise ValueError("bot_period must be >= 1 second")
        if not 0.0 <= self.jitter_frac <= 0.05:
            raise ValueError("jitter_frac must lie in [0, 0.05]")
        if self.burst_size_mean <= 0:
            raise ValueError("burst_size_mean must be positive")
        if self.zealot_count is not None:
            if self.zealot_count < 2:
                raise ValueError("zealot_count must be >= 2")
            if self.user_pool is not None and self.user_pool < self.zealot_count:
                raise ValueError(
                    f"user_pool={self.user_pool} smaller than "
                    f"zealot_count={self.zealot_count}"
                )


def _log_uniform_gap(rng, low: float, high: float) -> int:
    return int(round(math.exp(rng.uniform(math.log(low), math.log(high)))))


def _distinct_users(url_id: str, n: int) -> list[str]:
    return [f"{url_id}-u{i}" for i in range(n)]


def _require_pool(spec: GenSpec, needed: int) -> None:
    if spec.user_pool is not None and spec.user_pool < needed:
        raise ValueError(
            f"user_pool={spec.user_pool} cannot supply {needed} distinct "
            f"users for {spec.activity_class.value}"
        )


def _gen_news(spec, rng, url_id, author, n):
    _require_pool(spec, n)
    users = _distinct_users(url_id, n)
    users[0] = author
    # arrival rate decays so the mean gap doubles rate_halvings times
    # across the trace: fast initial rise, slow saturation
    span = max(n - 2, 1)
    gaps = [
        int(round(rng.exponential(
            spec.gap_mean_start * 2.0 ** (spec.rate_halvings * i / span)
        )))
        for i in range(n - 1)
    ]
    return users, gaps


def _gen_auto(spec, rng, url_id, author, n):
    collective = spec.collective
    if collective is None:
        collective = bool(rng.integers(0, 2))
    if collective:
        _require_pool(spec, n)
        users = _distinct_users(url_id, n)
        users[0] = author
    else:
        _require_pool(spec, 1)
        users = [author] * n
    gaps = np.full(n - 1, spec.bot_period, dtype=np.int64)
    n_jitter = int(round(spec.jitter_frac * (n - 1)))
    if n_jitter:
        where = rng.choice(n - 1, size=n_jitter, replace=False)
        signs = rng.choice(np.array([-1, 1]), size=n_jitter)
        gaps[where] = np.maximum(gaps[where] + signs, 0)
    return users, [int(g) for g in gaps]


def _gen_campaign(spec, rng, url_id, author, n):
    zealots = spec.zealot_count
    if zealots is None:
        zealots = int(rng.integers(2, 6))
    _require_pool(spec, zealots)
    pool = [author] + [f"{url_id}-z{i}" for i in range(1, zealots)]
    users = [pool[int(rng.integers(zealots))] for _ in range(n)]
    users[0] = author
    gaps = [_log_uniform_gap(rng, 1.0, SECONDS_PER_DAY) for _ in range(n - 1)]
    return users, gaps


def _gen_ads(spec, rng, url_id, author, n):
    n_accounts = int(rng.integers(1, 3))
    _require_pool(spec, n_accounts)
    pool = [author] + [f"{url_id}-a{i}" for i in range(1, n_accounts)]
    users = [pool[int(rng.integers(n_accounts))] for _ in range(n)]
    users[0] = author
    gaps: list[int] = []
    while len(gaps) < n - 1:
        burst = 1 + int(rng.poisson(spec.burst_size_mean))
        gaps.extend([0] * (burst - 1))
        gaps.append(_log_uniform_gap(rng, 600.0, SECONDS_PER_DAY))
    return users, gaps[: n - 1]


def _gen_parasitic(spec, rng, url_id, author, n):
    _require_pool(spec, n)
    users = _distinct_users(url_id, n)
    users[0] = author
    # per-trace mixture over the other classes' gap processes
    weights = rng.dirichlet(np.ones(4))
    components = rng.choice(4, size=n - 1, p=weights)
    exp_mean = rng.uniform(30.0, 120.0)
    period = _log_uniform_gap(rng, 60.0, 3600.0)
    gaps = []
    for comp in components:
        if comp == 0:  # news-like
            gaps.append(int(round(rng.exponential(exp_mean))))
        elif comp == 1:  # loosely scheduled
            gap = period
            if rng.random() < 0.2:
                gap = max(gap + int(rng.choice(np.array([-1, 1]))), 0)
            gaps.append(gap)
        elif comp == 2:  # heavy-tailed human
            gaps.append(_log_uniform_gap(rng, 1.0, SECONDS_PER_DAY))
        else:  # burst
            gaps.append(0)
    return users, gaps


_GENERATORS = {
    ActivityClass.NEWS_AND_BLOGS: _gen_news,
    ActivityClass.AUTO_TWEET: _gen_auto,
    ActivityClass.CAMPAIGN: _gen_campaign,
    ActivityClass.ADS_AND_PROMOTION: _gen_ads,
    ActivityClass.PARASITIC_ADS: _gen_parasitic,
}


def gen_trace(
    spec: GenSpec,
    url_id: str | None = None,
    author: str | None = None,
) -> Trace:
    """Generate one labeled trace shaped like its activity class.

    ``author`` overrides the user of the earliest event (the account the
    popularity filter attributes the URL to).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    if url_id is None:
        url_id = f"{spec.activity_class.value}-{_seed_tag(spec.seed)}"
    if author is None:
        author = f"{url_id}-author"
    n = spec.n_events
    if n is None:
        n = int(rng.integers(100, 1001))

    users, gaps = _GENERATORS[spec.activity_class](spec, rng, url_id, author, n)

    base = int(rng.integers(1_500_000_000, 1_600_000_000))
    times = [base]
    for gap in gaps:
        times.append(times[-1] + int(gap))
    events = tuple(
        (user, ts) for user, ts in zip(users, times)
    )
    return Trace(url_id=url_id, events=events, label=spec.activity_class)


def _seed_tag(seed) -> str:
    if isinstance(seed, (int, np.integer)):
        return str(int(seed))
    return "-".join(str(int(s)) for s in seed)


def gen_corpus(
    per_class: int,
    seed: int,
    base_spec: GenSpec | None = None,
) -> tuple[list[Trace], dict[str, ActivityClass]]:
    """Generate ``per_class`` traces per activity class.

    Per-trace seeds derive deterministically from the master seed. Traces
    of a class are paired onto shared author accounts (the first event's
    user) so a generated corpus passes the default popularity filter,
    which requires authors to hold at least two popular URLs; a lone
    odd trace joins the previous author. With ``per_class=1`` each author
    holds a single URL and default filtering removes everything.
    """
    if per_class < 1:
        raise ValueError(f"per_class must be >= 1, got {per_class}")
    template = base_spec or GenSpec(ActivityClass.NEWS_AND_BLOGS)
    traces: list[Trace] = []
    labels: dict[str, ActivityClass] = {}
    for ci, cls in enumerate(CLASS_ORDER):
        for i in range(per_class):
            author_idx = i // 2
            if per_class > 1 and per_class % 2 == 1 and i == per_class - 1:
                author_idx = (i - 1) // 2
            url_id = f"{cls.value}-{i:04d}"
            author = f"{cls.value}-author-{author_idx}"
            spec = replace(
                template, activity_class=cls, seed=(seed, ci, i)
            )
            trace = gen_trace(spec, url_id=url_id, author=author)
            traces.append(trace)
            labels[url_id] = cls
    return traces, labels


def write_events_jsonl(stream: TextIO, traces: list[Trace]) -> None:
    """Emit events trace by trace, each trace in time order."""
    for trace in traces:
        for user, ts in trace.events:
            stream.write(
                f'{{"url":"{trace.url_id}","user":"{user}","ts":{ts}}}\n'
            )


def write_events_csv(stream: TextIO, traces: list[Trace]) -> None:
    stream.write("url,user,ts\n")
    for trace in traces:
        for user, ts in trace.events:
            stream.write(f"{trace.url_id},{user},{ts}\n")
