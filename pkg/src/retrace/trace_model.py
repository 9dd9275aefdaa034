"""Event parsing, per-URL trace assembly, and popularity filtering.

An event is one observation of a URL being (re)posted: ``(url, user,
timestamp)``. A trace is the full time-ordered retweeting history of one
URL and is the unit everything downstream (features, classifiers,
clustering) operates on.
"""

from __future__ import annotations

import csv
import enum
import io
import json
from collections import defaultdict
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, TextIO


class ActivityClass(enum.Enum):
    """The five activity categories a trace can be labeled with.

    News and blogs are a single category: collective response to both is
    indistinguishable. Enum order is the fixed tie-break order used by the
    classifiers.
    """

    NEWS_AND_BLOGS = "news_blogs"
    ADS_AND_PROMOTION = "ads_promotion"
    CAMPAIGN = "campaign"
    AUTO_TWEET = "auto_tweet"
    PARASITIC_ADS = "parasitic_ads"

    @classmethod
    def from_slug(cls, slug: str) -> "ActivityClass":
        for member in cls:
            if member.value == slug:
                return member
        raise ValueError(
            f"unknown label {slug!r}; expected one of "
            f"{[m.value for m in cls]}"
        )


CLASS_ORDER: tuple[ActivityClass, ...] = tuple(ActivityClass)


class EventParseError(ValueError):
    """A malformed input record; carries the 1-based line number."""

    def __init__(self, reason: str, line: int):
        super().__init__(f"{reason} at line {line}")
        self.reason = reason
        self.line = line


@dataclass(frozen=True)
class Event:
    """One (url, user, timestamp) observation. Timestamps are whole seconds."""

    url_id: str
    user_id: str
    timestamp: int

    def __post_init__(self):
        if not self.url_id:
            raise ValueError("empty url_id")
        if not self.user_id:
            raise ValueError("empty user_id")
        if self.timestamp < 0:
            raise ValueError("negative timestamp")


@dataclass(frozen=True)
class Trace:
    """Time-ordered retweeting history of one URL.

    ``events`` holds (user_id, timestamp) pairs sorted ascending by
    timestamp; ties keep input order. Zero-second gaps between consecutive
    events are meaningful (burst activity), so duplicates are never merged.
    """

    url_id: str
    events: tuple[tuple[str, int], ...]
    label: ActivityClass | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.events) < 1:
            raise ValueError(f"trace {self.url_id!r} has no events")
        times = [t for _, t in self.events]
        if any(b < a for a, b in zip(times, times[1:])):
            raise ValueError(f"trace {self.url_id!r} events not time-ordered")

    def __len__(self) -> int:
        return len(self.events)

    @property
    def user_ids(self) -> list[str]:
        return [u for u, _ in self.events]

    @property
    def timestamps(self) -> list[int]:
        return [t for _, t in self.events]

    def with_label(self, label: ActivityClass | None) -> "Trace":
        return Trace(self.url_id, self.events, label)


def _coerce_timestamp(value, line: int) -> int:
    """Validate a raw timestamp; whole seconds only, sub-second rejected."""
    if isinstance(value, bool):
        raise EventParseError("timestamp must be an integer", line)
    if isinstance(value, int):
        ts = value
    elif isinstance(value, float):
        if not value.is_integer():
            raise EventParseError(
                f"sub-second timestamp {value!r} not supported", line
            )
        ts = int(value)
    elif isinstance(value, str):
        try:
            ts = int(value)
        except ValueError:
            raise EventParseError(
                f"non-integer timestamp {value!r}", line
            ) from None
    else:
        raise EventParseError(f"non-integer timestamp {value!r}", line)
    if ts < 0:
        raise EventParseError(f"negative timestamp {ts}", line)
    return ts


def _event_from_fields(url, user, ts, line: int) -> Event:
    if not url:
        raise EventParseError("empty url_id", line)
    if not user:
        raise EventParseError("empty user_id", line)
    return Event(str(url), str(user), _coerce_timestamp(ts, line))


def _parse_jsonl(lines: Iterable[str]) -> Iterable[Event]:
    for lineno, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if not stripped:
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise EventParseError(f"invalid JSON ({exc.msg})", lineno) from None
        if not isinstance(record, dict):
            raise EventParseError("record is not an object", lineno)
        for key in ("url", "user", "ts"):
            if key not in record:
                raise EventParseError(f"missing key {key!r}", lineno)
        yield _event_from_fields(
            record["url"], record["user"], record["ts"], lineno
        )


def _parse_csv(lines: Iterable[str]) -> Iterable[Event]:
    reader = csv.reader(lines)
    try:
        header = next(reader)
    except StopIteration:
        return
    if [h.strip() for h in header] != ["url", "user", "ts"]:
        raise EventParseError(
            f"expected header 'url,user,ts', got {','.join(header)!r}", 1
        )
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != 3:
            raise EventParseError(f"expected 3 fields, got {len(row)}", lineno)
        yield _event_from_fields(row[0], row[1], row[2], lineno)


def parse_events(stream: BinaryIO | TextIO, fmt: str) -> list[Event]:
    """Parse an event stream into Events, preserving file order.

    ``fmt`` is ``"jsonl"`` (one object per line with keys url/user/ts,
    unknown keys ignored) or ``"csv"`` (header ``url,user,ts``). No
    deduplication: repeated identical events are distinct activity.

    Raises EventParseError with the offending line number on malformed
    records, empty required fields, or non-whole-second timestamps.
    """
    if fmt not in ("jsonl", "csv"):
        raise ValueError(f"unknown format {fmt!r}; expected 'jsonl' or 'csv'")
    data = stream.read()
    if isinstance(data, bytes):
        text = data.decode("utf-8")
    else:
        text = data
    lines = io.StringIO(text)
    if fmt == "jsonl":
        return list(_parse_jsonl(lines))
    return list(_parse_csv(lines))


def build_traces(events: Iterable[Event]) -> dict[str, Trace]:
    """Group events by url into traces, each sorted by timestamp.

    The sort is stable: events with equal timestamps keep their input
    order, so repeated runs over the same file are deterministic. Every
    input event lands in exactly one trace.
    """
    groups: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for ev in events:
        groups[ev.url_id].append((ev.user_id, ev.timestamp))
    traces: dict[str, Trace] = {}
    for url_id, pairs in groups.items():
        pairs.sort(key=lambda p: p[1])
        traces[url_id] = Trace(url_id, tuple(pairs))
    return traces


def filter_popular(
    traces: dict[str, Trace],
    min_retweets: int = 100,
    min_popular_urls_per_author: int = 2,
    author_of: dict[str, str] | None = None,
) -> dict[str, Trace]:
    """Keep popular traces whose author posted enough popular URLs.

    Two passes: first a trace is popular iff it has at least
    ``min_retweets`` events (the original post counts); then only traces
    whose author has at least ``min_popular_urls_per_author`` popular URLs
    survive. The author of a URL is taken from ``author_of`` when given,
    otherwise it defaults to the user of the earliest event in the trace.
    """
    author_of = author_of or {}

    popular = {
        url: tr for url, tr in traces.items() if len(tr) >= min_retweets
    }

    def author(url: str) -> str:
        return author_of.get(url, popular[url].events[0][0])

    urls_per_author: dict[str, int] = defaultdict(int)
    for url in popular:
        urls_per_author[author(url)] += 1

    return {
        url: tr
        for url, tr in popular.items()
        if urls_per_author[author(url)] >= min_popular_urls_per_author
    }


def read_labels(stream: BinaryIO | TextIO) -> dict[str, ActivityClass]:
    """Read a labels CSV (header ``url,label``) into a url -> class map."""
    data = stream.read()
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        return {}
    if [h.strip() for h in header] != ["url", "label"]:
        raise EventParseError(
            f"expected header 'url,label', got {','.join(header)!r}", 1
        )
    labels: dict[str, ActivityClass] = {}
    for row in reader:
        lineno = reader.line_num
        if not row:
            continue
        if len(row) != 2:
            raise EventParseError(f"expected 2 fields, got {len(row)}", lineno)
        url, slug = row[0].strip(), row[1].strip()
        if not url:
            raise EventParseError("empty url_id", lineno)
        try:
            labels[url] = ActivityClass.from_slug(slug)
        except ValueError as exc:
            raise EventParseError(str(exc), lineno) from None
    return labels


def write_labels(stream: TextIO, labels: dict[str, ActivityClass]) -> None:
    stream.write("url,label\n")
    for url, cls in labels.items():
        stream.write(f"{url},{cls.value}\n")
