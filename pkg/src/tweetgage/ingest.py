"""Corpus ingestion: parse raw post records, label engagement, report stats.

Input is a line-delimited file, one JSON object per line, with the fields
documented in :data:`CORPUS_FIELDS`. Records not tagged ``lang == "en"`` are
dropped; malformed lines are skipped and counted. Hashtags are case-folded,
'#'-stripped, and deduplicated (set semantics).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from statistics import median
from typing import Iterable, Sequence

logger = logging.getLogger(__name__)

# Serialized field order for the line-delimited corpus format.
CORPUS_FIELDS = (
    "id", "timestamp", "lang", "text", "author",
    "favorite_count", "retweet_count", "has_media", "official_source",
    "verified", "followers", "following", "n_tweets",
    "hashtags", "n_mentions", "emojis",
)


@dataclass(frozen=True, slots=True)
class TweetRecord:
    """One post plus the profile fields of its author."""

    id: str
    timestamp: int            # seconds since epoch, UTC
    text: str
    author: str
    favorite_count: int
    retweet_count: int
    has_media: bool
    official_source: bool
    verified_user: bool
    followers: int
    following: int
    n_tweets: int
    hashtags: frozenset[str]
    n_mentions: int
    emojis: int

    @property
    def length_of_post(self) -> int:
        return len(self.text)

    @property
    def n_hashtags(self) -> int:
        return len(self.hashtags)


@dataclass(slots=True)
class ParseResult:
    """Parsed records plus counters for dropped input lines."""

    records: list[TweetRecord]
    skipped_malformed: int = 0
    dropped_language: int = 0


@dataclass(frozen=True, slots=True)
class DatasetStats:
    n_days: int
    n_users: int
    n_posts: int
    mean_posts_per_day: float
    n_unique_hashtags: int
    median_posts_per_user: float
    max_posts_per_user: int

    def as_dict(self) -> dict:
        return {
            "n_days": self.n_days,
            "n_users": self.n_users,
            "n_posts": self.n_posts,
            "mean_posts_per_day": self.mean_posts_per_day,
            "n_unique_hashtags": self.n_unique_hashtags,
            "median_posts_per_user": self.median_posts_per_user,
            "max_posts_per_user": self.max_posts_per_user,
        }


def _parse_timestamp(value) -> int:
    """Epoch seconds from an int/float or an ISO-8601 string (UTC assumed)."""
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        return int(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            return int(float(text))
        except ValueError:
            pass
        # Python 3.10 fromisoformat rejects a trailing 'Z'.
        if text.endswith(("Z", "z")):
            text = text[:-1] + "+00:00"
        dt = datetime.fromisoformat(text)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return int(dt.timestamp())
    raise ValueError(f"unsupported timestamp value: {value!r}")


def _parse_hashtags(value) -> frozenset[str]:
    """Normalize to a set of lowercase tags with '#' stripped."""
    if value is None:
        return frozenset()
    if isinstance(value, str):
        parts: Iterable[str] = value.split(",")
    elif isinstance(value, (list, tuple, set, frozenset)):
        parts = value
    else:
        raise ValueError(f"unsupported hashtags value: {value!r}")
    tags = set()
    for part in parts:
        tag = str(part).strip().lstrip("#").casefold()
        if tag:
            tags.add(tag)
    return frozenset(tags)


def _as_count(value, default: int = 0) -> int:
    if value is None:
        return default
    n = int(value)
    if n < 0:
        raise ValueError(f"negative count: {value!r}")
    return n


def _as_flag(value) -> bool:
    if value is None:
        return False
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "yes")
    return bool(int(value))


def parse_record(obj: dict) -> TweetRecord:
    """Build a TweetRecord from one decoded corpus line.

    'id' and 'timestamp' are mandatory; optional fields default to
    0 / False / empty set.
    """
    if "id" not in obj or obj["id"] in (None, ""):
        raise ValueError("missing id")
    if "timestamp" not in obj or obj["timestamp"] in (None, ""):
        raise ValueError("missing timestamp")
    return TweetRecord(
        id=str(obj["id"]),
        timestamp=_parse_timestamp(obj["timestamp"]),
        text=str(obj.get("text") or ""),
        author=str(obj.get("author") or ""),
        favorite_count=_as_count(obj.get("favorite_count")),
        retweet_count=_as_count(obj.get("retweet_count")),
        has_media=_as_flag(obj.get("has_media")),
        official_source=_as_flag(obj.get("official_source")),
        verified_user=_as_flag(obj.get("verified")),
        followers=_as_count(obj.get("followers")),
        following=_as_count(obj.get("following")),
        n_tweets=_as_count(obj.get("n_tweets")),
        hashtags=_parse_hashtags(obj.get("hashtags")),
        n_mentions=_as_count(obj.get("n_mentions")),
        emojis=_as_count(obj.get("emojis")),
    )


def parse_corpus(path: str | Path) -> ParseResult:
    """Parse a line-delimited corpus file.

    Keeps records in file order, drops non-English records (by the 'lang'
    tag; no detection), skips and counts malformed lines. An unreadable
    file raises OSError.
    """
    result = ParseResult(records=[])
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("line is not an object")
            except ValueError:
                result.skipped_malformed += 1
                continue
            lang = str(obj.get("lang") or "").strip().lower()
            if lang != "en":
                result.dropped_language += 1
                continue
            try:
                result.records.append(parse_record(obj))
            except (ValueError, TypeError) as exc:
                logger.debug("skipping line %d: %s", lineno, exc)
                result.skipped_malformed += 1
    if result.skipped_malformed:
        logger.warning("skipped %d malformed lines", result.skipped_malformed)
    return result


def write_corpus(records: Sequence[TweetRecord], path: str | Path) -> None:
    """Serialize records back to the line-delimited corpus format.

    Hashtags are written sorted so output bytes are deterministic;
    parse(write(records)) reproduces the records.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            obj = {
                "id": r.id,
                "timestamp": r.timestamp,
                "lang": "en",
                "text": r.text,
                "author": r.author,
                "favorite_count": r.favorite_count,
                "retweet_count": r.retweet_count,
                "has_media": int(r.has_media),
                "official_source": int(r.official_source),
                "verified": int(r.verified_user),
                "followers": r.followers,
                "following": r.following,
                "n_tweets": r.n_tweets,
                "hashtags": ",".join(sorted(r.hashtags)),
                "n_mentions": r.n_mentions,
                "emojis": r.emojis,
            }
            fh.write(json.dumps(obj, ensure_ascii=False, sort_keys=False))
            fh.write("\n")


def compute_engagement(record: TweetRecord) -> int:
    """Favorite count plus retweet count."""
    return record.favorite_count + record.retweet_count


def assign_label(engagement: int) -> int:
    """0 for zero engagement, 1 otherwise."""
    if engagement < 0:
        raise ValueError("engagement must be >= 0")
    return 0 if engagement == 0 else 1


def label_records(records: Sequence[TweetRecord]) -> tuple[list[int], list[int]]:
    """Per-record (engagement, label) lists in record order."""
    engagement = [compute_engagement(r) for r in records]
    labels = [assign_label(e) for e in engagement]
    return engagement, labels


def write_labels_csv(records: Sequence[TweetRecord], path: str | Path) -> None:
    """index,id,engagement,label rows in record order."""
    engagement, labels = label_records(records)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("index,id,engagement,label\n")
        for i, r in enumerate(records):
            fh.write(f"{i},{r.id},{engagement[i]},{labels[i]}\n")


def read_labels_csv(path: str | Path) -> list[int]:
    """Label column of a labels file, in row order."""
    labels = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header != ["index", "id", "engagement", "label"]:
            raise ValueError(f"{path}: unexpected labels header {header}")
        for line in fh:
            line = line.strip()
            if line:
                labels.append(int(line.split(",")[3]))
    return labels


def dataset_stats(records: Sequence[TweetRecord]) -> DatasetStats:
    """Corpus-level statistics over distinct users, hashtags, and UTC days."""
    if not records:
        raise ValueError("empty corpus")
    days = {r.timestamp // 86400 for r in records}
    per_user: dict[str, int] = {}
    tags: set[str] = set()
    for r in records:
        per_user[r.author] = per_user.get(r.author, 0) + 1
        tags.update(r.hashtags)
    counts = list(per_user.values())
    return DatasetStats(
        n_days=len(days),
        n_users=len(per_user),
        n_posts=len(records),
        mean_posts_per_day=len(records) / len(days),
        n_unique_hashtags=len(tags),
        median_posts_per_user=float(median(counts)),
        max_posts_per_user=max(counts),
    )


def filter_window(records: Sequence[TweetRecord], start: int, end: int) -> list[TweetRecord]:
    """Records with start <= timestamp < end, order preserved."""
    if start >= end:
        raise ValueError("start must be < end")
    return [r for r in records if start <= r.timestamp < end]
