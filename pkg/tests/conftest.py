"""Shared helpers for the test suite."""

import sys
from pathlib import Path

import numpy as np

from tweetgage.ingest import TweetRecord
from tweetgage.postgraph import PostGraph

sys.path.insert(0, str(Path(__file__).parent))


def graph_from_edges(n, edges, delta_seconds=900):
    """PostGraph in CSR form from an {(u, v): w} edge map with u < v."""
    pairs = []
    for (u, v), w in edges.items():
        pairs.append((u, v, w))
        pairs.append((v, u, w))
    pairs.sort()
    indptr = np.zeros(n + 1, dtype=np.int64)
    for u, _v, _w in pairs:
        indptr[u + 1] += 1
    indptr = np.cumsum(indptr)
    indices = np.array([v for _u, v, _w in pairs], dtype=np.int32)
    weights = np.array([w for _u, _v, w in pairs], dtype=np.int32)
    return PostGraph(n_nodes=n, delta_seconds=delta_seconds,
                     indptr=indptr, indices=indices, weights=weights)


def make_record(i=0, *, timestamp=0, hashtags=(), text="hello world",
                favorite_count=0, retweet_count=0, author=None, **kw):
    """TweetRecord with boring defaults; override what the test cares about."""
    return TweetRecord(
        id=f"p{i:06d}",
        timestamp=timestamp,
        text=text,
        author=author if author is not None else f"u{i:05d}",
        favorite_count=favorite_count,
        retweet_count=retweet_count,
        has_media=kw.get("has_media", False),
        official_source=kw.get("official_source", False),
        verified_user=kw.get("verified_user", False),
        followers=kw.get("followers", 10),
        following=kw.get("following", 5),
        n_tweets=kw.get("n_tweets", 100),
        hashtags=frozenset(hashtags),
        n_mentions=kw.get("n_mentions", 0),
        emojis=kw.get("emojis", 0),
    )


def random_records(rng, n, n_tags=6, span_seconds=3600, max_tags_per_post=3):
    """Random corpus for graph property tests: random tags, random times."""
    pool = [f"tag{k}" for k in range(n_tags)]
    out = []
    for i in range(n):
        k = int(rng.integers(0, max_tags_per_post + 1))
        tags = rng.choice(pool, size=k, replace=False) if k else []
        out.append(make_record(
            i,
            timestamp=int(rng.integers(0, span_seconds)),
            hashtags=[str(t) for t in tags],
            favorite_count=int(rng.integers(0, 3)),
        ))
    return out
