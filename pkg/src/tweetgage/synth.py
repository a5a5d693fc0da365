"""Synthetic corpus generator with planted graph homophily.

Posts belong to one of two latent groups. Hashtags and timing are group
blind, so the co-occurrence graph mixes groups freely; the engagement
label of a post follows the majority group among its delta-neighbors.
That makes the label a function of the neighborhood realization, visible
to a graph model through aggregated neighbor text but invisible to any
per-row model. Two small slices ignore the neighborhood: posts with
media attached reliably pick up likes whatever their community does, and
posts from official sources (press feeds, agencies) reliably do not.
Both flags sit in the scalar block, so those slices carry signal the
text cannot substitute.
The homophily knob h sets how often the planted rule applies at all:
with probability 1 - (1-h)^2 the label follows it, else a fair coin.
Group vocabulary is Zipf-distributed so PCA-reduced text features lose
part of the tail signal, which the ablation grid is meant to expose.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .ingest import TweetRecord
from .postgraph import build_graph
from .util import derive_seed

N_TAGS = 8
# vocab sized to the default dim-64 hashed features: larger vocabularies
# overload the hash buckets and blur the neighbor-group counts the label
# rule depends on
N_GROUP_WORDS = 24
N_SHARED_WORDS = 16
ZIPF_S = 0.8
# equal forced-label slices keep the base rate at one half: media posts
# are forced engaged, official-source posts forced non-engaged
MEDIA_RATE = 0.05
OFFICIAL_RATE = 0.05
BASE_EPOCH = 1635724800  # 2021-11-01T00:00:00Z

_GROUP_VOCAB = (
    tuple(f"gla{i:02d}" for i in range(N_GROUP_WORDS)),
    tuple(f"orb{i:02d}" for i in range(N_GROUP_WORDS)),
)
_SHARED_VOCAB = tuple(f"com{i:02d}" for i in range(N_SHARED_WORDS))


def _zipf_weights(n: int) -> np.ndarray:
    w = 1.0 / np.arange(1, n + 1) ** ZIPF_S
    return w / w.sum()


def generate_corpus(n_posts: int, homophily: float, seed: int,
                    n_days: int = 4, delta_minutes: int = 15
                    ) -> list[TweetRecord]:
    """Generate a labeled synthetic corpus of n_posts records.

    Labels are already baked into the engagement counts: engaged posts get
    favorite_count >= 1, non-engaged posts get zero favorites and retweets.
    """
    if n_posts < 10:
        raise ValueError(f"need at least 10 posts, got {n_posts}")
    if not 0.0 <= homophily <= 1.0:
        raise ValueError(f"homophily must lie in [0, 1], got {homophily}")

    rng_time = np.random.default_rng(derive_seed(seed, "synth:time"))
    rng_group = np.random.default_rng(derive_seed(seed, "synth:group"))
    rng_tags = np.random.default_rng(derive_seed(seed, "synth:tags"))
    rng_text = np.random.default_rng(derive_seed(seed, "synth:text"))
    rng_prof = np.random.default_rng(derive_seed(seed, "synth:profile"))
    rng_label = np.random.default_rng(derive_seed(seed, "synth:label"))

    span = n_days * 86400
    arrivals = np.cumsum(rng_time.exponential(1.0, size=n_posts))
    times = BASE_EPOCH + np.floor(arrivals / arrivals[-1] * (span - 1)).astype(np.int64)

    groups = rng_group.integers(0, 2, size=n_posts)
    zipf = _zipf_weights(N_GROUP_WORDS)

    tag_sets = []
    texts = []
    for i in range(n_posts):
        m = int(rng_tags.integers(2, 4))
        tag_sets.append(frozenset(
            f"tag{t}" for t in rng_tags.choice(N_TAGS, size=m, replace=False)))
        vocab = _GROUP_VOCAB[groups[i]]
        n_own = int(rng_text.integers(9, 15))
        own = [vocab[w] for w in rng_text.choice(N_GROUP_WORDS, size=n_own, p=zipf)]
        n_shared = int(rng_text.integers(2, 5))
        shared = [_SHARED_VOCAB[w]
                  for w in rng_text.integers(0, N_SHARED_WORDS, size=n_shared)]
        words = own + shared
        order = rng_text.permutation(len(words))
        texts.append(" ".join(words[k] for k in order))

    n_authors = max(2, n_posts // 3)
    authors = rng_prof.integers(0, n_authors, size=n_posts)
    # moderate lognormal spread: heavier tails turn the z-scored profile
    # columns into outlier spikes that neighbor aggregation amplifies
    followers = np.floor(rng_prof.lognormal(6.0, 0.3, size=n_posts)).astype(np.int64)
    following = np.floor(rng_prof.lognormal(5.0, 0.3, size=n_posts)).astype(np.int64)
    n_tweets = np.floor(rng_prof.lognormal(7.0, 0.35, size=n_posts)).astype(np.int64)
    has_media = rng_prof.random(n_posts) < MEDIA_RATE
    official = rng_prof.random(n_posts) < OFFICIAL_RATE
    verified = rng_prof.random(n_posts) < 0.10
    emojis = rng_prof.poisson(0.4, size=n_posts)
    mentions = rng_prof.poisson(0.5, size=n_posts)

    base_records = [
        TweetRecord(
            id=f"p{i:06d}", timestamp=int(times[i]), text=texts[i],
            author=f"u{authors[i]:05d}", favorite_count=0, retweet_count=0,
            has_media=bool(has_media[i]), official_source=bool(official[i]),
            verified_user=bool(verified[i]), followers=int(followers[i]),
            following=int(following[i]), n_tweets=int(n_tweets[i]),
            hashtags=tag_sets[i], n_mentions=int(mentions[i]),
            emojis=int(emojis[i]))
        for i in range(n_posts)
    ]

    graph = build_graph(base_records, delta_seconds=delta_minutes * 60)
    structural = _majority_labels(graph, groups)
    # official wins the (rare) overlap: institutional posts stay dry even
    # with media attached
    planted = np.where(official, 0, np.where(has_media, 1, structural))

    q = 1.0 - (1.0 - homophily) ** 2
    use_rule = rng_label.random(n_posts) < q
    coin = rng_label.integers(0, 2, size=n_posts)
    labels = np.where(use_rule, planted, coin)

    fav = np.where(labels == 1, 1 + rng_label.poisson(2.0, size=n_posts), 0)
    ret = np.where(labels == 1, rng_label.poisson(1.0, size=n_posts), 0)

    return [
        replace(r, favorite_count=int(fav[i]), retweet_count=int(ret[i]))
        for i, r in enumerate(base_records)
    ]


def _majority_labels(graph, groups: np.ndarray) -> np.ndarray:
    """Per node: 1 if most neighbors share its group, 0 if most differ.

    Balanced neighborhoods and isolated nodes fall back to the node's own
    group, which keeps the label base rate at one half by symmetry.
    """
    n = graph.n_nodes
    same = np.zeros(n, dtype=np.int64)
    total = np.zeros(n, dtype=np.int64)
    indptr, indices = graph.indptr, graph.indices
    for i in range(n):
        nbrs = indices[indptr[i]:indptr[i + 1]]
        total[i] = nbrs.size
        if nbrs.size:
            same[i] = int(np.sum(groups[nbrs] == groups[i]))
    diff = total - same
    out = np.where(same > diff, 1, 0)
    tie = same == diff
    out[tie] = groups[tie]
    return out.astype(np.int64)
