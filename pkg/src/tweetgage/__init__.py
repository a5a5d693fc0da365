"""Engagement prediction over temporal hashtag co-occurrence graphs.

Pipeline: parse a post corpus, build the post graph (shared-hashtag edges
within a time window), assemble per-post features and text embeddings, train
a GraphSAGE-style graph classifier plus non-graph baselines, and report
classification metrics, network statistics, and feature ablations.
"""

__version__ = "0.1.0"
