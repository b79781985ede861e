"""Relation candidates between local-history documents, backed by the C++ core."""

import json
import os

from ._storyweave import Model, PipelineError, labels, load_model, nuclearity, tokenize
from . import _storyweave

__all__ = [
    "Model",
    "PipelineError",
    "evaluate",
    "labels",
    "load_model",
    "nuclearity",
    "run_pipeline",
    "tokenize",
]


def run_pipeline(corpus, checkpoint, *, threshold=0.15, min_words=5, seed=42, language="en",
                 min_df=1, cross_topic=False, max_pairs_per_docpair=0, importance=True,
                 sort="confidence", threads=0, out_dir=None):
    """Run the full pipeline; returns {"stats": ..., "candidates": [...]}.

    When out_dir is given the run directory is written there as well.
    """
    raw = _storyweave._run_pipeline(
        os.fspath(corpus), os.fspath(checkpoint), threshold, min_words, seed, language,
        min_df, cross_topic, max_pairs_per_docpair, importance, sort, threads,
        None if out_dir is None else os.fspath(out_dir))
    return json.loads(raw)


def evaluate(gold, pred):
    """Per-label, micro and macro precision/recall/F1 plus the rendered table."""
    return json.loads(_storyweave._evaluate(list(gold), list(pred)))
