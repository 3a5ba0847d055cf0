"""Two-class tweet sentiment: trainable multinomial naive Bayes plus tallies.

Pre-labeled corpora bypass the model entirely; the trainable classifier is
the default when labels are absent.  Classification is deliberately
two-class (positive/negative) with a deterministic tie-break to positive.

Trained models are immutable; :func:`classify` is pure and safe to call
concurrently.
"""

from __future__ import annotations

import datetime
import json
import math
import string
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

from .ingestion import TweetRecord
from .stopwords import STOPWORDS

__all__ = [
    "POSITIVE",
    "NEGATIVE",
    "NaiveBayesModel",
    "DailySentimentCount",
    "SentimentError",
    "preprocess",
    "train",
    "classify",
    "label_tweets",
    "tally_daily",
    "model_to_json",
    "model_from_json",
]

POSITIVE = "positive"
NEGATIVE = "negative"
_CLASSES = (POSITIVE, NEGATIVE)

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


class SentimentError(ValueError):
    """Invalid corpus or model."""


@dataclass(frozen=True)
class NaiveBayesModel:
    """Multinomial naive Bayes with add-alpha smoothing.

    All probabilities are stored in log space.  ``log_unseen`` carries the
    per-class smoothed mass assigned to tokens outside the vocabulary.
    """

    smoothing_alpha: float
    log_priors: dict[str, float]
    log_likelihoods: dict[str, dict[str, float]]
    log_unseen: dict[str, float]

    @property
    def vocabulary(self) -> frozenset[str]:
        return frozenset(self.log_likelihoods)


@dataclass(frozen=True)
class DailySentimentCount:
    """Per-day positive/negative tweet tallies for one security."""

    date: datetime.date
    positive: int
    negative: int

    def __post_init__(self) -> None:
        if self.positive < 0 or self.negative < 0:
            raise SentimentError("sentiment counts must be non-negative")


def preprocess(text: str) -> list[str]:
    """Lowercase, strip punctuation, drop stop words, split on whitespace."""
    cleaned = text.lower().translate(_PUNCT_TABLE)
    return [tok for tok in cleaned.split() if tok not in STOPWORDS]


def train(corpus: Iterable[TweetRecord], alpha: float = 1.0) -> NaiveBayesModel:
    """Fit the classifier on a labeled corpus.

    Priors are maximum-likelihood class frequencies; token likelihoods use
    add-alpha smoothing over the shared vocabulary.  Requires at least one
    example of each class.
    """
    if alpha <= 0:
        raise SentimentError("smoothing alpha must be positive")
    doc_counts: Counter[str] = Counter()
    token_counts: dict[str, Counter[str]] = {c: Counter() for c in _CLASSES}
    for rec in corpus:
        if rec.label not in _CLASSES:
            raise SentimentError(f"unlabeled tweet {rec.id!r} in training corpus")
        doc_counts[rec.label] += 1
        token_counts[rec.label].update(preprocess(rec.text))
    missing = [c for c in _CLASSES if doc_counts[c] == 0]
    if missing:
        raise SentimentError(f"training corpus has no {missing[0]} examples")

    total_docs = sum(doc_counts.values())
    vocab = sorted(set().union(*(token_counts[c] for c in _CLASSES)))
    v = len(vocab)
    log_priors = {c: math.log(doc_counts[c] / total_docs) for c in _CLASSES}
    log_likelihoods: dict[str, dict[str, float]] = {}
    log_unseen: dict[str, float] = {}
    for c in _CLASSES:
        denom = sum(token_counts[c].values()) + alpha * v
        log_unseen[c] = math.log(alpha / denom) if v else 0.0
        for tok in vocab:
            log_likelihoods.setdefault(tok, {})[c] = math.log(
                (token_counts[c][tok] + alpha) / denom
            )
    return NaiveBayesModel(alpha, log_priors, log_likelihoods, log_unseen)


def classify(model: NaiveBayesModel, text: str) -> tuple[str, float]:
    """Label a message and return ``(label, log_odds)``.

    ``log_odds`` is the positive-minus-negative log posterior; ties (zero
    log-odds) resolve to positive.  Tokens outside the vocabulary contribute
    only their smoothed mass.
    """
    scores = dict(model.log_priors)
    for tok in preprocess(text):
        liks = model.log_likelihoods.get(tok)
        for c in _CLASSES:
            scores[c] += liks[c] if liks is not None else model.log_unseen[c]
    log_odds = scores[POSITIVE] - scores[NEGATIVE]
    return (POSITIVE if log_odds >= 0 else NEGATIVE), log_odds


def label_tweets(
    tweets: Sequence[TweetRecord], model: NaiveBayesModel | None = None
) -> list[TweetRecord]:
    """Ensure every tweet carries a label.

    Pre-labeled tweets pass through untouched; unlabeled ones are classified
    with *model*.  Raises when unlabeled tweets exist but no model is given.
    """
    out: list[TweetRecord] = []
    for tw in tweets:
        if tw.label is not None:
            out.append(tw)
            continue
        if model is None:
            raise SentimentError(
                f"tweet {tw.id!r} is unlabeled and no classifier was provided"
            )
        label, _ = classify(model, tw.text)
        out.append(TweetRecord(tw.id, tw.timestamp, tw.text, label))
    return out


def tally_daily(tweets: Iterable[TweetRecord]) -> list[DailySentimentCount]:
    """Aggregate labeled tweets into per-UTC-day positive/negative counts."""
    counts: dict[datetime.date, Counter[str]] = defaultdict(Counter)
    for tw in tweets:
        if tw.label not in _CLASSES:
            raise SentimentError(f"tweet {tw.id!r} has no sentiment label")
        counts[tw.timestamp.date()][tw.label] += 1
    return [
        DailySentimentCount(day, counts[day][POSITIVE], counts[day][NEGATIVE])
        for day in sorted(counts)
    ]


def model_to_json(model: NaiveBayesModel) -> str:
    """Serialize a trained model (log-space values)."""
    doc = {
        "alpha": model.smoothing_alpha,
        "priors": model.log_priors,
        "likelihoods": model.log_likelihoods,
        "unseen": model.log_unseen,
    }
    return json.dumps(doc, sort_keys=True)


def model_from_json(source: IO[str] | str) -> NaiveBayesModel:
    doc = json.loads(source if isinstance(source, str) else source.read())
    try:
        return NaiveBayesModel(
            smoothing_alpha=float(doc["alpha"]),
            log_priors={c: float(doc["priors"][c]) for c in _CLASSES},
            log_likelihoods={
                tok: {c: float(v[c]) for c in _CLASSES}
                for tok, v in doc["likelihoods"].items()
            },
            log_unseen={c: float(doc["unseen"][c]) for c in _CLASSES},
        )
    except (KeyError, TypeError) as exc:
        raise SentimentError(f"malformed model document: {exc}") from None
