import datetime as dt
import math
import random

import pytest
from hypothesis import given, strategies as st

from crowdcast.sentiment import (
    NEGATIVE,
    POSITIVE,
    SentimentError,
    classify,
    label_tweets,
    model_from_json,
    model_to_json,
    preprocess,
    tally_daily,
    train,
)
from util import UTC, tweet


def _doc(tid, text, label):
    return tweet(tid, dt.datetime(2024, 1, 2, 10, tzinfo=UTC), text, label)


TINY_CORPUS = [_doc("p", "good", POSITIVE), _doc("n", "bad", NEGATIVE)]


class TestPreprocess:
    def test_lowercases_and_strips_punctuation_and_stopwords(self):
        assert preprocess("Gold is SOARING!!!") == ["gold", "soaring"]

    def test_empty(self):
        assert preprocess("") == []

    def test_all_stopwords(self):
        assert preprocess("the and of") == []

    @given(st.lists(st.sampled_from(["gold", "oil", "soaring", "crash"]),
                    min_size=1, max_size=8))
    def test_deterministic(self, words):
        text = " ".join(words)
        assert preprocess(text) == preprocess(text)


class TestTrain:
    def test_hand_computed_smoothed_likelihoods(self):
        model = train(TINY_CORPUS, alpha=1.0)
        # priors 1/2 each; vocabulary {good, bad}; add-one smoothing:
        # P(good|positive) = (1+1)/(1+2) = 2/3
        assert math.isclose(math.exp(model.log_priors[POSITIVE]), 0.5,
                            abs_tol=1e-12)
        assert math.isclose(math.exp(model.log_priors[NEGATIVE]), 0.5,
                            abs_tol=1e-12)
        assert math.isclose(
            math.exp(model.log_likelihoods["good"][POSITIVE]), 2.0 / 3.0,
            abs_tol=1e-12,
        )
        assert math.isclose(
            math.exp(model.log_likelihoods["good"][NEGATIVE]), 1.0 / 3.0,
            abs_tol=1e-12,
        )

    def test_single_class_corpus_rejected(self):
        with pytest.raises(SentimentError):
            train([_doc("a", "good", POSITIVE), _doc("b", "fine", POSITIVE)])

    def test_duplicated_corpus_gives_identical_model(self):
        corpus = [
            _doc("a", "strong rally gold", POSITIVE),
            _doc("b", "weak crash oil", NEGATIVE),
            _doc("c", "gold rally", POSITIVE),
        ]
        doubled = corpus + [
            _doc(d.id + "x", d.text, d.label) for d in corpus
        ]
        m1, m2 = train(corpus, alpha=1.0), train(doubled, alpha=1.0)
        # priors are pure frequency ratios, so duplication cancels exactly
        assert m1.log_priors == m2.log_priors
        # smoothed likelihoods cancel only when the smoothing mass scales
        # with the corpus: (2c + 2a)/(2N + 2aV) = (c + a)/(N + aV)
        m2_scaled = train(doubled, alpha=2.0)
        assert m1.log_likelihoods == m2_scaled.log_likelihoods

    def test_priors_sum_to_one(self):
        model = train(TINY_CORPUS)
        total = sum(math.exp(v) for v in model.log_priors.values())
        assert math.isclose(total, 1.0, abs_tol=1e-9)

    def test_likelihoods_sum_to_one_per_class(self):
        corpus = [
            _doc("a", "gold rally strong strong", POSITIVE),
            _doc("b", "oil crash weak", NEGATIVE),
            _doc("c", "rally rally", POSITIVE),
        ]
        model = train(corpus, alpha=0.7)
        for cls in (POSITIVE, NEGATIVE):
            total = sum(
                math.exp(v[cls]) for v in model.log_likelihoods.values()
            )
            assert math.isclose(total, 1.0, abs_tol=1e-9)

    def test_non_positive_alpha_rejected(self):
        with pytest.raises(SentimentError):
            train(TINY_CORPUS, alpha=0.0)


class TestClassify:
    def test_known_positive_token(self):
        model = train(TINY_CORPUS)
        label, log_odds = classify(model, "good")
        assert label == POSITIVE
        assert log_odds > 0

    def test_tie_breaks_positive_on_empty_text(self):
        model = train(TINY_CORPUS)
        label, log_odds = classify(model, "")
        assert label == POSITIVE
        assert log_odds == 0.0

    def test_repeated_evidence_grows_log_odds(self):
        model = train(TINY_CORPUS)
        _, once = classify(model, "good")
        label, thrice = classify(model, "good good good")
        assert label == POSITIVE
        assert abs(thrice) > abs(once)

    def test_token_order_invariance(self):
        corpus = [
            _doc("a", "gold rally strong", POSITIVE),
            _doc("b", "oil crash weak", NEGATIVE),
        ]
        model = train(corpus)
        assert classify(model, "gold crash rally") == \
            classify(model, "rally gold crash")

    def test_unseen_tokens_only_add_smoothed_mass(self):
        model = train(TINY_CORPUS)
        # equal unseen mass per class here (same denominators), so an
        # unknown token cannot change the prior-only decision
        _, odds = classify(model, "zzz qqq")
        assert math.isclose(odds, 0.0, abs_tol=1e-12)

    def test_heldout_recovery_on_separated_model(self):
        rng = random.Random(7)
        pos_vocab = ["rally", "surge", "gain", "strong", "up"]
        neg_vocab = ["crash", "slump", "loss", "weak", "down"]
        corpus = []
        for i in range(200):
            positive = i % 2 == 0
            main = pos_vocab if positive else neg_vocab
            other = neg_vocab if positive else pos_vocab
            words = [
                rng.choice(main) if rng.random() < 0.85 else rng.choice(other)
                for _ in range(6)
            ]
            corpus.append(
                _doc(f"d{i}", " ".join(words),
                     POSITIVE if positive else NEGATIVE)
            )
        model = train(corpus[:120])
        hits = sum(
            1 for d in corpus[120:] if classify(model, d.text)[0] == d.label
        )
        assert hits / len(corpus[120:]) >= 0.95


class TestLabelTweets:
    def test_prelabeled_pass_through_untouched(self):
        pre = _doc("a", "crash crash crash", POSITIVE)  # label wins over text
        model = train(TINY_CORPUS)
        out = label_tweets([pre], model)
        assert out[0] is pre

    def test_unlabeled_without_model_errors(self):
        unlabeled = _doc("a", "whatever", None)
        with pytest.raises(SentimentError):
            label_tweets([unlabeled])

    def test_unlabeled_classified(self):
        model = train(TINY_CORPUS)
        out = label_tweets([_doc("a", "good", None)], model)
        assert out[0].label == POSITIVE


class TestTallyDaily:
    def test_single_day_counts(self):
        day = dt.datetime(2024, 1, 2, 9, tzinfo=UTC)
        tweets = [
            tweet(f"p{i}", day + dt.timedelta(hours=i), "w", POSITIVE)
            for i in range(3)
        ] + [tweet("n0", day, "w", NEGATIVE)]
        out = tally_daily(tweets)
        assert len(out) == 1
        assert (out[0].positive, out[0].negative) == (3, 1)
        assert out[0].date == day.date()

    def test_empty_input(self):
        assert tally_daily([]) == []

    def test_permutation_invariance(self):
        d1 = dt.datetime(2024, 1, 2, 9, tzinfo=UTC)
        d2 = dt.datetime(2024, 1, 3, 9, tzinfo=UTC)
        tweets = [
            tweet("a", d1, "w", POSITIVE),
            tweet("b", d2, "w", NEGATIVE),
            tweet("c", d1, "w", NEGATIVE),
            tweet("d", d2, "w", POSITIVE),
        ]
        assert tally_daily(tweets) == tally_daily(list(reversed(tweets)))

    def test_unlabeled_rejected(self):
        with pytest.raises(SentimentError):
            tally_daily([_doc("a", "w", None)])


class TestModelSerialization:
    def test_json_roundtrip_preserves_behavior(self):
        corpus = [
            _doc("a", "gold rally strong", POSITIVE),
            _doc("b", "oil crash weak", NEGATIVE),
            _doc("c", "rally surge", POSITIVE),
        ]
        model = train(corpus, alpha=0.5)
        back = model_from_json(model_to_json(model))
        assert back.smoothing_alpha == model.smoothing_alpha
        assert back.log_priors == model.log_priors
        assert back.log_likelihoods == model.log_likelihoods
        for text in ("gold crash", "surge surge", "unknown words", ""):
            assert classify(back, text) == classify(model, text)

    def test_malformed_document_rejected(self):
        with pytest.raises(SentimentError):
            model_from_json('{"alpha": 1.0}')
