import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ctrlgen.controls import (
    BOS,
    EOS,
    LEXICON,
    LexiconClassifier,
    UnsupportedKindError,
    jaccard_edit,
    length_value,
    lexicon_rating,
    make_tracker,
    sentiment_value,
    tracker_step,
)

tokens = st.lists(st.sampled_from(list("abcdefgh")), min_size=1, max_size=12)


def brute_edit(a, b):
    """Set algebra by enumeration over the joint alphabet, then half-up rounding with fractions."""
    from fractions import Fraction

    alphabet = sorted(set(a) | set(b))
    inter = sum(1 for t in alphabet if t in a and t in b)
    union = len(alphabet)
    x = 10 * (1 - Fraction(inter, union))
    return math.floor(x + Fraction(1, 2))


def test_jaccard_examples():
    assert jaccard_edit(list("abc"), list("abc")) == 0
    assert jaccard_edit(list("abc"), list("xyz")) == 10
    assert jaccard_edit(list("abc"), list("abd")) == 5
    assert brute_edit(list("abc"), list("abd")) == 5


def test_jaccard_half_up():
    # d = 1 - 7/8 = 0.125 -> 1.25 -> 1 ; d = 0.25 -> 2.5 -> 3
    assert jaccard_edit(list("abcdefgh"), list("abcdefg")) == 1
    assert jaccard_edit(list("abcd"), list("abc")) == 3


def test_jaccard_ignores_markers():
    assert jaccard_edit([BOS, "a", "b", EOS], ["a", "b"]) == 0


def test_jaccard_empty_input():
    with pytest.raises(ValueError):
        jaccard_edit([], [])
    with pytest.raises(ValueError):
        jaccard_edit([], ["a"])


@given(tokens, tokens)
def test_jaccard_matches_brute_force_and_is_symmetric(a, b):
    e = jaccard_edit(a, b)
    assert e == brute_edit(a, b) == jaccard_edit(b, a)
    assert 0 <= e <= 10
    # with at most 8 distinct tokens the smallest nonzero distance is 1/8, which rounds to 1
    assert (e == 0) == (set(a) == set(b))


def test_zero_edit_for_unequal_large_sets():
    # a distance below 0.05 rounds to 0, so zero-iff-equal needs a union of at most 20 tokens
    a = [f"w{i}" for i in range(20)]
    assert jaccard_edit(a, a[:-1]) == 1  # 1/20 = 0.05 -> 0.5 -> 1
    big = [f"w{i}" for i in range(30)]
    assert jaccard_edit(big, big[:-1]) == 0


def test_length_value():
    assert length_value([]) == 0
    assert length_value([BOS, "a", "b", EOS]) == 2
    assert length_value(["a"] * 3 + ["b"] * 4) == 3 + 4


def test_length_tracker():
    tr = make_tracker("length")
    assert tr.value == 0
    for k in range(1, 6):
        assert tracker_step(tr, "x") == k


def test_sentiment_has_no_tracker():
    with pytest.raises(UnsupportedKindError):
        make_tracker("sentiment")


def test_edit_tracker_matches_batch_on_every_prefix():
    rng = np.random.default_rng(0)
    alphabet = list("abcdefghij")
    for _ in range(300):
        src = list(rng.choice(alphabet, size=rng.integers(1, 9)))
        out = list(rng.choice(alphabet, size=rng.integers(0, 9)))
        tr = make_tracker("edit", src)
        assert tr.value == 10
        for k, tok in enumerate(out, 1):
            assert tracker_step(tr, tok) == jaccard_edit(src, out[:k])


def test_lexicon_sentiment():
    clf = LexiconClassifier()
    best = [w for w, v in LEXICON.items() if v == 2]
    assert sentiment_value(best * 2, clf) == 5
    assert sentiment_value(["table"], clf) == 3
    worst = [w for w, v in LEXICON.items() if v == -2]
    assert sentiment_value(worst, clf) == 1
    assert sentiment_value(["good", "bad", "cat"], clf) == sentiment_value(["good", "bad", "cat"], clf)
    with pytest.raises(ValueError):
        sentiment_value([], clf)


def test_lexicon_rating_bounds():
    for combo in itertools.product(["awful", "bad", "cat", "good", "best"], repeat=3):
        assert 1 <= lexicon_rating(list(combo)) <= 5


class _TieClassifier:
    def predict_proba(self, tokens):
        return np.array([0.1, 0.35, 0.35, 0.1, 0.1])


def test_sentiment_ties_go_low():
    assert sentiment_value(["x"], _TieClassifier()) == 2
