"""Gold control values (length, edit, sentiment) and running trackers for decoding."""

from __future__ import annotations

from typing import Sequence

import numpy as np

CONTROL_KINDS = ("length", "edit", "sentiment")
KIND_RANGES = {"edit": (0, 10), "sentiment": (1, 5)}

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
MARKERS = frozenset({PAD, BOS, EOS})


class UnsupportedKindError(ValueError):
    pass


def content(tokens: Sequence[str]) -> list[str]:
    return [t for t in tokens if t not in MARKERS]


def _edit_from_counts(inter: int, union: int) -> int:
    # round(10 * (union - inter) / union), half-up, in exact integer arithmetic
    return (20 * (union - inter) + union) // (2 * union)


def jaccard_edit(input_tokens: Sequence[str], output_tokens: Sequence[str]) -> int:
    a = set(content(input_tokens))
    b = set(content(output_tokens))
    if not a and not b:
        raise ValueError("jaccard_edit: both token sets are empty")
    if not a:
        raise ValueError("jaccard_edit: empty input sequence")
    return _edit_from_counts(len(a & b), len(a | b))


def length_value(tokens: Sequence[str]) -> int:
    return len(content(tokens))


class LengthTracker:
    kind = "length"

    def __init__(self):
        self.count = 0

    @property
    def value(self) -> int:
        return self.count

    def step(self, token: str) -> int:
        if token not in MARKERS:
            self.count += 1
        return self.count


class EditTracker:
    """Rounded Jaccard edit of the growing prefix against a fixed reference input."""

    kind = "edit"

    def __init__(self, reference: Sequence[str]):
        self.ref = frozenset(content(reference))
        if not self.ref:
            raise ValueError("edit tracker needs a nonempty reference input")
        self.seen: set[str] = set()
        self.inter = 0

    @property
    def value(self) -> int:
        return _edit_from_counts(self.inter, len(self.ref) + len(self.seen) - self.inter)

    def step(self, token: str) -> int:
        if token not in MARKERS and token not in self.seen:
            self.seen.add(token)
            if token in self.ref:
                self.inter += 1
        return self.value


def make_tracker(kind: str, reference: Sequence[str] | None = None):
    if kind == "length":
        return LengthTracker()
    if kind == "edit":
        if reference is None:
            raise ValueError("edit tracker requires the reference input tokens")
        return EditTracker(reference)
    if kind == "sentiment":
        raise UnsupportedKindError("sentiment has no running tracker")
    raise UnsupportedKindError(f"unknown control kind {kind!r}")


def tracker_step(tracker, token: str) -> int:
    return tracker.step(token)


def prefix_values(kind: str, tokens: Sequence[str], reference: Sequence[str] | None = None) -> list[int]:
    """Tracker value before each token and after the last one (len(tokens) + 1 entries)."""
    tr = make_tracker(kind, reference)
    out = [tr.value]
    for tok in tokens:
        out.append(tr.step(tok))
    return out


# --------------------------------------------------------------------------
# sentiment

# token -> polarity score in {-2, ..., 2}; anything absent scores 0
LEXICON: dict[str, int] = {
    "awful": -2, "terrible": -2, "horrible": -2, "disgusting": -2, "worst": -2,
    "bad": -1, "bland": -1, "slow": -1, "rude": -1, "dirty": -1, "cold": -1,
    "good": 1, "nice": 1, "friendly": 1, "tasty": 1, "clean": 1, "fresh": 1,
    "amazing": 2, "excellent": 2, "perfect": 2, "wonderful": 2, "best": 2,
}


def lexicon_rating(tokens: Sequence[str], lexicon: dict[str, int] = LEXICON) -> int:
    toks = content(tokens)
    if not toks:
        raise ValueError("lexicon_rating: empty sequence")
    total = sum(lexicon.get(t, 0) for t in toks)
    n = len(toks)
    # 3 + round_half_up(total / n) in integers
    r = 3 + (2 * total + n) // (2 * n)
    return min(5, max(1, r))


class LexiconClassifier:
    """Exact sentiment oracle for the synthetic corpora."""

    n_classes = 5

    def __init__(self, lexicon: dict[str, int] = LEXICON):
        self.lexicon = dict(lexicon)

    def predict_proba(self, tokens: Sequence[str]) -> np.ndarray:
        p = np.zeros(self.n_classes)
        p[lexicon_rating(tokens, self.lexicon) - 1] = 1.0
        return p


def sentiment_value(tokens: Sequence[str], clf) -> int:
    if not content(tokens):
        raise ValueError("sentiment_value: empty sequence")
    probs = np.asarray(clf.predict_proba(tokens))
    # np.argmax returns the first maximum, i.e. ties go to the lower rating
    return int(np.argmax(probs)) + 1


def gold_control(kind: str, target: Sequence[str], source: Sequence[str] | None = None, clf=None) -> int:
    if kind == "length":
        return length_value(target)
    if kind == "edit":
        if source is None:
            raise ValueError("edit control needs the source tokens")
        return jaccard_edit(source, target)
    if kind == "sentiment":
        if clf is None:
            raise ValueError("sentiment control needs a classifier")
        return sentiment_value(target, clf)
    raise UnsupportedKindError(f"unknown control kind {kind!r}")
