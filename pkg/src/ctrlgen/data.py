"""Tokenisation, vocabularies, control annotation, range splits and synthetic corpora."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .controls import BOS, EOS, LEXICON, PAD, UNK, gold_control, jaccard_edit, lexicon_rating


class DataError(ValueError):
    pass


_TOKEN_RE = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, punctuation marks become their own tokens."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: Sequence[str]) -> str:
    return " ".join(tokens)


class Vocabulary:
    specials = (PAD, BOS, EOS, UNK)

    def __init__(self, tokens: Iterable[str] = ()):
        self.itos: list[str] = list(self.specials)
        self.stoi: dict[str, int] = {t: i for i, t in enumerate(self.itos)}
        for t in tokens:
            self.add(t)

    pad_id, bos_id, eos_id, unk_id = 0, 1, 2, 3

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], min_count: int = 1) -> "Vocabulary":
        counts = Counter(t for seq in sequences for t in seq)
        # frequency order, ties alphabetical, so the mapping is reproducible
        keep = sorted((t for t, n in counts.items() if n >= min_count and t not in cls.specials),
                      key=lambda t: (-counts[t], t))
        return cls(keep)

    def add(self, token: str) -> int:
        if token not in self.stoi:
            self.stoi[token] = len(self.itos)
            self.itos.append(token)
        return self.stoi[token]

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def encode(self, tokens: Sequence[str]) -> list[int]:
        return [self.stoi.get(t, self.unk_id) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.itos[i] for i in ids]

    def to_list(self) -> list[str]:
        return list(self.itos)

    @classmethod
    def from_list(cls, itos: Sequence[str]) -> "Vocabulary":
        if tuple(itos[:4]) != cls.specials:
            raise DataError("vocabulary must start with the reserved tokens")
        return cls(itos[4:])


@dataclass
class Example:
    id: str
    target: list[str]
    source: list[str] | None = None
    c: int | None = None
    rating: int | None = None


# --------------------------------------------------------------------------
# ranges


@dataclass(frozen=True)
class Interval:
    lo: int | None
    hi: int | None

    @classmethod
    def parse(cls, text: str) -> "Interval":
        m = re.fullmatch(r"\s*(-?\d+)?\s*\.\.\s*(-?\d+)?\s*", text)
        if m:
            lo, hi = m.groups()
            return cls(None if lo is None else int(lo), None if hi is None else int(hi))
        if re.fullmatch(r"\s*-?\d+\s*", text):
            v = int(text)
            return cls(v, v)
        raise ValueError(f"bad interval {text!r}; expected 'lo..hi'")

    def __post_init__(self):
        if self.lo is not None and self.hi is not None and self.lo > self.hi:
            raise ValueError(f"empty interval {self.lo}..{self.hi}")

    def __contains__(self, c: int) -> bool:
        return (self.lo is None or c >= self.lo) and (self.hi is None or c <= self.hi)

    @property
    def name(self) -> str:
        return f"{'' if self.lo is None else self.lo}..{'' if self.hi is None else self.hi}"

    def values(self) -> list[int]:
        if self.lo is None or self.hi is None:
            raise ValueError(f"interval {self.name} is unbounded")
        return list(range(self.lo, self.hi + 1))

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class RangeSplit:
    observed: tuple[Interval, ...]
    evaluated: tuple[Interval, ...] = ()

    @classmethod
    def parse(cls, observed: str | Sequence[str], evaluated: Sequence[str] = ()) -> "RangeSplit":
        obs = [observed] if isinstance(observed, str) else list(observed)
        return cls(tuple(Interval.parse(o) for o in obs), tuple(Interval.parse(e) for e in evaluated))

    def is_observed(self, c: int) -> bool:
        return any(c in iv for iv in self.observed)


# --------------------------------------------------------------------------
# annotation and splitting


def annotate_controls(examples: Sequence[Example], kind: str) -> list[Example]:
    out = []
    for ex in examples:
        if kind == "length":
            c = gold_control("length", ex.target)
        elif kind == "edit":
            if not ex.source:
                raise DataError(f"example {ex.id}: edit control needs a paired source")
            c = jaccard_edit(ex.source, ex.target)
        elif kind == "sentiment":
            if ex.rating is None:
                raise DataError(f"example {ex.id}: missing rating for sentiment control")
            c = int(ex.rating)
        else:
            raise DataError(f"unknown control kind {kind!r}")
        out.append(replace(ex, c=c))
    return out


def split_by_range(examples: Sequence[Example], split: RangeSplit) -> dict[str, list[Example]]:
    """Keep observed-range examples as ``train``; one subset per evaluated interval."""
    out = {"train": [ex for ex in examples if split.is_observed(ex.c)]}
    if not out["train"]:
        raise DataError("no example falls inside the observed range")
    for iv in split.evaluated:
        out[iv.name] = [ex for ex in examples if ex.c in iv]
    return out


def partition(examples: Sequence[Example], fractions=(0.8, 0.1, 0.1), seed: int = 0,
              group_by_source: bool = False) -> dict[str, list[Example]]:
    """Random train/valid/test partition; with group_by_source no source text spans two parts."""
    rng = np.random.default_rng(seed)
    if group_by_source:
        groups: dict[str, list[Example]] = {}
        for ex in examples:
            key = " ".join(ex.source or [])
            groups.setdefault(key, []).append(ex)
        keys = sorted(groups)
        order = rng.permutation(len(keys))
        units = [groups[keys[i]] for i in order]
    else:
        order = rng.permutation(len(examples))
        units = [[examples[i]] for i in order]
    total = sum(len(u) for u in units)
    bounds = np.cumsum(fractions)[:-1] / np.sum(fractions) * total
    parts: dict[str, list[Example]] = {"train": [], "valid": [], "test": []}
    names = ("train", "valid", "test")
    seen = 0
    for unit in units:
        k = int(np.searchsorted(bounds, seen, side="right"))
        parts[names[k]].extend(unit)
        seen += len(unit)
    return parts


def filter_length(examples: Sequence[Example], max_len: int) -> list[Example]:
    return [ex for ex in examples if len(ex.target) <= max_len]


def balance_by_control(examples: Sequence[Example], seed: int = 0) -> list[Example]:
    """Equal counts per control value, interleaved so any prefix stays near balanced.

    Every value present keeps as many examples as the rarest one.
    """
    groups: dict[int, list[Example]] = {}
    for ex in examples:
        groups.setdefault(ex.c, []).append(ex)
    if not groups:
        return []
    rng = np.random.default_rng(seed)
    keep = min(len(g) for g in groups.values())
    shuffled = [[g[i] for i in rng.permutation(len(g))[:keep]] for _, g in sorted(groups.items())]
    return [ex for row in zip(*shuffled) for ex in row]


@dataclass
class Splits:
    train: list[Example]
    valid: list[Example]
    tests: dict[str, list[Example]]
    test_all: list[Example] = field(default_factory=list)

    def manifest_rows(self) -> list[dict]:
        rows = [{"id": ex.id, "split": "train", "c": ex.c} for ex in self.train]
        rows += [{"id": ex.id, "split": "valid", "c": ex.c} for ex in self.valid]
        for name, exs in self.tests.items():
            rows += [{"id": ex.id, "split": f"test:{name}", "c": ex.c} for ex in exs]
        return rows

    def counts(self) -> dict[str, int]:
        out = {"train": len(self.train), "valid": len(self.valid)}
        out.update({f"test:{k}": len(v) for k, v in self.tests.items()})
        return out


def make_splits(examples: Sequence[Example], split: RangeSplit, fractions=(0.8, 0.1, 0.1),
                seed: int = 0, group_by_source: bool = False) -> Splits:
    parts = partition(examples, fractions, seed, group_by_source)
    train = split_by_range(parts["train"], split)["train"]
    valid = [ex for ex in parts["valid"] if split.is_observed(ex.c)]
    tests = {k: v for k, v in split_by_range(parts["test"] or parts["train"], split).items() if k != "train"}
    if not valid:
        raise DataError("validation split has no example in the observed range")
    return Splits(train, valid, tests, parts["test"])


# --------------------------------------------------------------------------
# files


def read_tsv(path, kind: str | None = None) -> list[Example]:
    """Read ``c? <TAB> source? <TAB> target`` lines (empty fields allowed)."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            fields = line.split("\t")
            c_txt, src_txt = "", ""
            if len(fields) == 1:
                tgt_txt = fields[0]
            elif len(fields) == 2:
                if re.fullmatch(r"\s*-?\d*\s*", fields[0]):
                    c_txt, tgt_txt = fields
                else:
                    src_txt, tgt_txt = fields
            elif len(fields) == 3:
                c_txt, src_txt, tgt_txt = fields
            else:
                raise DataError(f"{path}:{lineno}: expected at most 3 tab-separated fields, got {len(fields)}")
            try:
                c = int(c_txt) if c_txt.strip() else None
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: control value {c_txt!r} is not an integer") from exc
            ex = Example(
                id=f"{Path(path).stem}-{lineno}",
                target=tokenize(tgt_txt),
                source=tokenize(src_txt) if src_txt.strip() else None,
                c=c,
                rating=c if kind == "sentiment" else None,
            )
            out.append(ex)
    return out


def write_tsv(path, examples: Iterable[Example]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            c = "" if ex.c is None else str(ex.c)
            src = "" if ex.source is None else detokenize(ex.source)
            fh.write(f"{c}\t{src}\t{detokenize(ex.target)}\n")


def write_examples_jsonl(path, examples: Iterable[Example]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            fh.write(json.dumps({"id": ex.id, "c": ex.c, "source": ex.source, "target": ex.target,
                                 "rating": ex.rating}, sort_keys=True) + "\n")


def read_examples_jsonl(path) -> list[Example]:
    with open(path, encoding="utf-8") as fh:
        return [Example(**json.loads(line)) for line in fh if line.strip()]


def write_manifest(path, splits: Splits) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in splits.manifest_rows():
            fh.write(json.dumps(row, sort_keys=True) + "\n")


def save_splits(directory, splits: Splits) -> None:
    d = Path(directory)
    write_examples_jsonl(d / "train.jsonl", splits.train)
    write_examples_jsonl(d / "valid.jsonl", splits.valid)
    write_examples_jsonl(d / "test.jsonl", splits.test_all)
    (d / "tests.json").write_text(
        json.dumps({k: [ex.id for ex in v] for k, v in splits.tests.items()}, indent=1) + "\n", encoding="utf-8"
    )
    write_manifest(d / "manifest.jsonl", splits)


def load_splits(directory) -> Splits:
    d = Path(directory)
    test_all = read_examples_jsonl(d / "test.jsonl")
    by_id = {ex.id: ex for ex in test_all}
    names = json.loads((d / "tests.json").read_text(encoding="utf-8"))
    tests = {k: [by_id[i] for i in ids] for k, ids in names.items()}
    return Splits(read_examples_jsonl(d / "train.jsonl"), read_examples_jsonl(d / "valid.jsonl"), tests, test_all)


# --------------------------------------------------------------------------
# synthetic corpora

DETS = ["the", "a", "this", "that", "every", "some"]
ADJS = ["small", "tall", "young", "old", "happy", "quiet", "red", "green", "busy", "tired"]
NOUNS = ["man", "woman", "dog", "child", "girl", "boy", "cat", "worker", "player", "farmer"]
VERBS = ["runs", "sits", "waits", "walks", "sleeps", "plays", "stands", "works", "reads", "sings"]
ADVS = ["quickly", "slowly", "quietly", "happily", "alone", "today", "again", "outside"]
PREPS = ["near", "behind", "under", "beside", "past", "around", "inside"]
PLACES = ["park", "house", "river", "street", "field", "school", "market", "beach", "bridge", "garden"]

SYNONYMS = {
    "small": "little", "tall": "high", "young": "youthful", "old": "aged", "happy": "glad",
    "quiet": "silent", "red": "crimson", "green": "emerald", "busy": "occupied", "tired": "weary",
    "man": "gentleman", "woman": "lady", "dog": "puppy", "child": "kid", "girl": "lass", "boy": "lad",
    "cat": "kitten", "worker": "laborer", "player": "athlete", "farmer": "grower",
    "runs": "jogs", "sits": "rests", "waits": "lingers", "walks": "strolls", "sleeps": "naps",
    "plays": "frolics", "stands": "poses", "works": "toils", "reads": "studies", "sings": "chants",
    "quickly": "rapidly", "slowly": "leisurely", "quietly": "softly", "happily": "cheerfully",
    "alone": "solo", "today": "now", "again": "anew", "outside": "outdoors",
    "near": "by", "behind": "after", "under": "below", "beside": "alongside", "past": "beyond",
    "around": "about", "inside": "within",
    "park": "lawn", "house": "home", "river": "stream", "street": "road", "field": "meadow",
    "school": "academy", "market": "bazaar", "beach": "shore", "bridge": "overpass", "garden": "yard",
    "the": "said", "a": "one", "this": "yon", "that": "thon", "every": "each", "some": "several",
}

GRAMMAR_MAX_LEN = 60


def grammar_sentence(length: int, rng: np.random.Generator, adjs: Sequence[str] = ADJS) -> list[str]:
    """A sentence of exactly ``length`` tokens: det adj* noun verb, then adverbs / prepositional phrases."""
    if not 3 <= length <= GRAMMAR_MAX_LEN:
        raise DataError(f"grammar cannot produce length {length}; feasible lengths are 3..{GRAMMAR_MAX_LEN}")
    rest = length - 3
    n_subj_adj = int(rng.integers(0, min(2, rest) + 1))
    rest -= n_subj_adj
    tail: list[list[str]] = []
    while rest > 0:
        if rest >= 3 and rng.random() < 0.7:
            n_adj = int(rng.integers(0, min(2, rest - 3) + 1))
            phrase = [str(rng.choice(PREPS)), str(rng.choice(DETS))]
            phrase += [str(rng.choice(adjs)) for _ in range(n_adj)]
            phrase.append(str(rng.choice(PLACES)))
            tail.append(phrase)
            rest -= len(phrase)
        else:
            tail.append([str(rng.choice(ADVS))])
            rest -= 1
    words = [str(rng.choice(DETS))] + [str(rng.choice(adjs)) for _ in range(n_subj_adj)]
    words += [str(rng.choice(NOUNS)), str(rng.choice(VERBS))]
    for phrase in tail:
        words += phrase
    assert len(words) == length
    return words


def _synth_length(n: int, lo: int, hi: int, rng) -> list[Example]:
    out = []
    for i in range(n):
        L = int(rng.integers(lo, hi + 1))
        toks = grammar_sentence(L, rng)
        out.append(Example(id=f"len-{i}", target=toks, c=L))
    return out


def _synth_edit(n: int, lo: int, hi: int, rng) -> list[Example]:
    out = []
    for i in range(n):
        src = grammar_sentence(int(rng.integers(lo, hi + 1)), rng)
        k = int(rng.integers(0, len(src) + 1))
        swap = set(rng.choice(len(src), size=k, replace=False).tolist())
        tgt = [SYNONYMS.get(w, w) if j in swap else w for j, w in enumerate(src)]
        out.append(Example(id=f"edit-{i}", source=src, target=tgt, c=jaccard_edit(src, tgt)))
    return out


_POLAR = {s: sorted(w for w, v in LEXICON.items() if v == s) for s in (-2, -1, 1, 2)}


def _synth_sentiment(n: int, lo: int, hi: int, rng) -> list[Example]:
    per = -(-n // 5)
    buckets: dict[int, list[list[str]]] = {r: [] for r in range(1, 6)}
    attempts = 0
    while any(len(b) < per for b in buckets.values()):
        attempts += 1
        if attempts > 200 * n + 1000:
            raise DataError("sentiment synthesis could not balance ratings; widen the length interval")
        target = int(rng.integers(1, 6))
        pol = target - 3
        toks = grammar_sentence(int(rng.integers(lo, hi + 1)), rng)
        if pol != 0:
            # overwrite a share of the slots with words of the wanted polarity
            words = _POLAR[pol]
            slots = rng.choice(len(toks), size=max(1, int(round(len(toks) * (0.5 + 0.5 * rng.random())))),
                               replace=False)
            for j in slots:
                toks[j] = str(rng.choice(words))
        r = lexicon_rating(toks)
        if len(buckets[r]) < per:
            buckets[r].append(toks)
    out = []
    order = []
    for r in range(1, 6):
        order += [(r, t) for t in buckets[r]]
    for idx in rng.permutation(len(order))[:n]:
        r, toks = order[idx]
        out.append(Example(id=f"sent-{len(out)}", target=toks, c=r, rating=r))
    return out


def synth_corpus(kind: str, n: int = 5000, lo: int = 3, hi: int = 18, seed: int = 0) -> list[Example]:
    """Seeded desk-scale corpus.

    ``length``: grammar sentences with length uniform on [lo, hi].
    ``edit``: (source, target) pairs, source length uniform on [lo, hi]; a
    uniformly drawn number of source tokens is swapped for synonyms.
    ``sentiment``: sentences labelled by the lexicon oracle, balanced over 1..5.
    """
    if lo > hi:
        raise DataError(f"empty length interval [{lo}, {hi}]")
    if lo < 3 or hi > GRAMMAR_MAX_LEN:
        raise DataError(f"grammar cannot produce lengths in [{lo}, {hi}]; feasible lengths are 3..{GRAMMAR_MAX_LEN}")
    rng = np.random.default_rng(seed)
    if kind == "length":
        return _synth_length(n, lo, hi, rng)
    if kind == "edit":
        return _synth_edit(n, lo, hi, rng)
    if kind == "sentiment":
        return _synth_sentiment(n, lo, hi, rng)
    raise DataError(f"unknown control kind {kind!r}")
