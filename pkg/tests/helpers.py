"""Small hand-built models used as oracles by several test modules."""

from dataclasses import dataclass

import numpy as np

from ctrlgen.data import Vocabulary
from ctrlgen.models import ControlSpec

WORDS = ["w", "x", "y", "z"]


def echo_vocab() -> Vocabulary:
    return Vocabulary.build([WORDS])


@dataclass(frozen=True)
class _Cfg:
    control: ControlSpec
    has_encoder: bool = False
    family: str = "stub"


class EchoLengthModel:
    """Emits "w" until the length tracker reaches the desired value, then EOS.

    With ``ignore_desired`` it always stops after ``fixed`` tokens, which makes
    it an uncontrolled model.
    """

    def __init__(self, vocab: Vocabulary, value_range=(0, 40), ignore_desired=False, fixed=5):
        self.vocab = vocab
        strategy = "none" if ignore_desired else "scalar"
        self.config = _Cfg(ControlSpec("length", strategy, 1, value_range, True, (0, 60)))
        self.ignore_desired = ignore_desired
        self.fixed = fixed
        self.dtype = np.float64

    def check_desired(self, values):
        lo, hi = self.config.control.value_range
        for v in values:
            if not lo <= v <= hi:
                raise ValueError(f"control value {v} outside the declared range [{lo}, {hi}]")

    def start(self, batch_size, source=None, source_mask=None):
        return np.zeros(batch_size, dtype=np.int64)

    def step(self, state, tokens, desired, trackers):
        b = len(tokens)
        logits = np.zeros((b, len(self.vocab)))
        stop = (state >= self.fixed) if self.ignore_desired else (np.asarray(trackers) >= np.asarray(desired))
        logits[:, self.vocab.stoi["w"]] = np.where(stop, 0.0, 10.0)
        logits[:, self.vocab.eos_id] = np.where(stop, 10.0, 0.0)
        return logits, state + 1
