"""Perplexity, BLEU, control MSE / accuracy and range-structured reports."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .batching import length_buckets, make_batch
from .data import Example, Vocabulary
from .decoding import DecodeConfig, batch_generate


def total_nll(model, vocab: Vocabulary, examples: Sequence[Example], batch_size: int = 128) -> tuple[float, int]:
    kind = model.config.control.kind
    nll, count = 0.0, 0
    with T.no_grad():
        for chunk in length_buckets(examples, batch_size):
            batch = make_batch(chunk, vocab, kind)
            logits = model.forward(batch)
            loss = T.cross_entropy(logits, batch.targets.reshape(-1), batch.mask.reshape(-1), reduction="sum")
            nll += float(loss.item())
            count += batch.n_tokens
    return nll, count


def perplexity(model, vocab: Vocabulary, examples: Sequence[Example], batch_size: int = 128) -> float:
    """exp(total NLL / token count) with gold controls and teacher-forced trackers.

    The EOS prediction counts as a token.
    """
    if not examples:
        raise ValueError("perplexity: no examples")
    nll, count = total_nll(model, vocab, examples, batch_size)
    if count == 0:
        raise ValueError("perplexity: zero tokens")
    mean = nll / count
    return math.exp(mean) if mean < 700 else math.inf


def control_mse(pairs: Sequence[tuple[int, int]]) -> float:
    if not pairs:
        raise ValueError("control_mse: no pairs")
    a = np.asarray(pairs, dtype=np.float64)
    return float(np.mean((a[:, 0] - a[:, 1]) ** 2))


def control_accuracy(pairs: Sequence[tuple[int, int]]) -> float:
    if not pairs:
        raise ValueError("control_accuracy: no pairs")
    hits = sum(1 for d, r in pairs if d == r)
    return 100.0 * hits / len(pairs)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(references: Sequence[Sequence[str]], hypotheses: Sequence[Sequence[str]], max_n: int = 4) -> float:
    """Corpus BLEU-4 (x100) with brevity penalty; orders n >= 2 use add-one smoothing."""
    if len(references) != len(hypotheses):
        raise ValueError(f"bleu: {len(references)} references vs {len(hypotheses)} hypotheses")
    if not references:
        raise ValueError("bleu: empty corpus")
    matches = [0] * max_n
    totals = [0] * max_n
    ref_len = hyp_len = 0
    for ref, hyp in zip(references, hypotheses):
        ref_len += len(ref)
        hyp_len += len(hyp)
        for n in range(1, max_n + 1):
            h = _ngrams(hyp, n)
            r = _ngrams(ref, n)
            matches[n - 1] += sum(min(c, r[g]) for g, c in h.items())
            totals[n - 1] += max(0, len(hyp) - n + 1)
    if hyp_len == 0 or matches[0] == 0:
        return 0.0
    log_p = math.log(matches[0] / totals[0])
    for n in range(1, max_n):
        log_p += math.log((matches[n] + 1) / (totals[n] + 1))
    bp = 1.0 if hyp_len > ref_len else math.exp(1 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_p / max_n)


# --------------------------------------------------------------------------
# reports


@dataclass
class IntervalReport:
    name: str
    n_examples: int
    ppl: float | None = None
    bleu: float | None = None
    accuracy: float | None = None
    mse: float | None = None
    n_generated: int = 0
    n_failed: int = 0


@dataclass
class EvalReport:
    strategy: str
    family: str
    kind: str
    intervals: list[IntervalReport] = field(default_factory=list)
    baseline_ppl: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def row(self, name: str) -> IntervalReport:
        for r in self.intervals:
            if r.name == name:
                return r
        raise KeyError(name)


def _fmt(v, nd=1) -> str:
    return "--" if v is None else f"{v:.{nd}f}"


def format_table(reports: Sequence[EvalReport], skipped: Sequence[tuple[str, str]] = ()) -> str:
    """Aligned text: one row per strategy, PPL/Acc/MSE (and BLEU if any) per interval."""
    names: list[str] = []
    for rep in reports:
        for r in rep.intervals:
            if r.name not in names:
                names.append(r.name)
    with_bleu = any(r.bleu is not None for rep in reports for r in rep.intervals)
    cols = ["PPL", "BLEU", "Acc", "MSE"] if with_bleu else ["PPL", "Acc", "MSE"]
    header = ["model", "strategy"] + [f"{n} {c}" for n in names for c in cols]
    rows = []
    for rep in reports:
        cells = [rep.family, rep.strategy]
        for n in names:
            try:
                r = rep.row(n)
            except KeyError:
                cells += ["--"] * len(cols)
                continue
            vals = {"PPL": _fmt(r.ppl, 2), "BLEU": _fmt(r.bleu), "Acc": _fmt(r.accuracy), "MSE": _fmt(r.mse, 2)}
            cells += [vals[c] for c in cols]
        rows.append(cells)
    for label, reason in skipped:
        fam, strat = label.split(":", 1) if ":" in label else ("", label)
        rows.append((fam, strat, f"SKIPPED({reason})"))
    full = [header] + [r for r in rows if isinstance(r, list)]
    widths = [max(len(str(r[i])) for r in full) for i in range(len(header))]
    lines = []
    for r in [header] + rows:
        if isinstance(r, tuple):
            lines.append("  ".join(str(c).ljust(widths[i]) for i, c in enumerate(r[:2])) + "  " + r[2])
        else:
            lines.append("  ".join(str(c).ljust(widths[i]) for i, c in enumerate(r)).rstrip())
    return "\n".join(lines) + "\n"


def range_report(model, vocab: Vocabulary, tests: dict[str, Sequence[Example]], cfg: DecodeConfig = DecodeConfig(),
                 clf=None, baseline=None, max_generations: int | None = None) -> EvalReport:
    """PPL on each interval's test subset, then generation metrics for its desired values."""
    spec = model.config.control
    if spec.kind == "sentiment" and spec.controlled and clf is None:
        raise ValueError("sentiment evaluation needs a classifier")
    report = EvalReport(spec.strategy if spec.controlled else "no_control", model.config.family, spec.kind)
    for name, exs in tests.items():
        if not exs:
            continue
        row = IntervalReport(name=name, n_examples=len(exs))
        row.ppl = perplexity(model, vocab, exs)
        gen_exs = list(exs)[:max_generations] if max_generations else list(exs)
        if spec.controlled:
            sources = [ex.source for ex in gen_exs] if model.config.has_encoder else None
            gens = batch_generate(model, vocab, [ex.c for ex in gen_exs], sources, cfg, clf)
            pairs = [(g.desired, g.realized) for g in gens if g.ok]
            row.n_generated = len(pairs)
            row.n_failed = len(gens) - len(pairs)
            if pairs:
                row.accuracy = control_accuracy(pairs)
                row.mse = control_mse(pairs)
            if model.config.has_encoder:
                row.bleu = bleu([ex.target for ex in gen_exs], [g.tokens for g in gens])
        elif model.config.has_encoder:
            gens = batch_generate(model, vocab, [0] * len(gen_exs), [ex.source for ex in gen_exs], cfg, clf)
            row.bleu = bleu([ex.target for ex in gen_exs], [g.tokens for g in gens])
        report.intervals.append(row)
    if baseline is not None:
        all_ex = [ex for exs in tests.values() for ex in exs]
        report.baseline_ppl = perplexity(baseline, vocab, all_ex)
    return report


@dataclass
class CurvePoint:
    desired: int
    mean_realized: float
    stddev: float
    n: int


def emit_curve(model, vocab: Vocabulary, values: Sequence[int], cfg: DecodeConfig = DecodeConfig(),
               n_samples: int = 1, clf=None) -> list[CurvePoint]:
    """Mean and stddev of realized control for each desired value."""
    values = list(values)
    desired = [c for c in values for _ in range(n_samples)]
    gens = batch_generate(model, vocab, desired, None, cfg, clf)
    out = []
    for j, c in enumerate(values):
        real = [g.realized for g in gens[j * n_samples : (j + 1) * n_samples] if g.ok]
        arr = np.asarray(real, dtype=np.float64)
        out.append(CurvePoint(c, float(arr.mean()) if real else float("nan"),
                              float(arr.std()) if real else float("nan"), len(real)))
    return out


def curve_csv(points: Sequence[CurvePoint]) -> str:
    lines = ["desired,mean_realized,stddev,n"]
    lines += [f"{p.desired},{p.mean_realized:.6f},{p.stddev:.6f},{p.n}" for p in points]
    return "\n".join(lines) + "\n"
