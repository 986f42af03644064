"""Corpus-level BLEU and chrF++ (single reference).

BLEU sums clipped n-gram matches and hypothesis n-gram totals over the
corpus. A zero match count at order n is replaced by the exponentially
decaying pseudo-count ``1 / 2**k`` (k = 1 for the first such order, 2 for the
next, ...), with the order's total floored at 1 so orders longer than the
hypothesis are smoothed instead of zeroing the score. An order with no
n-grams on either side is vacuous and left out of the geometric mean.

chrF++ averages the per-order F-beta over character n-grams (whitespace
removed) and word n-grams, using corpus-summed statistics. An order where
the hypothesis or reference side has no n-grams at all is left out of the
average.

Tokenization defaults to :func:`wmtkit.tokenizer.tokenize`. Scores are not
comparable to numbers computed with a subword metric tokenizer.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Sequence

from wmtkit.tokenizer import tokenize

Tokenizer = Callable[[str], list[str]]


class Smoothing(str, enum.Enum):
    EXP = "exp"
    NONE = "none"


@dataclass(frozen=True)
class MetricConfig:
    bleu_max_n: int = 4
    bleu_smoothing: Smoothing = Smoothing.EXP
    chrf_char_n: int = 6
    chrf_word_n: int = 2
    chrf_beta: float = 2.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "bleu_smoothing", Smoothing(self.bleu_smoothing))
        if min(self.bleu_max_n, self.chrf_char_n, self.chrf_word_n) < 1:
            raise ValueError("n-gram orders must be at least 1")
        if not self.chrf_beta > 0:
            raise ValueError("chrf_beta must be positive")

    def bleu_signature(self, tokenizer_name: str = "wmtkit") -> str:
        return f"nrefs:1|case:mixed|eff:no|tok:{tokenizer_name}|smooth:{self.bleu_smoothing.value}|max_n:{self.bleu_max_n}"

    def chrf_signature(self) -> str:
        return f"nrefs:1|case:mixed|nc:{self.chrf_char_n}|nw:{self.chrf_word_n}|beta:{self.chrf_beta:g}"


def _ngrams(items: Sequence, n: int) -> Counter:
    return Counter(tuple(items[i : i + n]) for i in range(len(items) - n + 1))


def _check_lengths(hypotheses: Sequence[str], references: Sequence[str]) -> None:
    if len(hypotheses) != len(references):
        raise ValueError(f"{len(hypotheses)} hypotheses but {len(references)} references")


@dataclass(frozen=True)
class BleuStats:
    matches: tuple[int, ...]
    totals: tuple[int, ...]
    ref_totals: tuple[int, ...]
    hyp_len: int
    ref_len: int


def bleu_stats(
    hypotheses: Sequence[str], references: Sequence[str], max_n: int = 4, tokenizer: Tokenizer = tokenize
) -> BleuStats:
    _check_lengths(hypotheses, references)
    matches = [0] * max_n
    totals = [0] * max_n
    ref_totals = [0] * max_n
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h, r = tokenizer(hyp), tokenizer(ref)
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, max_n + 1):
            hc, rc = _ngrams(h, n), _ngrams(r, n)
            totals[n - 1] += sum(hc.values())
            ref_totals[n - 1] += sum(rc.values())
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
    return BleuStats(tuple(matches), tuple(totals), tuple(ref_totals), hyp_len, ref_len)


def bleu_from_stats(stats: BleuStats, smoothing: Smoothing = Smoothing.EXP) -> float:
    if stats.hyp_len == 0:
        return 100.0 if stats.ref_len == 0 else 0.0
    log_sum = 0.0
    k = 0
    orders = 0
    for m, t, rt in zip(stats.matches, stats.totals, stats.ref_totals):
        if t == 0 and rt == 0:
            continue
        orders += 1
        if m > 0:
            log_sum += math.log(m / t)
        elif smoothing is Smoothing.EXP:
            k += 1
            log_sum += -math.log(2.0**k * max(t, 1))
        else:
            return 0.0
    bp = 1.0 if stats.hyp_len >= stats.ref_len else math.exp(1.0 - stats.ref_len / stats.hyp_len)
    return min(100.0, 100.0 * bp * math.exp(log_sum / orders))


def bleu(
    hypotheses: Sequence[str],
    references: Sequence[str],
    config: MetricConfig | None = None,
    *,
    tokenizer: Tokenizer = tokenize,
) -> float:
    """Corpus BLEU in [0, 100]."""
    config = config or MetricConfig()
    if not hypotheses:
        raise ValueError("need at least one hypothesis")
    stats = bleu_stats(hypotheses, references, config.bleu_max_n, tokenizer)
    return bleu_from_stats(stats, config.bleu_smoothing)


def chrf_stats(
    hypotheses: Sequence[str],
    references: Sequence[str],
    config: MetricConfig | None = None,
    *,
    tokenizer: Tokenizer = tokenize,
) -> list[tuple[int, int, int]]:
    """Per-order (hyp n-grams, ref n-grams, matches): char orders then word orders."""
    config = config or MetricConfig()
    _check_lengths(hypotheses, references)
    orders = config.chrf_char_n + config.chrf_word_n
    stats = [[0, 0, 0] for _ in range(orders)]
    for hyp, ref in zip(hypotheses, references):
        hc, rc = "".join(hyp.split()), "".join(ref.split())
        hw, rw = tokenizer(hyp), tokenizer(ref)
        sides = [(hc, rc, n) for n in range(1, config.chrf_char_n + 1)]
        sides += [(hw, rw, n) for n in range(1, config.chrf_word_n + 1)]
        for row, (h, r, n) in zip(stats, sides):
            hg, rg = _ngrams(h, n), _ngrams(r, n)
            row[0] += sum(hg.values())
            row[1] += sum(rg.values())
            row[2] += sum((hg & rg).values())
    return [tuple(row) for row in stats]  # type: ignore[misc]


def chrf_from_stats(stats: Sequence[tuple[int, int, int]], beta: float = 2.0) -> float:
    b2 = beta * beta
    scores = []
    for n_hyp, n_ref, n_match in stats:
        if n_hyp == 0 or n_ref == 0:
            continue
        prec, rec = n_match / n_hyp, n_match / n_ref
        scores.append(0.0 if n_match == 0 else (1 + b2) * prec * rec / (b2 * prec + rec))
    if not scores:
        # nothing to compare on either side: identical (empty) corpora
        return 100.0 if all(h == r for h, r, _ in stats) else 0.0
    return 100.0 * sum(scores) / len(scores)


def chrf(
    hypotheses: Sequence[str],
    references: Sequence[str],
    config: MetricConfig | None = None,
    *,
    tokenizer: Tokenizer = tokenize,
) -> float:
    """Corpus chrF++ in [0, 100]."""
    config = config or MetricConfig()
    return chrf_from_stats(chrf_stats(hypotheses, references, config, tokenizer=tokenizer), config.chrf_beta)
