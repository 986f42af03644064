"""Combined top-k / nucleus sampling with temperature, for backtranslation.

The next-token distribution is transformed as

1. temperature: divide log-probabilities by ``temperature`` and renormalize;
2. top-k: keep the ``top_k`` most probable tokens;
3. nucleus: of those, keep the shortest most-probable-first prefix whose
   cumulative probability reaches ``top_p``;
4. renormalize the survivors.

Ties are ordered by vocabulary index. Randomness comes from NumPy's PCG64
bit generator; each sentence gets its own stream seeded from
``(seed, line index)`` through ``numpy.random.SeedSequence``, so output is
independent of how sentences are split across workers.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from wmtkit.corpus import SentencePair
from wmtkit.scorers import BOS, EOS, NEG_SENTINEL, SequenceScorer, log_normalize

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SamplingParams:
    top_k: int = 50
    top_p: float = 0.93
    temperature: float = 0.7
    beam: int = 1
    length_penalty: float = 1.0
    max_len: int = 200
    seed: int = 0

    def __post_init__(self) -> None:
        if self.top_k < 1:
            raise ValueError("top_k must be at least 1")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must lie in (0, 1]")
        if not self.temperature > 0.0:
            raise ValueError("temperature must be positive")
        if self.max_len < 1:
            raise ValueError("max_len must be at least 1")
        if self.beam != 1:
            raise ValueError("sampling is single-hypothesis; beam must be 1")


def survivor_order(logp: np.ndarray) -> np.ndarray:
    """Token indices by descending probability, ties by ascending index."""
    return np.lexsort((np.arange(logp.shape[0]), -logp))


def filter_distribution(dist: np.ndarray, params: SamplingParams, *, sentinel: float = NEG_SENTINEL) -> np.ndarray:
    """Apply temperature, top-k and nucleus truncation to a log-probability vector."""
    dist = np.asarray(dist, dtype=float)
    live = dist > sentinel / 2
    scaled = np.where(live, dist / params.temperature, sentinel)
    scaled = log_normalize(scaled, sentinel)

    order = survivor_order(scaled)
    n_live = int(live.sum())
    order = order[: min(params.top_k, n_live)]
    probs = np.exp(scaled[order])
    cum = np.cumsum(probs)
    reach = np.flatnonzero(cum >= params.top_p)
    keep = order[: reach[0] + 1] if reach.size else order

    out = np.full(dist.shape, sentinel)
    out[keep] = scaled[keep]
    return log_normalize(out, sentinel)


def draw_token(logp: np.ndarray, rng: np.random.Generator, sentinel: float = NEG_SENTINEL) -> int:
    """Inverse-CDF draw of one index from a (possibly truncated) log-distribution."""
    idx = np.flatnonzero(logp > sentinel / 2)
    probs = np.exp(logp[idx])
    cum = np.cumsum(probs)
    u = rng.random() * cum[-1]
    return int(idx[min(int(np.searchsorted(cum, u, side="right")), idx.size - 1)])


def sentence_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, index])))


def sample_sequence(
    direct: SequenceScorer,
    source: Sequence[str],
    params: SamplingParams,
    rng: np.random.Generator | None = None,
    *,
    sentinel: float = NEG_SENTINEL,
) -> list[str]:
    """Sample one output sequence token by token (no BOS, no EOS)."""
    vocab = direct.vocab
    for tok in source:
        vocab.id(tok)
    if rng is None:
        rng = sentence_rng(params.seed, 0)
    context = [BOS]
    out: list[str] = []
    while len(out) < params.max_len:
        logp = np.asarray(direct.next_distribution(context, source), dtype=float).copy()
        logp[vocab.bos] = sentinel
        filtered = filter_distribution(log_normalize(logp, sentinel), params, sentinel=sentinel)
        tok = vocab.tokens[draw_token(filtered, rng, sentinel)]
        if tok == EOS:
            break
        out.append(tok)
        context.append(tok)
    return out


@dataclass
class Skipped:
    index: int
    sentence: str
    error: str


def _backtranslate_one(direct: SequenceScorer, index: int, sentence: str, params: SamplingParams) -> str:
    tokens = sentence.split()
    return " ".join(sample_sequence(direct, tokens, params, sentence_rng(params.seed, index)))


def _try_one(args: tuple[SequenceScorer, int, str, SamplingParams]) -> tuple[bool, str]:
    try:
        return True, _backtranslate_one(*args)
    except Exception as exc:
        return False, f"{type(exc).__name__}: {exc}"


def backtranslate_corpus(
    direct: SequenceScorer,
    monolingual: Iterable[str],
    params: SamplingParams,
    skipped: list[Skipped] | None = None,
    *,
    jobs: int = 1,
) -> Iterator[SentencePair]:
    """Yield (synthetic source, original target) pairs.

    ``direct`` translates from the monolingual language into the other one.
    Model-facing text is whitespace-tokenized. A sentence whose sampling
    raises is left out and recorded in ``skipped``; the pair id is the
    sentence's line index.
    """
    indexed = enumerate(monolingual)
    if jobs > 1:
        items = list(indexed)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_try_one, [(direct, i, s, params) for i, s in items], chunksize=64)
            outcomes: Iterable = list(zip(items, results))
    else:
        outcomes = (((i, s), _try_one((direct, i, s, params))) for i, s in indexed)
    for (index, sentence), (ok, value) in outcomes:
        if ok:
            yield SentencePair(index, value, sentence)
            continue
        log.warning("skipping line %d: %s", index, value)
        if skipped is not None:
            skipped.append(Skipped(index, sentence, value))
