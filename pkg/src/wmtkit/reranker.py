"""Beam search with noisy-channel rescoring.

Each step expands every live hypothesis by its ``k2`` most likely next
tokens under the direct model, scores the expansions with

    direct_lp / t**length_penalty + (delta_ch * channel_lp + delta_lm * lm_lp) / s

and keeps the best ``beam - finished`` of them. ``s`` is the source length
and ``t`` the hypothesis length, both without BOS/EOS and at least 1.
``channel_lp`` is log P(source | hypothesis prefix) and ``lm_lp`` is the
language model's log-probability of the prefix.

Ranking is by combined score, then higher ``direct_lp``, then token tuple,
so equal scores never depend on float noise or input order.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from wmtkit.scorers import (
    BOS,
    EOS,
    NEG_SENTINEL,
    SequenceScorer,
    prefix_log_prob,
    restrict_output_vocab,
    sequence_log_prob,
)

DIRECTION_PRESETS: dict[str, dict[str, float]] = {
    "en-he": {"delta_ch": 0.2297, "delta_lm": 0.2056},
    "he-en": {"delta_ch": 0.2998, "delta_lm": 0.2594},
}


class DecodingConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DecodingParams:
    beam: int = 5
    k2: int = 5
    length_penalty: float = 1.0
    cm_top_k: int = 500
    delta_ch: float = 0.3
    delta_lm: float = 0.3
    max_len: int = 200
    rescore: str = "online"

    def __post_init__(self) -> None:
        if self.beam < 1:
            raise DecodingConfigError("beam must be at least 1")
        if self.k2 < 1:
            raise DecodingConfigError("k2 must be at least 1")
        if self.cm_top_k < 1:
            raise DecodingConfigError("cm_top_k must be at least 1")
        if self.delta_ch < 0 or self.delta_lm < 0:
            raise DecodingConfigError("channel and LM weights must be non-negative")
        if self.max_len < 1:
            raise DecodingConfigError("max_len must be at least 1")
        if self.rescore not in ("online", "final"):
            raise DecodingConfigError("rescore must be 'online' or 'final'")

    @classmethod
    def preset(cls, direction: str, **overrides) -> DecodingParams:
        try:
            weights = DIRECTION_PRESETS[direction]
        except KeyError:
            raise DecodingConfigError(
                f"unknown direction {direction!r}; presets: {sorted(DIRECTION_PRESETS)}"
            ) from None
        return cls(**{**weights, **overrides})


@dataclass(frozen=True)
class Candidate:
    tokens: tuple[str, ...] = ()
    direct_lp: float = 0.0
    channel_lp: float | None = None
    lm_lp: float | None = None
    combined: float | None = None
    finished: bool = False

    def __post_init__(self) -> None:
        has_parts = self.channel_lp is not None and self.lm_lp is not None
        if (self.combined is not None) != has_parts:
            raise ValueError("combined score is present iff channel and LM scores are")

    @property
    def words(self) -> list[str]:
        """Output tokens without a trailing EOS."""
        if self.tokens and self.tokens[-1] == EOS:
            return list(self.tokens[:-1])
        return list(self.tokens)

    @property
    def length(self) -> int:
        return max(1, len(self.words))

    def rank_key(self, score: float) -> tuple:
        return (-score, -self.direct_lp, self.tokens)


def combined_score(
    direct_lp: float,
    channel_lp: float,
    lm_lp: float,
    src_len: int,
    tgt_len: int,
    params: DecodingParams,
) -> float:
    if src_len < 1 or tgt_len < 1:
        raise ValueError("source and target lengths must be at least 1")
    direct_term = direct_lp / (tgt_len**params.length_penalty)
    return direct_term + (params.delta_ch * channel_lp + params.delta_lm * lm_lp) / src_len


def direct_score(cand: Candidate, params: DecodingParams) -> float:
    """Length-normalized direct-model score, the ranking without reranking."""
    return cand.direct_lp / (cand.length**params.length_penalty)


def beam_expand(
    candidates: Sequence[Candidate],
    direct: SequenceScorer,
    source: Sequence[str],
    params: DecodingParams,
    *,
    sentinel: float = NEG_SENTINEL,
) -> list[Candidate]:
    """Extend each live candidate by its top-``k2`` next tokens under ``direct``."""
    vocab = direct.vocab
    out: list[Candidate] = []
    for cand in candidates:
        if cand.finished:
            raise ValueError("cannot expand a finished candidate")
        logp = np.asarray(direct.next_distribution((BOS, *cand.tokens), source), dtype=float)
        order = np.lexsort((np.arange(logp.shape[0]), -logp))
        taken = 0
        for i in order:
            if taken == params.k2:
                break
            if i == vocab.bos or logp[i] <= sentinel / 2:
                continue
            tok = vocab.tokens[i]
            tokens = (*cand.tokens, tok)
            done = tok == EOS or len(tokens) >= params.max_len
            out.append(Candidate(tokens, cand.direct_lp + float(logp[i]), finished=done))
            taken += 1
    return out


def prune(candidates: Iterable[Candidate], width: int, score: Callable[[Candidate], float]) -> list[Candidate]:
    return sorted(candidates, key=lambda c: c.rank_key(score(c)))[:width]


class _Rescorer:
    """Adds channel/LM scores to candidates, memoized per token tuple."""

    def __init__(self, channel: SequenceScorer, lm: SequenceScorer, source: Sequence[str], params: DecodingParams):
        self.channel = channel
        self.lm = lm
        self.source = list(source)
        self.src_seq = [BOS, *source, EOS]
        self.src_len = max(1, len(source))
        self.params = params
        self._cache: dict[tuple[str, ...], tuple[float, float]] = {}

    def parts(self, tokens: tuple[str, ...]) -> tuple[float, float]:
        hit = self._cache.get(tokens)
        if hit is None:
            words = list(tokens[:-1]) if tokens and tokens[-1] == EOS else list(tokens)
            ch = sequence_log_prob(self.channel, self.src_seq, words)
            lm = prefix_log_prob(self.lm, tokens)
            hit = self._cache[tokens] = (ch, lm)
        return hit

    def __call__(self, cand: Candidate) -> Candidate:
        ch, lm = self.parts(cand.tokens)
        total = combined_score(cand.direct_lp, ch, lm, self.src_len, cand.length, self.params)
        return replace(cand, channel_lp=ch, lm_lp=lm, combined=total)


@dataclass
class DecodeResult:
    best: list[str]
    candidates: list[Candidate] = field(default_factory=list)


def _check_vocab(*scorers: SequenceScorer) -> None:
    vocab = scorers[0].vocab
    if any(s.vocab != vocab for s in scorers[1:]):
        raise DecodingConfigError("direct, channel and language model must share one vocabulary")
    if len(vocab) <= 2:
        raise DecodingConfigError("vocabulary has no tokens besides BOS/EOS")


def _search(
    direct: SequenceScorer,
    source: Sequence[str],
    params: DecodingParams,
    rescore: Callable[[Candidate], Candidate] | None,
    score: Callable[[Candidate], float],
) -> list[Candidate]:
    for tok in source:
        direct.vocab.id(tok)
    active = [Candidate()]
    finished: list[Candidate] = []
    while active:
        expanded = beam_expand(active, direct, source, params)
        if rescore is not None:
            expanded = [rescore(c) for c in expanded]
        active = []
        for cand in prune(expanded, params.beam - len(finished), score):
            (finished if cand.finished else active).append(cand)
    return finished


def noisy_channel_decode(
    direct: SequenceScorer,
    channel: SequenceScorer,
    lm: SequenceScorer,
    source: Sequence[str],
    params: DecodingParams,
) -> DecodeResult:
    """Decode ``source`` with beam search reranked by channel and LM scores.

    ``channel`` should already be restricted to its output vocabulary (see
    :func:`wmtkit.scorers.restrict_output_vocab`).
    """
    _check_vocab(direct, channel, lm)
    rescorer = _Rescorer(channel, lm, source, params)

    def by_combined(c: Candidate) -> float:
        assert c.combined is not None
        return c.combined

    if params.rescore == "online":
        pool = _search(direct, source, params, rescorer, by_combined)
    else:
        pool = [rescorer(c) for c in _search(direct, source, params, None, lambda c: direct_score(c, params))]
    pool.sort(key=lambda c: c.rank_key(by_combined(c)))
    return DecodeResult(pool[0].words, pool)


def direct_beam_search(direct: SequenceScorer, source: Sequence[str], params: DecodingParams) -> DecodeResult:
    """Plain beam search ranked by the length-normalized direct score."""
    _check_vocab(direct)
    pool = _search(direct, source, params, None, lambda c: direct_score(c, params))
    pool.sort(key=lambda c: c.rank_key(direct_score(c, params)))
    return DecodeResult(pool[0].words, pool)


_decode_state: tuple | None = None


def _init_decode(direct, channel, lm, params, direct_only) -> None:
    global _decode_state
    _decode_state = (direct, channel, lm, params, direct_only)


def _decode_with(state: tuple, source: list[str]) -> DecodeResult:
    direct, channel, lm, params, direct_only = state
    if direct_only:
        return direct_beam_search(direct, source, params)
    return noisy_channel_decode(direct, channel, lm, source, params)


def _decode_one(source: list[str]) -> DecodeResult:
    assert _decode_state is not None
    return _decode_with(_decode_state, source)


def decode_corpus(
    sources: Iterable[Sequence[str]],
    direct: SequenceScorer,
    channel: SequenceScorer | None,
    lm: SequenceScorer | None,
    params: DecodingParams,
    *,
    direct_only: bool = False,
    jobs: int = 1,
) -> list[DecodeResult]:
    """Decode many sentences; results are in input order for any ``jobs``."""
    if not direct_only and (channel is None or lm is None):
        raise DecodingConfigError("noisy-channel decoding needs a channel model and a language model")
    sources = [list(s) for s in sources]
    state = (direct, channel, lm, params, direct_only)
    if jobs <= 1:
        return [_decode_with(state, s) for s in sources]
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_decode, initargs=state) as pool:
        return list(pool.map(_decode_one, sources, chunksize=8))


def restrict_channel(
    channel: SequenceScorer, params: DecodingParams, frequencies: Mapping[str, int] | None = None
) -> SequenceScorer:
    """Apply ``params.cm_top_k`` to the channel model's output vocabulary."""
    return restrict_output_vocab(channel, params.cm_top_k, frequencies or {})
