"""Conditional next-token models behind one interface.

The direct model P(y|x), the channel model P(x|y) and the target language
model P(y) are all :class:`SequenceScorer` objects: given a context (which
starts with BOS) and an optional conditioning sequence, they return a
log-probability vector over a shared :class:`Vocabulary`.

:class:`TableScorer` is a file-backed model made of explicit probability
rows. Lookup for ``(condition, context)`` tries, in order, the exact
condition with ever shorter context suffixes, then the wildcard condition
``*`` with ever shorter suffixes, then the ``default`` row. An empty suffix
row matches any context.

Table file grammar (UTF-8, one record per line, lines starting with ``#``
are comments)::

    vocab <s> </s> tok1 tok2 ...
    row <condition tokens | *> ||| <context suffix tokens> ||| tok:prob tok:prob ...
    default ||| tok:prob ...

Tokens missing from a row get probability zero. Each row must sum to 1
within 1e-9.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

import numpy as np

BOS = "<s>"
EOS = "</s>"
NEG_SENTINEL = -1e9
ROW_TOLERANCE = 1e-9

Tokens = Sequence[str]
RowKey = tuple[tuple[str, ...] | None, tuple[str, ...]]


class Vocabulary:
    """Ordered, index-stable token inventory holding BOS and EOS exactly once."""

    def __init__(self, tokens: Iterable[str]) -> None:
        self.tokens: tuple[str, ...] = tuple(tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("vocabulary tokens must be distinct")
        for special in (BOS, EOS):
            if special not in self.index:
                raise ValueError(f"vocabulary is missing {special}")
        self.bos = self.index[BOS]
        self.eos = self.index[EOS]

    @classmethod
    def build(cls, tokens: Iterable[str]) -> Vocabulary:
        """BOS, EOS, then the distinct ``tokens`` in first-seen order."""
        seen = dict.fromkeys([BOS, EOS])
        seen.update(dict.fromkeys(tokens))
        return cls(seen)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: object) -> bool:
        return token in self.index

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Vocabulary) and self.tokens == other.tokens

    def __hash__(self) -> int:
        return hash(self.tokens)

    def id(self, token: str) -> int:
        try:
            return self.index[token]
        except KeyError:
            raise KeyError(f"token {token!r} is not in the vocabulary") from None


class SequenceScorer(Protocol):
    vocab: Vocabulary

    def next_distribution(self, context: Tokens, condition: Tokens | None = None) -> np.ndarray:
        """Log-probabilities of the next token after ``context`` (which starts with BOS)."""
        ...


def log_normalize(logits: np.ndarray, sentinel: float = NEG_SENTINEL) -> np.ndarray:
    """Log-softmax that maps zero-probability entries to ``sentinel``."""
    live = logits > sentinel / 2
    out = np.full(logits.shape, sentinel, dtype=float)
    if not live.any():
        raise ValueError("distribution has no support")
    x = logits[live]
    m = x.max()
    out[live] = x - (m + math.log(np.exp(x - m).sum()))
    return out


def probs_to_logprobs(probs: np.ndarray, sentinel: float = NEG_SENTINEL) -> np.ndarray:
    out = np.full(probs.shape, sentinel, dtype=float)
    pos = probs > 0
    out[pos] = np.log(probs[pos])
    return out


class TableScorer:
    """A conditional model given by explicit probability rows."""

    def __init__(
        self,
        vocab: Vocabulary,
        rows: Mapping[RowKey, Mapping[str, float]],
        default: Mapping[str, float] | None = None,
        *,
        sentinel: float = NEG_SENTINEL,
    ) -> None:
        self.vocab = vocab
        self.sentinel = sentinel
        self._rows: dict[RowKey, np.ndarray] = {}
        for (cond, ctx), row in rows.items():
            key = (tuple(cond) if cond is not None else None, tuple(ctx))
            self._rows[key] = self._make_row(row, key)
        self._default = self._make_row(default, "default") if default is not None else None
        self._max_suffix = max((len(ctx) for _, ctx in self._rows), default=0)

    def _make_row(self, row: Mapping[str, float], where: object) -> np.ndarray:
        probs = np.zeros(len(self.vocab))
        for tok, p in row.items():
            if p < 0:
                raise ValueError(f"row {where}: negative probability for {tok!r}")
            probs[self.vocab.id(tok)] += p
        total = probs.sum()
        if abs(total - 1.0) > ROW_TOLERANCE:
            raise ValueError(f"row {where} sums to {total!r}, expected 1")
        logp = probs_to_logprobs(probs, self.sentinel)
        logp.setflags(write=False)
        return logp

    def next_distribution(self, context: Tokens, condition: Tokens | None = None) -> np.ndarray:
        ctx = tuple(context)
        conds: list[tuple[str, ...] | None] = [None]
        if condition is not None:
            conds.insert(0, tuple(condition))
        for cond in conds:
            for n in range(min(len(ctx), self._max_suffix), -1, -1):
                row = self._rows.get((cond, ctx[len(ctx) - n :]))
                if row is not None:
                    return row
        if self._default is None:
            raise KeyError(f"no row for condition={condition!r} context={list(ctx)!r} and no default")
        return self._default

    # ---------------------------------------------------------------- file IO

    @classmethod
    def load(cls, path: str | Path, *, sentinel: float = NEG_SENTINEL) -> TableScorer:
        vocab: Vocabulary | None = None
        rows: dict[RowKey, dict[str, float]] = {}
        default: dict[str, float] | None = None
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                where = f"{path}:{lineno}"
                kind, _, rest = line.partition(" ")
                if kind == "vocab":
                    vocab = Vocabulary(rest.split())
                    continue
                if vocab is None:
                    raise ValueError(f"{where}: 'vocab' must come first")
                fields = [f.strip() for f in rest.split("|||")]
                if kind == "row" and len(fields) == 3:
                    cond_s, ctx_s, dist_s = fields
                    cond = None if cond_s == "*" else tuple(cond_s.split())
                    key = (cond, tuple(ctx_s.split()))
                    if key in rows:
                        raise ValueError(f"{where}: duplicate row {key}")
                    rows[key] = _parse_dist(dist_s, where)
                elif kind == "default" and len(fields) == 2 and fields[0] == "":
                    default = _parse_dist(fields[1], where)
                else:
                    raise ValueError(f"{where}: cannot parse {raw.strip()!r}")
        if vocab is None:
            raise ValueError(f"{path}: no vocab line")
        try:
            return cls(vocab, rows, default, sentinel=sentinel)
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}: {exc}") from None

    def dump(self, path: str | Path) -> None:
        def fmt(logp: np.ndarray) -> str:
            return " ".join(
                f"{tok}:{math.exp(lp)!r}" for tok, lp in zip(self.vocab.tokens, logp) if lp > self.sentinel / 2
            )

        with open(path, "w", encoding="utf-8") as fh:
            fh.write("vocab " + " ".join(self.vocab.tokens) + "\n")
            for (cond, ctx), logp in self._rows.items():
                cond_s = "*" if cond is None else " ".join(cond)
                fh.write(f"row {cond_s} ||| {' '.join(ctx)} ||| {fmt(logp)}\n")
            if self._default is not None:
                fh.write(f"default ||| {fmt(self._default)}\n")


def _parse_dist(text: str, where: str) -> dict[str, float]:
    dist: dict[str, float] = {}
    for item in text.split():
        tok, sep, p = item.rpartition(":")
        if not sep or not tok:
            raise ValueError(f"{where}: expected token:prob, got {item!r}")
        try:
            dist[tok] = dist.get(tok, 0.0) + float(p)
        except ValueError:
            raise ValueError(f"{where}: bad probability in {item!r}") from None
    return dist


class UniformScorer:
    """Every token (except BOS) equally likely, regardless of input."""

    def __init__(self, vocab: Vocabulary) -> None:
        self.vocab = vocab
        probs = np.ones(len(vocab))
        probs[vocab.bos] = 0.0
        self._row = probs_to_logprobs(probs / probs.sum())
        self._row.setflags(write=False)

    def next_distribution(self, context: Tokens, condition: Tokens | None = None) -> np.ndarray:
        return self._row


class RestrictedScorer:
    """Wraps a scorer so only a fixed token subset can be emitted.

    The kept tokens' probabilities are renormalized; every other token gets
    the sentinel log-probability.
    """

    def __init__(self, base: SequenceScorer, allowed: Iterable[int], *, sentinel: float = NEG_SENTINEL) -> None:
        self.base = base
        self.vocab = base.vocab
        self.sentinel = sentinel
        mask = np.zeros(len(self.vocab), dtype=bool)
        mask[list(allowed)] = True
        self.mask = mask

    def next_distribution(self, context: Tokens, condition: Tokens | None = None) -> np.ndarray:
        logp = np.where(self.mask, self.base.next_distribution(context, condition), self.sentinel)
        return log_normalize(logp, self.sentinel)


def restrict_output_vocab(
    scorer: SequenceScorer, top_k: int, frequency_table: Mapping[str, int], *, sentinel: float = NEG_SENTINEL
) -> SequenceScorer:
    """Limit ``scorer`` to its ``top_k`` most frequent tokens plus BOS/EOS.

    Frequency ties are broken by vocabulary index. Tokens missing from
    ``frequency_table`` count as zero.
    """
    if top_k < 1:
        raise ValueError("top_k must be at least 1")
    vocab = scorer.vocab
    specials = {vocab.bos, vocab.eos}
    regular = [i for i in range(len(vocab)) if i not in specials]
    if top_k >= len(regular):
        return scorer
    ranked = sorted(regular, key=lambda i: (-frequency_table.get(vocab.tokens[i], 0), i))
    return RestrictedScorer(scorer, specials.union(ranked[:top_k]), sentinel=sentinel)


def _ids(vocab: Vocabulary, tokens: Tokens) -> list[int]:
    return [vocab.id(t) for t in tokens]


def sequence_log_prob(scorer: SequenceScorer, sequence: Tokens, condition: Tokens | None = None) -> float:
    """Chain-rule log-probability of ``sequence`` (BOS ... EOS) under ``scorer``."""
    if len(sequence) < 2 or sequence[0] != BOS or sequence[-1] != EOS:
        raise ValueError("sequence must start with BOS and end with EOS")
    return prefix_log_prob(scorer, sequence[1:], condition)


def prefix_log_prob(scorer: SequenceScorer, tokens: Tokens, condition: Tokens | None = None) -> float:
    """Log-probability of emitting ``tokens`` after BOS (EOS not required)."""
    ids = _ids(scorer.vocab, tokens)
    context: list[str] = [BOS]
    total = 0.0
    for tok, i in zip(tokens, ids):
        total += float(scorer.next_distribution(context, condition)[i])
        context.append(tok)
    return total
