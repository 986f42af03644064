"""Parallel-corpus filters and the order-preserving filtering pipeline.

Three families of rules run in a fixed default order:

* heuristic: ``language``, ``entity``, ``numeric``
* ratio: ``length``, ``token_length``, ``char_token_ratio``,
  ``pair_token_ratio``, ``pair_length_ratio``
* ``embedding``

Every threshold removes on a strict ``>``; the embedding similarity window
is inclusive on both ends. A pair is kept iff every enabled rule keeps it,
and its verdict names the first rule (in ``enabled_rules`` order) that
removed it.
"""

from __future__ import annotations

import enum
import hashlib
import math
import unicodedata
from collections import Counter, deque
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import islice
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple, Protocol, Sequence

import numpy as np
import regex

from wmtkit.corpus import CorpusStats, Decision, FilterVerdict, SentencePair, compute_stats
from wmtkit.tokenizer import char_count, tokenize

HEURISTIC_RULES = ("language", "entity", "numeric")
RATIO_RULES = ("length", "token_length", "char_token_ratio", "pair_token_ratio", "pair_length_ratio")
ALL_RULES = HEURISTIC_RULES + RATIO_RULES + ("embedding",)
PROVIDER_ERROR = "provider_error"


@dataclass(frozen=True)
class FilterConfig:
    max_chars: int = 140
    max_token_chars: int = 40
    max_char_token_ratio: float = 12.0
    max_pair_token_ratio: float = 4.0
    max_pair_length_ratio: float = 6.0
    max_foreign_token_fraction: float = 0.30
    embed_min: float = 0.7
    embed_max: float = 0.96
    enabled_rules: tuple[str, ...] = ALL_RULES

    def __post_init__(self) -> None:
        object.__setattr__(self, "enabled_rules", tuple(self.enabled_rules))
        for name in ("max_chars", "max_token_chars", "max_char_token_ratio",
                     "max_pair_token_ratio", "max_pair_length_ratio"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive, got {getattr(self, name)}")
        if not 0.0 <= self.max_foreign_token_fraction <= 1.0:
            raise ValueError("max_foreign_token_fraction must lie in [0, 1]")
        if not self.embed_min < self.embed_max:
            raise ValueError(f"embed_min ({self.embed_min}) must be below embed_max ({self.embed_max})")
        unknown = [r for r in self.enabled_rules if r not in ALL_RULES]
        if unknown:
            raise ValueError(f"unknown rule(s) {unknown}; known rules: {list(ALL_RULES)}")
        if len(set(self.enabled_rules)) != len(self.enabled_rules):
            raise ValueError("enabled_rules lists a rule twice")


class Check(NamedTuple):
    """Outcome of one rule on one pair. ``detail`` is set when removing."""

    keep: bool
    detail: str = ""

    @property
    def decision(self) -> Decision:
        return Decision.KEEP if self.keep else Decision.REMOVE


KEEP = Check(True)


# --------------------------------------------------------------------------
# Providers
# --------------------------------------------------------------------------


class Lang(enum.Enum):
    LANG_A = "a"
    LANG_B = "b"
    OTHER = "other"
    # tokens without letters (digits, punctuation); ignored by the language rule
    NEUTRAL = "neutral"


class LanguageTagger(Protocol):
    def classify(self, token: str) -> Lang: ...


class EntityRecognizer(Protocol):
    def extract(self, sentence: str) -> Iterable[str]: ...


class SentenceEmbedder(Protocol):
    def embed(self, sentence: str) -> np.ndarray: ...


class ScriptTagger:
    """Classify a token by the Unicode script of the majority of its letters."""

    def __init__(self, script_a: str = "Latin", script_b: str = "Hebrew") -> None:
        self.script_a = script_a
        self.script_b = script_b
        self._letters = regex.compile(r"\p{L}")
        self._a = regex.compile(rf"\p{{Script={script_a}}}")
        self._b = regex.compile(rf"\p{{Script={script_b}}}")

    def __getstate__(self) -> dict:
        return {"script_a": self.script_a, "script_b": self.script_b}

    def __setstate__(self, state: dict) -> None:
        self.__init__(state["script_a"], state["script_b"])  # type: ignore[misc]

    def classify(self, token: str) -> Lang:
        letters = self._letters.findall(token)
        if not letters:
            return Lang.NEUTRAL
        n_a = sum(1 for ch in letters if self._a.match(ch))
        if 2 * n_a > len(letters):
            return Lang.LANG_A
        n_b = sum(1 for ch in letters if self._b.match(ch))
        if 2 * n_b > len(letters):
            return Lang.LANG_B
        return Lang.OTHER


_LATIN_UPPER = regex.compile(r"^\p{Lu}")
_LATIN = regex.compile(r"^\p{Script=Latin}")


class CapitalizedEntityRecognizer:
    """Extract runs of capitalized Latin-script tokens as entities.

    A lone capitalized token at the start of a sentence is skipped since it
    is usually just sentence case. Non-Latin text yields nothing, so this
    recognizer is ``one_sided``: the entity rule only compares two sides
    when both produced entities.
    """

    one_sided = True

    def extract(self, sentence: str) -> list[str]:
        tokens = tokenize(sentence)
        entities: list[str] = []
        run: list[str] = []
        run_start = 0
        for i, tok in enumerate(tokens + [""]):
            if tok and _LATIN_UPPER.match(tok) and _LATIN.match(tok):
                if not run:
                    run_start = i
                run.append(tok)
                continue
            if run and not (run_start == 0 and len(run) == 1):
                entities.append(" ".join(run))
            run = []
        return entities


class HashingEmbedder:
    """Character n-gram feature hashing into a fixed-dimension vector.

    Uses keyed BLAKE2 so vectors are identical across processes and
    platforms (Python's builtin ``hash`` is salted per process).
    """

    def __init__(self, dim: int = 256, n: int = 3, seed: int = 0) -> None:
        if dim < 1 or n < 1:
            raise ValueError("dim and n must be positive")
        self.dim = dim
        self.n = n
        self.seed = seed
        self._key = seed.to_bytes(8, "little", signed=True)

    def embed(self, sentence: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        text = f" {sentence.casefold()} "
        if not sentence:
            return vec
        for i in range(max(1, len(text) - self.n + 1)):
            gram = text[i : i + self.n].encode("utf-8")
            h = int.from_bytes(hashlib.blake2b(gram, digest_size=8, key=self._key).digest(), "little")
            vec[h % self.dim] += 1.0 if (h >> 63) & 1 else -1.0
        return vec


class PrecomputedEmbedder:
    """Look up vectors computed offline, keyed by sentence text."""

    def __init__(self, vectors: dict[str, np.ndarray]) -> None:
        dims = {v.shape[0] for v in vectors.values()}
        if len(dims) > 1:
            raise ValueError(f"precomputed vectors have mixed dimensions {sorted(dims)}")
        self.vectors = vectors

    @classmethod
    def from_files(cls, *pairs: tuple[str | Path, str | Path]) -> PrecomputedEmbedder:
        """Build from (text file, vector file) pairs aligned by line number."""
        from wmtkit.corpus import read_lines

        vectors: dict[str, np.ndarray] = {}
        for text_path, vec_path in pairs:
            texts = read_lines(text_path)
            rows = read_lines(vec_path)
            if len(texts) != len(rows):
                raise ValueError(
                    f"{vec_path} has {len(rows)} vectors but {text_path} has {len(texts)} lines"
                )
            for text, row in zip(texts, rows):
                vectors[text] = np.array([float(x) for x in row.split()])
        return cls(vectors)

    def embed(self, sentence: str) -> np.ndarray:
        try:
            return self.vectors[sentence]
        except KeyError:
            raise KeyError(f"no precomputed embedding for {sentence[:40]!r}") from None


@dataclass
class Providers:
    tagger: LanguageTagger = field(default_factory=ScriptTagger)
    recognizer: EntityRecognizer = field(default_factory=CapitalizedEntityRecognizer)
    embedder: SentenceEmbedder = field(default_factory=HashingEmbedder)


# --------------------------------------------------------------------------
# Rules. Each public rule takes a pair; the ``_check_*`` helpers take
# pre-tokenized sides so the pipeline tokenizes each sentence once.
# --------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(x) if isinstance(x, float) else str(x)


def _foreign_fraction(tokens: Sequence[str], tagger: LanguageTagger) -> float:
    other = counted = 0
    for tok in tokens:
        tag = tagger.classify(tok)
        if tag is Lang.NEUTRAL:
            continue
        counted += 1
        if tag is Lang.OTHER:
            other += 1
    return other / counted if counted else 0.0


def _check_language(src: Sequence[str], tgt: Sequence[str], tagger: LanguageTagger, max_fraction: float) -> Check:
    for side, tokens in (("source", src), ("target", tgt)):
        frac = _foreign_fraction(tokens, tagger)
        if frac > max_fraction:
            return Check(False, f"side={side} value={_fmt(frac)} limit={_fmt(max_fraction)}")
    return KEEP


def language_filter(pair: SentencePair, tagger: LanguageTagger, max_fraction: float = 0.30) -> Check:
    """Remove if either side has more than ``max_fraction`` foreign tokens."""
    if not 0.0 <= max_fraction <= 1.0:
        raise ValueError("max_fraction must lie in [0, 1]")
    return _check_language(tokenize(pair.source), tokenize(pair.target), tagger, max_fraction)


def _normalize_entity(entity: str) -> str:
    return unicodedata.normalize("NFKC", entity).casefold()


def entity_filter(pair: SentencePair, rec: EntityRecognizer, *, one_sided: bool | None = None) -> Check:
    """Remove if the two sides' normalized entity multisets differ.

    Pairs with no entities on either side are kept. With ``one_sided`` (the
    default for recognizers that declare it) a side without entities is not
    compared at all.
    """
    if one_sided is None:
        one_sided = bool(getattr(rec, "one_sided", False))
    src = Counter(_normalize_entity(e) for e in rec.extract(pair.source))
    tgt = Counter(_normalize_entity(e) for e in rec.extract(pair.target))
    if one_sided and (not src or not tgt):
        return KEEP
    if src != tgt:
        return Check(False, f"source={sorted(src.elements())} target={sorted(tgt.elements())}")
    return KEEP


_NUMBER_RE = regex.compile(r"\d+(?:[.,]\d+)*")


def _canonical_number(raw: str) -> str:
    """Canonical form of a digit run with inner ``.``/``,`` separators.

    A comma followed by exactly three digits groups thousands and is
    dropped; every other separator is a decimal mark written as ``.``.
    Trailing zeros of the last fractional group are stripped, so "1,000",
    "1000" and "1000.0" compare equal while "1,5" equals "1.5".
    """
    digits = "".join(str(unicodedata.digit(ch)) if ch.isdigit() else ch for ch in raw)
    parts = regex.split(r"[.,]", digits)
    seps = regex.findall(r"[.,]", digits)
    groups = [parts[0]]
    for sep, part in zip(seps, parts[1:]):
        if sep == "," and len(part) == 3:
            groups[-1] += part
        else:
            groups.append(part)
    if len(groups) > 1:
        groups[-1] = groups[-1].rstrip("0")
        if not groups[-1]:
            groups.pop()
    return ".".join(groups)


def extract_numbers(text: str) -> Counter[str]:
    return Counter(_canonical_number(m) for m in _NUMBER_RE.findall(text))


def numeric_filter(pair: SentencePair) -> Check:
    """Remove if the numbers on the two sides do not match as multisets."""
    src = extract_numbers(pair.source)
    tgt = extract_numbers(pair.target)
    if src != tgt:
        return Check(False, f"source={sorted(src.elements())} target={sorted(tgt.elements())}")
    return KEEP


def _check_length(src_chars: int, tgt_chars: int, max_chars: int) -> Check:
    for side, n in (("source", src_chars), ("target", tgt_chars)):
        if n > max_chars:
            return Check(False, f"side={side} value={n} limit={max_chars}")
    return KEEP


def length_filter(pair: SentencePair, max_chars: int = 140) -> Check:
    return _check_length(char_count(pair.source), char_count(pair.target), max_chars)


def _check_token_length(src: Sequence[str], tgt: Sequence[str], max_token_chars: int) -> Check:
    for side, tokens in (("source", src), ("target", tgt)):
        longest = max(map(len, tokens), default=0)
        if longest > max_token_chars:
            return Check(False, f"side={side} value={longest} limit={max_token_chars}")
    return KEEP


def token_length_filter(pair: SentencePair, max_token_chars: int = 40) -> Check:
    return _check_token_length(tokenize(pair.source), tokenize(pair.target), max_token_chars)


def _check_char_token_ratio(src_chars: int, n_src: int, tgt_chars: int, n_tgt: int, max_ratio: float) -> Check:
    for side, chars, n in (("source", src_chars, n_src), ("target", tgt_chars, n_tgt)):
        if n == 0:
            return Check(False, f"side={side} value=inf limit={_fmt(max_ratio)} tokens=0")
        if chars > max_ratio * n:
            return Check(False, f"side={side} value={_fmt(chars / n)} limit={_fmt(max_ratio)}")
    return KEEP


def char_token_ratio_filter(pair: SentencePair, max_ratio: float = 12.0) -> Check:
    """Remove if chars/tokens exceeds ``max_ratio`` on a side; zero-token sides are removed."""
    return _check_char_token_ratio(
        char_count(pair.source), len(tokenize(pair.source)),
        char_count(pair.target), len(tokenize(pair.target)),
        max_ratio,
    )


def _check_symmetric_ratio(a: int, b: int, max_ratio: float) -> Check:
    hi, lo = max(a, b), min(a, b)
    if hi == 0:
        return KEEP
    if lo == 0:
        return Check(False, f"value=inf limit={_fmt(max_ratio)} source={a} target={b}")
    if hi > max_ratio * lo:
        return Check(False, f"value={_fmt(hi / lo)} limit={_fmt(max_ratio)} source={a} target={b}")
    return KEEP


def pair_token_ratio_filter(pair: SentencePair, max_ratio: float = 4.0) -> Check:
    """Symmetric max/min token-count ratio between the two sides."""
    return _check_symmetric_ratio(len(tokenize(pair.source)), len(tokenize(pair.target)), max_ratio)


def pair_length_ratio_filter(pair: SentencePair, max_ratio: float = 6.0) -> Check:
    """Symmetric max/min character-count ratio between the two sides."""
    return _check_symmetric_ratio(char_count(pair.source), char_count(pair.target), max_ratio)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise ValueError(f"embedding dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValueError("embedding contains NaN")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return math.nan
    return float(np.dot(a, b)) / (na * nb)


def embedding_filter(pair: SentencePair, embedder: SentenceEmbedder, lo: float = 0.7, hi: float = 0.96) -> Check:
    """Keep iff ``lo <= cosine(embed(source), embed(target)) <= hi``."""
    if not lo < hi:
        raise ValueError("lo must be below hi")
    s = cosine(np.asarray(embedder.embed(pair.source)), np.asarray(embedder.embed(pair.target)))
    if math.isnan(s):
        return Check(False, f"value=nan range=[{_fmt(lo)},{_fmt(hi)}] zero-norm embedding")
    if lo <= s <= hi:
        return KEEP
    return Check(False, f"value={_fmt(s)} range=[{_fmt(lo)},{_fmt(hi)}]")


# --------------------------------------------------------------------------
# Pipeline
# --------------------------------------------------------------------------


class _View:
    """A pair with its measurements, computed once and shared by all rules."""

    __slots__ = ("pair", "src_tokens", "tgt_tokens", "src_chars", "tgt_chars")

    def __init__(self, pair: SentencePair) -> None:
        self.pair = pair
        self.src_tokens = tokenize(pair.source)
        self.tgt_tokens = tokenize(pair.target)
        self.src_chars = len(pair.source)
        self.tgt_chars = len(pair.target)


_RuleFn = Callable[[_View, FilterConfig, Providers], Check]

_RULES: dict[str, _RuleFn] = {
    "language": lambda v, c, p: _check_language(v.src_tokens, v.tgt_tokens, p.tagger, c.max_foreign_token_fraction),
    "entity": lambda v, c, p: entity_filter(v.pair, p.recognizer),
    "numeric": lambda v, c, p: numeric_filter(v.pair),
    "length": lambda v, c, p: _check_length(v.src_chars, v.tgt_chars, c.max_chars),
    "token_length": lambda v, c, p: _check_token_length(v.src_tokens, v.tgt_tokens, c.max_token_chars),
    "char_token_ratio": lambda v, c, p: _check_char_token_ratio(
        v.src_chars, len(v.src_tokens), v.tgt_chars, len(v.tgt_tokens), c.max_char_token_ratio
    ),
    "pair_token_ratio": lambda v, c, p: _check_symmetric_ratio(
        len(v.src_tokens), len(v.tgt_tokens), c.max_pair_token_ratio
    ),
    "pair_length_ratio": lambda v, c, p: _check_symmetric_ratio(v.src_chars, v.tgt_chars, c.max_pair_length_ratio),
    "embedding": lambda v, c, p: embedding_filter(v.pair, p.embedder, c.embed_min, c.embed_max),
}
_PROVIDER_RULES = frozenset({"language", "entity", "embedding"})


def evaluate(pair: SentencePair, config: FilterConfig, providers: Providers | None = None) -> FilterVerdict:
    """Apply the enabled rules in order and return the verdict for one pair."""
    providers = providers or Providers()
    view = _View(pair)
    for rule in config.enabled_rules:
        fn = _RULES[rule]
        if rule in _PROVIDER_RULES:
            try:
                check = fn(view, config, providers)
            except Exception as exc:  # provider failures must not abort the corpus
                detail = f"{rule}: {type(exc).__name__}: {exc}"
                return FilterVerdict(pair.id, Decision.REMOVE, PROVIDER_ERROR, detail)
        else:
            check = fn(view, config, providers)
        if not check.keep:
            return FilterVerdict(pair.id, Decision.REMOVE, rule, check.detail)
    return FilterVerdict.keep(pair.id)


_worker_state: tuple[FilterConfig, Providers] | None = None


def _init_worker(config: FilterConfig, providers: Providers) -> None:
    global _worker_state
    _worker_state = (config, providers)


def _evaluate_chunk(chunk: list[SentencePair]) -> list[FilterVerdict]:
    assert _worker_state is not None
    config, providers = _worker_state
    return [evaluate(p, config, providers) for p in chunk]


def _chunks(pairs: Iterable[SentencePair], size: int) -> Iterator[list[SentencePair]]:
    it = iter(pairs)
    while chunk := list(islice(it, size)):
        yield chunk


def filter_stream(
    pairs: Iterable[SentencePair],
    config: FilterConfig | None = None,
    providers: Providers | None = None,
    *,
    jobs: int = 1,
    chunk_size: int = 1000,
) -> Iterator[tuple[SentencePair, FilterVerdict]]:
    """Yield ``(pair, verdict)`` in input order.

    With ``jobs > 1`` chunks are evaluated in worker processes with a
    bounded number of chunks in flight, and reassembled in order.
    """
    config = config or FilterConfig()
    providers = providers or Providers()
    if jobs <= 1:
        for pair in pairs:
            yield pair, evaluate(pair, config, providers)
        return
    window = 2 * jobs
    executor: Executor
    with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker, initargs=(config, providers)) as executor:
        pending: deque = deque()
        for chunk in _chunks(pairs, chunk_size):
            pending.append((chunk, executor.submit(_evaluate_chunk, chunk)))
            if len(pending) >= window:
                done_chunk, fut = pending.popleft()
                yield from zip(done_chunk, fut.result())
        while pending:
            done_chunk, fut = pending.popleft()
            yield from zip(done_chunk, fut.result())


@dataclass
class PipelineResult:
    kept: list[SentencePair]
    verdicts: list[FilterVerdict]
    before: CorpusStats
    after: CorpusStats

    def removed_by_rule(self) -> Counter[str]:
        return Counter(v.rule for v in self.verdicts if not v.kept)


def run_pipeline(
    pairs: Iterable[SentencePair],
    config: FilterConfig | None = None,
    providers: Providers | None = None,
    *,
    jobs: int = 1,
    chunk_size: int = 1000,
) -> PipelineResult:
    kept: list[SentencePair] = []
    verdicts: list[FilterVerdict] = []
    seen: list[SentencePair] = []
    for pair, verdict in filter_stream(pairs, config, providers, jobs=jobs, chunk_size=chunk_size):
        seen.append(pair)
        verdicts.append(verdict)
        if verdict.kept:
            kept.append(pair)
    return PipelineResult(kept, verdicts, compute_stats(seen), compute_stats(kept))
