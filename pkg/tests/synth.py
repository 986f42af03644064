"""Synthetic bitext with injected rule violations, plus an oracle.

The oracle re-derives every rule from its plain-language definition
(division instead of cross-multiplication, a hand-written number scanner,
explicit loops) so it shares no code with ``wmtkit.filters`` beyond the
tokenizer and the pluggable providers.
"""

from __future__ import annotations

import math
import random
import unicodedata
from collections import Counter

import numpy as np
import regex

from wmtkit.corpus import SentencePair
from wmtkit.filters import FilterConfig, Lang
from wmtkit.tokenizer import tokenize

EN = "the cat house we see water green small road tree book light river stone".split()
HE = "את החתול הבית אנחנו רואים מים ירוק קטן כביש עץ ספר אור נהר אבן".split()
RU = "кот дом вода зеленый дорога дерево книга".split()

_HEBREW = regex.compile(r"\p{Hebrew}")


class MarkerEmbedder:
    """Toy 2-d embedder: Hebrew text leans away from Latin text by a fixed angle.

    Each ``~`` adds to the second coordinate, so a pair's similarity can be
    pushed out of range deliberately. Empty text embeds to the zero vector.
    """

    def embed(self, sentence: str) -> np.ndarray:
        if not sentence:
            return np.zeros(2)
        lean = 0.75 if _HEBREW.search(sentence) else 0.0
        return np.array([1.0, lean + sentence.count("~")])


def _words(rng: random.Random, pool: list[str], n: int) -> list[str]:
    return [rng.choice(pool) for _ in range(n)]


def make_pair(i: int, rng: random.Random) -> SentencePair:
    n = rng.randint(3, 10)
    src = _words(rng, EN, n)
    tgt = _words(rng, HE, max(1, n + rng.randint(-2, 2)))
    if rng.random() < 0.2:
        num = str(rng.choice([7, 12, 1987, 3.5, 1000]))
        src.append(num)
        tgt.insert(0, num)
    kind = rng.randrange(14)
    if kind == 0:  # length
        src += _words(rng, EN, 30)
    elif kind == 1:  # token_length
        tgt.append("א" * rng.randint(41, 45))
    elif kind == 2:  # char_token_ratio
        src = ["a" * 30, "b" * 25]
    elif kind == 3:  # pair_token_ratio
        tgt = tgt[:1]
        src = _words(rng, EN, rng.randint(5, 9))
    elif kind == 4:  # pair_length_ratio
        src, tgt = ["a", "b"], ["אאאאאאאאאאאא", "בבבבבבבבבבבב"]
    elif kind == 5:  # numeric
        src.append(str(rng.randint(1, 50)))
        tgt.append(str(rng.randint(51, 99)))
    elif kind == 6:  # language
        src = _words(rng, RU, n)
    elif kind == 7:  # entity
        src += ["London", "Bridge"]
        tgt += ["Paris"]
    elif kind == 8:  # embedding: copied source
        tgt = list(src)
    elif kind == 9:  # embedding: pushed apart
        tgt += ["~", "~", "~"]
    elif kind == 10:  # empty side
        tgt = []
    return SentencePair(i, " ".join(src), " ".join(tgt))


def make_corpus(n: int, seed: int = 0) -> list[SentencePair]:
    rng = random.Random(seed)
    return [make_pair(i, rng) for i in range(n)]


# --------------------------------------------------------------------------
# Oracle
# --------------------------------------------------------------------------


def _numbers(text: str) -> Counter:
    digits = [str(unicodedata.digit(c)) if c.isdigit() else c for c in text]
    out: Counter = Counter()
    i = 0
    while i < len(digits):
        if not digits[i].isdigit():
            i += 1
            continue
        groups, seps = [""], []
        while i < len(digits):
            c = digits[i]
            if c.isdigit():
                groups[-1] += c
                i += 1
            elif c in ".," and i + 1 < len(digits) and digits[i + 1].isdigit():
                seps.append(c)
                groups.append("")
                i += 1
            else:
                break
        merged = [groups[0]]
        for sep, g in zip(seps, groups[1:]):
            if sep == "," and len(g) == 3:
                merged[-1] = merged[-1] + g
            else:
                merged.append(g)
        while len(merged) > 1 and merged[-1].rstrip("0") != merged[-1]:
            merged[-1] = merged[-1][:-1]
        if len(merged) > 1 and merged[-1] == "":
            merged.pop()
        out[".".join(merged)] += 1
    return out


def rule_keeps(rule: str, pair: SentencePair, cfg: FilterConfig, tagger, recognizer, embedder) -> bool:
    s, t = pair.source, pair.target
    ts, tt = tokenize(s), tokenize(t)
    if rule == "language":
        for toks in (ts, tt):
            tags = [tagger.classify(x) for x in toks]
            counted = [g for g in tags if g is not Lang.NEUTRAL]
            if counted and sum(g is Lang.OTHER for g in counted) / len(counted) > cfg.max_foreign_token_fraction:
                return False
        return True
    if rule == "entity":
        norm = lambda xs: Counter(unicodedata.normalize("NFKC", x).casefold() for x in xs)  # noqa: E731
        es, et = norm(recognizer.extract(s)), norm(recognizer.extract(t))
        if getattr(recognizer, "one_sided", False) and (not es or not et):
            return True
        return es == et
    if rule == "numeric":
        return _numbers(s) == _numbers(t)
    if rule == "length":
        return len(s) <= cfg.max_chars and len(t) <= cfg.max_chars
    if rule == "token_length":
        return all(len(x) <= cfg.max_token_chars for x in ts + tt)
    if rule == "char_token_ratio":
        return bool(ts) and bool(tt) and len(s) / len(ts) <= cfg.max_char_token_ratio and len(t) / len(tt) <= cfg.max_char_token_ratio
    if rule in ("pair_token_ratio", "pair_length_ratio"):
        a, b = (len(ts), len(tt)) if rule == "pair_token_ratio" else (len(s), len(t))
        limit = cfg.max_pair_token_ratio if rule == "pair_token_ratio" else cfg.max_pair_length_ratio
        if a == 0 and b == 0:
            return True
        if min(a, b) == 0:
            return False
        return max(a, b) / min(a, b) <= limit
    if rule == "embedding":
        u, v = np.asarray(embedder.embed(s), float), np.asarray(embedder.embed(t), float)
        nu, nv = math.sqrt(sum(x * x for x in u)), math.sqrt(sum(x * x for x in v))
        if nu == 0 or nv == 0:
            return False
        sim = sum(x * y for x, y in zip(u, v)) / (nu * nv)
        return cfg.embed_min <= sim <= cfg.embed_max
    raise ValueError(rule)


def oracle_verdict(pair: SentencePair, cfg: FilterConfig, tagger, recognizer, embedder) -> str:
    """Name of the first failing rule, or ``all_passed``."""
    for rule in cfg.enabled_rules:
        if not rule_keeps(rule, pair, cfg, tagger, recognizer, embedder):
            return rule
    return "all_passed"


def sequential_kept_ids(pairs, cfg: FilterConfig, tagger, recognizer, embedder) -> set[int]:
    """Apply one rule at a time to the shrinking corpus."""
    survivors = list(pairs)
    for rule in cfg.enabled_rules:
        survivors = [p for p in survivors if rule_keeps(rule, p, cfg, tagger, recognizer, embedder)]
    return {p.id for p in survivors}
