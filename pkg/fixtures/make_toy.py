"""Regenerate the toy en->he fixtures in fixtures/toy/.

    python fixtures/make_toy.py

The task is word-for-word: every English word has one Hebrew translation
and one confusable alternative. The direct model sometimes prefers the
alternative; the language model and channel model know the correct output,
so noisy-channel reranking can repair those errors.
"""

from __future__ import annotations

import random
from pathlib import Path

OUT = Path(__file__).resolve().parent / "toy"

LEXICON = {
    "i": "אני", "see": "רואה", "the": "את", "cat": "החתול", "dog": "הכלב",
    "big": "הגדול", "small": "הקטן", "house": "הבית", "we": "אנחנו", "love": "אוהבים",
    "eat": "אוכלים", "fish": "דג", "you": "אתה", "run": "רץ", "now": "עכשיו",
    "here": "כאן", "good": "טוב", "bread": "לחם", "water": "מים", "drink": "שותים",
}
ALTERNATIVE = {
    "החתול": "הכלב", "הכלב": "החתול", "הגדול": "הקטן", "הקטן": "הגדול", "רואה": "רץ",
    "רץ": "רואה", "אוכלים": "שותים", "שותים": "אוכלים", "לחם": "מים", "מים": "לחם",
    "אני": "אתה", "אתה": "אני", "אנחנו": "אני", "אוהבים": "אוכלים", "דג": "לחם",
    "את": "כאן", "הבית": "החתול", "עכשיו": "כאן", "כאן": "עכשיו", "טוב": "הגדול",
}
REVERSE = {he: en for en, he in LEXICON.items()}

SENTENCES = [
    "i see the cat", "i see the dog", "we love the big house", "we eat fish now",
    "you run here", "we drink water now", "i see the small dog", "you eat bread",
    "we love the good cat", "i drink water here", "you see the big dog", "we eat bread here",
    "i love the small house", "you drink water", "we see the cat now", "i eat fish here",
]
DEV = ["i see the big cat", "we eat bread now", "you love the small dog", "we drink water here",
       "i run here now", "you see the good house"]
MONO = ["אני רואה את הכלב", "אנחנו אוכלים לחם", "אתה רץ כאן", "אנחנו שותים מים עכשיו",
        "אני אוהבים את החתול", "אתה רואה את הבית הגדול", "אנחנו רואה את הכלב הקטן",
        "אני אוכלים דג", "אתה שותים מים כאן", "אני רואה ציפור", "אנחנו אוהבים את הבית", "אני רואה את החתול הקטן",
        "אתה אוכלים לחם עכשיו", "אני שותים מים", "אנחנו רואה את הכלב הגדול"]


def translate(sentence: str) -> str:
    return " ".join(LEXICON[w] for w in sentence.split())


def fmt(dist: dict[str, float]) -> str:
    return " ".join(f"{tok}:{p!r}" for tok, p in dist.items())


def vocab_line() -> str:
    words = list(LEXICON) + [he for he in dict.fromkeys(LEXICON.values())]
    return "vocab <s> </s> " + " ".join(words)


def write(name: str, lines: list[str]) -> None:
    (OUT / name).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def direct_table(sentences: list[str], rng: random.Random) -> list[str]:
    """en->he, conditioned on the source, keyed by the full output prefix."""
    lines = ["# toy direct model en->he", vocab_line()]
    for sent in sentences:
        words = sent.split()
        cond = " ".join(words)
        prefixes: list[tuple[str, ...]] = [("<s>",)]
        for i, w in enumerate(words):
            good, bad = LEXICON[w], ALTERNATIVE[LEXICON[w]]
            if i < len(words) - 1 and rng.random() < 0.35:
                dist = {bad: 0.5, good: 0.4, "</s>": 0.1}
            else:
                dist = {good: 0.6, bad: 0.3, "</s>": 0.1}
            for prefix in prefixes:
                lines.append(f"row {cond} ||| {' '.join(prefix)} ||| {fmt(dist)}")
            prefixes = [(*prefix, tok) for prefix in prefixes for tok in (good, bad)]
        for prefix in prefixes:
            lines.append(f"row {cond} ||| {' '.join(prefix)} ||| </s>:0.9 {LEXICON[words[0]]}:0.1")
    he_words = list(dict.fromkeys(LEXICON.values()))
    uniform = {tok: 1.0 / (len(he_words) + 1) for tok in he_words + ["</s>"]}
    lines.append(f"default ||| {fmt(uniform)}")
    return lines


def channel_table(sentences: list[str]) -> list[str]:
    """P(en | he prefix): sharp for complete correct translations, flat otherwise."""
    lines = ["# toy channel model he->en", vocab_line()]
    for sent in sentences:
        words = sent.split()
        cond = translate(sent)
        prev = "<s>"
        for w in words + ["</s>"]:
            lines.append(f"row {cond} ||| {prev} ||| {w}:0.9 </s>:0.1" if w != "</s>" else
                         f"row {cond} ||| {prev} ||| </s>:1.0")
            prev = w
    en_words = list(LEXICON)
    uniform = {tok: 1.0 / (len(en_words) + 1) for tok in en_words + ["</s>"]}
    lines.append(f"default ||| {fmt(uniform)}")
    return lines


def lm_table(corpus: list[str]) -> list[str]:
    """Add-0.1 smoothed bigram LM over Hebrew, trained on correct translations."""
    he_words = list(dict.fromkeys(LEXICON.values()))
    support = he_words + ["</s>"]
    counts: dict[str, dict[str, float]] = {}
    for sent in corpus:
        toks = ["<s>"] + sent.split() + ["</s>"]
        for a, b in zip(toks, toks[1:]):
            counts.setdefault(a, {}).setdefault(b, 0.0)
            counts[a][b] += 1.0
    lines = ["# toy bigram language model (he)", vocab_line()]
    for prev in ["<s>"] + he_words:
        row = {tok: 0.1 + counts.get(prev, {}).get(tok, 0.0) for tok in support}
        total = sum(row.values())
        lines.append(f"row * ||| {prev} ||| {fmt({t: c / total for t, c in row.items()})}")
    return lines


def backward_table(mono: list[str]) -> list[str]:
    """he->en sampler model: spread over the right word, a wrong word and EOS."""
    lines = ["# toy backtranslation model he->en", vocab_line()]
    en_words = list(LEXICON)
    for sent in mono:
        words = sent.split()
        if any(w not in REVERSE for w in words):
            continue  # out-of-vocabulary: sampling this line must fail and be skipped
        prevs = ["<s>"]
        rows: dict[str, dict[str, float]] = {}
        for i, w in enumerate(words):
            good = REVERSE[w]
            bad = REVERSE[ALTERNATIVE[w]]
            filler = en_words[(i * 7 + len(sent)) % len(en_words)]
            dist = {good: 0.7, bad: 0.2, filler: 0.05, "</s>": 0.05}
            if filler in (good, bad):
                dist = {good: 0.75, bad: 0.2, "</s>": 0.05}
            for prev in prevs:
                rows.setdefault(prev, dist)
            prevs = [good, bad, filler]
        for prev in prevs:
            rows.setdefault(prev, {"</s>": 1.0})
        for prev, dist in rows.items():
            lines.append(f"row {sent} ||| {prev} ||| {fmt(dist)}")
    lines.append("default ||| </s>:1.0")
    return lines


def parallel_corpus(rng: random.Random) -> tuple[list[str], list[str], list[str], list[str]]:
    src, tgt = [], []
    for sent in SENTENCES:
        src.append(sent)
        tgt.append(translate(sent))
    noisy = [
        ("i see the cat " + "very " * 30, "אני רואה את החתול עכשיו"),          # length
        ("we love the " + "x" * 45, "אנחנו אוהבים את"),                     # token_length / ratio
        ("i see 3 cats", "אני רואה 4 חתולים"),                                 # numeric
        ("я вижу кота сейчас здесь", "אני רואה את החתול כאן"),                  # language
        ("i see the big dog now here you run", "אני"),                          # pair_token_ratio
        ("i eat bread now", "אני אוכלים לחם עכשיו"),                       # embedding: identical vectors
        ("we see the dog here", "אנחנו רואה את הכלב כאן"),                 # embedding: unrelated vectors
    ]
    for s, t in noisy:
        src.append(s)
        tgt.append(t)
    order = list(range(len(src)))
    rng.shuffle(order)
    src = [src[i] for i in order]
    tgt = [tgt[i] for i in order]

    # precomputed "sentence embeddings": close for real translations
    dim = 8
    vec_src, vec_tgt = [], []
    for s, t in zip(src, tgt):
        base = [rng.uniform(-1, 1) for _ in range(dim)]
        if (s, t) == noisy[5]:
            other = list(base)
        elif (s, t) == noisy[6]:
            other = [rng.uniform(-1, 1) for _ in range(dim)]
            other = [o if k % 2 else -b for k, (o, b) in enumerate(zip(other, base))]
        else:
            other = [b + rng.uniform(-0.5, 0.5) for b in base]
        vec_src.append(" ".join(f"{x:.6f}" for x in base))
        vec_tgt.append(" ".join(f"{x:.6f}" for x in other))
    return src, tgt, vec_src, vec_tgt


def main() -> None:
    rng = random.Random(20231)
    OUT.mkdir(exist_ok=True)
    src, tgt, vsrc, vtgt = parallel_corpus(rng)
    write("train.en", src)
    write("train.he", tgt)
    write("train.en.vec", vsrc)
    write("train.he.vec", vtgt)
    write("mono.he", MONO)
    write("dev.en", DEV)
    write("dev.he", [translate(s) for s in DEV])
    write("direct.en-he.table", direct_table(DEV + SENTENCES, rng))
    write("channel.he-en.table", channel_table(DEV + SENTENCES))
    write("lm.he.table", lm_table([translate(s) for s in SENTENCES + DEV]))
    write("backward.he-en.table", backward_table(MONO))
    write("filter.cfg", [
        "# rules for the original bitext; embeddings come from train.*.vec",
        "max_chars = 140",
        "max_token_chars = 40",
        "max_char_token_ratio = 12",
        "max_pair_token_ratio = 4",
        "max_pair_length_ratio = 6",
        "max_foreign_token_fraction = 0.30",
        "embed_min = 0.7",
        "embed_max = 0.96",
        "enabled_rules = language, entity, numeric, length, token_length, char_token_ratio, "
        "pair_token_ratio, pair_length_ratio, embedding",
    ])
    write("filter-synthetic.cfg", [
        "# synthetic bitext has no precomputed embeddings",
        "enabled_rules = language, entity, numeric, length, token_length, char_token_ratio, "
        "pair_token_ratio, pair_length_ratio",
    ])


if __name__ == "__main__":
    main()
