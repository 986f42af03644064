"""Rule-based word tokenizer used by the ratio filters and the metrics.

Tokens are whitespace-delimited runs further split so that every
punctuation or symbol character (Unicode categories ``P*`` and ``S*``) is a
token of its own, and digit runs are separated from letters. A ``.`` or
``,`` sitting between two digits is kept inside the number, so decimals and
thousands-grouped numbers survive as one token.

Whitespace is what ``str.split`` splits on (Unicode whitespace plus the
ASCII information separators U+001C..U+001F), so token boundaries agree
with the whitespace word counts used elsewhere.
"""

from __future__ import annotations

import regex

_TOKEN_RE = regex.compile(
    r"""
    \d+(?:[.,]\d+)*          # number, with inner decimal / grouping marks
    | [\p{P}\p{S}]           # one punctuation or symbol character
    | [^\s\x1c-\x1f\d\p{P}\p{S}]+   # everything else: letters, marks, ...
    """,
    regex.VERBOSE,
)


def tokenize(text: str) -> list[str]:
    """Split ``text`` into tokens.

    >>> tokenize("Hello, world!")
    ['Hello', ',', 'world', '!']
    >>> tokenize("3.5km")
    ['3.5', 'km']
    """
    return _TOKEN_RE.findall(text)


def char_count(text: str) -> int:
    """Number of Unicode scalar values in ``text`` (not bytes)."""
    return len(text)
