"""Parallel corpus data model and IO.

A corpus is two aligned plaintext files, one sentence per line. Pair identity
is the 0-based line number.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

KEEP_SENTINEL = "all_passed"


class CorpusError(Exception):
    """Malformed corpus input (misaligned files, bad encoding)."""


@dataclass(frozen=True, slots=True)
class SentencePair:
    id: int
    source: str
    target: str

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"pair id must be non-negative, got {self.id}")
        for side, text in (("source", self.source), ("target", self.target)):
            if "\n" in text or "\r" in text:
                raise ValueError(f"pair {self.id}: {side} contains a line separator")


class Decision(str, enum.Enum):
    KEEP = "keep"
    REMOVE = "remove"


@dataclass(frozen=True, slots=True)
class FilterVerdict:
    pair_id: int
    decision: Decision
    rule: str
    detail: str = ""

    def __post_init__(self) -> None:
        if self.decision is Decision.REMOVE and not self.rule:
            raise ValueError("a remove verdict needs the rule that fired")
        if self.decision is Decision.KEEP and self.rule != KEEP_SENTINEL:
            raise ValueError(f"a keep verdict must carry rule {KEEP_SENTINEL!r}")

    @classmethod
    def keep(cls, pair_id: int) -> FilterVerdict:
        return cls(pair_id, Decision.KEEP, KEEP_SENTINEL)

    @property
    def kept(self) -> bool:
        return self.decision is Decision.KEEP

    def to_line(self) -> str:
        detail = self.detail.replace("\t", " ").replace("\n", " ")
        return f"{self.pair_id}\t{self.decision.value}\t{self.rule}\t{detail}"

    @classmethod
    def from_line(cls, line: str) -> FilterVerdict:
        pair_id, decision, rule, detail = line.rstrip("\n").split("\t", 3)
        return cls(int(pair_id), Decision(decision), rule, detail)


@dataclass(frozen=True, slots=True)
class CorpusStats:
    pairs: int = 0
    words_source: int = 0
    words_target: int = 0

    def __add__(self, other: CorpusStats) -> CorpusStats:
        return CorpusStats(
            self.pairs + other.pairs,
            self.words_source + other.words_source,
            self.words_target + other.words_target,
        )


def _read_lines(path: Path) -> list[str]:
    data = path.read_bytes()
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"{path}: invalid UTF-8 at byte offset {exc.start}") from exc
    if not text:
        return []
    lines = text.split("\n")
    if lines[-1] == "":
        lines.pop()
    return [line[:-1] if line.endswith("\r") else line for line in lines]


def read_lines(path: str | Path) -> list[str]:
    """Read a one-sentence-per-line UTF-8 file strictly."""
    return _read_lines(Path(path))


def read_parallel(source_path: str | Path, target_path: str | Path) -> Iterator[SentencePair]:
    """Yield aligned pairs from two plaintext files.

    Both files are decoded before the first pair is yielded so that a
    line-count mismatch is reported up front instead of mid-stream.
    """
    src = _read_lines(Path(source_path))
    tgt = _read_lines(Path(target_path))
    if len(src) != len(tgt):
        raise CorpusError(
            f"line count mismatch: {source_path} has {len(src)} lines, "
            f"{target_path} has {len(tgt)} lines"
        )
    for i, (s, t) in enumerate(zip(src, tgt)):
        yield SentencePair(i, s, t)


def write_lines(lines: Iterable[str], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line)
            fh.write("\n")


def write_parallel(pairs: Iterable[SentencePair], source_path: str | Path, target_path: str | Path) -> int:
    """Write pairs to two aligned files; returns the number written."""
    n = 0
    with open(source_path, "w", encoding="utf-8", newline="\n") as fs, open(
        target_path, "w", encoding="utf-8", newline="\n"
    ) as ft:
        for pair in pairs:
            fs.write(pair.source + "\n")
            ft.write(pair.target + "\n")
            n += 1
    return n


def compute_stats(pairs: Iterable[SentencePair]) -> CorpusStats:
    """Pair and whitespace-word counts, the ``wc``-style approximation."""
    n = ws = wt = 0
    for pair in pairs:
        n += 1
        ws += len(pair.source.split())
        wt += len(pair.target.split())
    return CorpusStats(n, ws, wt)


def write_verdicts(verdicts: Iterable[FilterVerdict], path: str | Path) -> None:
    """Write one tab-separated record per verdict: id, decision, rule, detail."""
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for verdict in verdicts:
                fh.write(verdict.to_line() + "\n")
    except OSError as exc:
        raise OSError(f"cannot write verdicts to {path}: {exc.strerror}") from exc


def read_verdicts(path: str | Path) -> list[FilterVerdict]:
    with open(path, encoding="utf-8") as fh:
        return [FilterVerdict.from_line(line) for line in fh if line.strip()]
