import pytest

from wmtkit.config import ConfigError, build, read_kv, to_dict
from wmtkit.corpus import (
    CorpusError,
    CorpusStats,
    Decision,
    FilterVerdict,
    SentencePair,
    compute_stats,
    read_lines,
    read_parallel,
    read_verdicts,
    write_parallel,
    write_verdicts,
)
from wmtkit.filters import FilterConfig


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_read_single_pair(tmp_path):
    src = _write(tmp_path / "s", "a\n")
    tgt = _write(tmp_path / "t", "b\n")
    assert list(read_parallel(src, tgt)) == [SentencePair(0, "a", "b")]


def test_line_count_mismatch_names_both_counts(tmp_path):
    src = _write(tmp_path / "s", "a\nb\n")
    tgt = _write(tmp_path / "t", "a\nb\nc\n")
    with pytest.raises(CorpusError, match="2 lines.*3 lines"):
        list(read_parallel(src, tgt))


def test_empty_files_give_empty_stream(tmp_path):
    assert list(read_parallel(_write(tmp_path / "s", ""), _write(tmp_path / "t", ""))) == []


def test_invalid_utf8_reports_byte_offset(tmp_path):
    bad = tmp_path / "bad"
    bad.write_bytes(b"ok\n\xff\n")
    with pytest.raises(CorpusError, match="byte offset 3"):
        read_lines(bad)


def test_missing_trailing_newline_and_crlf(tmp_path):
    path = tmp_path / "f"
    path.write_bytes(b"one\r\ntwo")
    assert read_lines(path) == ["one", "two"]


def test_blank_lines_are_pairs(tmp_path):
    pairs = list(read_parallel(_write(tmp_path / "s", "a\n\n"), _write(tmp_path / "t", "\nb\n")))
    assert [(p.source, p.target) for p in pairs] == [("a", ""), ("", "b")]


def test_round_trip(tmp_path):
    pairs = [SentencePair(0, "hello world", "שלום עולם"), SentencePair(1, "", "x")]
    assert write_parallel(pairs, tmp_path / "s", tmp_path / "t") == 2
    assert list(read_parallel(tmp_path / "s", tmp_path / "t")) == pairs


@pytest.mark.parametrize(
    "pairs, expected",
    [
        ([SentencePair(0, "hello world", "שלום עולם")], CorpusStats(1, 2, 2)),
        ([], CorpusStats(0, 0, 0)),
        ([SentencePair(0, "a b c", "x")], CorpusStats(1, 3, 1)),
    ],
)
def test_compute_stats(pairs, expected):
    assert compute_stats(pairs) == expected


def test_stats_add():
    assert CorpusStats(1, 2, 3) + CorpusStats(4, 5, 6) == CorpusStats(5, 7, 9)


def test_pair_rejects_line_separators_and_negative_ids():
    with pytest.raises(ValueError):
        SentencePair(0, "a\nb", "c")
    with pytest.raises(ValueError):
        SentencePair(-1, "a", "b")


def test_verdict_invariants():
    with pytest.raises(ValueError):
        FilterVerdict(0, Decision.REMOVE, "")
    with pytest.raises(ValueError):
        FilterVerdict(0, Decision.KEEP, "length")
    assert FilterVerdict.keep(3).kept


def test_verdict_file_round_trip(tmp_path):
    verdicts = [
        FilterVerdict.keep(0),
        FilterVerdict(1, Decision.REMOVE, "length", "side=source value=141 limit=140"),
    ]
    write_verdicts(verdicts, tmp_path / "v")
    assert (tmp_path / "v").read_text().splitlines()[1] == "1\tremove\tlength\tside=source value=141 limit=140"
    assert read_verdicts(tmp_path / "v") == verdicts


def test_write_verdicts_error_names_path(tmp_path):
    target = tmp_path / "missing" / "v"
    with pytest.raises(OSError, match="missing"):
        write_verdicts([FilterVerdict.keep(0)], target)


class TestConfig:
    def test_read_kv(self, tmp_path):
        path = _write(tmp_path / "c", "# comment\nmax_chars = 100  # inline\n\nenabled_rules = length, numeric\n")
        assert read_kv(path) == {"max_chars": "100", "enabled_rules": "length, numeric"}

    def test_duplicate_key(self, tmp_path):
        with pytest.raises(ConfigError, match="duplicate"):
            read_kv(_write(tmp_path / "c", "a = 1\na = 2\n"))

    def test_malformed_line(self, tmp_path):
        with pytest.raises(ConfigError, match=":1:"):
            read_kv(_write(tmp_path / "c", "just words\n"))

    def test_layers_and_coercion(self):
        cfg = build(FilterConfig, {"max_chars": "100", "enabled_rules": "length,numeric"}, {"max_chars": 90})
        assert cfg.max_chars == 90
        assert cfg.enabled_rules == ("length", "numeric")

    def test_none_does_not_override(self):
        assert build(FilterConfig, {"max_chars": "100"}, {"max_chars": None}).max_chars == 100

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="max_char"):
            build(FilterConfig, {"max_char": "1"})

    def test_bad_value(self):
        with pytest.raises(ConfigError, match="max_chars"):
            build(FilterConfig, {"max_chars": "many"})

    def test_to_dict_lists_tuples(self):
        assert to_dict(FilterConfig(enabled_rules=("length",)))["enabled_rules"] == ["length"]
