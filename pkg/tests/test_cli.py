import json
import shutil
from pathlib import Path

import pytest

from wmtkit.cli import CI_ENV, EXIT_DATA, EXIT_OK, EXIT_USAGE, RunManifest, main

TOY = Path(__file__).resolve().parent.parent / "fixtures" / "toy"

FILTER_EMB = ["--embeddings-src", "train.en.vec", "--embeddings-tgt", "train.he.vec"]
NOISY = ["--direct", "direct.en-he.table", "--channel", "channel.he-en.table", "--lm", "lm.he.table"]


@pytest.fixture
def toy(tmp_path, monkeypatch):
    """A private copy of the toy fixtures as the working directory."""
    for path in TOY.iterdir():
        shutil.copy(path, tmp_path / path.name)
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(CI_ENV, raising=False)
    return tmp_path


def read(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


# ------------------------------------------------------------------ exit codes


def test_no_subcommand_is_a_usage_error(toy, capsys):
    assert main([]) == EXIT_USAGE
    assert "subcommand" in capsys.readouterr().err


def test_unknown_flag_is_a_usage_error(toy):
    assert main(["filter", "train.en", "train.he", "--out-prefix", "o", "--bogus"]) == EXIT_USAGE


def test_bad_jobs_is_a_usage_error(toy):
    assert main(["filter", "train.en", "train.he", "--out-prefix", "o", "--jobs", "0"]) == EXIT_USAGE


def test_line_count_mismatch_is_a_data_error(toy, capsys):
    assert main(["filter", "train.en", "dev.he", "--out-prefix", "o"]) == EXIT_DATA
    assert "data error" in capsys.readouterr().err


def test_missing_file_is_a_data_error(toy, capsys):
    assert main(["score", "nope.txt", "dev.he"]) == EXIT_DATA
    assert "nope.txt" in capsys.readouterr().err


def test_bad_config_value_is_a_usage_error(toy, capsys):
    Path("bad.cfg").write_text("max_chars = lots\n", encoding="utf-8")
    assert main(["filter", "train.en", "train.he", "--out-prefix", "o", "--config", "bad.cfg"]) == EXIT_USAGE
    assert "max_chars" in capsys.readouterr().err


# ------------------------------------------------------------------ subcommands


def test_filter_writes_outputs_and_counts(toy, capsys):
    code = main(["filter", "train.en", "train.he", "--out-prefix", "clean", "--config", "filter.cfg", *FILTER_EMB])
    assert code == EXIT_OK
    out = capsys.readouterr().out
    assert "pairs\t23\t16" in out
    for ext in ("src", "tgt", "verdicts", "manifest"):
        assert Path(f"clean.{ext}").exists()
    assert len(read("clean.src").splitlines()) == len(read("clean.tgt").splitlines()) == 16
    verdicts = read("clean.verdicts").splitlines()
    assert len(verdicts) == 23


def test_stats(toy, capsys):
    assert main(["stats", "train.en", "train.he"]) == EXIT_OK
    assert capsys.readouterr().out.startswith("pairs\t23\n")


def test_score_identical_is_100(toy, capsys):
    assert main(["score", "dev.he", "dev.he", "--manifest", "s.manifest"]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "100.00"
    assert lines[1].startswith("bleu|nrefs:1")
    assert main(["score", "dev.he", "dev.he", "--metric", "chrf", "--manifest", "c.manifest"]) == EXIT_OK
    assert capsys.readouterr().out.splitlines()[0] == "100.00"


def test_config_layers_default_file_flag(toy):
    Path("layer.cfg").write_text("max_chars = 30\nmax_token_chars = 9\n", encoding="utf-8")
    assert main(["filter", "train.en", "train.he", "--out-prefix", "a", "--config", "layer.cfg", "--max-chars", "77"]) == EXIT_OK
    config = RunManifest.read("a.manifest").config
    assert config["max_chars"] == 77  # flag beats file
    assert config["max_token_chars"] == 9  # file beats default
    assert config["max_pair_token_ratio"] == 4.0  # default


def test_sample_requires_seed_in_ci(toy, monkeypatch):
    monkeypatch.setenv(CI_ENV, "1")
    assert main(["sample", "mono.he", "--model", "backward.he-en.table", "--out-prefix", "bt"]) == EXIT_USAGE
    assert main(["sample", "mono.he", "--model", "backward.he-en.table", "--out-prefix", "bt", "--seed", "7"]) == EXIT_OK
    assert json.loads(read("bt.manifest"))["duration_s"] is None


def test_sample_skips_out_of_vocabulary_lines(toy, capsys):
    assert main(["sample", "mono.he", "--model", "backward.he-en.table", "--out-prefix", "bt", "--seed", "7"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "sampled\t14" in out and "skipped\t1" in out
    assert read("bt.skipped").startswith("9\t")


def test_zero_weights_match_direct_only_decoding(toy):
    assert main(["decode", "dev.en", *NOISY, "--out", "zero.out", "--delta-ch", "0", "--delta-lm", "0"]) == EXIT_OK
    assert main(["decode-direct-only", "dev.en", "--direct", "direct.en-he.table", "--out", "plain.out"]) == EXIT_OK
    assert read("zero.out") == read("plain.out")


def test_noisy_decode_needs_channel_and_lm(toy):
    assert main(["decode", "dev.en", "--direct", "direct.en-he.table", "--out", "x"]) == EXIT_USAGE


def test_decode_direction_preset_recorded(toy):
    assert main(["decode", "dev.en", *NOISY, "--out", "p.out", "--direction", "en-he"]) == EXIT_OK
    config = RunManifest.read("p.out.manifest").config
    assert (config["delta_ch"], config["delta_lm"]) == (0.2297, 0.2056)


def test_replay_reproduces_outputs(toy, monkeypatch):
    monkeypatch.setenv(CI_ENV, "1")
    assert main(["sample", "mono.he", "--model", "backward.he-en.table", "--out-prefix", "bt", "--seed", "3"]) == EXIT_OK
    first = {ext: read(f"bt.{ext}") for ext in ("src", "tgt", "skipped", "manifest")}
    for ext in first:
        Path(f"bt.{ext}").unlink()
    Path("bt.manifest").write_text(first["manifest"], encoding="utf-8")
    assert main(["replay", "bt.manifest"]) == EXIT_OK
    assert {ext: read(f"bt.{ext}") for ext in first} == first


def test_replay_of_a_broken_manifest(toy):
    Path("broken.manifest").write_text("{not json", encoding="utf-8")
    assert main(["replay", "broken.manifest"]) == EXIT_DATA


def test_sweep_writes_trials(toy, capsys):
    args = ["sweep", *NOISY, "--dev-src", "dev.en", "--dev-ref", "dev.he", "--out", "trials.tsv",
            "--iterations", "5", "--seed", "1"]
    assert main(args) == EXIT_OK
    rows = read("trials.tsv").splitlines()
    assert rows[0] == "index\tdelta_ch\tdelta_lm\tobjective"
    assert len(rows) == 6
    assert capsys.readouterr().out.startswith("best\t")
