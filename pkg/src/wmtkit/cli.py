"""Command-line entry point.

Subcommands compose through files::

    wmtkit filter  SRC TGT --out-prefix clean            # clean.{src,tgt,verdicts,manifest}
    wmtkit sample  --model he-en.table mono.he --out-prefix bt
    wmtkit decode  --direct d.table --channel c.table --lm lm.table dev.en --out hyp.he
    wmtkit score   --metric bleu hyp.he ref.he
    wmtkit sweep   --direct ... --dev-src dev.en --dev-ref dev.he --out trials.tsv
    wmtkit replay  clean.manifest

Exit status: 0 success, 1 usage error, 2 data error. Every run writes one
JSON manifest recording the resolved configuration and an ``argv`` that
``wmtkit replay`` re-executes. Setting ``WMTKIT_CI=1`` makes ``--seed``
mandatory for randomized subcommands and records the wall-clock duration as
``null`` so that manifests of repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time
import typing
from collections import Counter
from pathlib import Path
from typing import Any, Callable, Sequence

from wmtkit import __version__
from wmtkit.config import ConfigError, build, read_kv, to_dict
from wmtkit.corpus import CorpusError, compute_stats, read_lines, read_parallel, write_lines, write_parallel, write_verdicts
from wmtkit.filters import FilterConfig, PrecomputedEmbedder, Providers, run_pipeline
from wmtkit.metrics import MetricConfig, bleu, chrf
from wmtkit.reranker import DIRECTION_PRESETS, DecodingParams, decode_corpus, restrict_channel
from wmtkit.sampler import SamplingParams, Skipped, backtranslate_corpus
from wmtkit.scorers import TableScorer
from wmtkit.sweep import SweepConfig, Trial, regression_diagnostics, run_sweep

log = logging.getLogger("wmtkit")

CI_ENV = "WMTKIT_CI"
EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> typing.NoReturn:
        raise UsageError(f"{self.prog}: {message}")


def ci_mode() -> bool:
    return os.environ.get(CI_ENV, "") not in ("", "0")


# --------------------------------------------------------------------------
# Flags generated from parameter dataclasses
# --------------------------------------------------------------------------


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def add_dataclass_flags(parser: argparse.ArgumentParser, cls: type, skip: Sequence[str] = ()) -> None:
    """One flag per field; values stay strings and are coerced by :func:`build`."""
    hints = typing.get_type_hints(cls)
    group = parser.add_argument_group(f"{cls.__name__} (flags override --config)")
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        default = f.default if f.default is not dataclasses.MISSING else f.default_factory()  # type: ignore[misc]
        shown = ",".join(map(str, default)) if isinstance(default, tuple) else getattr(default, "value", default)
        group.add_argument(
            _flag(f.name), dest=f.name, default=None, metavar=_metavar(hints[f.name]), help=f"default: {shown}"
        )


def _metavar(hint: Any) -> str:
    if typing.get_origin(hint) in (tuple, list):
        return "A,B,..."
    return {int: "INT", float: "X", bool: "BOOL"}.get(hint, "VALUE")


def resolve(cls: type, args: argparse.Namespace, *base_layers: dict | None, skip: Sequence[str] = ()) -> Any:
    """defaults < ``base_layers`` < --config file < explicit flags."""
    names = [f.name for f in dataclasses.fields(cls) if f.name not in skip]
    file_layer: dict[str, str] = {}
    if getattr(args, "config", None):
        try:
            file_layer = {k: v for k, v in read_kv(args.config).items() if k in names or k not in _all_fields()}
        except OSError as exc:
            raise UsageError(f"--config: cannot read {args.config}: {exc.strerror}") from None
    flag_layer = {n: getattr(args, n) for n in names if getattr(args, n, None) is not None}
    try:
        return build(cls, *base_layers, file_layer, flag_layer)
    except (ConfigError, ValueError, TypeError) as exc:
        raise UsageError(f"invalid {cls.__name__}: {exc}") from None


def _all_fields() -> set[str]:
    out: set[str] = set()
    for cls in (FilterConfig, SamplingParams, DecodingParams, SweepConfig, MetricConfig):
        out.update(f.name for f in dataclasses.fields(cls))
    return out


# --------------------------------------------------------------------------
# Manifest
# --------------------------------------------------------------------------


@dataclasses.dataclass
class RunManifest:
    subcommand: str
    config: dict[str, Any]
    inputs: dict[str, str]
    outputs: dict[str, str]
    seed: int | None
    argv: list[str]
    tool_version: str = __version__
    duration_s: float | None = None

    def write(self, path: str | Path) -> None:
        data = dataclasses.asdict(self)
        data = {"tool": "wmtkit", **data}
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")

    @classmethod
    def read(cls, path: str | Path) -> RunManifest:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        data.pop("tool", None)
        return cls(**data)


def _config_argv(obj: Any, skip: Sequence[str] = ()) -> list[str]:
    out: list[str] = []
    for key, value in to_dict(obj).items():
        if key in skip:
            continue
        if isinstance(value, list):
            value = ",".join(map(str, value))
        out += [_flag(key), str(getattr(value, "value", value))]
    return out


class _Run:
    def __init__(self, name: str) -> None:
        self.name = name
        self.start = time.perf_counter()

    def finish(
        self,
        path: str | Path,
        config: dict[str, Any],
        inputs: dict[str, str],
        outputs: dict[str, str],
        seed: int | None,
        argv: list[str],
    ) -> None:
        duration = None if ci_mode() else round(time.perf_counter() - self.start, 6)
        RunManifest(self.name, config, inputs, outputs, seed, [self.name, *argv], duration_s=duration).write(path)


def _seed(args: argparse.Namespace) -> None:
    if ci_mode() and args.seed is None:
        raise UsageError(f"--seed is required when {CI_ENV} is set")


def _load_table(path: str) -> TableScorer:
    try:
        return TableScorer.load(path)
    except OSError as exc:
        raise CorpusError(f"cannot read model {path}: {exc.strerror}") from None
    except (ValueError, KeyError) as exc:
        raise CorpusError(str(exc)) from None


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def cmd_filter(args: argparse.Namespace) -> int:
    run = _Run("filter")
    config: FilterConfig = resolve(FilterConfig, args)
    providers = Providers()
    if args.embeddings_src or args.embeddings_tgt:
        if not (args.embeddings_src and args.embeddings_tgt):
            raise UsageError("--embeddings-src and --embeddings-tgt must be given together")
        providers.embedder = PrecomputedEmbedder.from_files(
            (args.source, args.embeddings_src), (args.target, args.embeddings_tgt)
        )
    result = run_pipeline(read_parallel(args.source, args.target), config, providers, jobs=args.jobs)
    prefix = args.out_prefix
    outputs = {k: f"{prefix}.{k}" for k in ("src", "tgt", "verdicts")}
    write_parallel(result.kept, outputs["src"], outputs["tgt"])
    write_verdicts(result.verdicts, outputs["verdicts"])
    b, a = result.before, result.after
    print(f"pairs\t{b.pairs}\t{a.pairs}")
    print(f"words_source\t{b.words_source}\t{a.words_source}")
    print(f"words_target\t{b.words_target}\t{a.words_target}")
    for rule, n in sorted(result.removed_by_rule().items()):
        print(f"removed:{rule}\t{n}")
    argv = _config_argv(config) + [args.source, args.target, "--out-prefix", prefix, "--jobs", str(args.jobs)]
    inputs = {"source": args.source, "target": args.target}
    if args.embeddings_src:
        argv += ["--embeddings-src", args.embeddings_src, "--embeddings-tgt", args.embeddings_tgt]
        inputs.update(embeddings_src=args.embeddings_src, embeddings_tgt=args.embeddings_tgt)
    manifest = f"{prefix}.manifest"
    run.finish(manifest, to_dict(config), inputs, {**outputs, "manifest": manifest}, None, argv)
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    run = _Run("stats")
    stats = compute_stats(read_parallel(args.source, args.target))
    print(f"pairs\t{stats.pairs}\nwords_source\t{stats.words_source}\nwords_target\t{stats.words_target}")
    manifest = args.manifest or f"{args.source}.stats.manifest"
    argv = [args.source, args.target, "--manifest", manifest]
    run.finish(manifest, dataclasses.asdict(stats), {"source": args.source, "target": args.target},
               {"manifest": manifest}, None, argv)
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    _seed(args)
    run = _Run("sample")
    params: SamplingParams = resolve(SamplingParams, args)
    model = _load_table(args.model)
    skipped: list[Skipped] = []
    pairs = list(backtranslate_corpus(model, read_lines(args.input), params, skipped, jobs=args.jobs))
    prefix = args.out_prefix
    outputs = {"src": f"{prefix}.src", "tgt": f"{prefix}.tgt", "skipped": f"{prefix}.skipped"}
    write_parallel(pairs, outputs["src"], outputs["tgt"])
    write_lines((f"{s.index}\t{s.error}" for s in skipped), outputs["skipped"])
    print(f"sampled\t{len(pairs)}\nskipped\t{len(skipped)}")
    argv = _config_argv(params) + ["--model", args.model, args.input, "--out-prefix", prefix, "--jobs", str(args.jobs)]
    manifest = f"{prefix}.manifest"
    run.finish(manifest, to_dict(params), {"model": args.model, "input": args.input},
               {**outputs, "manifest": manifest}, params.seed, argv)
    return EXIT_OK


def _decoding_params(args: argparse.Namespace) -> DecodingParams:
    preset = DIRECTION_PRESETS[args.direction] if getattr(args, "direction", None) else None
    return resolve(DecodingParams, args, preset)


def _frequencies(path: str | None) -> Counter[str] | None:
    if not path:
        return None
    counts: Counter[str] = Counter()
    for line in read_lines(path):
        counts.update(line.split())
    return counts


def _fmt_lp(x: float | None) -> str:
    return "" if x is None else repr(x)


def cmd_decode(args: argparse.Namespace) -> int:
    run = _Run(args.subcommand)
    direct_only = args.subcommand == "decode-direct-only"
    params = _decoding_params(args)
    direct = _load_table(args.direct)
    channel = lm = None
    if not direct_only:
        if not (args.channel and args.lm):
            raise UsageError("decode needs --channel and --lm (or use decode-direct-only)")
        channel = restrict_channel(_load_table(args.channel), params, _frequencies(args.channel_freq))
        lm = _load_table(args.lm)
    sources = [line.split() for line in read_lines(args.input)]
    try:
        results = decode_corpus(sources, direct, channel, lm, params, direct_only=direct_only, jobs=args.jobs)
    except KeyError as exc:
        raise CorpusError(f"{args.input}: {exc.args[0]}") from None
    write_lines((" ".join(r.best) for r in results), args.out)
    outputs = {"out": args.out}
    if args.scores:
        rows = ["sentence\trank\ttokens\tdirect_lp\tchannel_lp\tlm_lp\tcombined\tfinished"]
        for i, res in enumerate(results):
            for rank, c in enumerate(res.candidates):
                rows.append("\t".join([
                    str(i), str(rank), " ".join(c.tokens), repr(c.direct_lp), _fmt_lp(c.channel_lp),
                    _fmt_lp(c.lm_lp), _fmt_lp(c.combined), str(int(c.finished)),
                ]))
        write_lines(rows, args.scores)
        outputs["scores"] = args.scores
    argv = _config_argv(params) + ["--direct", args.direct, args.input, "--out", args.out, "--jobs", str(args.jobs)]
    inputs = {"direct": args.direct, "input": args.input}
    if not direct_only:
        argv += ["--channel", args.channel, "--lm", args.lm]
        inputs.update(channel=args.channel, lm=args.lm)
        if args.channel_freq:
            argv += ["--channel-freq", args.channel_freq]
            inputs["channel_freq"] = args.channel_freq
    if args.scores:
        argv += ["--scores", args.scores]
    manifest = f"{args.out}.manifest"
    run.finish(manifest, to_dict(params), inputs, {**outputs, "manifest": manifest}, None, argv)
    return EXIT_OK


def cmd_score(args: argparse.Namespace) -> int:
    run = _Run("score")
    config: MetricConfig = resolve(MetricConfig, args)
    hyps, refs = read_lines(args.hypotheses), read_lines(args.references)
    if len(hyps) != len(refs):
        raise CorpusError(f"{args.hypotheses} has {len(hyps)} lines but {args.references} has {len(refs)}")
    if args.metric == "bleu":
        value, signature = bleu(hyps, refs, config), config.bleu_signature()
    else:
        value, signature = chrf(hyps, refs, config), config.chrf_signature()
    print(f"{value:.2f}")
    print(f"{args.metric}|{signature}|version:{__version__}")
    manifest = args.manifest or f"{args.hypotheses}.{args.metric}.manifest"
    argv = _config_argv(config) + ["--metric", args.metric, args.hypotheses, args.references, "--manifest", manifest]
    run.finish(manifest, {**to_dict(config), "metric": args.metric, "score": round(value, 6)},
               {"hypotheses": args.hypotheses, "references": args.references}, {"manifest": manifest}, None, argv)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    _seed(args)
    run = _Run("sweep")
    sweep_cfg: SweepConfig = resolve(SweepConfig, args)
    base = _decoding_params(args)
    direct, lm = _load_table(args.direct), _load_table(args.lm)
    channel = restrict_channel(_load_table(args.channel), base, _frequencies(args.channel_freq))
    sources = [line.split() for line in read_lines(args.dev_src)]
    refs = read_lines(args.dev_ref)
    if len(sources) != len(refs):
        raise CorpusError(f"{args.dev_src} and {args.dev_ref} differ in line count")

    def objective(delta_ch: float, delta_lm: float) -> float:
        params = dataclasses.replace(base, delta_ch=delta_ch, delta_lm=delta_lm)
        results = decode_corpus(sources, direct, channel, lm, params)
        return bleu([" ".join(r.best) for r in results], refs)

    result = run_sweep(objective, sweep_cfg)
    write_lines(
        ["index\tdelta_ch\tdelta_lm\tobjective"]
        + [f"{i}\t{t.delta_ch!r}\t{t.delta_lm!r}\t{t.objective!r}" for i, t in enumerate(result.trials)],
        args.out,
    )
    best: Trial | None = result.best
    if best is not None:
        print(f"best\t{best.delta_ch:.4f}\t{best.delta_lm:.4f}\t{best.objective:.2f}")
    try:
        for axis, fit in regression_diagnostics(result.trials).items():
            print(f"slope:{axis}\t{fit.slope:.4f}\tintercept\t{fit.intercept:.4f}")
    except ValueError as exc:
        print(f"regression unavailable: {exc}")
    argv = (
        _config_argv(sweep_cfg) + _config_argv(base, skip=("delta_ch", "delta_lm"))
        + ["--direct", args.direct, "--channel", args.channel, "--lm", args.lm,
           "--dev-src", args.dev_src, "--dev-ref", args.dev_ref, "--out", args.out]
    )
    if args.channel_freq:
        argv += ["--channel-freq", args.channel_freq]
    manifest = f"{args.out}.manifest"
    config = {"sweep": to_dict(sweep_cfg), "decoding": to_dict(base)}
    inputs = {"direct": args.direct, "channel": args.channel, "lm": args.lm, "dev_src": args.dev_src, "dev_ref": args.dev_ref}
    run.finish(manifest, config, inputs, {"out": args.out, "manifest": manifest}, sweep_cfg.seed, argv)
    return EXIT_OK


def cmd_replay(args: argparse.Namespace) -> int:
    try:
        manifest = RunManifest.read(args.manifest)
    except (OSError, ValueError, TypeError) as exc:
        raise CorpusError(f"cannot read manifest {args.manifest}: {exc}") from None
    return main(manifest.argv)


# --------------------------------------------------------------------------
# Parser
# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wmtkit", description="Corpus filtering, backtranslation sampling, "
                     "noisy-channel decoding, MT metrics and weight sweeps.")
    parser.add_argument("--version", action="version", version=f"wmtkit {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="subcommand", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("filter", help="filter a parallel corpus")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--config", help="key = value file with FilterConfig fields")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--embeddings-src", help="precomputed source vectors, one per line")
    p.add_argument("--embeddings-tgt", help="precomputed target vectors, one per line")
    add_dataclass_flags(p, FilterConfig)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("stats", help="pair and word counts of a parallel corpus")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--manifest")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("sample", help="backtranslate monolingual text by top-k/nucleus sampling")
    p.add_argument("input", help="monolingual text, one whitespace-tokenized sentence per line")
    p.add_argument("--model", required=True, help="direct model table (monolingual language -> other side)")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--config")
    p.add_argument("--jobs", type=int, default=1)
    add_dataclass_flags(p, SamplingParams)
    p.set_defaults(func=cmd_sample)

    for name, help_text in (("decode", "noisy-channel beam search"),
                            ("decode-direct-only", "beam search with the direct model alone")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("input", help="source text, one whitespace-tokenized sentence per line")
        p.add_argument("--direct", required=True)
        p.add_argument("--out", required=True)
        p.add_argument("--scores", help="write a per-candidate score dump (TSV)")
        p.add_argument("--config")
        p.add_argument("--jobs", type=int, default=1)
        if name == "decode":
            p.add_argument("--channel")
            p.add_argument("--lm")
            p.add_argument("--channel-freq", help="text file whose token counts rank the channel vocabulary")
        p.add_argument("--direction", choices=sorted(DIRECTION_PRESETS), help="load tuned channel/LM weights")
        add_dataclass_flags(p, DecodingParams)
        p.set_defaults(func=cmd_decode)

    p = sub.add_parser("score", help="corpus BLEU or chrF++")
    p.add_argument("hypotheses")
    p.add_argument("references")
    p.add_argument("--metric", choices=("bleu", "chrf"), default="bleu")
    p.add_argument("--config")
    p.add_argument("--manifest")
    add_dataclass_flags(p, MetricConfig)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("sweep", help="random search over channel/LM weights")
    p.add_argument("--direct", required=True)
    p.add_argument("--channel", required=True)
    p.add_argument("--lm", required=True)
    p.add_argument("--channel-freq")
    p.add_argument("--dev-src", required=True)
    p.add_argument("--dev-ref", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config")
    add_dataclass_flags(p, SweepConfig)
    add_dataclass_flags(p, DecodingParams, skip=("delta_ch", "delta_lm"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.subcommand is None:
            raise UsageError("wmtkit: a subcommand is required (see --help)")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        if getattr(args, "jobs", 1) < 1:
            raise UsageError("--jobs must be at least 1")
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CorpusError, ConfigError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
