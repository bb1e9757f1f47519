"""Command-line surface tying the pipeline together.

Subcommands: parse, lexicon, annotate, vocab-extend, mask, split, eval,
ablate. Long-form flags only. Option precedence is flag > config file >
built-in default; every run writes a resolved-config snapshot next to its
primary output so a run is fully determined by the snapshot plus inputs.

Exit statuses: 0 success, 1 partial (some records skipped), 2 input error,
3 pairing/validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path

from radmask import corpus, lexicon as lex, masking, metrics, reports, tokenizer
from radmask.errors import RadmaskError

log = logging.getLogger(__name__)

OUT_DIR_ENV = "RADMASK_OUT_DIR"

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_INPUT = 2
EXIT_VALIDATION = 3

class UsageError(RadmaskError):
    """Semantically invalid flag or config value."""


_INPUT_ERRORS = (
    OSError,
    corpus.CorpusError,
    lex.ParseError,
    lex.EmptyLexicon,
    tokenizer.VocabError,
    metrics.EmptyReference,
    metrics.EmptyInput,
    metrics.NonFiniteLogProb,
)
_VALIDATION_ERRORS = (
    UsageError,
    masking.ConfigMismatch,
    metrics.PairingError,
    metrics.PositionMismatch,
    corpus.SchemaMismatch,
    corpus.InsufficientRecords,
)


def _load_config(path: str | None) -> dict[str, str]:
    """key = value lines; blank lines and # comments are ignored."""
    if path is None:
        return {}
    cfg: dict[str, str] = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise corpus.CorpusError(f"cannot read config {path}: {err}") from err
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise corpus.CorpusError(f"{path}:{lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        cfg[key.strip()] = value.strip()
    return cfg


_BOOL_WORDS = {"true": True, "yes": True, "1": True, "false": False, "no": False, "0": False}


class _Resolver:
    """Flag > config > default resolution with a snapshot of the outcome."""

    def __init__(self, args: argparse.Namespace, command: str) -> None:
        self.args = args
        self.cfg = _load_config(getattr(args, "config", None))
        self.snapshot: dict = {"command": command}
        if getattr(args, "config", None):
            self.snapshot["config"] = str(args.config)

    def get(self, name: str, default=None, cast=str, required: bool = False):
        attr = name.replace("-", "_")
        if attr == "in":  # "in" is a keyword; argparse dest is in_
            attr = "in_"
        value = getattr(self.args, attr)
        if value is None and name in self.cfg:
            raw = self.cfg[name]
            if cast is bool:
                if raw.lower() not in _BOOL_WORDS:
                    raise UsageError(f"config {name}: not a boolean: {raw!r}")
                value = _BOOL_WORDS[raw.lower()]
            else:
                try:
                    value = cast(raw)
                except ValueError as err:
                    raise UsageError(f"config {name}: {err}") from err
        if value is None:
            if required:
                raise UsageError(f"missing required option --{name}")
            value = default
        self.snapshot[name] = str(value) if isinstance(value, Path) else value
        return value


def _out_path(value: str) -> Path:
    """Rebase relative outputs onto RADMASK_OUT_DIR when it is set."""
    path = Path(value)
    base = os.environ.get(OUT_DIR_ENV)
    if base and not path.is_absolute():
        path = Path(base) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _sidecar(path: Path, kind: str) -> Path:
    return path.with_name(path.with_suffix("").name + f".{kind}.json")


def _read_reports(in_path: Path, source: str):
    """Yield (report_id, text) from a JSONL file or a directory of .txt."""
    del source  # recorded in the snapshot; loaders do not branch on it
    if in_path.is_dir():
        files = sorted(in_path.glob("*.txt"))
        if not files:
            raise corpus.CorpusError(f"no .txt files in {in_path}")
        for f in files:
            yield f.stem, f.read_text(encoding="utf-8")
        return
    seen: set[str] = set()
    for rec in corpus.read_jsonl(in_path, skip_invalid=True):
        rid = str(rec.get("id", ""))
        if not rid or "text" not in rec:
            log.warning("skipping record without id/text")
            continue
        if rid in seen:
            log.warning("duplicate report id %s, keeping first", rid)
            continue
        seen.add(rid)
        yield rid, str(rec["text"])


def cmd_parse(args: argparse.Namespace) -> int:
    res = _Resolver(args, "parse")
    in_path = Path(res.get("in", required=True))
    mode = res.get("mode", required=True)
    if mode not in ("retrain", "finetune", "sections"):
        raise UsageError(f"--mode must be retrain, finetune, or sections, got {mode!r}")
    include_background = res.get("include-background", default=True, cast=bool)
    source = res.get("source", default="retrain-corpus")
    if source not in reports.SOURCES:
        raise UsageError(f"--source must be one of {reports.SOURCES}")
    out = _out_path(res.get("out", required=True))

    records = []
    skipped = 0
    for rid, text in _read_reports(in_path, source):
        raw = reports.RawReport(rid, text, source)
        try:
            sectioned = reports.detect_sections(raw)
            if mode == "retrain":
                records.append({"id": rid, "text": reports.make_retrain_text(sectioned)})
            elif mode == "finetune":
                pair = reports.make_summ_pair(sectioned, include_background)
                records.append({"id": rid, "input": pair.input_text, "target": pair.target_text})
            else:
                records.append(
                    {
                        "id": rid,
                        "sections": [
                            {"name": s.name, "body": s.body, "start": s.start, "end": s.end}
                            for s in sectioned.sections
                        ],
                    }
                )
        except RadmaskError as err:
            skipped += 1
            log.warning("skipping report %s: %s", rid, err)
    corpus.write_jsonl(out, records)
    manifest = {"records": len(records), "skipped": skipped}
    if mode == "finetune":
        manifest["recommended_generation"] = {"beam_size": 5, "no_repeat_ngram_size": 2}
    corpus.write_json(_sidecar(out, "manifest"), manifest)
    corpus.write_json(_sidecar(out, "config"), res.snapshot)
    log.info("parse: wrote %d records, skipped %d", len(records), skipped)
    return EXIT_PARTIAL if skipped else EXIT_OK


def cmd_lexicon(args: argparse.Namespace) -> int:
    res = _Resolver(args, "lexicon")
    in_path = Path(res.get("in", required=True))
    level = res.get("level", required=True)
    derive = res.get("derive-words", default=False, cast=bool)
    out = _out_path(res.get("out", required=True))
    loaded = lex.load_lexicon(in_path, level)
    if derive:
        loaded = lex.derive_word_level(loaded)
    lex.save_lexicon(loaded, out)
    corpus.write_json(_sidecar(out, "config"), res.snapshot)
    log.info("lexicon: %d %s-level entries -> %s", len(loaded), loaded.level, out)
    return EXIT_OK


def cmd_annotate(args: argparse.Namespace) -> int:
    res = _Resolver(args, "annotate")
    in_path = Path(res.get("in", required=True))
    lexicon = lex.load_lexicon(Path(res.get("lexicon", required=True)), res.get("level", required=True))
    out = _out_path(res.get("out", required=True))
    records = []
    for rec in corpus.read_jsonl(in_path):
        spans = lex.find_entities(lexicon, str(rec["text"]))
        records.append(
            {
                "id": str(rec["id"]),
                "entities": [
                    {"start": s.start, "end": s.end, "surface": s.surface, "concept_id": s.concept_id}
                    for s in spans
                ],
            }
        )
    corpus.write_jsonl(out, records)
    corpus.write_json(_sidecar(out, "config"), res.snapshot)
    log.info("annotate: %d records", len(records))
    return EXIT_OK


def cmd_vocab_extend(args: argparse.Namespace) -> int:
    res = _Resolver(args, "vocab-extend")
    vocab = tokenizer.Vocabulary.load(Path(res.get("vocab", required=True)))
    lexicon = lex.load_lexicon(Path(res.get("lexicon", required=True)), res.get("level", required=True))
    out = _out_path(res.get("out", required=True))
    extended, manifest = tokenizer.extend_vocab(vocab, lexicon)
    extended.save(out)
    corpus.write_json(_sidecar(out, "manifest"), manifest)
    corpus.write_json(_sidecar(out, "config"), res.snapshot)
    log.info(
        "vocab-extend: %d + %d -> %d tokens", manifest["base_size"], manifest["added"], len(extended)
    )
    return EXIT_OK


_STRATEGY_FLAGS = {"random": "random", "entity-word": "entity_word", "entity-phrase": "entity_phrase"}
_CORRUPTION_FLAGS = {"pure-mask": "pure_mask", "bert-80-10-10": "bert_80_10_10"}


def _build_strategy(res: _Resolver) -> masking.MaskingStrategy:
    strategy_flag = res.get("strategy", required=True)
    if strategy_flag not in _STRATEGY_FLAGS:
        raise UsageError(f"--strategy must be one of {sorted(_STRATEGY_FLAGS)}")
    corruption_flag = res.get("corruption")
    if corruption_flag is not None and corruption_flag not in _CORRUPTION_FLAGS:
        raise UsageError(f"--corruption must be one of {sorted(_CORRUPTION_FLAGS)}")
    return masking.MaskingStrategy(
        kind=_STRATEGY_FLAGS[strategy_flag],
        mask_rate=res.get("mask-rate", default=0.15, cast=float),
        entity_fraction=res.get("entity-fraction", default=1.0, cast=float),
        corruption=_CORRUPTION_FLAGS[corruption_flag] if corruption_flag else None,
        seed=res.get("seed", default=0, cast=int),
    )


def _load_mask_inputs(res: _Resolver):
    vocab = tokenizer.Vocabulary.load(Path(res.get("vocab", required=True)))
    lexicon_path = res.get("lexicon")
    lexicon = None
    if lexicon_path is not None:
        level = res.get("level")
        if level is None:
            raise UsageError("--lexicon requires --level")
        lexicon = lex.load_lexicon(Path(lexicon_path), level)
    records = list(corpus.read_jsonl(Path(res.get("in", required=True))))
    return records, vocab, lexicon


def _masked_record(ex: masking.MaskedExample) -> dict:
    return {
        "id": ex.id,
        "input_ids": list(ex.input_ids),
        "mask_positions": list(ex.mask_positions),
        "originals": list(ex.originals),
    }


def cmd_mask(args: argparse.Namespace) -> int:
    res = _Resolver(args, "mask")
    strategy = _build_strategy(res)
    records, vocab, lexicon = _load_mask_inputs(res)
    out = _out_path(res.get("out", required=True))
    examples, manifest = masking.generate_mlm_corpus(records, vocab, lexicon, strategy)
    corpus.write_jsonl(out, (_masked_record(e) for e in examples))
    corpus.write_json(_sidecar(out, "manifest"), manifest)
    corpus.write_json(_sidecar(out, "config"), res.snapshot)
    log.info(
        "mask: %d examples (%d dropped), realized rate %.4f",
        manifest["records"], manifest["dropped"], manifest["realized_mask_rate"],
    )
    return EXIT_PARTIAL if manifest["dropped"] else EXIT_OK


def _h64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


def cmd_ablate(args: argparse.Namespace) -> int:
    res = _Resolver(args, "ablate")
    fractions_raw = res.get("fractions", required=True)
    try:
        fractions = [float(f) for f in str(fractions_raw).split(",") if f.strip() != ""]
    except ValueError as err:
        raise UsageError(f"--fractions: {err}") from err
    if not fractions:
        raise UsageError("--fractions is empty")
    if len(set(fractions)) != len(fractions):
        raise UsageError("--fractions contains duplicates")
    for f in fractions:
        if not 0.0 <= f <= 1.0:
            raise UsageError(f"fraction {f} outside [0, 1]")

    strategy_flag = res.get("strategy", default="entity-word")
    if strategy_flag not in ("entity-word", "entity-phrase"):
        raise UsageError("ablate --strategy must be entity-word or entity-phrase")
    mask_rate = res.get("mask-rate", default=0.15, cast=float)
    base_seed = res.get("seed", default=0, cast=int)
    records, vocab, lexicon = _load_mask_inputs(res)
    out_dir = _out_path(res.get("out-dir", required=True))
    out_dir.mkdir(parents=True, exist_ok=True)

    total_dropped = 0
    summary_rows = []
    for fraction in fractions:
        # Per-fraction seed derived from the shared base seed.
        seed = base_seed ^ _h64(f"fraction:{fraction!r}")
        strategy = masking.MaskingStrategy(
            kind=_STRATEGY_FLAGS[strategy_flag],
            mask_rate=mask_rate,
            entity_fraction=fraction,
            seed=seed,
        )
        examples, manifest = masking.generate_mlm_corpus(records, vocab, lexicon, strategy)
        name = f"fraction_{fraction:g}"
        corpus_path = out_dir / f"{name}.jsonl"
        corpus.write_jsonl(corpus_path, (_masked_record(e) for e in examples))
        corpus.write_json(out_dir / f"{name}.manifest.json", manifest)
        total_dropped += manifest["dropped"]
        summary_rows.append(
            {
                "fraction": fraction,
                "seed": seed,
                "corpus": corpus_path.name,
                "manifest": f"{name}.manifest.json",
                "records": manifest["records"],
                "realized_entity_share": manifest["realized_entity_share"],
            }
        )
    summary = {
        "strategy": _STRATEGY_FLAGS[strategy_flag],
        "mask_rate": mask_rate,
        "base_seed": base_seed,
        "fractions": summary_rows,
    }
    corpus.write_json(out_dir / "summary.json", summary)
    corpus.write_json(out_dir / "run.config.json", res.snapshot)
    log.info("ablate: %d corpora in %s", len(fractions), out_dir)
    return EXIT_PARTIAL if total_dropped else EXIT_OK


def cmd_split(args: argparse.Namespace) -> int:
    res = _Resolver(args, "split")
    verify_paths = res.get("verify")
    if verify_paths:
        report = corpus.verify_disjoint([Path(p) for p in verify_paths])
        sys.stdout.write(corpus.canonical_dumps(report) + "\n")
        if report["id_collisions"] or report["text_collisions"]:
            log.error(
                "split: %d id collision(s), %d text collision(s)",
                len(report["id_collisions"]), len(report["text_collisions"]),
            )
            return EXIT_VALIDATION
        return EXIT_OK

    in_path = Path(res.get("in", required=True))
    out_dir = _out_path(res.get("out-dir", required=True))
    seed = res.get("seed", default=0, cast=int)
    sizes_raw = res.get("sizes")
    ratios_raw = res.get("ratios")
    if (sizes_raw is None) == (ratios_raw is None):
        raise UsageError("provide exactly one of --sizes or --ratios")
    try:
        if sizes_raw is not None:
            spec = corpus.SplitSpec(seed=seed, sizes=_parse_mapping(sizes_raw, int))
        else:
            spec = corpus.SplitSpec(seed=seed, ratios=_parse_mapping(ratios_raw, float))
    except ValueError as err:
        raise UsageError(str(err)) from err
    records = list(corpus.read_jsonl(in_path))
    manifest = corpus.split_dataset(records, spec, out_dir)
    corpus.write_json(out_dir / "run.config.json", res.snapshot)
    log.info("split: %s", ", ".join(f"{s['name']}={s['count']}" for s in manifest["splits"]))
    return EXIT_OK


def _parse_mapping(raw: str, cast):
    out = {}
    for part in str(raw).split(","):
        if not part.strip():
            continue
        name, sep, value = part.partition("=")
        if not sep or not name.strip():
            raise ValueError(f"expected name=value, got {part!r}")
        if name.strip() in out:
            raise ValueError(f"duplicate split name {name.strip()!r}")
        out[name.strip()] = cast(value)
    if not out:
        raise ValueError("no splits given")
    return out


def cmd_eval(args: argparse.Namespace) -> int:
    res = _Resolver(args, "eval")
    kind = res.get("kind", required=True)
    out = _out_path(res.get("out", required=True))
    if kind == "rouge":
        refs = list(corpus.read_jsonl(Path(res.get("ref", required=True))))
        hyps = list(corpus.read_jsonl(Path(res.get("hyp", required=True))))
        report = metrics.evaluate_rouge(refs, hyps)
    elif kind == "ppl":
        recs = list(corpus.read_jsonl(Path(res.get("logprobs", required=True))))
        report = metrics.evaluate_perplexity(recs, base=res.get("logprob-base", default="2"))
    elif kind == "mlm-acc":
        preds = list(corpus.read_jsonl(Path(res.get("predictions", required=True))))
        examples = list(corpus.read_jsonl(Path(res.get("examples", required=True))))
        report = metrics.evaluate_mlm_accuracy(preds, examples)
    else:
        raise UsageError(f"--kind must be rouge, ppl, or mlm-acc, got {kind!r}")
    rows = list(report.rows)
    rows.append({"aggregate": report.aggregate})
    corpus.write_jsonl(out, rows)
    corpus.write_json(_sidecar(out, "config"), res.snapshot)
    sys.stdout.write(report.format_table() + "\n")
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", default=None, help="key = value option file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radmask",
        description="Entity-masked MLM corpus pipeline for radiology reports.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("parse", help="reports -> retrain texts / summarization pairs / sections")
    p.add_argument("--in", dest="in_", default=None, metavar="PATH")
    p.add_argument("--mode", default=None, choices=["retrain", "finetune", "sections"])
    p.add_argument("--out", default=None)
    p.add_argument("--include-background", default=None, action=argparse.BooleanOptionalAction)
    p.add_argument("--source", default=None, choices=list(reports.SOURCES))
    _add_common(p)
    p.set_defaults(func=cmd_parse)

    p = subs.add_parser("lexicon", help="validate/normalize a lexicon, optionally derive words")
    p.add_argument("--in", dest="in_", default=None)
    p.add_argument("--level", default=None, choices=list(lex.LEVELS))
    p.add_argument("--derive-words", default=None, action=argparse.BooleanOptionalAction)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_lexicon)

    p = subs.add_parser("annotate", help="entity spans for each text record")
    p.add_argument("--in", dest="in_", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--level", default=None, choices=list(lex.LEVELS))
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_annotate)

    p = subs.add_parser("vocab-extend", help="append lexicon surfaces as atomic tokens")
    p.add_argument("--vocab", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--level", default=None, choices=list(lex.LEVELS))
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_vocab_extend)

    p = subs.add_parser("mask", help="generate a masked-LM corpus")
    p.add_argument("--in", dest="in_", default=None)
    p.add_argument("--vocab", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--level", default=None, choices=list(lex.LEVELS))
    p.add_argument("--strategy", default=None, choices=sorted(_STRATEGY_FLAGS))
    p.add_argument("--mask-rate", default=None, type=float)
    p.add_argument("--entity-fraction", default=None, type=float)
    p.add_argument("--corruption", default=None, choices=sorted(_CORRUPTION_FLAGS))
    p.add_argument("--seed", default=None, type=int)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_mask)

    p = subs.add_parser("split", help="seeded dataset splits, or --verify leakage check")
    p.add_argument("--in", dest="in_", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", default=None, type=int)
    p.add_argument("--sizes", default=None, help="name=count,name=count,...")
    p.add_argument("--ratios", default=None, help="name=ratio,name=ratio,...")
    p.add_argument("--verify", default=None, nargs="+", metavar="FILE")
    _add_common(p)
    p.set_defaults(func=cmd_split)

    p = subs.add_parser("eval", help="score corpora: rouge | ppl | mlm-acc")
    p.add_argument("--kind", default=None, choices=["rouge", "ppl", "mlm-acc"])
    p.add_argument("--ref", default=None)
    p.add_argument("--hyp", default=None)
    p.add_argument("--logprobs", default=None)
    p.add_argument("--logprob-base", default=None, choices=["2", "e"])
    p.add_argument("--predictions", default=None)
    p.add_argument("--examples", default=None)
    p.add_argument("--out", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_eval)

    p = subs.add_parser("ablate", help="entity-fraction sweep of masked corpora")
    p.add_argument("--in", dest="in_", default=None)
    p.add_argument("--vocab", default=None)
    p.add_argument("--lexicon", default=None)
    p.add_argument("--level", default=None, choices=list(lex.LEVELS))
    p.add_argument("--strategy", default=None, choices=["entity-word", "entity-phrase"])
    p.add_argument("--fractions", default=None, help="comma-separated values in [0,1]")
    p.add_argument("--mask-rate", default=None, type=float)
    p.add_argument("--seed", default=None, type=int)
    p.add_argument("--out-dir", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    return parser


def main(argv: list[str] | None = None) -> int:
    if not logging.getLogger().handlers:
        logging.basicConfig(
            level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
        )
    args = build_parser().parse_args(argv)
    try:
        return int(args.func(args))
    except _VALIDATION_ERRORS as err:
        log.error("%s", err)
        return EXIT_VALIDATION
    except _INPUT_ERRORS as err:
        log.error("%s", err)
        return EXIT_INPUT
    except RadmaskError as err:
        log.error("%s", err)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
