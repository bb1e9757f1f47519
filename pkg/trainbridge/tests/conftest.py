"""Shared synthetic world: templated reports where each entity token is
fully determined by the cue word right before it, plus masked corpora
produced by the corpus toolkit's CLI (driven as a subprocess; the JSONL and
vocabulary files are the only interface)."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

SPECIALS = ["<pad>", "<bos>", "<eos>", "<unk>", "[MASK]"]
CHARS = [chr(c) for c in range(0x21, 0x7F)]
FILLERS = [f"filler{i:02d}" for i in range(30)]
CUES = [f"cue{k}" for k in range(8)]
ENTITIES = [f"finding{k}" for k in range(8)]
WORDS = sorted(set(FILLERS + CUES + ENTITIES))


def radmask_cli(*args, cwd=None):
    env = {k: v for k, v in os.environ.items() if k != "RADMASK_OUT_DIR"}
    proc = subprocess.run(
        [sys.executable, "-m", "radmask.cli", *map(str, args)],
        capture_output=True, text=True, cwd=cwd, env=env,
    )
    assert proc.returncode == 0, proc.stderr
    return proc


def template_records(rng, n, start=0):
    """Reports of filler noise with cue->entity bigrams; each cue-entity
    pair appears at most once per report, so targets never repeat a bigram."""
    records = []
    for i in range(n):
        n_chunks = int(rng.integers(4, 9))
        ks = rng.permutation(8)[:n_chunks]
        words = []
        for k in ks:
            words.extend(FILLERS[j] for j in rng.integers(0, 30, size=3))
            words += [CUES[k], ENTITIES[k]]
        records.append({"id": f"t{start + i:05d}", "text": " ".join(words)})
    return records


def summ_pair(record):
    kept = [w for w in record["text"].split() if not w.startswith("filler")]
    return {"id": record["id"], "input": record["text"], "target": " ".join(kept)}


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False, separators=(",", ":")) + "\n")


@pytest.fixture(scope="session")
def world(tmp_path_factory):
    root = tmp_path_factory.mktemp("world")
    (root / "vocab.txt").write_text("\n".join(SPECIALS + CHARS + WORDS) + "\n", encoding="utf-8")
    (root / "terms.tsv").write_text(
        "".join(f"E{k}\t{e}\n" for k, e in enumerate(ENTITIES)), encoding="utf-8"
    )
    # Extended vocabulary for embedding-growth tests: two phrase tokens with
    # word constituents, one with character constituents, one with none.
    (root / "vocab_ext.txt").write_text(
        "\n".join(SPECIALS + CHARS + WORDS + ["cue0 finding0", "cue1 finding1", "qzx", "ß"]) + "\n",
        encoding="utf-8",
    )

    rng = np.random.Generator(np.random.PCG64(11))
    records = template_records(rng, 2000)
    write_jsonl(root / "records.jsonl", records)
    write_jsonl(root / "small.jsonl", records[:150])
    write_jsonl(root / "train_pairs.jsonl", [summ_pair(r) for r in records[:600]])
    write_jsonl(root / "eval_pairs.jsonl", [summ_pair(r) for r in records[1900:1950]])
    (root / "empty.jsonl").write_text("", encoding="utf-8")

    corpora = {}
    for trial in range(3):
        for strategy, extra in (
            ("entity-word", ["--lexicon", root / "terms.tsv", "--level", "word"]),
            ("random", []),
        ):
            out = root / f"{strategy.replace('-', '_')}_{trial}.jsonl"
            radmask_cli(
                "mask", "--in", root / "records.jsonl", "--vocab", root / "vocab.txt",
                "--strategy", strategy, "--mask-rate", "0.15",
                "--seed", 100 + trial, "--out", out, *extra,
            )
            corpora[(strategy, trial)] = out
    radmask_cli(
        "mask", "--in", root / "small.jsonl", "--vocab", root / "vocab.txt",
        "--strategy", "entity-word", "--lexicon", root / "terms.tsv", "--level", "word",
        "--mask-rate", "0.15", "--seed", "5", "--out", root / "small_entity.jsonl",
    )
    return {
        "root": root,
        "vocab": root / "vocab.txt",
        "vocab_ext": root / "vocab_ext.txt",
        "terms": root / "terms.tsv",
        "records": root / "records.jsonl",
        "small": root / "small.jsonl",
        "small_entity": root / "small_entity.jsonl",
        "train_pairs": root / "train_pairs.jsonl",
        "eval_pairs": root / "eval_pairs.jsonl",
        "empty": root / "empty.jsonl",
        "corpora": corpora,
    }
