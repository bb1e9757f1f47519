"""Corpus files: canonical JSONL, seeded splits, leakage checks.

Canonical serialization is UTF-8 JSON with no spaces and keys in schema
order, one record per line. Writers are atomic (temp file + rename) and the
whole module is timestamp-free, so identical inputs give byte-identical
files on every run.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from radmask.errors import RadmaskError

log = logging.getLogger(__name__)


class CorpusError(RadmaskError):
    """Unreadable or malformed corpus file."""


class InsufficientRecords(RadmaskError):
    """Requested split sizes exceed the available records."""


class SchemaMismatch(RadmaskError):
    """Records do not share one schema, or carry no usable text field."""


def canonical_dumps(record: Mapping) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path: str | Path, records: Iterable[Mapping]) -> int:
    """Atomically write records as canonical JSONL. Returns the count."""
    path = Path(path)
    count = 0
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(canonical_dumps(rec))
                fh.write("\n")
                count += 1
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return count


def write_json(path: str | Path, payload: Mapping) -> None:
    """Atomic single-document JSON (manifests, reports, config snapshots)."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(payload, ensure_ascii=False, indent=2))
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def read_jsonl(path: str | Path, skip_invalid: bool = False) -> Iterator[dict]:
    """Yield one dict per line.

    With skip_invalid, malformed lines are logged and dropped instead of
    raising CorpusError. Blank lines are always ignored.
    """
    path = Path(path)
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as err:
        raise CorpusError(f"cannot read {path}: {err}") from err
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                if not isinstance(rec, dict):
                    raise ValueError("line is not a JSON object")
            except ValueError as err:
                if skip_invalid:
                    log.warning("%s:%d: skipping bad line (%s)", path, lineno, err)
                    continue
                raise CorpusError(f"{path}:{lineno}: {err}") from err
            yield rec


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def normalized_text_key(record: Mapping) -> str:
    """Content hash that ignores case and whitespace differences."""
    if "text" in record:
        body = _norm(record["text"])
    elif "input" in record and "target" in record:
        body = _norm(record["input"]) + "\n" + _norm(record["target"])
    elif "sections" in record:
        body = _norm(" ".join(s.get("body", "") for s in record["sections"]))
    else:
        raise SchemaMismatch(
            f"record {record.get('id')!r} has no text/input+target/sections field"
        )
    return hashlib.sha256(body.encode("utf-8")).hexdigest()


def _norm(text: str) -> str:
    return " ".join(str(text).lower().split())


@dataclass(frozen=True)
class SplitSpec:
    """Named split sizes (exact counts) or ratios (floored), plus a seed."""

    seed: int
    sizes: Mapping[str, int] | None = None
    ratios: Mapping[str, float] | None = None

    def __post_init__(self) -> None:
        if (self.sizes is None) == (self.ratios is None):
            raise ValueError("provide exactly one of sizes or ratios")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if self.sizes is not None:
            for name, c in self.sizes.items():
                if int(c) < 0:
                    raise ValueError(f"split {name!r} has negative size {c}")
        else:
            for name, r in self.ratios.items():
                if not 0.0 <= float(r) <= 1.0:
                    raise ValueError(f"split {name!r} ratio {r} outside [0, 1]")
            if sum(float(r) for r in self.ratios.values()) > 1.0 + 1e-9:
                raise ValueError("ratios sum to more than 1")

    def counts(self, n: int) -> dict[str, int]:
        if self.sizes is not None:
            return {name: int(c) for name, c in self.sizes.items()}
        return {name: int(float(r) * n) for name, r in self.ratios.items()}


def split_dataset(
    records: Sequence[Mapping], spec: SplitSpec, out_dir: str | Path
) -> dict:
    """Shuffle once under spec.seed and cut contiguous splits in spec order.

    Ratio counts are floored and any remainder stays unassigned. Duplicate
    ids and duplicate normalized-text records are dropped first (first
    occurrence wins) so the produced splits always verify as leak-free.
    Writes <name>.jsonl, <name>.ids and split_manifest.json into out_dir and
    returns the manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    deduped: list[Mapping] = []
    seen_ids: set[str] = set()
    seen_text: set[str] = set()
    dropped = 0
    for rec in records:
        rid = str(rec.get("id"))
        key = normalized_text_key(rec)
        if rid in seen_ids or key in seen_text:
            dropped += 1
            log.warning("split: dropping duplicate record %s", rid)
            continue
        seen_ids.add(rid)
        seen_text.add(key)
        deduped.append(rec)

    n = len(deduped)
    counts = spec.counts(n)
    total = sum(counts.values())
    if total > n:
        raise InsufficientRecords(f"need {total} records, have {n} after deduplication")

    perm = np.random.Generator(np.random.PCG64(spec.seed)).permutation(n)
    shuffled = [deduped[i] for i in perm]

    manifest_splits = []
    start = 0
    for name, count in counts.items():
        part = shuffled[start : start + count]
        start += count
        jsonl_path = out_dir / f"{name}.jsonl"
        ids_path = out_dir / f"{name}.ids"
        write_jsonl(jsonl_path, part)
        _atomic_text(ids_path, "".join(str(r["id"]) + "\n" for r in part))
        manifest_splits.append(
            {
                "name": name,
                "count": count,
                "ids_file": ids_path.name,
                "sha256": sha256_file(jsonl_path),
            }
        )
    manifest = {"seed": spec.seed, "splits": manifest_splits, "dropped_duplicates": dropped}
    write_json(out_dir / "split_manifest.json", manifest)
    return manifest


def _atomic_text(path: Path, content: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(content)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def verify_disjoint(paths: Sequence[str | Path]) -> dict:
    """Cross-file leakage report over split files.

    Returns {"files", "records", "id_collisions", "text_collisions"};
    id_collisions lists ids occurring more than once anywhere, and
    text_collisions lists id groups sharing one normalized-text hash.
    All record key sets must match (SchemaMismatch otherwise).
    """
    schema: frozenset[str] | None = None
    by_id: dict[str, int] = {}
    by_text: dict[str, list[str]] = {}
    records = 0
    for path in paths:
        for rec in read_jsonl(path):
            records += 1
            keys = frozenset(rec.keys())
            if schema is None:
                schema = keys
            elif keys != schema:
                raise SchemaMismatch(
                    f"{path}: record keys {sorted(keys)} != {sorted(schema)}"
                )
            rid = str(rec.get("id"))
            by_id[rid] = by_id.get(rid, 0) + 1
            by_text.setdefault(normalized_text_key(rec), []).append(rid)
    return {
        "files": len(paths),
        "records": records,
        "id_collisions": sorted(rid for rid, c in by_id.items() if c > 1),
        "text_collisions": sorted(
            [sorted(ids) for ids in by_text.values() if len(ids) > 1]
        ),
    }
