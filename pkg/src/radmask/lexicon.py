"""Entity dictionaries and dictionary-based span matching.

A lexicon is an ordered set of (concept_id, surface) entries at a given
granularity level: "phrase" surfaces may contain spaces, "word" surfaces may
not. Matching is case-insensitive, leftmost-longest, non-overlapping, and
only accepts spans whose ends fall on word boundaries, so "rib" never fires
inside "describe" or "ribs".
"""

from __future__ import annotations

import hashlib
import json
import logging
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from radmask import _kernels
from radmask.errors import RadmaskError

log = logging.getLogger(__name__)

LEVELS = ("word", "phrase")


class ParseError(RadmaskError):
    """Malformed lexicon file or entry."""


class EmptyLexicon(RadmaskError):
    """Lexicon ended up with zero usable entries."""


@dataclass(frozen=True)
class EntitySpan:
    """One accepted match: [start, end) offsets into the searched text."""

    start: int
    end: int
    surface: str
    concept_id: str


def fold_case(text: str) -> str:
    """Length-preserving lowercase fold.

    Offsets must keep indexing the original text, so characters whose
    lowercase form changes length are left untouched.
    """
    out = []
    for ch in text:
        low = ch.lower()
        out.append(low if len(low) == 1 else ch)
    return "".join(out)


def _normalize_surface(surface: str) -> str:
    return " ".join(fold_case(surface).split())


class EntityLexicon:
    """Ordered, deduplicated entity dictionary with a compiled matcher."""

    def __init__(self, entries: Iterable[tuple[str, str]], level: str) -> None:
        if level not in LEVELS:
            raise ParseError(f"unknown lexicon level {level!r}, expected one of {LEVELS}")
        surfaces: list[str] = []
        concepts: list[str] = []
        seen: set[str] = set()
        for concept_id, raw_surface in entries:
            surface = _normalize_surface(raw_surface)
            if not surface:
                raise ParseError("empty surface form")
            if level == "word" and " " in surface:
                # Multi-word rows don't belong in a word-level list; they are
                # rejected individually rather than failing the whole load.
                log.warning("rejecting multi-word surface %r in word-level lexicon", surface)
                continue
            if surface in seen:
                log.warning("duplicate surface %r, keeping first concept id", surface)
                continue
            seen.add(surface)
            surfaces.append(surface)
            concepts.append(str(concept_id))
        if not surfaces:
            raise EmptyLexicon("no usable entries")
        self.level = level
        self.surfaces: tuple[str, ...] = tuple(surfaces)
        self.concept_ids: tuple[str, ...] = tuple(concepts)
        self._matcher = _kernels.prepare_automaton(_build_automaton(self.surfaces))

    def __len__(self) -> int:
        return len(self.surfaces)

    def entries(self) -> Iterator[tuple[str, str]]:
        return zip(self.concept_ids, self.surfaces)


def _build_automaton(patterns: tuple[str, ...]) -> dict:
    """Flatten the pattern trie + failure links into CSR int arrays.

    Layout consumed by both kernel backends: per-state edge ranges
    (edge_starts) into char-sorted (edge_chars, edge_next); fail[s] is the
    longest proper suffix state; term_pid[s] the pattern ending exactly at s
    or -1; out_link[s] the nearest terminal suffix state or -1.
    """
    children: list[dict[int, int]] = [{}]
    term = [-1]
    for pid, pat in enumerate(patterns):
        s = 0
        for ch in pat:
            c = ord(ch)
            nxt = children[s].get(c)
            if nxt is None:
                children.append({})
                term.append(-1)
                nxt = len(children) - 1
                children[s][c] = nxt
            s = nxt
        term[s] = pid

    n_states = len(children)
    fail = [0] * n_states
    out_link = [-1] * n_states
    queue: deque[int] = deque()
    for v in children[0].values():
        queue.append(v)
    while queue:
        u = queue.popleft()
        for c, v in children[u].items():
            queue.append(v)
            f = fail[u]
            while f and c not in children[f]:
                f = fail[f]
            fail[v] = children[f].get(c, 0)
            out_link[v] = fail[v] if term[fail[v]] != -1 else out_link[fail[v]]

    edge_starts = [0]
    edge_chars: list[int] = []
    edge_next: list[int] = []
    for s in range(n_states):
        for c in sorted(children[s]):
            edge_chars.append(c)
            edge_next.append(children[s][c])
        edge_starts.append(len(edge_chars))

    return {
        "edge_starts": edge_starts,
        "edge_chars": edge_chars,
        "edge_next": edge_next,
        "fail": fail,
        "term_pid": term,
        "out_link": out_link,
        "pat_len": [len(p) for p in patterns],
    }


def find_entities(lexicon: EntityLexicon, text: str) -> list[EntitySpan]:
    """Leftmost-longest non-overlapping entity spans in text.

    Spans index the original text; the surface field carries the lexicon's
    normalized form. Both ends of every span sit on word boundaries
    (start/end of text, or an alnum/non-alnum transition).
    """
    folded = fold_case(text)
    candidates = _kernels.scan_candidates(lexicon._matcher, folded)
    candidates.sort(key=lambda c: (c[0], -c[1]))
    spans: list[EntitySpan] = []
    cursor = 0
    for start, end, pid in candidates:
        if start >= cursor:
            spans.append(
                EntitySpan(start, end, lexicon.surfaces[pid], lexicon.concept_ids[pid])
            )
            cursor = end
    return spans


def derive_word_level(lexicon: EntityLexicon) -> EntityLexicon:
    """Split phrase surfaces into single words, first occurrence wins.

    Each word inherits the concept id of the first phrase it appeared in.
    Order follows first appearance while walking the phrase list.
    """
    if lexicon.level != "phrase":
        raise ParseError("derive_word_level expects a phrase-level lexicon")
    entries: list[tuple[str, str]] = []
    seen: set[str] = set()
    for concept_id, surface in lexicon.entries():
        for word in surface.split():
            if word not in seen:
                seen.add(word)
                entries.append((concept_id, word))
    return EntityLexicon(entries, "word")


def load_lexicon(path: str | Path, level: str, use_cache: bool = False) -> EntityLexicon:
    """Read a tab-separated lexicon file: concept_id<TAB>surface per line.

    Blank lines and lines starting with "#" are skipped. With use_cache a
    sidecar JSON keyed by the file's content hash skips re-parsing.
    """
    path = Path(path)
    data = path.read_bytes()
    digest = hashlib.sha256(data).hexdigest()
    cache_path = path.with_name(path.name + ".cache.json")
    if use_cache and cache_path.exists():
        try:
            cached = json.loads(cache_path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            cached = None
        if (
            cached
            and cached.get("sha256") == digest
            and cached.get("level") == level
        ):
            return EntityLexicon(
                [(c, s) for c, s in cached["entries"]], level
            )

    entries: list[tuple[str, str]] = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "\t" not in line:
            raise ParseError(f"{path}:{lineno}: expected concept_id<TAB>surface")
        concept_id, _, surface = line.partition("\t")
        concept_id = concept_id.strip()
        if not concept_id or not surface.strip():
            raise ParseError(f"{path}:{lineno}: empty concept id or surface")
        entries.append((concept_id, surface))
    lexicon = EntityLexicon(entries, level)

    if use_cache:
        payload = {
            "sha256": digest,
            "level": level,
            "entries": [list(e) for e in lexicon.entries()],
        }
        try:
            cache_path.write_text(
                json.dumps(payload, ensure_ascii=False), encoding="utf-8"
            )
        except OSError:
            log.warning("could not write lexicon cache %s", cache_path)
    return lexicon


def save_lexicon(lexicon: EntityLexicon, path: str | Path) -> None:
    """Write the normalized entries back out in TSV form."""
    lines = [f"{c}\t{s}\n" for c, s in lexicon.entries()]
    Path(path).write_text("".join(lines), encoding="utf-8")
