"""Vocabulary handling and reversible subword encoding.

The vocabulary file format is one token per line; the line number is the
token id. The first five lines are reserved specials, and every printable
ASCII character (space excluded, it is the word separator) must be present
as a single-character token so any cleaned text can be encoded without an
unknown-token escape hatch.

Encoding is greedy longest-prefix within whitespace-separated words. When a
lexicon is supplied, entity mentions found in the text are emitted as their
single atomic token id before the subword pass sees the rest.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from radmask.errors import RadmaskError
from radmask.lexicon import EntityLexicon, find_entities

SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>", "[MASK]")
PAD_ID, BOS_ID, EOS_ID, UNK_ID, MASK_ID = range(5)
NUM_SPECIALS = len(SPECIAL_TOKENS)

# Single-char fallback alphabet: printable ASCII minus the space separator.
FALLBACK_CHARS = tuple(chr(c) for c in range(0x21, 0x7F))

_WORD_RE = re.compile(r"\S+")


class VocabError(RadmaskError):
    """Vocabulary file or construction violates the format contract."""


class UnencodableCharacter(RadmaskError):
    """A character has no token and no single-char fallback."""


class InvalidTokenId(RadmaskError):
    """Token id outside the vocabulary range."""


@dataclass
class TokenSequence:
    """Encoded text: ids plus a word-start flag per position.

    word_starts[i] is True when token i begins at the start of the string or
    right after whitespace; decode re-inserts a single space exactly there.
    """

    ids: list[int]
    word_starts: list[bool]

    def __post_init__(self) -> None:
        if len(self.ids) != len(self.word_starts):
            raise ValueError("ids and word_starts lengths differ")

    def __len__(self) -> int:
        return len(self.ids)


class Vocabulary:
    """Immutable token table with entity-id bookkeeping."""

    def __init__(self, tokens: Iterable[str], entity_token_ids: Iterable[int] = ()) -> None:
        tokens = tuple(tokens)
        if tokens[:NUM_SPECIALS] != SPECIAL_TOKENS:
            raise VocabError(
                f"first {NUM_SPECIALS} tokens must be {SPECIAL_TOKENS}, got {tokens[:NUM_SPECIALS]}"
            )
        token_to_id: dict[str, int] = {}
        for i, tok in enumerate(tokens):
            if tok != tok.strip() or not tok or "\n" in tok or "\t" in tok:
                raise VocabError(f"token {i} is empty or has framing whitespace: {tok!r}")
            if tok in token_to_id:
                raise VocabError(f"duplicate token {tok!r} at ids {token_to_id[tok]} and {i}")
            token_to_id[tok] = i
        missing = [c for c in FALLBACK_CHARS if c not in token_to_id]
        if missing:
            raise VocabError(
                f"missing single-character fallback tokens: {''.join(missing[:20])!r}"
                + ("..." if len(missing) > 20 else "")
            )
        entity_ids = frozenset(int(i) for i in entity_token_ids)
        for i in entity_ids:
            if not (NUM_SPECIALS <= i < len(tokens)):
                raise VocabError(f"entity token id {i} out of range or special")

        self.tokens = tokens
        self.token_to_id = token_to_id
        self.entity_token_ids = entity_ids
        # Greedy matching operates within words, so tokens containing spaces
        # (phrase entities) and specials never participate.
        self._word_ids = {
            t: i for t, i in token_to_id.items() if i >= NUM_SPECIALS and " " not in t
        }
        self._max_word_len = max(len(t) for t in self._word_ids)

    def __len__(self) -> int:
        return len(self.tokens)

    def is_special(self, token_id: int) -> bool:
        return 0 <= token_id < NUM_SPECIALS

    def content_hash(self) -> str:
        """sha256 of the canonical file serialization."""
        return hashlib.sha256(self._serialize().encode("utf-8")).hexdigest()

    def _serialize(self) -> str:
        return "\n".join(self.tokens) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self._serialize(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path, entity_token_ids: Iterable[int] = ()) -> "Vocabulary":
        text = Path(path).read_text(encoding="utf-8")
        lines = text.split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        if len(lines) < NUM_SPECIALS:
            raise VocabError(f"{path}: fewer than {NUM_SPECIALS} lines")
        return cls(lines, entity_token_ids)

    @classmethod
    def base(cls, extra_tokens: Iterable[str] = ()) -> "Vocabulary":
        """Smallest valid vocabulary plus caller-supplied tokens."""
        return cls(SPECIAL_TOKENS + FALLBACK_CHARS + tuple(extra_tokens))


def extend_vocab(
    vocab: Vocabulary, lexicon: EntityLexicon
) -> tuple[Vocabulary, dict]:
    """Append novel lexicon surfaces as atomic tokens.

    Existing ids never move; surfaces already present are reused. Returns the
    new vocabulary and a manifest with the size arithmetic and the full set
    of entity token ids (pre-existing and appended).
    """
    added = [s for s in lexicon.surfaces if s not in vocab.token_to_id]
    tokens = vocab.tokens + tuple(added)
    base_size = len(vocab.tokens)
    surface_ids = {base_size + pos for pos in range(len(added))} | {
        vocab.token_to_id[s] for s in lexicon.surfaces if s in vocab.token_to_id
    }
    entity_ids = vocab.entity_token_ids | surface_ids
    extended = Vocabulary(tokens, entity_ids)
    manifest = {
        "base_size": len(vocab),
        "added": len(added),
        "entity_token_ids": sorted(surface_ids),
    }
    return extended, manifest


def _greedy_word(vocab: Vocabulary, word: str) -> list[int]:
    ids = []
    table = vocab._word_ids
    max_len = vocab._max_word_len
    i = 0
    n = len(word)
    while i < n:
        end = min(n, i + max_len)
        tid = None
        for j in range(end, i, -1):
            tid = table.get(word[i:j])
            if tid is not None:
                ids.append(tid)
                i = j
                break
        if tid is None:
            ch = word[i]
            raise UnencodableCharacter(f"character {ch!r} (U+{ord(ch):04X}) has no token")
    return ids


def encode(
    vocab: Vocabulary, lexicon: EntityLexicon | None, text: str
) -> TokenSequence:
    """Text to token ids; entity mentions become atomic ids when a lexicon
    is given and the surface exists in the vocabulary.

    Unframed: no BOS/EOS/PAD are added. Raises UnencodableCharacter instead
    of ever emitting UNK.
    """
    ids: list[int] = []
    starts: list[bool] = []

    def add_plain(chunk: str, offset: int) -> None:
        for m in _WORD_RE.finditer(chunk):
            abs_pos = offset + m.start()
            word_ids = _greedy_word(vocab, m.group())
            for k, tid in enumerate(word_ids):
                ids.append(tid)
                starts.append(k == 0 and _at_word_start(text, abs_pos))

    spans = find_entities(lexicon, text) if lexicon is not None else []
    cursor = 0
    for span in spans:
        atomic = vocab.token_to_id.get(span.surface)
        if atomic is None:
            # Surface not in vocabulary: leave the mention to the subword pass.
            continue
        add_plain(text[cursor : span.start], cursor)
        ids.append(atomic)
        starts.append(_at_word_start(text, span.start))
        cursor = span.end
    add_plain(text[cursor:], cursor)
    return TokenSequence(ids, starts)


def _at_word_start(text: str, pos: int) -> bool:
    return pos == 0 or text[pos - 1].isspace()


def decode(vocab: Vocabulary, seq: TokenSequence) -> str:
    """Ids back to text. PAD/BOS/EOS/UNK vanish; MASK renders literally.

    A single space precedes each word-start token except the first emitted
    one, which reverses encode exactly on cleaned (single-spaced) text.
    """
    parts: list[str] = []
    size = len(vocab)
    for tid, ws in zip(seq.ids, seq.word_starts):
        if not 0 <= tid < size:
            raise InvalidTokenId(f"token id {tid} outside [0, {size})")
        if tid in (PAD_ID, BOS_ID, EOS_ID, UNK_ID):
            continue
        if parts and ws:
            parts.append(" ")
        parts.append(vocab.tokens[tid])
    return "".join(parts)
