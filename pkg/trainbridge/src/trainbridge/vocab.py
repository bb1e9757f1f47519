"""Adapter for the corpus toolkit's vocabulary files.

The file format is the interface: one token per line, line number = id,
five special tokens first, printable single characters present as subword
fallback. Nothing here imports the toolkit; the hash is recomputed from the
file so it can be compared against corpus manifests.
"""

import hashlib
import json
from pathlib import Path

from trainbridge.errors import VocabMismatch

SPECIAL_TOKENS = ("<pad>", "<bos>", "<eos>", "<unk>", "[MASK]")
PAD_ID, BOS_ID, EOS_ID, UNK_ID, MASK_ID = range(5)
NUM_SPECIALS = len(SPECIAL_TOKENS)


class VocabFile:
    def __init__(self, tokens) -> None:
        tokens = tuple(tokens)
        if tokens[:NUM_SPECIALS] != SPECIAL_TOKENS:
            raise VocabMismatch(
                f"vocabulary must start with {SPECIAL_TOKENS}, got {tokens[:NUM_SPECIALS]}"
            )
        self.tokens = tokens
        self.token_to_id = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def load(cls, path) -> "VocabFile":
        lines = Path(path).read_text(encoding="utf-8").split("\n")
        if lines and lines[-1] == "":
            lines.pop()
        return cls(lines)

    def content_hash(self) -> str:
        """sha256 over the canonical serialization, matching corpus manifests."""
        payload = "\n".join(self.tokens) + "\n"
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def encode_word(self, word: str) -> list[int]:
        """Exact token id, else per-character ids, else <unk>."""
        tid = self.token_to_id.get(word)
        if tid is not None:
            return [tid]
        ids = [self.token_to_id[ch] for ch in word if ch in self.token_to_id]
        return ids or [UNK_ID]

    def encode_text(self, text: str) -> list[int]:
        ids: list[int] = []
        for word in text.split():
            ids.extend(self.encode_word(word))
        return ids

    def decode_ids(self, ids) -> str:
        """Whitespace-joined tokens; pad/bos/eos vanish, [MASK] stays literal.

        Exact inverse of encode_text when every word is a vocabulary token,
        which is the regime the harness operates in.
        """
        words = [self.tokens[i] for i in ids if i not in (PAD_ID, BOS_ID, EOS_ID)]
        return " ".join(words)


def manifest_sidecar(corpus_path) -> Path:
    p = Path(corpus_path)
    return p.with_name(p.stem + ".manifest.json")


def check_corpus_vocab(corpus_path, vocab: VocabFile) -> dict:
    """Verify the corpus manifest's vocab hash against the vocabulary file.

    The manifest sits next to the corpus (foo.jsonl -> foo.manifest.json).
    A missing manifest means the precondition cannot be verified at all, so
    it is treated as a mismatch rather than silently trusted.
    """
    sidecar = manifest_sidecar(corpus_path)
    if not sidecar.exists():
        raise VocabMismatch(f"no manifest at {sidecar}; cannot verify the vocabulary")
    manifest = json.loads(sidecar.read_text(encoding="utf-8"))
    recorded = manifest.get("vocab_hash")
    actual = vocab.content_hash()
    if recorded != actual:
        raise VocabMismatch(
            f"corpus was built with vocabulary {recorded}, file hashes to {actual}"
        )
    return manifest
