"""Masked-LM example generation.

Three selection kinds over an encoded sequence:

* random        independent Bernoulli(mask_rate) per maskable position
* entity_word   budget round(mask_rate * maskable), entity positions first
* entity_phrase same budget rule over atomic phrase tokens

Maskable means non-special (id >= 5). Selected positions are corrupted
either as pure_mask (always [MASK]) or bert_80_10_10 (80% [MASK], 10%
random non-special id, 10% unchanged). Entity kinds default to pure_mask,
random defaults to bert_80_10_10.

Determinism contract: each record gets its own PCG64 stream seeded with
strategy.seed XOR blake2b-64(record id), so output is reproducible and
independent of record order. Draw order within a record is fixed: entity
selection, then non-entity selection, then corruption draws in ascending
position order.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from radmask.errors import RadmaskError
from radmask.lexicon import EntityLexicon
from radmask.tokenizer import NUM_SPECIALS, MASK_ID, Vocabulary, encode

log = logging.getLogger(__name__)

KINDS = ("random", "entity_word", "entity_phrase")
CORRUPTIONS = ("pure_mask", "bert_80_10_10")


class EmptySequence(RadmaskError):
    """Masking requested on an empty token sequence."""


class ConfigMismatch(RadmaskError):
    """Strategy, lexicon, and vocabulary do not fit together."""


@dataclass(frozen=True)
class MaskingStrategy:
    kind: str
    mask_rate: float = 0.15
    entity_fraction: float = 1.0
    corruption: str | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigMismatch(f"unknown masking kind {self.kind!r}, expected one of {KINDS}")
        if not 0.0 < self.mask_rate <= 1.0:
            raise ConfigMismatch(f"mask_rate must be in (0, 1], got {self.mask_rate}")
        if not 0.0 <= self.entity_fraction <= 1.0:
            raise ConfigMismatch(f"entity_fraction must be in [0, 1], got {self.entity_fraction}")
        if self.corruption is not None and self.corruption not in CORRUPTIONS:
            raise ConfigMismatch(
                f"unknown corruption {self.corruption!r}, expected one of {CORRUPTIONS}"
            )
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigMismatch(f"seed must be a non-negative integer, got {self.seed!r}")

    @property
    def resolved_corruption(self) -> str:
        if self.corruption is not None:
            return self.corruption
        return "bert_80_10_10" if self.kind == "random" else "pure_mask"


@dataclass(frozen=True)
class MaskedExample:
    """Corrupted sequence plus what it takes to undo the corruption.

    originals[k] is the pre-corruption id at mask_positions[k]; restoring
    them reproduces the encoded source sequence exactly.
    """

    id: str
    input_ids: tuple[int, ...]
    mask_positions: tuple[int, ...]
    originals: tuple[int, ...]

    def restore(self) -> list[int]:
        ids = list(self.input_ids)
        for pos, orig in zip(self.mask_positions, self.originals):
            ids[pos] = orig
        return ids


def record_rng(strategy: MaskingStrategy, record_id: str) -> np.random.Generator:
    """Per-record generator; stable under reordering of the corpus."""
    h = hashlib.blake2b(record_id.encode("utf-8"), digest_size=8).digest()
    return np.random.Generator(np.random.PCG64(strategy.seed ^ int.from_bytes(h, "big")))


def _select_positions(
    ids: Sequence[int],
    strategy: MaskingStrategy,
    rng: np.random.Generator,
    entity_ids: frozenset[int] | None,
) -> list[int]:
    maskable = [i for i, t in enumerate(ids) if t >= NUM_SPECIALS]
    if not maskable:
        return []
    if strategy.kind == "random":
        draws = rng.random(len(maskable))
        return [pos for pos, u in zip(maskable, draws) if u < strategy.mask_rate]

    assert entity_ids is not None
    entity_pos = [i for i in maskable if ids[i] in entity_ids]
    other_pos = [i for i in maskable if ids[i] not in entity_ids]
    budget = round(strategy.mask_rate * len(maskable))
    want_entity = round(strategy.entity_fraction * budget)
    take_entity = min(want_entity, len(entity_pos))
    # Entity shortfall spills to ordinary positions; never the reverse, so
    # entity_fraction=0 keeps entity tokens untouched even in tiny records.
    take_other = min(budget - take_entity, len(other_pos))
    chosen: list[int] = []
    if take_entity:
        chosen.extend(int(p) for p in rng.choice(entity_pos, size=take_entity, replace=False))
    if take_other:
        chosen.extend(int(p) for p in rng.choice(other_pos, size=take_other, replace=False))
    return sorted(chosen)


def _seq_ids(seq) -> list[int]:
    return list(seq.ids) if hasattr(seq, "ids") else list(seq)


def _apply(
    ids: list[int],
    strategy: MaskingStrategy,
    vocab: Vocabulary,
    rng: np.random.Generator,
    entity_ids: frozenset[int] | None,
    record_id: str,
) -> MaskedExample:
    if len(ids) == 0:
        raise EmptySequence(f"record {record_id!r}")
    positions = _select_positions(ids, strategy, rng, entity_ids)
    input_ids = list(ids)
    originals = [input_ids[p] for p in positions]
    if strategy.resolved_corruption == "pure_mask":
        for p in positions:
            input_ids[p] = MASK_ID
    else:
        vocab_size = len(vocab)
        for p in positions:
            u = rng.random()
            if u < 0.8:
                input_ids[p] = MASK_ID
            elif u < 0.9:
                input_ids[p] = int(rng.integers(NUM_SPECIALS, vocab_size))
            # else: keep the original id (still predicted at this position)
    return MaskedExample(
        id=record_id,
        input_ids=tuple(input_ids),
        mask_positions=tuple(positions),
        originals=tuple(originals),
    )


def apply_random_masking(
    seq,
    strategy: MaskingStrategy,
    vocab: Vocabulary,
    rng: np.random.Generator,
    record_id: str = "",
) -> MaskedExample:
    """Bernoulli(mask_rate) selection over non-special positions.

    seq may be a TokenSequence or a plain id sequence. Special positions are
    never selected; raises EmptySequence on empty input.
    """
    if strategy.kind != "random":
        raise ConfigMismatch(f"apply_random_masking got strategy kind {strategy.kind!r}")
    return _apply(_seq_ids(seq), strategy, vocab, rng, None, record_id)


def apply_entity_masking(
    seq,
    entity_token_ids: frozenset[int],
    strategy: MaskingStrategy,
    vocab: Vocabulary,
    rng: np.random.Generator,
    record_id: str = "",
) -> MaskedExample:
    """Budgeted selection favoring entity positions.

    Budget is round(mask_rate * maskable); round(entity_fraction * budget)
    positions come from entity tokens (capped by availability, shortfall
    spilling to ordinary positions), the rest from ordinary ones.
    """
    if strategy.kind not in ("entity_word", "entity_phrase"):
        raise ConfigMismatch(f"apply_entity_masking got strategy kind {strategy.kind!r}")
    return _apply(
        _seq_ids(seq), strategy, vocab, rng, frozenset(entity_token_ids), record_id
    )


def entity_id_set(vocab: Vocabulary, lexicon: EntityLexicon) -> frozenset[int]:
    """Ids of lexicon surfaces present in the vocabulary."""
    return frozenset(
        vocab.token_to_id[s] for s in lexicon.surfaces if s in vocab.token_to_id
    )


def _check_lexicon(strategy: MaskingStrategy, vocab: Vocabulary, lexicon: EntityLexicon | None):
    if strategy.kind == "random":
        return entity_id_set(vocab, lexicon) if lexicon is not None else frozenset()
    if lexicon is None:
        raise ConfigMismatch(f"{strategy.kind} masking requires a lexicon")
    expected_level = "word" if strategy.kind == "entity_word" else "phrase"
    if lexicon.level != expected_level:
        raise ConfigMismatch(
            f"{strategy.kind} masking needs a {expected_level}-level lexicon, got {lexicon.level!r}"
        )
    ids = entity_id_set(vocab, lexicon)
    if not ids:
        raise ConfigMismatch(
            "no lexicon surface exists in the vocabulary; extend the vocabulary first"
        )
    return ids


def generate_mlm_corpus(
    records: Iterable[Mapping[str, str]],
    vocab: Vocabulary,
    lexicon: EntityLexicon | None,
    strategy: MaskingStrategy,
) -> tuple[list[MaskedExample], dict]:
    """Mask a whole text corpus ({"id","text"} records).

    Records that fail to encode or have no maskable token are dropped with a
    logged diagnostic and counted in the manifest. The manifest carries the
    resolved strategy, realized rates, corruption branch counts, and the
    vocabulary content hash.
    """
    entity_ids = _check_lexicon(strategy, vocab, lexicon)
    examples: list[MaskedExample] = []
    dropped = 0
    total_maskable = 0
    total_selected = 0
    entity_selected = 0
    branch = {"mask": 0, "random": 0, "unchanged": 0}
    for rec in records:
        rid = str(rec["id"])
        try:
            seq = encode(vocab, lexicon, rec["text"])
            maskable = sum(1 for t in seq.ids if t >= NUM_SPECIALS)
            if maskable == 0:
                raise EmptySequence("no maskable tokens")
            ex = _apply(
                seq.ids, strategy, vocab, record_rng(strategy, rid), entity_ids, rid
            )
        except RadmaskError as err:
            dropped += 1
            log.warning("dropping record %s: %s", rid, err)
            continue
        examples.append(ex)
        total_maskable += maskable
        total_selected += len(ex.mask_positions)
        entity_selected += sum(1 for o in ex.originals if o in entity_ids)
        # Branch classification is observational: a random replacement that
        # happens to redraw the original id counts as unchanged.
        for p, orig in zip(ex.mask_positions, ex.originals):
            got = ex.input_ids[p]
            if got == MASK_ID:
                branch["mask"] += 1
            elif got == orig:
                branch["unchanged"] += 1
            else:
                branch["random"] += 1
    manifest = {
        "strategy": {
            "kind": strategy.kind,
            "mask_rate": strategy.mask_rate,
            "entity_fraction": strategy.entity_fraction,
            "corruption": strategy.resolved_corruption,
        },
        "seed": strategy.seed,
        "records": len(examples),
        "dropped": dropped,
        "realized_mask_rate": (total_selected / total_maskable) if total_maskable else 0.0,
        "realized_entity_share": (entity_selected / total_selected) if total_selected else 0.0,
        "corruption_counts": branch,
        "vocab_hash": vocab.content_hash(),
    }
    return examples, manifest
