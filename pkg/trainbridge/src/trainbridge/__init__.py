"""Desk-scale two-stage training harness over radmask corpora."""

from trainbridge.errors import (
    CheckpointShapeMismatch,
    EmptyCorpus,
    NotAnExtension,
    TrainBridgeError,
    VocabMismatch,
)
from trainbridge.model import TinyModelConfig, TinySeq2Seq
from trainbridge.training import (
    LOGPROB_FLOOR,
    StageConfig,
    banned_next_tokens,
    beam_search,
    extend_embeddings,
    finetune_summarize,
    linear_schedule,
    load_checkpoint,
    read_jsonl,
    retrain_mlm,
    save_checkpoint,
    write_jsonl,
)
from trainbridge.vocab import (
    BOS_ID,
    EOS_ID,
    MASK_ID,
    NUM_SPECIALS,
    PAD_ID,
    SPECIAL_TOKENS,
    UNK_ID,
    VocabFile,
    check_corpus_vocab,
    manifest_sidecar,
)

__all__ = [
    "BOS_ID",
    "CheckpointShapeMismatch",
    "EOS_ID",
    "EmptyCorpus",
    "LOGPROB_FLOOR",
    "MASK_ID",
    "NUM_SPECIALS",
    "NotAnExtension",
    "PAD_ID",
    "SPECIAL_TOKENS",
    "StageConfig",
    "TinyModelConfig",
    "TinySeq2Seq",
    "TrainBridgeError",
    "UNK_ID",
    "VocabFile",
    "VocabMismatch",
    "banned_next_tokens",
    "beam_search",
    "check_corpus_vocab",
    "extend_embeddings",
    "finetune_summarize",
    "linear_schedule",
    "load_checkpoint",
    "manifest_sidecar",
    "read_jsonl",
    "retrain_mlm",
    "save_checkpoint",
    "write_jsonl",
]
