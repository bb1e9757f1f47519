"""Two-stage training harness plus checkpoint and embedding-extension ops.

Stage one re-trains with masked-token prediction on a corpus produced by the
masking toolkit; stage two fine-tunes the same weights into summarization
and decodes with beam search. Both consume files (JSONL corpora, vocabulary,
sidecar manifests) and emit files scoreable by the toolkit's eval commands.
"""

import json
import logging
import math
import shutil
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from trainbridge.errors import (
    CheckpointShapeMismatch,
    EmptyCorpus,
    NotAnExtension,
)
from trainbridge.model import TinyModelConfig, TinySeq2Seq
from trainbridge.vocab import (
    BOS_ID,
    EOS_ID,
    PAD_ID,
    VocabFile,
    check_corpus_vocab,
)

log = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
# Floor for emitted log-probs: keeps every value finite and <= 0 without
# affecting perplexity at desk scale.
LOGPROB_FLOOR = -80.0

STAGE_DEFAULTS = {
    "retrain": {"learning_rate": 5e-5, "warmup_steps": 500, "batch_size": 4},
    "finetune": {"learning_rate": 2e-5, "warmup_steps": 0, "batch_size": 16},
}
MAX_EPOCHS = 20


@dataclass(frozen=True)
class StageConfig:
    """Per-stage optimization settings; unset fields take stage defaults."""

    stage: str
    learning_rate: float | None = None
    warmup_steps: int | None = None
    epochs: int = 3
    batch_size: int | None = None
    beam_size: int = 5
    no_repeat_ngram: int = 2
    seed: int = 0
    holdout_fraction: float = 0.1

    def __post_init__(self):
        if self.stage not in STAGE_DEFAULTS:
            raise ValueError(f"stage must be one of {sorted(STAGE_DEFAULTS)}, got {self.stage!r}")
        if not 0 <= self.epochs <= MAX_EPOCHS:
            raise ValueError(f"epochs must be within 0..{MAX_EPOCHS}")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size is not None and self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.beam_size < 1:
            raise ValueError("beam size must be >= 1")
        if self.no_repeat_ngram < 0:
            raise ValueError("no_repeat_ngram must be >= 0")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout fraction must be in (0, 1)")

    @property
    def lr(self) -> float:
        return self.learning_rate if self.learning_rate is not None else STAGE_DEFAULTS[self.stage]["learning_rate"]

    @property
    def warmup(self) -> int:
        return self.warmup_steps if self.warmup_steps is not None else STAGE_DEFAULTS[self.stage]["warmup_steps"]

    @property
    def batch(self) -> int:
        return self.batch_size if self.batch_size is not None else STAGE_DEFAULTS[self.stage]["batch_size"]


def linear_schedule(optimizer, warmup: int, total_steps: int):
    """Linear warmup to the base rate, then linear decay to zero."""

    def factor(step: int) -> float:
        if warmup and step < warmup:
            return (step + 1) / warmup
        if total_steps <= warmup:
            return 1.0
        return max(0.0, (total_steps - step) / (total_steps - warmup))

    return torch.optim.lr_scheduler.LambdaLR(optimizer, factor)


# ------------------------------------------------------------- file helpers


def _dumps(record) -> str:
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def write_jsonl(path, records) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in records:
            fh.write(_dumps(rec) + "\n")
            n += 1
    return n


def read_jsonl(path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_json(path, payload) -> None:
    Path(path).write_text(_dumps(payload) + "\n", encoding="utf-8")


# -------------------------------------------------------------- checkpoints


def save_checkpoint(path, model: TinySeq2Seq, vocab_hash: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    torch.save(
        {
            "format_version": CHECKPOINT_VERSION,
            "model_config": asdict(model.config),
            "vocab_size": model.vocab_size,
            "vocab_hash": vocab_hash,
            "state_dict": model.state_dict(),
        },
        path,
    )


def load_checkpoint(path) -> dict:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise CheckpointShapeMismatch(f"unsupported checkpoint format_version {version!r}")
    return payload


def _model_from_checkpoint(payload: dict) -> TinySeq2Seq:
    model = TinySeq2Seq(TinyModelConfig(**payload["model_config"]), payload["vocab_size"])
    model.load_state_dict(payload["state_dict"])
    return model


# ---------------------------------------------------------------- retraining


def _pad_batch(seqs: list[list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
    width = max(len(s) for s in seqs)
    ids = torch.full((len(seqs), width), PAD_ID, dtype=torch.long)
    pad = torch.ones((len(seqs), width), dtype=torch.bool)
    for i, s in enumerate(seqs):
        ids[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        pad[i, : len(s)] = False
    return ids, pad


def _restore_originals(rec: dict) -> list[int]:
    ids = list(rec["input_ids"])
    for p, t in zip(rec["mask_positions"], rec["originals"]):
        ids[p] = t
    return ids


def _reconstruction_logits(model: TinySeq2Seq, batch: list[dict]) -> torch.Tensor:
    """Teacher-forced denoising pass: encode the corrupted sequence, decode
    the original one; logits[i, p] is the distribution for original token p."""
    src, src_pad = _pad_batch([r["input_ids"] for r in batch])
    originals = [_restore_originals(r) for r in batch]
    tgt_in, _ = _pad_batch([[BOS_ID] + o[:-1] for o in originals])
    return model.seq2seq_logits(src, src_pad, tgt_in)


def _mlm_loss(model: TinySeq2Seq, batch: list[dict]) -> tuple[torch.Tensor, int]:
    """Cross-entropy at masked positions only, under the denoising pass."""
    logits = _reconstruction_logits(model, batch)
    rows, cols, targets = [], [], []
    for i, rec in enumerate(batch):
        rows.extend([i] * len(rec["mask_positions"]))
        cols.extend(rec["mask_positions"])
        targets.extend(rec["originals"])
    picked = logits[rows, cols]
    loss = nn.functional.cross_entropy(picked, torch.tensor(targets, dtype=torch.long))
    return loss, len(targets)


def _clip_record(rec: dict, limit: int) -> dict | None:
    """Truncate to the model's input window, dropping out-of-window masks."""
    if len(rec["input_ids"]) <= limit:
        return rec
    kept = [(p, o) for p, o in zip(rec["mask_positions"], rec["originals"]) if p < limit]
    if not kept:
        return None
    return {
        "id": rec["id"],
        "input_ids": rec["input_ids"][:limit],
        "mask_positions": [p for p, _ in kept],
        "originals": [o for _, o in kept],
    }


def _batches(records: list, size: int, rng: np.random.Generator):
    order = rng.permutation(len(records))
    for i in range(0, len(records), size):
        yield [records[j] for j in order[i : i + size]]


def _heldout_eval(model: TinySeq2Seq, shard: list[dict], batch: int) -> float:
    """Mean cross-entropy (nats) over every held-out masked position."""
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for i in range(0, len(shard), batch):
            loss, n = _mlm_loss(model, shard[i : i + batch])
            total += loss.item() * n
            count += n
    model.train()
    return total / count


def retrain_mlm(
    corpus_path,
    vocab_path,
    out_dir,
    stage: StageConfig | None = None,
    model_config: TinyModelConfig | None = None,
) -> dict:
    """Masked-token prediction over a pre-masked corpus.

    Verifies the corpus manifest against the vocabulary file, then trains
    denoising-style: the encoder reads the corrupted sequence, the decoder
    reconstructs the original, and the loss counts masked positions only.
    Warm-starts the whole network for later fine-tuning, not just the
    encoder. Emits for a held-out shard: per-masked-token log-probs (natural
    log, recorded per record) and argmax predictions, both in the schemas the
    metrics commands score. Writes checkpoint.pt, heldout_logprobs.jsonl,
    heldout_predictions.jsonl and retrain_manifest.json into out_dir;
    returns the manifest.
    """
    stage = stage or StageConfig(stage="retrain")
    if stage.stage != "retrain":
        raise ValueError(f"retrain_mlm got a {stage.stage!r} config")
    model_config = model_config or TinyModelConfig()
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    vocab = VocabFile.load(vocab_path)
    corpus_manifest = check_corpus_vocab(corpus_path, vocab)
    records, skipped = [], 0
    for rec in read_jsonl(corpus_path):
        clipped = _clip_record(rec, model_config.max_input_len)
        if clipped is None:
            skipped += 1
        else:
            records.append(clipped)
    if not records:
        raise EmptyCorpus(f"{corpus_path} holds no usable records")

    rng = np.random.Generator(np.random.PCG64(stage.seed))
    order = rng.permutation(len(records))
    n_held = max(1, round(stage.holdout_fraction * len(records)))
    held = [records[i] for i in order[:n_held]]
    train = [records[i] for i in order[n_held:]]
    if not train:
        raise EmptyCorpus("holdout leaves no training records")

    torch.manual_seed(stage.seed)
    model = TinySeq2Seq(model_config, len(vocab))
    steps_per_epoch = math.ceil(len(train) / stage.batch)
    total_steps = steps_per_epoch * stage.epochs
    optimizer = torch.optim.AdamW(model.parameters(), lr=stage.lr)
    scheduler = linear_schedule(optimizer, stage.warmup, total_steps)

    epoch_eval_loss = [_heldout_eval(model, held, stage.batch)]
    model.train()
    for _ in range(stage.epochs):
        for batch in _batches(train, stage.batch, rng):
            optimizer.zero_grad()
            loss, _ = _mlm_loss(model, batch)
            loss.backward()
            optimizer.step()
            scheduler.step()
        epoch_eval_loss.append(_heldout_eval(model, held, stage.batch))

    model.eval()
    logprob_rows, prediction_rows = [], []
    with torch.no_grad():
        for rec in held:
            logprobs = nn.functional.log_softmax(_reconstruction_logits(model, [rec])[0], dim=-1)
            picked = logprobs[rec["mask_positions"]]
            target = torch.tensor(rec["originals"], dtype=torch.long)
            own = picked.gather(1, target[:, None])[:, 0].clamp(min=LOGPROB_FLOOR)
            logprob_rows.append({"id": rec["id"], "logprobs": own.tolist(), "base": "e"})
            prediction_rows.append(
                {
                    "id": rec["id"],
                    "predictions": [
                        {"position": p, "id": int(t)}
                        for p, t in zip(rec["mask_positions"], picked.argmax(dim=-1))
                    ],
                }
            )

    vocab_hash = vocab.content_hash()
    save_checkpoint(out_dir / "checkpoint.pt", model, vocab_hash)
    write_jsonl(out_dir / "heldout_logprobs.jsonl", logprob_rows)
    write_jsonl(out_dir / "heldout_predictions.jsonl", prediction_rows)
    manifest = {
        "stage": "retrain",
        "seed": stage.seed,
        "epochs": stage.epochs,
        "steps": total_steps,
        "records": len(records),
        "skipped": skipped,
        "held_out": len(held),
        "epoch_eval_loss": epoch_eval_loss,
        "logprob_base": "e",
        "vocab_hash": vocab_hash,
        "corpus_strategy": corpus_manifest.get("strategy"),
        "files": {
            "checkpoint": "checkpoint.pt",
            "logprobs": "heldout_logprobs.jsonl",
            "predictions": "heldout_predictions.jsonl",
        },
    }
    write_json(out_dir / "retrain_manifest.json", manifest)
    return manifest


# --------------------------------------------------------------- beam search


def banned_next_tokens(prefix: list[int], n: int) -> set[int]:
    """Tokens that would close an n-gram already present in prefix."""
    if n <= 0 or len(prefix) < n - 1:
        return set()
    tail = tuple(prefix[len(prefix) - (n - 1) :])
    banned = set()
    for i in range(len(prefix) - n + 1):
        if tuple(prefix[i : i + n - 1]) == tail:
            banned.add(prefix[i + n - 1])
    return banned


def beam_search(
    model: TinySeq2Seq,
    src_ids: list[int],
    beam_size: int,
    no_repeat_ngram: int,
    max_len: int,
) -> list[int]:
    """Length-normalized beam decode of one source; returns content ids."""
    model.eval()
    with torch.no_grad():
        src, src_pad = _pad_batch([src_ids])
        memory = model.encode(src, src_pad)
        active = [([BOS_ID], 0.0)]
        finished: list[tuple[list[int], float]] = []
        for _ in range(max_len):
            tgt = torch.tensor([p for p, _ in active], dtype=torch.long)
            mem = memory.expand(len(active), -1, -1)
            pad = src_pad.expand(len(active), -1)
            logits = model.seq2seq_logits(src, pad, tgt, memory=mem)[:, -1, :]
            logprobs = nn.functional.log_softmax(logits, dim=-1)
            candidates = []
            for (prefix, score), row in zip(active, logprobs):
                row = row.clone()
                row[[PAD_ID, BOS_ID]] = -torch.inf
                for tok in banned_next_tokens(prefix, no_repeat_ngram):
                    row[tok] = -torch.inf
                top = torch.topk(row, min(beam_size + 1, len(row)))
                for lp, tok in zip(top.values.tolist(), top.indices.tolist()):
                    if lp != -torch.inf:
                        candidates.append((prefix + [tok], score + lp))
            candidates.sort(key=lambda b: b[1], reverse=True)
            # Walk best-first: closed beams are banked, open ones refill the
            # beam; stop once the beam is full again.
            active = []
            for prefix, score in candidates:
                if prefix[-1] == EOS_ID:
                    finished.append((prefix, score))
                else:
                    active.append((prefix, score))
                if len(active) == beam_size:
                    break
            if not active:
                break
        pool = finished + active
        best = max(pool, key=lambda b: b[1] / max(1, len(b[0]) - 1))
        return [t for t in best[0] if t not in (BOS_ID, EOS_ID)]


# --------------------------------------------------------------- fine-tuning


def _encode_pair(vocab: VocabFile, rec: dict, config: TinyModelConfig) -> dict:
    src = vocab.encode_text(rec["input"])[: config.max_input_len]
    tgt = vocab.encode_text(rec["target"])[: config.max_output_len - 1]
    return {
        "id": rec["id"],
        "src": src,
        "tgt_in": [BOS_ID] + tgt,
        "tgt_out": tgt + [EOS_ID],
    }


def _seq2seq_loss(model: TinySeq2Seq, batch: list[dict]) -> torch.Tensor:
    src, src_pad = _pad_batch([r["src"] for r in batch])
    tgt_in, _ = _pad_batch([r["tgt_in"] for r in batch])
    tgt_out, _ = _pad_batch([r["tgt_out"] for r in batch])
    logits = model.seq2seq_logits(src, src_pad, tgt_in)
    return nn.functional.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), tgt_out.reshape(-1), ignore_index=PAD_ID
    )


def finetune_summarize(
    pairs_path,
    checkpoint_path,
    vocab_path,
    out_path,
    stage: StageConfig | None = None,
    model_config: TinyModelConfig | None = None,
    eval_pairs_path=None,
) -> dict:
    """Summarization fine-tuning plus beam-search generation.

    Starts from a retrained checkpoint when given one (all shared weights are
    reused, including the tied projection; the assumption is deliberate),
    otherwise from a fresh seeded initialization. Trains on the pairs file,
    then decodes every record of eval_pairs_path (default: the training
    pairs) with beam search and writes {"id","text"} rows to out_path.
    """
    stage = stage or StageConfig(stage="finetune")
    if stage.stage != "finetune":
        raise ValueError(f"finetune_summarize got a {stage.stage!r} config")
    model_config = model_config or TinyModelConfig()
    vocab = VocabFile.load(vocab_path)

    pairs = read_jsonl(pairs_path)
    if not pairs:
        raise EmptyCorpus(f"{pairs_path} holds no pairs")
    eval_pairs = read_jsonl(eval_pairs_path) if eval_pairs_path else pairs
    if not eval_pairs:
        raise EmptyCorpus(f"{eval_pairs_path} holds no pairs")

    torch.manual_seed(stage.seed)
    if checkpoint_path is None:
        model = TinySeq2Seq(model_config, len(vocab))
    else:
        payload = load_checkpoint(checkpoint_path)
        if payload["vocab_size"] != len(vocab):
            raise CheckpointShapeMismatch(
                f"checkpoint rows {payload['vocab_size']} != vocabulary size {len(vocab)}; "
                "extend the checkpoint embeddings first"
            )
        if payload["vocab_hash"] != vocab.content_hash():
            raise CheckpointShapeMismatch("checkpoint was trained on a different vocabulary")
        model = _model_from_checkpoint(payload)

    encoded = [_encode_pair(vocab, rec, model_config) for rec in pairs]
    rng = np.random.Generator(np.random.PCG64(stage.seed))
    steps_per_epoch = math.ceil(len(encoded) / stage.batch)
    total_steps = steps_per_epoch * stage.epochs
    optimizer = torch.optim.AdamW(model.parameters(), lr=stage.lr)
    scheduler = linear_schedule(optimizer, stage.warmup, total_steps)

    epoch_train_loss = []
    model.train()
    for _ in range(stage.epochs):
        running, nb = 0.0, 0
        for batch in _batches(encoded, stage.batch, rng):
            optimizer.zero_grad()
            loss = _seq2seq_loss(model, batch)
            loss.backward()
            optimizer.step()
            scheduler.step()
            running += loss.item()
            nb += 1
        epoch_train_loss.append(running / nb)

    rows = []
    for rec in eval_pairs:
        src = vocab.encode_text(rec["input"])[: model_config.max_input_len]
        ids = beam_search(
            model, src, stage.beam_size, stage.no_repeat_ngram, model_config.max_output_len
        )
        rows.append({"id": rec["id"], "text": vocab.decode_ids(ids)})
    write_jsonl(out_path, rows)

    manifest = {
        "stage": "finetune",
        "seed": stage.seed,
        "epochs": stage.epochs,
        "steps": total_steps,
        "pairs": len(pairs),
        "generated": len(rows),
        "beam_size": stage.beam_size,
        "no_repeat_ngram": stage.no_repeat_ngram,
        "from_checkpoint": checkpoint_path is not None,
        "epoch_train_loss": epoch_train_loss,
        "vocab_hash": vocab.content_hash(),
    }
    write_json(Path(out_path).with_name(Path(out_path).stem + ".manifest.json"), manifest)
    return manifest


# --------------------------------------------------------- vocabulary growth


def extend_embeddings(checkpoint_path, old_vocab_path, new_vocab_path, out_path) -> dict:
    """Grow the checkpoint's embedding rows to a purely extended vocabulary.

    Existing rows are preserved exactly. Each appended token's row is the
    arithmetic mean of its constituent subword embeddings under the old
    vocabulary (phrase tokens split on spaces, unknown words fall back to
    characters); tokens with no known constituents get a small seeded random
    row. Extending by zero tokens copies the checkpoint file verbatim.
    """
    old_vocab = VocabFile.load(old_vocab_path)
    new_vocab = VocabFile.load(new_vocab_path)
    if new_vocab.tokens[: len(old_vocab)] != old_vocab.tokens:
        raise NotAnExtension("new vocabulary does not begin with the old tokens")
    payload = load_checkpoint(checkpoint_path)
    if payload["vocab_size"] != len(old_vocab) or payload["vocab_hash"] != old_vocab.content_hash():
        raise CheckpointShapeMismatch("checkpoint does not match the old vocabulary")

    added = new_vocab.tokens[len(old_vocab) :]
    if not added:
        if Path(out_path) != Path(checkpoint_path):
            shutil.copyfile(checkpoint_path, out_path)
        return {"added": 0, "vocab_size": len(old_vocab), "random_init": 0}

    state = payload["state_dict"]
    old_rows = state["embed.weight"]
    new_rows = torch.empty(len(added), old_rows.shape[1], dtype=old_rows.dtype)
    random_init = 0
    for k, token in enumerate(added):
        constituents: list[int] = []
        for word in token.split(" "):
            tid = old_vocab.token_to_id.get(word)
            if tid is not None:
                constituents.append(tid)
            else:
                constituents.extend(
                    old_vocab.token_to_id[ch] for ch in word if ch in old_vocab.token_to_id
                )
        if constituents:
            new_rows[k] = old_rows[constituents].mean(dim=0)
        else:
            gen = torch.Generator().manual_seed(len(old_vocab) + k)
            new_rows[k] = torch.normal(0.0, 0.02, (old_rows.shape[1],), generator=gen)
            random_init += 1
    state["embed.weight"] = torch.cat([old_rows, new_rows], dim=0)
    payload["vocab_size"] = len(new_vocab)
    payload["vocab_hash"] = new_vocab.content_hash()
    torch.save(payload, out_path)
    return {"added": len(added), "vocab_size": len(new_vocab), "random_init": random_init}
