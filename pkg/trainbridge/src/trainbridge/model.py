"""Desk-scale transformer encoder-decoder with a tied vocabulary projection.

One module serves both stages: re-training runs it as a denoiser (masked
sequence in, original sequence out), fine-tuning runs the same weights as a
summarizer. Input and output embeddings are tied with the logit projection,
so the vocabulary appears in exactly one tensor and extending it touches
exactly one tensor.
"""

from dataclasses import dataclass

import torch
from torch import nn


@dataclass(frozen=True)
class TinyModelConfig:
    layers: int = 2
    hidden: int = 64
    heads: int = 4
    max_input_len: int = 1024
    max_output_len: int = 128

    def __post_init__(self):
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        if self.heads < 1:
            raise ValueError("heads must be >= 1")
        if self.hidden % self.heads != 0:
            raise ValueError(f"hidden {self.hidden} not divisible by heads {self.heads}")
        if self.max_input_len < 1 or self.max_output_len < 1:
            raise ValueError("sequence length limits must be positive")


class TinySeq2Seq(nn.Module):
    # Dropout stays at zero: the harness lives in the underfit regime and
    # paired strategy comparisons must differ only in their data.

    def __init__(self, config: TinyModelConfig, vocab_size: int) -> None:
        super().__init__()
        if vocab_size < 5:
            raise ValueError("vocabulary too small")
        self.config = config
        self.vocab_size = vocab_size
        self.embed = nn.Embedding(vocab_size, config.hidden)
        self.pos = nn.Embedding(max(config.max_input_len, config.max_output_len), config.hidden)
        enc_layer = nn.TransformerEncoderLayer(
            d_model=config.hidden, nhead=config.heads, dim_feedforward=4 * config.hidden,
            dropout=0.0, batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(enc_layer, config.layers, enable_nested_tensor=False)
        dec_layer = nn.TransformerDecoderLayer(
            d_model=config.hidden, nhead=config.heads, dim_feedforward=4 * config.hidden,
            dropout=0.0, batch_first=True,
        )
        self.decoder = nn.TransformerDecoder(dec_layer, config.layers)
        # Small-std embeddings keep the untrained softmax near uniform, so a
        # zero-epoch run scores close to vocabulary-size perplexity.
        nn.init.normal_(self.embed.weight, std=0.02)
        nn.init.normal_(self.pos.weight, std=0.02)

    def _embed_positions(self, ids: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        return self.embed(ids) + self.pos(positions)[None, :, :]

    def project(self, hidden: torch.Tensor) -> torch.Tensor:
        return torch.nn.functional.linear(hidden, self.embed.weight)

    def encode(self, src: torch.Tensor, src_pad: torch.Tensor) -> torch.Tensor:
        return self.encoder(self._embed_positions(src), src_key_padding_mask=src_pad)

    def seq2seq_logits(
        self,
        src: torch.Tensor,
        src_pad: torch.Tensor,
        tgt_in: torch.Tensor,
        memory: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """[batch, tgt, vocab] next-token logits given source and prefix."""
        if memory is None:
            memory = self.encode(src, src_pad)
        causal = torch.triu(
            torch.ones(tgt_in.shape[1], tgt_in.shape[1], dtype=torch.bool, device=tgt_in.device),
            diagonal=1,
        )
        hidden = self.decoder(
            self._embed_positions(tgt_in),
            memory,
            tgt_mask=causal,
            memory_key_padding_mask=src_pad,
        )
        return self.project(hidden)
