"""Shared text encoder for inputs and labels.

A whitespace tokenizer (marker tokens are atomic vocabulary entries) feeds a
small trainable backbone; the embedding of a text is the backbone's output at
the sequence-start position. One parameter set encodes both input sentences
and label strings, which is what makes unseen labels rankable at inference.

Two desk-scale backbones are provided: a mean-of-embeddings bag model and a
tiny bidirectional transformer. Any module mapping (ids, mask) to positionwise
hidden states can be plugged in instead.
"""

from __future__ import annotations

import hashlib
import io
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import torch
from torch import nn

from .errors import ValidationError
from .fileio import atomic_write_bytes, atomic_write_text
from .formatting import MARKER_TOKENS

logger = logging.getLogger(__name__)

PAD_TOKEN = "<pad>"
START_TOKEN = "<s>"
UNK_TOKEN = "<unk>"
SPECIAL_TOKENS: tuple[str, ...] = (PAD_TOKEN, START_TOKEN, UNK_TOKEN) + MARKER_TOKENS

CHECKPOINT_SCHEMA_VERSION = 1
ARCHIVE_NAME = "checkpoint.pt"
SIDECAR_NAME = "checkpoint.json"


@dataclass
class EncoderConfig:
    dim: int = 32
    max_sequence_length: int = 64
    backbone_spec: str = "bag"
    vocab_words: list[str] = field(default_factory=list)
    dropout: float = 0.1

    def validate(self) -> None:
        if self.dim <= 0:
            raise ValidationError("encoder dim must be positive")
        if self.max_sequence_length <= 0:
            raise ValidationError("max_sequence_length must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValidationError("dropout must be in [0, 1)")
        _parse_backbone_spec(self.backbone_spec)


class Vocabulary:
    """Whitespace vocabulary; specials and marker tokens are always atomic ids."""

    def __init__(self, words: Iterable[str] = ()):
        self.words: list[str] = list(SPECIAL_TOKENS)
        seen = set(self.words)
        for word in words:
            if word and word not in seen:
                seen.add(word)
                self.words.append(word)
        self._ids = {word: i for i, word in enumerate(self.words)}
        self.pad_id = self._ids[PAD_TOKEN]
        self.start_id = self._ids[START_TOKEN]
        self.unk_id = self._ids[UNK_TOKEN]

    def __len__(self) -> int:
        return len(self.words)

    @property
    def extra_words(self) -> list[str]:
        return self.words[len(SPECIAL_TOKENS):]

    def token_ids(self, text: str) -> list[int]:
        return [self._ids.get(word, self.unk_id) for word in text.split()]


class BagBackbone(nn.Module):
    """Trainable word embeddings; the start slot mixes in their masked mean."""

    def __init__(self, vocab_size: int, dim: int, dropout: float = 0.0):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, dim, padding_idx=0)
        self.dropout = nn.Dropout(dropout)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        emb = self.dropout(self.embedding(ids))
        word_mask = mask.clone()
        word_mask[:, 0] = False  # the start slot is pooled, never averaged over
        weights = word_mask.unsqueeze(-1).to(emb.dtype)
        counts = weights.sum(dim=1).clamp(min=1.0)
        mean = (emb * weights).sum(dim=1) / counts
        start = emb[:, :1, :] + mean.unsqueeze(1)
        return torch.cat([start, emb[:, 1:, :]], dim=1)


class TransformerBackbone(nn.Module):
    """Small bidirectional transformer with learned position embeddings."""

    def __init__(
        self,
        vocab_size: int,
        dim: int,
        max_len: int,
        num_layers: int = 2,
        num_heads: int = 4,
        dropout: float = 0.1,
    ):
        super().__init__()
        if dim % num_heads != 0:
            raise ValidationError(f"dim {dim} not divisible by {num_heads} heads")
        self.token_embedding = nn.Embedding(vocab_size, dim, padding_idx=0)
        self.position_embedding = nn.Embedding(max_len, dim)
        layer = nn.TransformerEncoderLayer(
            d_model=dim,
            nhead=num_heads,
            dim_feedforward=4 * dim,
            dropout=dropout,
            batch_first=True,
        )
        self.encoder = nn.TransformerEncoder(layer, num_layers, enable_nested_tensor=False)

    def forward(self, ids: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(ids.shape[1], device=ids.device)
        hidden = self.token_embedding(ids) + self.position_embedding(positions)
        return self.encoder(hidden, src_key_padding_mask=~mask)


def _parse_backbone_spec(spec: str) -> dict:
    if spec == "bag":
        return {"kind": "bag"}
    if spec == "transformer" or spec.startswith("transformer:"):
        parts = spec.split(":")
        try:
            layers = int(parts[1]) if len(parts) > 1 else 2
            heads = int(parts[2]) if len(parts) > 2 else 4
        except ValueError:
            raise ValidationError(f"malformed backbone spec {spec!r}") from None
        if layers < 1 or heads < 1 or len(parts) > 3:
            raise ValidationError(f"malformed backbone spec {spec!r}")
        return {"kind": "transformer", "layers": layers, "heads": heads}
    raise ValidationError(f"unknown backbone spec {spec!r}")


def build_backbone(config: EncoderConfig, vocab_size: int) -> nn.Module:
    parsed = _parse_backbone_spec(config.backbone_spec)
    if parsed["kind"] == "bag":
        return BagBackbone(vocab_size, config.dim, config.dropout)
    return TransformerBackbone(
        vocab_size,
        config.dim,
        config.max_sequence_length,
        num_layers=parsed["layers"],
        num_heads=parsed["heads"],
        dropout=config.dropout,
    )


class TextEncoder:
    """One parameter set for inputs and labels, pooled at position 0."""

    def __init__(
        self,
        config: EncoderConfig,
        *,
        seed: int = 0,
        dtype: torch.dtype = torch.float32,
        backbone: Optional[nn.Module] = None,
    ):
        config.validate()
        self.config = config
        self.vocab = Vocabulary(config.vocab_words)
        if backbone is None:
            torch.manual_seed(seed)
            backbone = build_backbone(config, len(self.vocab))
        self.backbone = backbone.to(dtype)
        self.dtype = dtype

    @property
    def dim(self) -> int:
        return self.config.dim

    def parameters(self):
        return self.backbone.parameters()

    def _token_ids(self, text: str) -> list[int]:
        ids = [self.vocab.start_id] + self.vocab.token_ids(text)
        limit = self.config.max_sequence_length
        if len(ids) > limit:
            logger.warning(
                "right-truncating input to %d tokens; a trailing task description "
                "may be cut: %.60r",
                limit,
                text,
            )
            ids = ids[:limit]
        return ids

    def _pad_batch(self, texts: Sequence[str]) -> tuple[torch.Tensor, torch.Tensor]:
        seqs = [self._token_ids(t) for t in texts]
        width = max(len(s) for s in seqs)
        ids = torch.full((len(seqs), width), self.vocab.pad_id, dtype=torch.long)
        mask = torch.zeros((len(seqs), width), dtype=torch.bool)
        for i, seq in enumerate(seqs):
            ids[i, : len(seq)] = torch.tensor(seq, dtype=torch.long)
            mask[i, : len(seq)] = True
        return ids, mask

    def encode_batch(self, texts: Sequence[str], mode: str = "eval"):
        """Embed each text at the sequence-start position.

        eval mode returns a read-only float array, one row per text, and is
        deterministic for fixed parameters; each text is encoded independently
        so results never depend on batch composition. train mode returns a
        torch tensor with gradients attached to the backbone parameters.
        """
        if mode not in ("train", "eval"):
            raise ValidationError(f"mode must be 'train' or 'eval', got {mode!r}")
        if len(texts) == 0:
            raise ValidationError("encode_batch requires at least one text")
        if mode == "train":
            self.backbone.train()
            ids, mask = self._pad_batch(texts)
            hidden = self.backbone(ids, mask)
            return hidden[:, 0]
        self.backbone.eval()
        rows = []
        with torch.no_grad():
            for text in texts:
                ids = torch.tensor([self._token_ids(text)], dtype=torch.long)
                mask = torch.ones_like(ids, dtype=torch.bool)
                rows.append(self.backbone(ids, mask)[0, 0])
        out = torch.stack(rows).cpu().numpy()
        out.setflags(write=False)
        return out

    @property
    def checkpoint_id(self) -> str:
        """Short content hash of the current parameters and vocabulary."""
        digest = hashlib.sha256()
        for name, tensor in sorted(self.backbone.state_dict().items()):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(tensor.detach().cpu().numpy()).tobytes())
        digest.update("\x00".join(self.vocab.words).encode("utf-8"))
        return digest.hexdigest()[:16]

    def save_checkpoint(self, directory: str) -> str:
        """Write the parameter archive plus its JSON sidecar; returns the directory."""
        os.makedirs(directory, exist_ok=True)
        archive = {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "config": asdict(self.config),
            "state_dict": self.backbone.state_dict(),
            "dtype": str(self.dtype).removeprefix("torch."),
        }
        buffer = io.BytesIO()
        torch.save(archive, buffer)
        atomic_write_bytes(os.path.join(directory, ARCHIVE_NAME), buffer.getvalue())
        sidecar = {
            "schema_version": CHECKPOINT_SCHEMA_VERSION,
            "dim": self.config.dim,
            "backbone_spec": self.config.backbone_spec,
            "marker_tokens": list(MARKER_TOKENS),
            "checkpoint_id": self.checkpoint_id,
        }
        atomic_write_text(
            os.path.join(directory, SIDECAR_NAME), json.dumps(sidecar, indent=2) + "\n"
        )
        return directory

    @classmethod
    def load_checkpoint(cls, directory: str) -> "TextEncoder":
        path = os.path.join(directory, ARCHIVE_NAME)
        if not os.path.exists(path):
            raise ValidationError(f"no checkpoint archive at {path}")
        archive = torch.load(path, weights_only=True)
        if archive.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
            raise ValidationError(
                f"unsupported checkpoint schema {archive.get('schema_version')!r}"
            )
        config = EncoderConfig(**archive["config"])
        encoder = cls(config, dtype=getattr(torch, archive["dtype"]))
        encoder.backbone.load_state_dict(archive["state_dict"])
        return encoder


def cosine_similarity(u, v) -> float:
    """Cosine of the angle between two embeddings, clamped to [-1, 1]."""
    a = np.asarray(u, dtype=np.float64).reshape(-1)
    b = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValidationError("embeddings must be finite")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        raise ValidationError("cosine similarity is undefined for zero vectors")
    value = float(np.dot(a, b) / (norm_a * norm_b))
    return max(-1.0, min(1.0, value))
