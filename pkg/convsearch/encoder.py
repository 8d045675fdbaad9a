"""
Bidirectional self-attention encoder with a term classification head.

The model reads [CLS] history [SEP] current as whole-word ids, adds learned
positional embeddings, runs a stack of post-norm self-attention blocks and
maps every position to a single logit (dropout -> linear -> sigmoid at
inference). Padding keys are masked out of attention; which positions are
scored is decided by the example mask, not by the model.
"""
import math
from dataclasses import asdict, dataclass

import torch
import torch.nn as nn

from convsearch.error import ConfigurationError, InputError
from convsearch.preproc import Origin
from convsearch.supervision import CLS_TOKEN, SEP_TOKEN

PAD_TOKEN = "[PAD]"
UNK_TOKEN = "[UNK]"
SPECIAL_TOKENS = (PAD_TOKEN, UNK_TOKEN, CLS_TOKEN, SEP_TOKEN)


@dataclass(frozen=True)
class EncoderConfig:
    vocab_size: int
    embed_dim: int = 128
    layers: int = 2
    heads: int = 4
    max_len: int = 256
    dropout_rate: float = 0.1
    seed: int = 13

    def __post_init__(self):
        if self.embed_dim % self.heads != 0:
            raise ConfigurationError(
                f"embed_dim ({self.embed_dim}) must be divisible by heads ({self.heads})."
            )
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}.")
        if self.vocab_size < len(SPECIAL_TOKENS) or self.max_len < 1 or self.layers < 1:
            raise ConfigurationError("vocab_size, max_len and layers must be positive.")

    def to_dict(self):
        return asdict(self)


class Vocabulary:
    """Whole-word vocabulary: a token is keyed by its Term, or its lowercased surface when it has none."""

    def __init__(self, entries):
        self.itos = list(SPECIAL_TOKENS) + [e for e in entries if e not in SPECIAL_TOKENS]
        self.stoi = {entry: index for index, entry in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    @staticmethod
    def key(token):
        if token.origin is Origin.SPECIAL:
            return token.surface
        return token.term if token.term is not None else token.surface.lower()

    @classmethod
    def build(cls, examples):
        entries = set()
        for example in examples:
            for token in example.sequence:
                entries.add(cls.key(token))
        return cls(sorted(entries - set(SPECIAL_TOKENS)))

    def encode(self, sequence):
        unk = self.stoi[UNK_TOKEN]
        return [self.stoi.get(self.key(token), unk) for token in sequence]

    @property
    def pad_id(self):
        return self.stoi[PAD_TOKEN]


class SelfAttention(nn.Module):
    """Multi-head scaled dot-product self-attention over all (non-padding) positions."""

    def __init__(self, embed_dim, heads, dropout):
        super().__init__()
        self.heads = heads
        self.head_dim = embed_dim // heads
        self.qkv = nn.Linear(embed_dim, 3 * embed_dim)
        self.out = nn.Linear(embed_dim, embed_dim)
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, padding_mask=None):
        batch, length, dim = x.shape
        q, k, v = self.qkv(x).chunk(3, dim=-1)
        # (batch, heads, length, head_dim)
        q, k, v = (t.view(batch, length, self.heads, self.head_dim).transpose(1, 2) for t in (q, k, v))
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if padding_mask is not None:
            scores = scores.masked_fill(padding_mask[:, None, None, :], torch.finfo(scores.dtype).min)
        weights = self.dropout(torch.softmax(scores, dim=-1))
        context = (weights @ v).transpose(1, 2).reshape(batch, length, dim)
        return self.out(context)


class EncoderBlock(nn.Module):
    def __init__(self, embed_dim, heads, dropout):
        super().__init__()
        self.attention = SelfAttention(embed_dim, heads, dropout)
        self.norm1 = nn.LayerNorm(embed_dim)
        self.norm2 = nn.LayerNorm(embed_dim)
        self.feed_forward = nn.Sequential(
            nn.Linear(embed_dim, 4 * embed_dim),
            nn.GELU(),
            nn.Dropout(dropout),
            nn.Linear(4 * embed_dim, embed_dim),
        )
        self.dropout = nn.Dropout(dropout)

    def forward(self, x, padding_mask=None):
        x = self.norm1(x + self.dropout(self.attention(x, padding_mask)))
        x = self.norm2(x + self.dropout(self.feed_forward(x)))
        return x


class ResolverModel(nn.Module):
    """
    Encoder plus term classification layer.

    Attributes:
        config (EncoderConfig): Architecture and seed.
        vocabulary (Vocabulary): Token-to-id mapping the model was built with.
    """

    def __init__(self, config, vocabulary):
        super().__init__()
        if len(vocabulary) != config.vocab_size:
            raise ConfigurationError(
                f"Vocabulary has {len(vocabulary)} entries but config.vocab_size is {config.vocab_size}."
            )
        self.config = config
        self.vocabulary = vocabulary
        self.token_embedding = nn.Embedding(config.vocab_size, config.embed_dim, padding_idx=vocabulary.pad_id)
        self.position_embedding = nn.Embedding(config.max_len, config.embed_dim)
        self.layers = nn.ModuleList([
            EncoderBlock(config.embed_dim, config.heads, config.dropout_rate) for _ in range(config.layers)
        ])
        self.dropout = nn.Dropout(config.dropout_rate)
        # Term classification layer: dropout -> linear -> sigmoid (applied by callers).
        self.head_dropout = nn.Dropout(config.dropout_rate)
        self.head = nn.Linear(config.embed_dim, 1)

    def encode_ids(self, ids, padding_mask=None):
        """
        Args:
            ids (LongTensor): (batch, length) token ids.
            padding_mask (BoolTensor, optional): True where a position is padding.

        Returns:
            Tensor: (batch, length, embed_dim) contextual vectors.
        """
        length = ids.shape[1]
        if length > self.config.max_len or length < 1:
            raise InputError(f"Sequence length {length} outside [1, {self.config.max_len}].", length=length)
        positions = torch.arange(length, device=ids.device)
        x = self.token_embedding(ids) + self.position_embedding(positions)[None, :, :]
        x = self.dropout(x)
        for layer in self.layers:
            x = layer(x, padding_mask)
        return x

    def forward(self, ids, padding_mask=None):
        """Per-position logits of shape (batch, length)."""
        hidden = self.encode_ids(ids, padding_mask)
        return self.head(self.head_dropout(hidden)).squeeze(-1)


def build_model(config, vocabulary):
    """Creates a freshly initialized model; initialization depends only on `config.seed`."""
    torch.manual_seed(config.seed)
    return ResolverModel(config, vocabulary)
