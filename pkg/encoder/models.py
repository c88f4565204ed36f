"""Bidirectional transformer encoder over acoustic frames.

    frames (N x 324) -> linear projection + sinusoidal positions -> L post-norm
    transformer blocks -> reconstruction head (N x 324) or pooled task head.
"""
from dataclasses import dataclass, field

import torch
from torch import nn

from shared.errors import ConfigError, InvalidInput, NumericalError, SequenceTooLong

from .config import ModelConfig, TaskSpec


def positional_encoding(n_positions, hidden_dim, dtype=torch.float64):
    """PE[pos, 2i] = sin(pos / 10000^(2i/H)), PE[pos, 2i+1] = cos(same)."""
    if hidden_dim % 2:
        raise ConfigError(f'positional encoding needs an even hidden size, got {hidden_dim}')
    position = torch.arange(n_positions, dtype=torch.float64).unsqueeze(1)
    even = torch.arange(0, hidden_dim, 2, dtype=torch.float64)
    angle = position / torch.pow(10000.0, even / hidden_dim)
    pe = torch.zeros(n_positions, hidden_dim, dtype=torch.float64)
    pe[:, 0::2] = torch.sin(angle)
    pe[:, 1::2] = torch.cos(angle)
    return pe.to(dtype)


@dataclass
class EncoderActivations:
    # hidden_states[0] is the embedded input, hidden_states[-1] is H^L
    hidden_states: list = field(default_factory=list)
    attention_weights: list = field(default_factory=list)

    @property
    def last(self):
        return self.hidden_states[-1]


class SelfAttention(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.head_dim = cfg.head_dim
        self.query = nn.Linear(cfg.hidden_dim, cfg.hidden_dim)
        self.key = nn.Linear(cfg.hidden_dim, cfg.hidden_dim)
        self.value = nn.Linear(cfg.hidden_dim, cfg.hidden_dim)
        self.output = nn.Linear(cfg.hidden_dim, cfg.hidden_dim)
        self.dropout = nn.Dropout(cfg.dropout_rate)

    def _split(self, x):
        batch, length, _ = x.shape
        return x.view(batch, length, self.n_heads, self.head_dim).transpose(1, 2)

    def forward(self, x, pad_mask=None):
        batch, length, hidden = x.shape
        q, k, v = self._split(self.query(x)), self._split(self.key(x)), self._split(self.value(x))
        logits = (q @ k.transpose(-2, -1)) * self.head_dim ** -0.5
        if pad_mask is not None:
            logits = logits.masked_fill(pad_mask[:, None, None, :], float('-inf'))
        probs = torch.softmax(logits, dim=-1)
        context = self.dropout(probs) @ v
        context = context.transpose(1, 2).reshape(batch, length, hidden)
        return self.output(context), probs


class TransformerBlock(nn.Module):
    """Post-norm block: x = LN(x + MHSA(x)); x = LN(x + FFN(x))."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.attention = SelfAttention(cfg)
        self.attention_norm = nn.LayerNorm(cfg.hidden_dim)
        self.ffn = nn.Sequential(
            nn.Linear(cfg.hidden_dim, cfg.ffn_dim),
            nn.GELU(),
            nn.Linear(cfg.ffn_dim, cfg.hidden_dim),
        )
        self.ffn_dropout = nn.Dropout(cfg.dropout_rate)
        self.ffn_norm = nn.LayerNorm(cfg.hidden_dim)

    def forward(self, x, pad_mask=None):
        attended, probs = self.attention(x, pad_mask)
        x = self.attention_norm(x + attended)
        x = self.ffn_norm(x + self.ffn_dropout(self.ffn(x)))
        return x, probs


class ReconstructionHead(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.dense = nn.Linear(cfg.hidden_dim, cfg.hidden_dim)
        self.activation = nn.GELU()  # exact erf form
        self.norm = nn.LayerNorm(cfg.hidden_dim)
        self.output = nn.Linear(cfg.hidden_dim, cfg.input_dim)

    def forward(self, h):
        return self.output(self.norm(self.activation(self.dense(h))))


class TaskHead(nn.Module):
    def __init__(self, cfg: ModelConfig, task: TaskSpec):
        super().__init__()
        self.task = task
        self.dropout = nn.Dropout(cfg.dropout_rate)
        self.classifier = nn.Linear(cfg.hidden_dim, task.n_classes)

    def forward(self, pooled):
        return self.classifier(self.dropout(pooled))


class FrameEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig, task: TaskSpec = None):
        super().__init__()
        self.cfg = cfg
        self.task = task
        self.input_projection = nn.Linear(cfg.input_dim, cfg.hidden_dim)
        self.blocks = nn.ModuleList([TransformerBlock(cfg) for _ in range(cfg.n_layers)])
        self.reconstruction_head = ReconstructionHead(cfg)
        self.task_head = TaskHead(cfg, task) if task is not None else None
        self.register_buffer(
            'pe',
            positional_encoding(cfg.max_positions, cfg.hidden_dim, dtype=torch.float32),
            persistent=False,
        )
        self.apply(self._init_weights)

    def _init_weights(self, module):
        std = self.cfg.init_std
        if isinstance(module, nn.Linear):
            nn.init.trunc_normal_(module.weight, std=std, a=-2 * std, b=2 * std)
            nn.init.zeros_(module.bias)
        elif isinstance(module, nn.LayerNorm):
            nn.init.ones_(module.weight)
            nn.init.zeros_(module.bias)

    def embed(self, x):
        """Project B x N x 324 frames to B x N x H and add positions 0..N-1."""
        n_frames = x.shape[-2]
        if n_frames > self.cfg.max_positions:
            raise SequenceTooLong(n_frames, self.cfg.max_positions)
        h = self.input_projection(x)
        if self.cfg.positional_encoding:
            h = h + self.pe[:n_frames].to(h.dtype)
        return h

    def encode(self, x, pad_mask=None) -> EncoderActivations:
        """Embed and run every block; pad_mask is True on padded frames."""
        h = self.embed(x)
        acts = EncoderActivations(hidden_states=[h])
        for layer, block in enumerate(self.blocks, start=1):
            h, probs = block(h, pad_mask)
            if not torch.isfinite(h).all():
                raise NumericalError('non-finite encoder activations', f'blocks.{layer - 1}')
            acts.hidden_states.append(h)
            acts.attention_weights.append(probs)
        return acts

    def forward(self, x, pad_mask=None):
        """Masked-reconstruction output, same shape as x."""
        return self.reconstruction_head(self.encode(x, pad_mask).last)

    def pool(self, h, pad_mask=None):
        """Mean of H^L over unpadded frames."""
        if pad_mask is None:
            return h.mean(dim=-2)
        keep = (~pad_mask).to(h.dtype).unsqueeze(-1)
        counts = keep.sum(dim=-2)
        if (counts == 0).any():
            raise InvalidInput('cannot pool a sequence whose frames are all padding')
        return (h * keep).sum(dim=-2) / counts

    def classify(self, x, pad_mask=None):
        """Task logits; softmax for 'classify', sigmoid for 'tag' is left to the caller."""
        if self.task_head is None:
            raise InvalidInput('model was built without a task head')
        return self.task_head(self.pool(self.encode(x, pad_mask).last, pad_mask))

    def representations(self, x, pad_mask=None):
        """Contextualized per-frame vectors H^L."""
        return self.encode(x, pad_mask).last


def count_parameters(cfg: ModelConfig, task: TaskSpec = None):
    """Learnable scalars of FrameEncoder(cfg, task), computed without building it."""
    h, f, d = cfg.hidden_dim, cfg.ffn_dim, cfg.input_dim
    projection = d * h + h
    per_layer = 4 * (h * h + h) + (h * f + f) + (f * h + h) + 2 * (2 * h)
    reconstruction = (h * h + h) + 2 * h + (h * d + d)
    head = h * task.n_classes + task.n_classes if task is not None else 0
    return projection + cfg.n_layers * per_layer + reconstruction + head


def encode_representations(model: FrameEncoder, seq):
    """Per-frame representations (N x H) of one FrameSequence, in eval mode."""
    was_training = model.training
    model.eval()
    try:
        param = next(model.parameters())
        x = torch.as_tensor(seq.data, dtype=param.dtype, device=param.device).unsqueeze(0)
        with torch.no_grad():
            return model.representations(x)[0].cpu().numpy()
    finally:
        model.train(was_training)
