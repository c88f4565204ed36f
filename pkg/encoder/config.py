from dataclasses import dataclass

from acoustics.config import FEATURE_DIM
from shared.errors import ConfigError

TASK_KINDS = ('classify', 'tag')
DEFAULT_CLASSES = {'classify': 10, 'tag': 56}


@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 4
    hidden_dim: int = 768
    n_heads: int = 12
    # 0 means 4 * hidden_dim
    ffn_dim: int = 0
    input_dim: int = FEATURE_DIM
    max_positions: int = 1600
    dropout_rate: float = 0.1
    init_std: float = 0.02
    positional_encoding: bool = True

    def __post_init__(self):
        if self.ffn_dim == 0:
            object.__setattr__(self, 'ffn_dim', 4 * self.hidden_dim)
        if self.n_layers < 0:
            raise ConfigError('model.n_layers must be >= 0')
        if self.hidden_dim < 2 or self.hidden_dim % 2:
            raise ConfigError('model.hidden_dim must be a positive even number')
        if self.n_heads < 1 or self.hidden_dim % self.n_heads:
            raise ConfigError('model.hidden_dim must be divisible by model.n_heads')
        if self.ffn_dim < 1 or self.input_dim < 1 or self.max_positions < 1:
            raise ConfigError('model.ffn_dim, model.input_dim and model.max_positions must be positive')
        if not 0 <= self.dropout_rate < 1:
            raise ConfigError('model.dropout_rate must be in [0, 1)')
        if self.init_std <= 0:
            raise ConfigError('model.init_std must be > 0')

    @property
    def head_dim(self):
        return self.hidden_dim // self.n_heads


@dataclass(frozen=True)
class TaskSpec:
    """Downstream head: 'classify' (softmax) or 'tag' (independent sigmoids)."""
    kind: str = 'classify'
    n_classes: int = 10

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise ConfigError(f'task kind must be one of {", ".join(TASK_KINDS)}, got {self.kind!r}')
        if self.n_classes < 1:
            raise ConfigError('task n_classes must be >= 1')

    @classmethod
    def parse(cls, text):
        """Accept 'classify_10', 'tag_56' or a bare kind."""
        kind, _, count = text.partition('_')
        if count and not count.isdigit():
            raise ConfigError(f'cannot parse task {text!r}; expected e.g. classify_10 or tag_56')
        return cls(kind=kind, n_classes=int(count) if count else DEFAULT_CLASSES.get(kind, 1))

    def __str__(self):
        return f'{self.kind}_{self.n_classes}'


config = {
    'base': ModelConfig(n_layers=4, hidden_dim=768, n_heads=12),
    'large': ModelConfig(n_layers=8, hidden_dim=1024, n_heads=16),
    'tiny': ModelConfig(n_layers=2, hidden_dim=64, n_heads=4, max_positions=1600),
    'testing': ModelConfig(n_layers=2, hidden_dim=16, n_heads=2, dropout_rate=0.0),
    'default': ModelConfig(),
}


def get_preset(name):
    try:
        return config[name]
    except KeyError:
        raise ConfigError(f'unknown model preset {name!r}; choose from {", ".join(config)}') from None
