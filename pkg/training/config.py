import itertools
from dataclasses import asdict, dataclass

import numpy as np

from encoder.config import TaskSpec
from masking.config import check_objective
from shared.errors import ConfigError


@dataclass(frozen=True)
class OptimizerConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    adam_epsilon: float = 1e-6
    warmup_steps: int = 8000
    # global gradient norm; 0 disables clipping
    clip_norm: float = 5.0

    def __post_init__(self):
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ConfigError('optimizer.beta1 and optimizer.beta2 must be in (0, 1)')
        if self.adam_epsilon <= 0:
            raise ConfigError('optimizer.adam_epsilon must be > 0')
        if self.warmup_steps < 1:
            raise ConfigError('optimizer.warmup_steps must be >= 1')
        if self.clip_norm < 0:
            raise ConfigError('optimizer.clip_norm must be >= 0')


@dataclass(frozen=True)
class PretrainConfig:
    batch_size: int = 64
    total_steps: int = 2000
    objective: str = 'both'
    seed: int = 0
    checkpoint_every: int = 500
    log_every: int = 100
    # random contiguous window per sampled clip; 0 keeps whole sequences
    crop_frames: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError('pretrain.batch_size must be >= 1')
        if self.total_steps < 1:
            raise ConfigError('pretrain.total_steps must be >= 1')
        check_objective(self.objective)
        if self.checkpoint_every < 0 or self.log_every < 0 or self.crop_frames < 0:
            raise ConfigError('pretrain.checkpoint_every, log_every and crop_frames must be >= 0')


@dataclass(frozen=True)
class GridCell:
    batch_size: int
    learning_rate: float
    epochs: int
    dropout_rate: float

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class FinetuneGrid:
    batch_sizes: tuple = (16, 24, 32)
    learning_rates: tuple = (2e-5, 3e-5, 5e-5)
    epochs: tuple = (2, 3, 4)
    dropout_rates: tuple = (0.05, 0.1)

    def __post_init__(self):
        for name in ('batch_sizes', 'learning_rates', 'epochs', 'dropout_rates'):
            values = tuple(getattr(self, name))
            object.__setattr__(self, name, values)
            if not values:
                raise ConfigError(f'grid.{name} must not be empty')
        if min(self.batch_sizes) < 1 or min(self.epochs) < 1:
            raise ConfigError('grid.batch_sizes and grid.epochs must be >= 1')
        if min(self.learning_rates) <= 0:
            raise ConfigError('grid.learning_rates must be > 0')
        if not all(0 <= p < 1 for p in self.dropout_rates):
            raise ConfigError('grid.dropout_rates must be in [0, 1)')

    def cells(self):
        return [
            GridCell(b, lr, e, p)
            for b, lr, e, p in itertools.product(
                self.batch_sizes, self.learning_rates, self.epochs, self.dropout_rates
            )
        ]

    def subsample(self, max_cells, seed):
        """At most max_cells cells chosen by seed, kept in grid order; 0 means all."""
        cells = self.cells()
        if max_cells <= 0 or max_cells >= len(cells):
            return cells
        rng = np.random.default_rng(seed)
        keep = np.sort(rng.choice(len(cells), size=max_cells, replace=False))
        return [cells[i] for i in keep]


@dataclass(frozen=True)
class FinetuneConfig:
    task: str = 'classify'
    n_classes: int = 10
    freeze_encoder: bool = False
    max_cells: int = 0
    seed: int = 0

    def __post_init__(self):
        TaskSpec(self.task, self.n_classes)
        if self.max_cells < 0:
            raise ConfigError('finetune.max_cells must be >= 0')

    @property
    def task_spec(self):
        return TaskSpec(self.task, self.n_classes)


config = {
    'full': PretrainConfig(batch_size=64, total_steps=200_000, checkpoint_every=10_000, log_every=1000),
    'desk': PretrainConfig(batch_size=16, total_steps=2000, crop_frames=400),
    'testing': PretrainConfig(batch_size=4, total_steps=4, checkpoint_every=2, log_every=1),
    'default': PretrainConfig(),
}
