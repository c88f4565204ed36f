import base64
from dataclasses import dataclass, field

import numpy as np
import torch

from encoder.config import TaskSpec
from shared.errors import InvalidInput

EXP_AVG_PREFIX = 'optim.exp_avg.'
EXP_AVG_SQ_PREFIX = 'optim.exp_avg_sq.'


@dataclass
class TrainState:
    """Everything besides the weights needed to resume a run bitwise."""
    step: int = 0
    seed: int = 0
    exp_avg: dict = field(default_factory=dict)
    exp_avg_sq: dict = field(default_factory=dict)
    numpy_rng_state: dict = None
    torch_rng_state: str = ''

    def __post_init__(self):
        if self.step < 0:
            raise InvalidInput('training step must be >= 0')
        if set(self.exp_avg) != set(self.exp_avg_sq):
            raise InvalidInput('first and second moments name different parameters')

    @classmethod
    def capture(cls, model, optimizer, step, seed, rng):
        names = {id(p): name for name, p in model.named_parameters()}
        exp_avg, exp_avg_sq = {}, {}
        for param, slot in optimizer.state.items():
            name = names[id(param)]
            exp_avg[name] = slot['exp_avg'].detach().clone()
            exp_avg_sq[name] = slot['exp_avg_sq'].detach().clone()
        torch_state = base64.b64encode(torch.get_rng_state().numpy().tobytes()).decode('ascii')
        return cls(
            step=step,
            seed=seed,
            exp_avg=exp_avg,
            exp_avg_sq=exp_avg_sq,
            numpy_rng_state=rng.bit_generator.state,
            torch_rng_state=torch_state,
        )

    @classmethod
    def from_checkpoint(cls, ckpt):
        tensors = ckpt.optimizer_tensors()
        meta = ckpt.train_state
        return cls(
            step=meta.get('step', 0),
            seed=meta.get('seed', 0),
            exp_avg={k[len(EXP_AVG_PREFIX):]: v for k, v in tensors.items() if k.startswith(EXP_AVG_PREFIX)},
            exp_avg_sq={k[len(EXP_AVG_SQ_PREFIX):]: v for k, v in tensors.items() if k.startswith(EXP_AVG_SQ_PREFIX)},
            numpy_rng_state=meta.get('numpy_rng_state'),
            torch_rng_state=meta.get('torch_rng_state', ''),
        )

    def restore(self, model, optimizer, rng):
        """Load moments into optimizer and rewind both random generators."""
        params = dict(model.named_parameters())
        for name, avg in self.exp_avg.items():
            if name not in params:
                raise InvalidInput(f'optimizer state names unknown parameter {name}')
            param = params[name]
            if avg.shape != param.shape:
                raise InvalidInput(f'moment shape {tuple(avg.shape)} does not match {name} {tuple(param.shape)}')
            optimizer.state[param] = {
                'step': torch.tensor(float(self.step)),
                'exp_avg': avg.to(param.dtype).clone(),
                'exp_avg_sq': self.exp_avg_sq[name].to(param.dtype).clone(),
            }
        if self.numpy_rng_state is not None:
            rng.bit_generator.state = self.numpy_rng_state
        if self.torch_rng_state:
            raw = np.frombuffer(base64.b64decode(self.torch_rng_state), dtype=np.uint8).copy()
            torch.set_rng_state(torch.from_numpy(raw))

    def named_tensors(self):
        out = {}
        for name in sorted(self.exp_avg):
            out[EXP_AVG_PREFIX + name] = self.exp_avg[name]
            out[EXP_AVG_SQ_PREFIX + name] = self.exp_avg_sq[name]
        return out

    def to_dict(self):
        return {
            'step': self.step,
            'seed': self.seed,
            'numpy_rng_state': self.numpy_rng_state,
            'torch_rng_state': self.torch_rng_state,
        }


@dataclass
class LabeledSet:
    """Frame sequences with an M x K boolean label matrix for one task."""
    sequences: list
    labels: np.ndarray
    task: TaskSpec

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.labels.ndim != 2 or self.labels.shape != (len(self.sequences), self.task.n_classes):
            raise InvalidInput(
                f'labels of shape {self.labels.shape} do not fit {len(self.sequences)} clips '
                f'and task {self.task}'
            )
        if self.task.kind == 'classify' and len(self) and not (self.labels.sum(axis=1) == 1).all():
            raise InvalidInput('every clip of a classification task needs exactly one label')

    def __len__(self):
        return len(self.sequences)

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return LabeledSet([self.sequences[i] for i in indices], self.labels[indices], self.task)

    def class_indices(self):
        if self.task.kind != 'classify':
            raise InvalidInput('class indices only exist for classification tasks')
        return self.labels.argmax(axis=1)
