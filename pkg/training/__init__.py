from .batching import pad_batch  # noqa: F401
from .config import FinetuneConfig, FinetuneGrid, GridCell, OptimizerConfig, PretrainConfig  # noqa: F401
from .finetune import FinetuneResult, finetune, predict  # noqa: F401
from .models import LabeledSet, TrainState  # noqa: F401
from .optim import adam_step, huber_loss, lr_schedule, make_optimizer  # noqa: F401
from .pretrain import PretrainResult, pretrain  # noqa: F401
