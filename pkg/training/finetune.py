"""Downstream finetuning with an exhaustive search over the finetune grid.

Every grid cell trains a fresh copy of the encoder (pre-trained weights when
a checkpoint is given, random init otherwise) plus a task head, and is scored
on the validation split: accuracy for classification, macro PR-AUC for
tagging. The best cell's model is kept.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import torch
import torch.nn.functional as F

from encoder.config import ModelConfig, TaskSpec
from encoder.models import FrameEncoder
from evaluation.models import PredictionSet
from evaluation.services.metrics import accuracy, pr_auc_macro
from shared.errors import InvalidInput, NumericalError

from .batching import batches, pad_batch
from .config import FinetuneConfig, FinetuneGrid, GridCell, OptimizerConfig
from .models import LabeledSet
from .optim import adam_step, make_optimizer

logger = logging.getLogger(__name__)


@dataclass
class GridRow:
    cell: GridCell
    valid_metric: float
    metric_name: str

    def to_dict(self):
        return {**self.cell.to_dict(), self.metric_name: self.valid_metric}


@dataclass
class FinetuneResult:
    model: FrameEncoder
    best: GridRow
    rows: list = field(default_factory=list)


def task_loss(logits, labels, task: TaskSpec):
    """Cross-entropy for classification, mean binary cross-entropy over tags."""
    if task.kind == 'classify':
        loss = F.cross_entropy(logits, labels.long().argmax(dim=1))
    else:
        loss = F.binary_cross_entropy_with_logits(logits, labels.to(logits.dtype))
    if not torch.isfinite(loss):
        raise NumericalError('finetuning loss is not finite', 'loss')
    return loss


def predict(model: FrameEncoder, sequences, task: TaskSpec, batch_size=16):
    """Class probabilities (softmax) or tag probabilities (sigmoid), M x K."""
    if not sequences:
        raise InvalidInput('nothing to predict')
    model.eval()
    scores = []
    with torch.no_grad():
        for chunk in batches(list(range(len(sequences))), batch_size):
            x, pad_mask = pad_batch([sequences[i].data for i in chunk])
            logits = model.classify(x, pad_mask)
            probs = torch.softmax(logits, dim=-1) if task.kind == 'classify' else torch.sigmoid(logits)
            scores.append(probs.cpu().numpy())
    return np.concatenate(scores, axis=0)


def validation_metric(model, valid: LabeledSet):
    preds = PredictionSet(predict(model, valid.sequences, valid.task), valid.labels)
    if valid.task.kind == 'classify':
        return 'accuracy', accuracy(preds)
    return 'pr_auc_macro', pr_auc_macro(preds)


def _build_model(checkpoint, model_cfg, task, dropout_rate):
    if checkpoint is not None:
        return checkpoint.build_model(task, dropout_rate=dropout_rate)
    return FrameEncoder(replace(model_cfg, dropout_rate=dropout_rate), task)


def train_cell(model, train: LabeledSet, cell: GridCell, ft_cfg: FinetuneConfig,
               optim_cfg: OptimizerConfig, rng):
    if ft_cfg.freeze_encoder:
        for name, param in model.named_parameters():
            param.requires_grad_(name.startswith('task_head.'))
    trainable = [(name, p) for name, p in model.named_parameters() if p.requires_grad]
    optimizer = make_optimizer([p for _, p in trainable], optim_cfg, lr=cell.learning_rate)

    labels = torch.as_tensor(train.labels)
    for epoch in range(1, cell.epochs + 1):
        model.train()
        order = rng.permutation(len(train))
        total = 0.0
        for chunk in batches(order, cell.batch_size):
            x, pad_mask = pad_batch([train.sequences[i].data for i in chunk])
            loss = task_loss(model.classify(x, pad_mask), labels[torch.as_tensor(chunk)], train.task)
            optimizer.zero_grad(set_to_none=True)
            loss.backward()
            adam_step(trainable, optimizer, cell.learning_rate, optim_cfg)
            total += loss.item() * len(chunk)
        logger.debug(f'epoch {epoch}/{cell.epochs} mean loss {total / len(train):.4f}')
    return model


def finetune(checkpoint, train: LabeledSet, valid: LabeledSet, grid: FinetuneGrid,
             ft_cfg: FinetuneConfig, optim_cfg: OptimizerConfig,
             model_cfg: ModelConfig = None) -> FinetuneResult:
    """Run the grid and return the model that scored best on valid.

    checkpoint None trains from random initialization with model_cfg, which
    is the no-pre-training baseline.
    """
    if len(train) == 0 or len(valid) == 0:
        raise InvalidInput('finetuning needs nonempty train and valid splits')
    if checkpoint is None and model_cfg is None:
        raise InvalidInput('finetuning from scratch needs a model configuration')
    task = ft_cfg.task_spec
    if train.task != task or valid.task != task:
        raise InvalidInput(f'labeled data is for {train.task}, finetuning is configured for {task}')

    cells = grid.subsample(ft_cfg.max_cells, ft_cfg.seed)
    rows = []
    best_model = best_row = None
    for index, cell in enumerate(cells):
        torch.manual_seed(ft_cfg.seed * 1000 + index)
        rng = np.random.default_rng([ft_cfg.seed, index])
        model = _build_model(checkpoint, model_cfg, task, cell.dropout_rate)
        train_cell(model, train, cell, ft_cfg, optim_cfg, rng)
        name, value = validation_metric(model, valid)
        row = GridRow(cell, float(value), name)
        rows.append(row)
        logger.info(f'grid cell {index + 1}/{len(cells)} {cell.to_dict()} valid {name} {value:.4f}')
        if best_row is None or row.valid_metric > best_row.valid_metric:
            best_model, best_row = model, row

    logger.info(f'Best cell {best_row.cell.to_dict()} with valid {best_row.metric_name} {best_row.valid_metric:.4f}')
    return FinetuneResult(model=best_model, best=best_row, rows=rows)
