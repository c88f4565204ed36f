"""Stratified k-fold protocol for the genre task.

Each fold is tested once; the other k-1 folds are split again into a fitting
part and a stratified validation part that selects the grid cell.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from sklearn.model_selection import StratifiedKFold, train_test_split

from shared.errors import InvalidInput
from training.finetune import finetune, predict

from ..models import FoldAssignment, PredictionSet
from .metrics import accuracy

logger = logging.getLogger(__name__)


def stratified_kfold(class_indices, k=10, seed=0) -> FoldAssignment:
    """Per-class shuffled round-robin assignment of every example to one of k folds."""
    class_indices = np.asarray(class_indices, dtype=int)
    if class_indices.size == 0:
        raise InvalidInput('cannot split an empty manifest into folds')
    if k < 2:
        raise InvalidInput('k-fold cross-validation needs k >= 2')
    counts = np.bincount(class_indices)
    small = [c for c, n in enumerate(counts) if 0 < n < k]
    if small:
        raise InvalidInput(f'classes {small} have fewer than k={k} examples')

    folds = np.empty(class_indices.size, dtype=int)
    splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=seed)
    for fold, (_, test) in enumerate(splitter.split(np.zeros(class_indices.size), class_indices)):
        folds[test] = fold
    return FoldAssignment(folds=folds, k=k, class_indices=class_indices)


def holdout_validation(train_indices, class_indices, fraction=0.1, seed=0):
    """Split train_indices into (fit, valid), stratified by class."""
    train_indices = np.asarray(train_indices, dtype=int)
    classes = np.asarray(class_indices, dtype=int)[train_indices]
    n_classes = np.unique(classes).size
    n_valid = max(n_classes, math.ceil(fraction * train_indices.size))
    if train_indices.size - n_valid < n_classes:
        raise InvalidInput(f'{train_indices.size} training examples are too few to hold out a validation split')
    try:
        fit, valid = train_test_split(
            train_indices, test_size=n_valid, stratify=classes, random_state=seed
        )
    except ValueError as e:
        raise InvalidInput(f'cannot carve a stratified validation split: {e}') from e
    return np.sort(fit), np.sort(valid)


@dataclass
class CrossValReport:
    folds: list = field(default_factory=list)

    @property
    def accuracies(self):
        return np.array([row['accuracy'] for row in self.folds])

    @property
    def mean(self):
        return float(self.accuracies.mean())

    @property
    def std(self):
        return float(self.accuracies.std())


def cross_validate(dataset, checkpoint, grid, ft_cfg, optim_cfg, model_cfg=None,
                   k=10, seed=0, valid_fraction=0.1) -> CrossValReport:
    """Finetune and test once per fold; dataset is a classification LabeledSet."""
    class_indices = dataset.class_indices()
    assignment = stratified_kfold(class_indices, k=k, seed=seed)
    report = CrossValReport()
    for fold in range(k):
        fit, valid = holdout_validation(assignment.train_indices(fold), class_indices,
                                        fraction=valid_fraction, seed=seed + fold)
        test = assignment.test_indices(fold)
        result = finetune(checkpoint, dataset.subset(fit), dataset.subset(valid), grid,
                          ft_cfg, optim_cfg, model_cfg=model_cfg)
        test_set = dataset.subset(test)
        scores = predict(result.model, test_set.sequences, test_set.task)
        fold_accuracy = accuracy(PredictionSet(scores, test_set.labels))
        logger.info(f'fold {fold + 1}/{k} test accuracy {fold_accuracy:.4f}')
        report.folds.append({
            'fold': fold,
            'n_fit': int(fit.size),
            'n_valid': int(valid.size),
            'n_test': int(test.size),
            'accuracy': fold_accuracy,
            **{f'best_{key}': value for key, value in result.best.cell.to_dict().items()},
        })
    return report
