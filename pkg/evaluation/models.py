from dataclasses import dataclass, field

import numpy as np

from shared.errors import InvalidInput


@dataclass
class PredictionSet:
    """M x K scores against M x K boolean labels (one-hot for classification)."""
    scores: np.ndarray
    labels: np.ndarray
    label_names: tuple = ()

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.scores.ndim != 2 or self.scores.shape != self.labels.shape:
            raise InvalidInput(
                f'scores {self.scores.shape} and labels {self.labels.shape} must be equal-shaped matrices'
            )
        if self.label_names and len(self.label_names) != self.n_classes:
            raise InvalidInput(f'{len(self.label_names)} label names for {self.n_classes} columns')

    @property
    def n_examples(self):
        return self.scores.shape[0]

    @property
    def n_classes(self):
        return self.scores.shape[1]

    def name_of(self, column):
        return self.label_names[column] if self.label_names else str(column)

    def check_classification(self):
        if self.n_examples == 0:
            raise InvalidInput('prediction set is empty')
        if not (self.labels.sum(axis=1) == 1).all():
            raise InvalidInput('classification rows need exactly one true label')


@dataclass
class FoldAssignment:
    folds: np.ndarray
    k: int = 10
    class_indices: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.folds = np.asarray(self.folds, dtype=int)
        if self.folds.size and (self.folds.min() < 0 or self.folds.max() >= self.k):
            raise InvalidInput(f'fold indices must lie in 0..{self.k - 1}')

    def test_indices(self, fold):
        return np.flatnonzero(self.folds == fold)

    def train_indices(self, fold):
        return np.flatnonzero(self.folds != fold)

    def class_counts(self):
        """k x n_classes matrix of how many examples of each class every fold holds."""
        n_classes = int(self.class_indices.max()) + 1
        counts = np.zeros((self.k, n_classes), dtype=int)
        np.add.at(counts, (self.folds, self.class_indices), 1)
        return counts
