"""Accuracy, macro ROC-AUC and macro PR-AUC.

Tags whose column holds only positives or only negatives cannot be ranked;
they are left out of the macro mean and listed as skipped.
"""
import numpy as np
from scipy.stats import rankdata
from sklearn.metrics import average_precision_score

from shared.errors import InvalidInput

from ..models import PredictionSet


def accuracy(preds: PredictionSet):
    """Fraction of rows whose argmax is the true class; ties go to the lowest index."""
    preds.check_classification()
    return float(np.mean(preds.scores.argmax(axis=1) == preds.labels.argmax(axis=1)))


def scoreable_tags(labels):
    labels = np.asarray(labels, dtype=bool)
    positives = labels.sum(axis=0)
    return np.flatnonzero((positives > 0) & (positives < labels.shape[0]))


def binary_roc_auc(scores, labels):
    """P(score_pos > score_neg) + 0.5 P(tie), from midranks.

    The rank-sum identity counts exactly the same half-integer pairs as
    enumerating every positive/negative pair.
    """
    labels = np.asarray(labels, dtype=bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    ranks = rankdata(scores, method='average')
    wins = ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0
    return float(wins / (n_pos * n_neg))


def binary_average_precision(scores, labels):
    """Step-wise AP over distinct-score operating points, no interpolation."""
    return float(average_precision_score(np.asarray(labels, dtype=int), scores))


def _scoreable(preds: PredictionSet):
    if preds.n_examples == 0:
        raise InvalidInput('prediction set is empty')
    columns = scoreable_tags(preds.labels)
    if columns.size == 0:
        raise InvalidInput('no tag has both positive and negative examples')
    return columns


def roc_auc_macro(preds: PredictionSet):
    columns = _scoreable(preds)
    return float(np.mean([binary_roc_auc(preds.scores[:, j], preds.labels[:, j]) for j in columns]))


def pr_auc_macro(preds: PredictionSet):
    columns = _scoreable(preds)
    return float(np.mean([binary_average_precision(preds.scores[:, j], preds.labels[:, j]) for j in columns]))


def tag_report(preds: PredictionSet):
    """Per-tag ROC-AUC and AP rows, their macro means and the skipped tags."""
    columns = _scoreable(preds)
    rows = []
    for j in columns:
        rows.append({
            'tag': preds.name_of(j),
            'positives': int(preds.labels[:, j].sum()),
            'roc_auc': binary_roc_auc(preds.scores[:, j], preds.labels[:, j]),
            'pr_auc': binary_average_precision(preds.scores[:, j], preds.labels[:, j]),
        })
    scored = set(columns.tolist())
    return {
        'n_examples': preds.n_examples,
        'tags': rows,
        'roc_auc_macro': float(np.mean([r['roc_auc'] for r in rows])),
        'pr_auc_macro': float(np.mean([r['pr_auc'] for r in rows])),
        'skipped': [preds.name_of(j) for j in range(preds.n_classes) if j not in scored],
    }
