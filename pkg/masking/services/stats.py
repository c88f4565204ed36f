"""Empirical masking statistics and their closed-form references."""
import math

import numpy as np

from ..config import CcmConfig, CfmConfig
from ..models import POLICIES
from ..sampling import draw_cfm, sample_ccm


def truncated_geometric_pmf(p, lo, hi):
    """pmf of Geo(p) (support 1, 2, ...) renormalized on [lo, hi]; index 0 is length lo."""
    k = np.arange(lo, hi + 1)
    weights = (1.0 - p) ** (k - 1) * p
    return weights / weights.sum()


def truncated_geometric_mean(p, lo, hi):
    k = np.arange(lo, hi + 1)
    return float(np.sum(k * truncated_geometric_pmf(p, lo, hi)))


def truncated_geometric_std(p, lo, hi):
    k = np.arange(lo, hi + 1)
    pmf = truncated_geometric_pmf(p, lo, hi)
    mean = np.sum(k * pmf)
    return float(math.sqrt(np.sum((k - mean) ** 2 * pmf)))


def cfm_statistics(n_frames, cfg: CfmConfig, rng, n_plans=10_000):
    """Span length, coverage and policy statistics over n_plans CFM samples."""
    lengths = []
    policy_counts = dict.fromkeys(POLICIES, 0)
    coverage = np.empty(n_plans, dtype=np.int64)
    for i in range(n_plans):
        spans, draws = draw_cfm(n_frames, cfg, rng)
        coverage[i] = sum(s.length for s in spans)
        for length, policy in draws:
            lengths.append(length)
            policy_counts[policy] += 1

    n_draws = len(lengths)
    return {
        'n_plans': n_plans,
        'n_frames': n_frames,
        'n_spans': n_draws,
        'mean_span_length': float(np.mean(lengths)),
        'expected_span_length': truncated_geometric_mean(cfg.p_geometric, cfg.span_min, cfg.span_max),
        'budget_frames': math.ceil(cfg.budget_fraction * n_frames),
        'min_coverage_frames': int(coverage.min()),
        'max_coverage_frames': int(coverage.max()),
        'coverage_fraction': float(coverage.mean() / n_frames),
        'policy_proportions': {p.value: policy_counts[p] / n_draws for p in POLICIES},
    }


def ccm_statistics(cfg: CcmConfig, rng, n_plans=10_000):
    """Mean block width and share of empty draws per channel group."""
    widths = {name: np.zeros(n_plans) for name, _, _ in cfg.target_groups}
    for i in range(n_plans):
        for block in sample_ccm(cfg, rng):
            widths[block.group][i] = block.width
    return {
        name: {
            'group_size': cfg.group_size(name),
            'mean_width': float(w.mean()),
            'expected_width': cfg.group_size(name) / 2.0,
            'empty_fraction': float(np.mean(w == 0)),
        }
        for name, w in widths.items()
    }
