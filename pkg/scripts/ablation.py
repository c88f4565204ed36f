#!/usr/bin/env python3
"""
Compare pre-training objectives on an extracted corpus.

Usage:
    python scripts/ablation.py --manifest runs/synth/manifest.tsv [--config PATH] [--seeds 0 1 2 3 4]

For every seed, pre-trains a model per objective (cfm, ccm, both), finetunes
each one plus a randomly initialized baseline on a stratified train/valid
split of the labeled clips, and writes one validation-accuracy row per
(seed, variant) to <out>/ablation.tsv followed by the per-variant means.
Features must already be cached (run `extract` first).
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from dotenv import load_dotenv  # noqa: E402

load_dotenv(project_root / '.env')

from cli.commands import load_sequences  # noqa: E402
from cli.config import load_run_config  # noqa: E402
from encoder.checkpoint import Checkpoint  # noqa: E402
from encoder.config import TaskSpec  # noqa: E402
from evaluation.report import format_pairs, format_table  # noqa: E402
from evaluation.services.crossval import holdout_validation  # noqa: E402
from shared.errors import CadenzaError  # noqa: E402
from shared.log import configure_logging  # noqa: E402
from shared.manifest import DOWNSTREAM_SPLITS, read_manifest  # noqa: E402
from training.finetune import finetune  # noqa: E402
from training.models import LabeledSet  # noqa: E402
from training.pretrain import pretrain  # noqa: E402

logger = logging.getLogger(__name__)

VARIANTS = ('none', 'cfm', 'ccm', 'both')


def load_split(manifest, run):
    rows = manifest.split(*DOWNSTREAM_SPLITS)
    task = TaskSpec('classify', len(manifest.vocab))
    labeled = LabeledSet(load_sequences(rows, run), manifest.label_matrix(rows), task)
    corpus = load_sequences(manifest.pretrain_rows(), run)
    return labeled, corpus


def run_ablation(labeled, corpus, run, seeds, variants=VARIANTS):
    classes = labeled.class_indices()
    ft_cfg = replace(run.finetune, task='classify', n_classes=labeled.task.n_classes)
    rows = []
    for seed in seeds:
        fit, valid = holdout_validation(np.arange(len(labeled)), classes, fraction=0.3, seed=seed)
        for variant in variants:
            checkpoint = None
            if variant != 'none':
                pre_cfg = replace(run.pretrain, objective=variant, seed=seed)
                result = pretrain(corpus, run.model, pre_cfg, run.optimizer, run.cfm, run.ccm)
                checkpoint = Checkpoint.from_model(result.model)
            tuned = finetune(checkpoint, labeled.subset(fit), labeled.subset(valid), run.grid,
                             replace(ft_cfg, seed=seed), run.optimizer, model_cfg=run.model)
            rows.append({'seed': seed, 'variant': variant, 'valid_accuracy': tuned.best.valid_metric})
            logger.info(f'seed {seed} {variant}: valid accuracy {tuned.best.valid_metric:.4f}')
    return rows


def variant_means(rows):
    means = {}
    for variant in dict.fromkeys(row['variant'] for row in rows):
        means[variant] = float(np.mean([r['valid_accuracy'] for r in rows if r['variant'] == variant]))
    return means


def ordering_holds(means):
    """both >= each single objective >= no pre-training, and both strictly above none."""
    singles = [means[v] for v in ('cfm', 'ccm') if v in means]
    return (
        all(means['both'] >= s >= means['none'] for s in singles)
        and means['both'] - means['none'] > 0
    )


def main():
    parser = argparse.ArgumentParser(description='Pre-training objective ablation.')
    parser.add_argument('--manifest', required=True)
    parser.add_argument('--config')
    parser.add_argument('--out')
    parser.add_argument('--seeds', type=int, nargs='+', default=[0, 1, 2, 3, 4])
    args = parser.parse_args()
    configure_logging()

    try:
        run = load_run_config(args.config).with_overrides(out_dir=args.out)
        labeled, corpus = load_split(read_manifest(args.manifest), run)
        rows = run_ablation(labeled, corpus, run, args.seeds)
    except CadenzaError as e:
        sys.exit(f'{type(e).__name__}: {e}')

    means = variant_means(rows)
    text = format_table(rows) + format_pairs(
        [(f'mean_{v}', m) for v, m in means.items()] + [('ordering_holds', ordering_holds(means))]
    )
    out_dir = Path(run.paths.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / 'ablation.tsv').write_text(text, encoding='utf-8')
    sys.stdout.write(text)


if __name__ == '__main__':
    main()
