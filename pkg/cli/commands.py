"""One function per subcommand: cmd_<name>(args, run) -> exit code."""
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from acoustics.audio import load_wav
from acoustics.cache import (
    cache_path,
    content_key,
    is_up_to_date,
    mark_up_to_date,
    read_feature_cache,
    write_feature_cache,
)
from acoustics.services import extract_features
from encoder.checkpoint import load_checkpoint, save_checkpoint
from encoder.config import TaskSpec
from encoder.models import encode_representations
from evaluation.models import PredictionSet
from evaluation.report import format_cv_report, format_grid_report, format_mask_statistics, format_tag_report
from evaluation.services.crossval import cross_validate
from evaluation.services.metrics import tag_report
from masking.services.stats import ccm_statistics, cfm_statistics
from shared.errors import CadenzaError, ConfigError, InvalidInput
from shared.locking import OutputLock
from shared.manifest import DOWNSTREAM_SPLITS, read_manifest
from training.finetune import finetune, predict
from training.models import LabeledSet
from training.pretrain import pretrain

from .synth import synthesize_corpus

logger = logging.getLogger(__name__)

TASK_KINDS = {'genre': 'classify', 'tags': 'tag'}


def _out_dir(run):
    return Path(run.paths.out_dir)


def _emit(text, path=None):
    if path is not None:
        Path(path).write_text(text, encoding='utf-8')
    sys.stdout.write(text)


def _manifest(args, run):
    return read_manifest(getattr(args, 'manifest', None) or run.paths.manifest)


def load_sequences(rows, run):
    cache_dir = run.cache_dir()
    return [
        read_feature_cache(cache_path(cache_dir, row.clip_id), clip_id=row.clip_id, cfg=run.feature)
        for row in rows
    ]


def _checkpoint(args, run, required=False):
    path = getattr(args, 'checkpoint', None) or run.paths.checkpoint
    if not path:
        if required:
            raise InvalidInput('a checkpoint is required (--checkpoint or paths.checkpoint)')
        return None
    return load_checkpoint(path)


def _task(args, run, manifest):
    """TaskSpec from --task and the manifest vocabulary, checked against the config."""
    if not manifest.vocab:
        raise ConfigError('manifest declares an empty label vocabulary')
    if getattr(args, 'task', None):
        return TaskSpec(TASK_KINDS[args.task], len(manifest.vocab))
    task = run.finetune.task_spec
    if task.n_classes != len(manifest.vocab):
        raise ConfigError(
            f'task {task} expects {task.n_classes} labels, manifest vocabulary has {len(manifest.vocab)}'
        )
    return task


def _labeled(manifest, rows, task, run):
    if not rows:
        raise InvalidInput('split is empty')
    if task.kind == 'classify':
        manifest.class_indices(rows)
    return LabeledSet(load_sequences(rows, run), manifest.label_matrix(rows), task)


def _extract_one(job):
    audio_path, clip_id, target, cfg = job
    try:
        key = content_key(audio_path, cfg)
        if is_up_to_date(target, key):
            return clip_id, 'skipped', ''
        seq = extract_features(load_wav(audio_path, clip_id=clip_id, target_rate=cfg.sample_rate), cfg)
        write_feature_cache(target, seq)
        mark_up_to_date(target, key)
        return clip_id, 'written', f'{seq.n_frames} frames'
    except CadenzaError as e:
        return clip_id, 'failed', str(e)


def cmd_extract(args, run):
    manifest = _manifest(args, run)
    cache_dir = run.cache_dir()
    os.makedirs(cache_dir, exist_ok=True)
    jobs = [
        (str(manifest.resolve(row)), row.clip_id, cache_path(cache_dir, row.clip_id), run.feature)
        for row in manifest.rows
    ]
    with OutputLock(run.paths.out_dir):
        if args.workers > 1:
            with ProcessPoolExecutor(max_workers=args.workers) as pool:
                results = list(pool.map(_extract_one, jobs))
        else:
            results = [_extract_one(job) for job in jobs]

    counts = {'written': 0, 'skipped': 0, 'failed': 0}
    for clip_id, status, message in results:
        counts[status] += 1
        if status == 'failed':
            logger.error(f'{clip_id}: {message}')
        elif status == 'skipped':
            logger.debug(f'{clip_id}: cache up to date')
        else:
            logger.debug(f'{clip_id}: {message}')
    logger.info(f"Extracted {counts['written']}, skipped {counts['skipped']}, failed {counts['failed']} clips")
    return 1 if counts['failed'] else 0


def cmd_pretrain(args, run):
    manifest = _manifest(args, run)
    rows = manifest.pretrain_rows()
    excluded = len(manifest.split('pretrain')) - len(rows)
    if excluded:
        logger.info(f'Excluded {excluded} pretrain clips that also appear in downstream splits')
    if not rows:
        raise InvalidInput('manifest has no pretrain clips')
    corpus = load_sequences(rows, run)
    resume = load_checkpoint(args.resume) if args.resume else None
    out_dir = _out_dir(run)
    with OutputLock(out_dir):
        result = pretrain(
            corpus, run.model, run.pretrain, run.optimizer, run.cfm, run.ccm,
            out_dir=out_dir, resume=resume,
            mask_log=out_dir / 'masks.jsonl' if args.mask_log else None,
        )
    print(result.checkpoint_path)
    return 0


def cmd_finetune(args, run):
    manifest = _manifest(args, run)
    task = _task(args, run, manifest)
    train = _labeled(manifest, manifest.split('train'), task, run)
    valid = _labeled(manifest, manifest.split('valid'), task, run)
    ft_cfg = replace(run.finetune, task=task.kind, n_classes=task.n_classes)
    checkpoint = _checkpoint(args, run)
    out_dir = _out_dir(run)
    with OutputLock(out_dir):
        result = finetune(checkpoint, train, valid, run.grid, ft_cfg, run.optimizer, model_cfg=run.model)
        path = save_checkpoint(out_dir / 'finetuned.mcck', result.model)
        _emit(format_grid_report(result), out_dir / 'grid_report.tsv')
    logger.info(f'Saved best finetuned model to {path}')
    return 0


def cmd_evaluate(args, run):
    manifest = _manifest(args, run)
    task = _task(args, run, manifest)
    checkpoint = _checkpoint(args, run)
    ft_cfg = replace(run.finetune, task=task.kind, n_classes=task.n_classes)
    out_dir = _out_dir(run)

    if task.kind == 'classify':
        dataset = _labeled(manifest, manifest.split(*DOWNSTREAM_SPLITS), task, run)
        with OutputLock(out_dir):
            report = cross_validate(dataset, checkpoint, run.grid, ft_cfg, run.optimizer,
                                    model_cfg=run.model, k=args.folds, seed=run.seed)
            _emit(format_cv_report(report), out_dir / 'cv_report.tsv')
        return 0

    test = _labeled(manifest, manifest.split('test'), task, run)
    if checkpoint is not None and checkpoint.task == task:
        model = checkpoint.build_model()
    else:
        train = _labeled(manifest, manifest.split('train'), task, run)
        valid = _labeled(manifest, manifest.split('valid'), task, run)
        model = finetune(checkpoint, train, valid, run.grid, ft_cfg, run.optimizer, model_cfg=run.model).model
    preds = PredictionSet(predict(model, test.sequences, task), test.labels, manifest.vocab)
    with OutputLock(out_dir):
        _emit(format_tag_report(tag_report(preds)), out_dir / 'tag_report.tsv')
    return 0


def cmd_synth(args, run):
    out_dir = _out_dir(run)
    with OutputLock(out_dir):
        manifest = synthesize_corpus(
            out_dir,
            n_classes=args.classes,
            per_class=args.per_class,
            mode=args.mode,
            n_pretrain=args.pretrain_clips,
            seed=run.seed,
            min_s=args.min_seconds,
            max_s=args.max_seconds,
            sample_rate=run.feature.sample_rate,
        )
    print(out_dir / 'manifest.tsv')
    logger.info(f'{len(manifest.rows)} clips, vocabulary {", ".join(manifest.vocab)}')
    return 0


def cmd_mask_demo(args, run):
    rng = np.random.default_rng(run.seed)
    cfm = cfm_statistics(args.n_frames, run.cfm, rng, n_plans=args.plans)
    ccm = ccm_statistics(run.ccm, rng, n_plans=args.plans)
    _emit(format_mask_statistics(cfm, ccm))
    return 0


def cmd_embed(args, run):
    manifest = _manifest(args, run)
    rows = manifest.split(*args.splits) if args.splits else manifest.rows
    model = _checkpoint(args, run, required=True).build_model()
    target = _out_dir(run) / 'embeddings'
    with OutputLock(_out_dir(run)):
        target.mkdir(parents=True, exist_ok=True)
        for row, seq in zip(rows, load_sequences(rows, run)):
            frames = encode_representations(model, seq)
            np.save(target / f'{row.clip_id}.npy', frames.mean(axis=0).astype(np.float32))
    logger.info(f'Wrote {len(rows)} clip embeddings to {target}')
    return 0
