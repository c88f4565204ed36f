"""Masked-reconstruction pre-training loop.

Per step: sample a batch, draw one mask plan per clip for the configured
objective, corrupt, reconstruct, take the Huber loss on the masked cells,
and apply one warmup-scheduled Adam update.

The loss log is append-only, one `step<TAB>loss<TAB>lrate` line per step.
The optional mask log holds one JSON object per masked clip.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from encoder.checkpoint import save_checkpoint
from encoder.config import ModelConfig
from encoder.models import FrameEncoder
from masking.config import CcmConfig, CfmConfig
from masking.sampling import apply_mask, build_mask_plan
from shared.errors import InvalidInput, SequenceTooLong

from .batching import pad_batch
from .config import OptimizerConfig, PretrainConfig
from .models import TrainState
from .optim import adam_step, huber_loss, lr_schedule, make_optimizer

logger = logging.getLogger(__name__)

FINAL_CHECKPOINT = 'pretrained.mcck'
LOSS_LOG = 'loss.tsv'


@dataclass
class PretrainResult:
    model: FrameEncoder
    state: TrainState
    losses: list = field(default_factory=list)
    checkpoint_path: Path = None


def seed_everything(seed):
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)
    return np.random.default_rng(seed)


def _crop(seq, crop_frames, rng):
    if not crop_frames or seq.n_frames <= crop_frames:
        return seq
    start = int(rng.integers(0, seq.n_frames - crop_frames + 1))
    return seq.replace(seq.data[start:start + crop_frames])


def _masked_batch(clips, cfm_cfg, ccm_cfg, objective, rng):
    """Draw plans until at least one clip of the batch has a target cell."""
    while True:
        plans = [build_mask_plan(c.n_frames, cfm_cfg, ccm_cfg, objective, rng) for c in clips]
        if any(plan.target_mask.any() for plan in plans):
            break
    masked = [apply_mask(c, plan, rng)[0] for c, plan in zip(clips, plans)]
    return masked, plans


def pretrain_step(model, optimizer, clips, masked, plans, step, optim_cfg):
    x, pad_mask = pad_batch([m.data for m in masked])
    target, _ = pad_batch([c.data for c in clips])
    target_mask, _ = pad_batch([p.target_mask for p in plans], dtype=torch.bool)

    model.train()
    pred = model(x, pad_mask)
    loss = huber_loss(pred, target, target_mask)
    optimizer.zero_grad(set_to_none=True)
    loss.backward()
    lrate = lr_schedule(step, model.cfg.hidden_dim, optim_cfg.warmup_steps)
    adam_step(model.named_parameters(), optimizer, lrate, optim_cfg)
    return loss.item(), lrate


def pretrain(corpus, model_cfg: ModelConfig, pretrain_cfg: PretrainConfig, optim_cfg: OptimizerConfig,
             cfm_cfg: CfmConfig = None, ccm_cfg: CcmConfig = None, out_dir=None, resume=None,
             mask_log=None) -> PretrainResult:
    """Pre-train a FrameEncoder on corpus (a list of FrameSequence).

    resume is a Checkpoint written by an earlier run with the same corpus and
    configuration; training continues from its step with restored moments
    and random state.
    """
    cfm_cfg = cfm_cfg or CfmConfig()
    ccm_cfg = ccm_cfg or CcmConfig()
    if not corpus:
        raise InvalidInput('pre-training corpus is empty')
    for seq in corpus:
        if seq.n_frames > model_cfg.max_positions:
            raise SequenceTooLong(seq.n_frames, model_cfg.max_positions)

    rng = seed_everything(pretrain_cfg.seed)
    if resume is not None:
        model = resume.build_model()
        model_cfg = model.cfg
    else:
        model = FrameEncoder(model_cfg)
    optimizer = make_optimizer(model.parameters(), optim_cfg)
    start = 0
    if resume is not None:
        state = TrainState.from_checkpoint(resume)
        state.restore(model, optimizer, rng)
        start = state.step
        logger.info(f'Resuming pre-training at step {start}')

    out_dir = Path(out_dir) if out_dir is not None else None
    loss_file = mask_file = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        loss_file = open(out_dir / LOSS_LOG, 'a' if resume is not None else 'w', encoding='utf-8')
    if mask_log is not None:
        mask_file = open(mask_log, 'a' if resume is not None else 'w', encoding='utf-8')

    losses = []
    checkpoint_path = None
    logger.info(
        f'Pre-training {len(corpus)} clips, objective={pretrain_cfg.objective}, '
        f'steps {start + 1}..{pretrain_cfg.total_steps}, batch {pretrain_cfg.batch_size}'
    )
    try:
        for step in range(start + 1, pretrain_cfg.total_steps + 1):
            picks = rng.integers(0, len(corpus), size=pretrain_cfg.batch_size)
            clips = [_crop(corpus[i], pretrain_cfg.crop_frames, rng) for i in picks]
            masked, plans = _masked_batch(clips, cfm_cfg, ccm_cfg, pretrain_cfg.objective, rng)
            loss, lrate = pretrain_step(model, optimizer, clips, masked, plans, step, optim_cfg)
            losses.append((step, loss, lrate))

            if loss_file is not None:
                loss_file.write(f'{step}\t{loss:.10g}\t{lrate:.10g}\n')
            if mask_file is not None:
                for clip, plan in zip(clips, plans):
                    mask_file.write(json.dumps({'step': step, 'clip_id': clip.clip_id, **plan.to_dict()}) + '\n')
            if pretrain_cfg.log_every and step % pretrain_cfg.log_every == 0:
                logger.info(f'step {step}/{pretrain_cfg.total_steps} loss {loss:.4f} lr {lrate:.3e}')

            if out_dir is not None and pretrain_cfg.checkpoint_every and step % pretrain_cfg.checkpoint_every == 0:
                state = TrainState.capture(model, optimizer, step, pretrain_cfg.seed, rng)
                save_checkpoint(out_dir / f'checkpoint-{step:07d}.mcck', model, state)
    finally:
        if loss_file is not None:
            loss_file.close()
        if mask_file is not None:
            mask_file.close()

    state = TrainState.capture(model, optimizer, pretrain_cfg.total_steps, pretrain_cfg.seed, rng)
    if out_dir is not None:
        checkpoint_path = save_checkpoint(out_dir / FINAL_CHECKPOINT, model, state)
        logger.info(f'Saved pre-trained checkpoint to {checkpoint_path}')
    return PretrainResult(model=model, state=state, losses=losses, checkpoint_path=checkpoint_path)
