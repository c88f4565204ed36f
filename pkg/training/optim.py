"""Reconstruction loss, warmup learning-rate schedule and the Adam update."""
import torch
import torch.nn.functional as F

from shared.errors import InvalidInput, NumericalError

from .config import OptimizerConfig


def huber_loss(pred, target, target_mask):
    """Mean Huber loss (delta 1) over the cells selected by target_mask.

    Unselected cells are never read, so changing them cannot move the loss.
    """
    if pred.shape != target.shape:
        raise InvalidInput(f'prediction {tuple(pred.shape)} and target {tuple(target.shape)} differ in shape')
    mask = torch.as_tensor(target_mask, dtype=torch.bool, device=pred.device)
    if mask.shape != pred.shape:
        raise InvalidInput(f'target mask {tuple(mask.shape)} does not match {tuple(pred.shape)}')
    if not mask.any():
        raise InvalidInput('target mask selects no cells')
    loss = F.huber_loss(pred[mask], target[mask], reduction='mean', delta=1.0)
    if not torch.isfinite(loss):
        raise NumericalError('reconstruction loss is not finite', 'loss')
    return loss


def lr_schedule(step, hidden_dim, warmup_steps):
    """hidden_dim^-0.5 * min(step^-0.5, step * warmup_steps^-1.5)."""
    if step < 1:
        raise InvalidInput(f'learning-rate schedule starts at step 1, got {step}')
    return hidden_dim ** -0.5 * min(step ** -0.5, step * warmup_steps ** -1.5)


def make_optimizer(params, cfg: OptimizerConfig, lr=0.0):
    # lr is overwritten on every adam_step
    return torch.optim.Adam(params, lr=lr, betas=(cfg.beta1, cfg.beta2), eps=cfg.adam_epsilon)


def adam_step(named_params, optimizer, lrate, cfg: OptimizerConfig):
    """Check gradients, clip to cfg.clip_norm and apply one Adam update at lrate."""
    named_params = [(name, p) for name, p in named_params if p.grad is not None]
    for name, param in named_params:
        if not torch.isfinite(param.grad).all():
            raise NumericalError(f'gradient of {name} is not finite', name)
    if cfg.clip_norm > 0:
        torch.nn.utils.clip_grad_norm_([p for _, p in named_params], cfg.clip_norm)
    for group in optimizer.param_groups:
        group['lr'] = lrate
    optimizer.step()
