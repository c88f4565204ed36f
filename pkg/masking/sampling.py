"""Contiguous frames masking (CFM) and contiguous channels masking (CCM).

Every function takes an explicit numpy Generator; nothing here touches
global random state.
"""
import math

import numpy as np

from acoustics.models import FrameSequence
from shared.errors import InvalidInput

from .config import CcmConfig, CfmConfig, check_objective
from .models import POLICIES, ChannelBlock, MaskPlan, Policy, Span


def truncated_geometric(rng, p, lo, hi, size):
    """Geo(p) lengths (support 1, 2, ...) restricted to [lo, hi] by rejection."""
    out = np.empty(size, dtype=np.int64)
    filled = 0
    while filled < size:
        draws = rng.geometric(p, size=max(2 * (size - filled), 16))
        draws = draws[(draws >= lo) & (draws <= hi)]
        take = min(draws.size, size - filled)
        out[filled:filled + take] = draws[:take]
        filled += take
    return out


def _runs(positions):
    """Split sorted frame indices into (start, length) runs."""
    if positions[-1] - positions[0] + 1 == positions.size:
        return [(int(positions[0]), int(positions.size))]
    breaks = np.flatnonzero(np.diff(positions) > 1) + 1
    return [(int(chunk[0]), int(chunk.size)) for chunk in np.split(positions, breaks)]


def _merge_touching(spans):
    """Join neighbouring spans that share a policy; the earlier draw owns the result."""
    merged = []
    for span in spans:
        last = merged[-1] if merged else None
        if last is not None and last.stop == span.start and last.policy is span.policy:
            merged[-1] = Span(last.start, last.length + span.length, last.policy,
                              last.drawn_length, min(last.draw, span.draw))
        else:
            merged.append(span)
    return merged


def draw_cfm(n_frames, cfg: CfmConfig, rng):
    """Sample CFM spans and also return every consumed (length, policy) draw.

    Span lengths are drawn before any trimming, so the draw record is what
    the masking statistics are computed from.
    """
    if n_frames < 1:
        raise InvalidInput('sample_cfm needs at least one frame')
    budget = math.ceil(cfg.budget_fraction * n_frames)

    if n_frames < cfg.span_min:
        policy = POLICIES[rng.choice(3, p=cfg.policy_probs)]
        length = min(n_frames, budget)
        return [Span(0, length, policy, length, 0)], [(length, policy)]

    covered = np.zeros(n_frames, dtype=bool)
    count = 0
    spans = []
    draws = []
    batch = max(8, budget // 3)
    while count < budget:
        lengths = truncated_geometric(rng, cfg.p_geometric, cfg.span_min, cfg.span_max, batch)
        usable = np.minimum(lengths, n_frames)
        starts = rng.integers(0, n_frames - usable + 1)
        policies = rng.choice(3, size=batch, p=cfg.policy_probs)
        for drawn, length, start, policy_idx in zip(lengths, usable, starts, policies):
            if count >= budget:
                break
            policy = POLICIES[policy_idx]
            draw = len(draws)
            draws.append((int(drawn), policy))
            fresh = np.flatnonzero(~covered[start:start + length])
            if fresh.size == 0:
                continue
            # only newly covered frames count; the last span stops on the budget
            fresh = fresh[:budget - count] + start
            covered[fresh] = True
            count += fresh.size
            for run_start, run_length in _runs(fresh):
                spans.append(Span(run_start, run_length, policy, int(drawn), draw))

    spans.sort(key=lambda s: s.start)
    return _merge_touching(spans), draws


def sample_cfm(n_frames, cfg: CfmConfig, rng):
    spans, _ = draw_cfm(n_frames, cfg, rng)
    return spans


def sample_ccm(cfg: CcmConfig, rng):
    """One block per target group: width ~ U{0..H}, offset ~ U{0..H-width}."""
    blocks = []
    for name, start, stop in cfg.target_groups:
        size = stop - start
        width = int(rng.integers(0, size + 1))
        offset = int(rng.integers(0, size - width + 1))
        if width > 0:
            blocks.append(ChannelBlock(name, start + offset, width))
    return blocks


def build_mask_plan(n_frames, cfm_cfg: CfmConfig, ccm_cfg: CcmConfig, objective, rng) -> MaskPlan:
    objective = check_objective(objective)
    spans = sample_cfm(n_frames, cfm_cfg, rng) if objective in ('cfm', 'both') else []
    blocks = sample_ccm(ccm_cfg, rng) if objective in ('ccm', 'both') else []
    return MaskPlan(n_frames=n_frames, spans=spans, channel_blocks=blocks)


def _random_source(plan, draw, rng):
    inside = np.zeros(plan.n_frames, dtype=bool)
    for span in plan.spans:
        if span.draw == draw and span.policy is Policy.RANDOM:
            inside[span.start:span.stop] = True
    outside = np.flatnonzero(~inside)
    if outside.size == 0:
        return None
    return int(outside[rng.integers(0, outside.size)])


def apply_mask(seq: FrameSequence, plan: MaskPlan, rng):
    """Corrupt a sequence according to plan.

    Random-policy spans copy one frame read from the uncorrupted input,
    chosen uniformly outside every span of the same draw; pieces of one draw
    share that frame. Returns (masked sequence, target_mask).
    """
    if plan.n_frames != seq.n_frames:
        raise InvalidInput(f'mask plan covers {plan.n_frames} frames, sequence has {seq.n_frames}')

    original = seq.data
    data = original.copy()
    sources = {}
    for span in plan.spans:
        if span.policy is Policy.ZERO:
            data[span.start:span.stop] = 0.0
        elif span.policy is Policy.RANDOM:
            if span.draw not in sources:
                sources[span.draw] = _random_source(plan, span.draw, rng)
            source = sources[span.draw]
            if source is None:
                continue
            data[span.start:span.stop] = original[source]
    for block in plan.channel_blocks:
        data[:, block.start_channel:block.stop_channel] = 0.0

    return seq.replace(data), plan.target_mask
