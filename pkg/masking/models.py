from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property

import numpy as np

from acoustics.config import FEATURE_DIM


class Policy(str, Enum):
    ZERO = 'zero'
    RANDOM = 'random'
    KEEP = 'keep'


POLICIES = (Policy.ZERO, Policy.RANDOM, Policy.KEEP)


@dataclass(frozen=True)
class Span:
    start: int
    length: int
    policy: Policy
    drawn_length: int = 0
    draw: int = 0

    @property
    def stop(self):
        return self.start + self.length

    def to_dict(self):
        return {
            'start': self.start,
            'length': self.length,
            'policy': self.policy.value,
            'drawn_length': self.drawn_length,
            'draw': self.draw,
        }


@dataclass(frozen=True)
class ChannelBlock:
    group: str
    start_channel: int
    width: int

    @property
    def stop_channel(self):
        return self.start_channel + self.width

    def to_dict(self):
        return {'group': self.group, 'start_channel': self.start_channel, 'width': self.width}


@dataclass
class MaskPlan:
    n_frames: int
    spans: list = field(default_factory=list)
    channel_blocks: list = field(default_factory=list)
    n_channels: int = FEATURE_DIM

    def cfm_frames(self):
        rows = np.zeros(self.n_frames, dtype=bool)
        for span in self.spans:
            rows[span.start:span.stop] = True
        return rows

    def ccm_channels(self):
        cols = np.zeros(self.n_channels, dtype=bool)
        for block in self.channel_blocks:
            cols[block.start_channel:block.stop_channel] = True
        return cols

    @cached_property
    def target_mask(self):
        """Cells whose reconstruction enters the loss: CFM rows union CCM columns."""
        return self.cfm_frames()[:, None] | self.ccm_channels()[None, :]

    def to_dict(self):
        return {
            'n_frames': self.n_frames,
            'masked_frames': int(self.cfm_frames().sum()),
            'masked_channels': int(self.ccm_channels().sum()),
            'spans': [s.to_dict() for s in self.spans],
            'channel_blocks': [b.to_dict() for b in self.channel_blocks],
        }
