from dataclasses import dataclass

from acoustics.config import FEATURE_DIM
from shared.errors import ConfigError

OBJECTIVES = ('cfm', 'ccm', 'both')


@dataclass(frozen=True)
class CfmConfig:
    p_geometric: float = 0.2
    span_min: int = 2
    span_max: int = 7
    budget_fraction: float = 0.15
    # zero, random, keep
    policy_probs: tuple = (0.7, 0.2, 0.1)

    def __post_init__(self):
        object.__setattr__(self, 'policy_probs', tuple(float(p) for p in self.policy_probs))
        if not 0 < self.p_geometric < 1:
            raise ConfigError('cfm.p_geometric must be in (0, 1)')
        if not 1 <= self.span_min <= self.span_max:
            raise ConfigError('cfm requires 1 <= span_min <= span_max')
        if not 0 < self.budget_fraction < 1:
            raise ConfigError('cfm.budget_fraction must be in (0, 1)')
        if len(self.policy_probs) != 3 or any(p < 0 for p in self.policy_probs):
            raise ConfigError('cfm.policy_probs needs three nonnegative probabilities')
        if abs(sum(self.policy_probs) - 1.0) > 1e-9:
            raise ConfigError('cfm.policy_probs must sum to 1')


@dataclass(frozen=True)
class CcmConfig:
    # (name, start, stop) channel ranges of the log-mel and log-CQT groups
    target_groups: tuple = (('mel', 52, 180), ('cqt', 180, 324))

    def __post_init__(self):
        groups = tuple((str(n), int(a), int(b)) for n, a, b in self.target_groups)
        object.__setattr__(self, 'target_groups', groups)
        taken = set()
        for name, start, stop in groups:
            if not 0 <= start < stop <= FEATURE_DIM:
                raise ConfigError(f'ccm group {name} range [{start}, {stop}) is outside [0, {FEATURE_DIM})')
            channels = set(range(start, stop))
            if taken & channels:
                raise ConfigError(f'ccm group {name} overlaps another group')
            taken |= channels

    def group_size(self, name):
        for group, start, stop in self.target_groups:
            if group == name:
                return stop - start
        raise ConfigError(f'unknown ccm group {name}')


def check_objective(objective):
    if objective not in OBJECTIVES:
        raise ConfigError(f'objective must be one of {", ".join(OBJECTIVES)}, got {objective!r}')
    return objective
