"""Run configuration: every tunable of every package in one text file.

    # comment
    seed = 7
    model.preset = tiny
    model.n_layers = 3
    grid.learning_rates = 2e-05, 3e-05

Keys are `section.field`; `model.preset` picks a base model preset that the
other model keys refine. serialize() writes every key, resolved.
"""
import os
from dataclasses import dataclass, field, fields, replace

from acoustics.config import FeatureConfig
from encoder.config import ModelConfig, get_preset
from masking.config import CcmConfig, CfmConfig
from shared.errors import ConfigError, IoError
from training.config import FinetuneConfig, FinetuneGrid, OptimizerConfig, PretrainConfig
from training.config import config as pretrain_presets

CONFIG_ENV = 'CADENZA_CONFIG'


@dataclass(frozen=True)
class PathsConfig:
    manifest: str = 'manifest.tsv'
    # empty means <out_dir>/features
    cache_dir: str = ''
    out_dir: str = 'runs'
    checkpoint: str = ''


SECTIONS = {
    'feature': FeatureConfig,
    'cfm': CfmConfig,
    'ccm': CcmConfig,
    'model': ModelConfig,
    'optimizer': OptimizerConfig,
    'pretrain': PretrainConfig,
    'grid': FinetuneGrid,
    'finetune': FinetuneConfig,
    'paths': PathsConfig,
}


@dataclass(frozen=True)
class RunConfig:
    feature: FeatureConfig = field(default_factory=FeatureConfig)
    cfm: CfmConfig = field(default_factory=CfmConfig)
    ccm: CcmConfig = field(default_factory=CcmConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    grid: FinetuneGrid = field(default_factory=FinetuneGrid)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)
    seed: int = 0

    @classmethod
    def preset(cls, name):
        """Defaults around a model preset, plus the pre-training preset of the same name if any."""
        return cls(model=get_preset(name), pretrain=pretrain_presets.get(name, PretrainConfig()))

    def with_overrides(self, seed=None, steps=None, out_dir=None):
        cfg = self
        if seed is not None:
            cfg = replace(
                cfg,
                seed=seed,
                pretrain=replace(cfg.pretrain, seed=seed),
                finetune=replace(cfg.finetune, seed=seed),
            )
        if steps is not None:
            cfg = replace(cfg, pretrain=replace(cfg.pretrain, total_steps=steps))
        if out_dir is not None:
            cfg = replace(cfg, paths=replace(cfg.paths, out_dir=str(out_dir)))
        return cfg

    def cache_dir(self):
        return self.paths.cache_dir or os.path.join(self.paths.out_dir, 'features')

    def serialize(self):
        lines = [f'seed = {self.seed}']
        for section in SECTIONS:
            value = getattr(self, section)
            for f in fields(value):
                lines.append(f'{section}.{f.name} = {_format_value(getattr(value, f.name))}')
        return '\n'.join(lines) + '\n'


def _format_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            return ', '.join(':'.join(str(part) for part in item) for item in value)
        return ', '.join(_format_value(v) for v in value)
    return str(value)


def _parse_scalar(text, kind):
    if kind is bool:
        lowered = text.lower()
        if lowered in ('true', 'yes', '1'):
            return True
        if lowered in ('false', 'no', '0'):
            return False
        raise ValueError(f'not a boolean: {text!r}')
    return kind(text)


def _parse_value(text, default):
    if isinstance(default, tuple):
        items = [item.strip() for item in text.split(',') if item.strip()]
        if default and isinstance(default[0], tuple):
            groups = []
            for item in items:
                name, start, stop = item.split(':')
                groups.append((name, int(start), int(stop)))
            return tuple(groups)
        kind = type(default[0]) if default else float
        return tuple(_parse_scalar(item, kind) for item in items)
    return _parse_scalar(text, type(default))


def parse_run_config(text):
    defaults = {name: cls() for name, cls in SECTIONS.items()}
    values = {name: {} for name in SECTIONS}
    seed = RunConfig.seed
    seen = set()
    model_preset = None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition('=')
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f'line {lineno}: expected `key = value`, got {raw.strip()!r}')
        if key in seen:
            raise ConfigError(f'line {lineno}: duplicate key {key}')
        seen.add(key)

        try:
            if key == 'seed':
                seed = int(value)
                continue
            section, _, name = key.partition('.')
            if section not in SECTIONS:
                raise ConfigError(f'line {lineno}: unknown section {section!r}')
            if section == 'model' and name == 'preset':
                model_preset = get_preset(value)
                continue
            if name not in {f.name for f in fields(defaults[section])}:
                raise ConfigError(f'line {lineno}: unknown key {key}')
            values[section][name] = _parse_value(value, getattr(defaults[section], name))
        except ConfigError:
            raise
        except ValueError as e:
            raise ConfigError(f'line {lineno}: bad value for {key}: {e}') from None

    sections = {}
    for name, cls in SECTIONS.items():
        if name == 'model' and model_preset is not None:
            overrides = dict(values[name])
            if 'hidden_dim' in overrides and 'ffn_dim' not in overrides:
                overrides['ffn_dim'] = 0
            sections[name] = replace(model_preset, **overrides)
        else:
            sections[name] = cls(**values[name])
    return RunConfig(seed=seed, **sections)


def load_run_config(path=None):
    """Read path, else $CADENZA_CONFIG, else return the defaults."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return RunConfig()
    try:
        with open(path, encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise IoError(f'cannot read config {path}: {e}') from e
    return parse_run_config(text)
