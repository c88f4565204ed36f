"""Clip manifests: UTF-8 TSV with a label vocabulary header.

    #vocab: blues;classical;jazz
    clip_id<TAB>path<TAB>split<TAB>labels<TAB>duration_s
    c0001<TAB>audio/c0001.wav<TAB>train<TAB>jazz<TAB>30.0

labels are ';'-separated names from the vocabulary; pretrain rows may leave
them empty. Relative paths resolve against the manifest's directory.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError, IoError

VOCAB_PREFIX = '#vocab:'
COLUMNS = ('clip_id', 'path', 'split', 'labels', 'duration_s')
SPLITS = ('train', 'valid', 'test', 'pretrain')
DOWNSTREAM_SPLITS = ('train', 'valid', 'test')


@dataclass(frozen=True)
class ManifestRow:
    clip_id: str
    path: str
    split: str
    labels: tuple = ()
    duration_s: float = 0.0


@dataclass
class Manifest:
    vocab: tuple
    rows: list = field(default_factory=list)
    root: Path = Path('.')

    def __post_init__(self):
        self.vocab = tuple(self.vocab)
        if len(set(self.vocab)) != len(self.vocab):
            raise FormatError('manifest vocabulary repeats a label')
        seen = set()
        for row in self.rows:
            if row.clip_id in seen:
                raise FormatError(f'duplicate clip id {row.clip_id}')
            seen.add(row.clip_id)
            if row.split not in SPLITS:
                raise FormatError(f'clip {row.clip_id} has unknown split {row.split!r}')
            unknown = [label for label in row.labels if label not in self.vocab]
            if unknown:
                raise FormatError(f'clip {row.clip_id} uses labels outside the vocabulary: {unknown}')

    def split(self, *names):
        return [row for row in self.rows if row.split in names]

    def downstream_ids(self):
        return {row.clip_id for row in self.split(*DOWNSTREAM_SPLITS)}

    def pretrain_rows(self):
        """Pretrain-split rows minus any clip id that also appears downstream."""
        downstream = self.downstream_ids()
        return [row for row in self.split('pretrain') if row.clip_id not in downstream]

    def resolve(self, row):
        path = Path(row.path)
        return path if path.is_absolute() else self.root / path

    def label_matrix(self, rows):
        index = {label: i for i, label in enumerate(self.vocab)}
        matrix = np.zeros((len(rows), len(self.vocab)), dtype=bool)
        for r, row in enumerate(rows):
            for label in row.labels:
                matrix[r, index[label]] = True
        return matrix

    def class_indices(self, rows):
        """One class per row; anything else is a genre/vocabulary mismatch."""
        matrix = self.label_matrix(rows)
        bad = [row.clip_id for row, n in zip(rows, matrix.sum(axis=1)) if n != 1]
        if bad:
            raise ConfigError(f'single-label task but clips {bad[:5]} do not carry exactly one label')
        return matrix.argmax(axis=1)


def parse_manifest(text, root='.'):
    lines = text.splitlines()
    if not lines or not lines[0].startswith(VOCAB_PREFIX):
        raise FormatError(f'manifest must start with a {VOCAB_PREFIX} line')
    vocab = tuple(v.strip() for v in lines[0][len(VOCAB_PREFIX):].split(';') if v.strip())
    if len(lines) < 2 or tuple(lines[1].split('\t')) != COLUMNS:
        raise FormatError(f'manifest line 2 must be the column header {"/".join(COLUMNS)}')

    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split('\t')
        if len(parts) != len(COLUMNS):
            raise FormatError(f'manifest line {lineno}: expected {len(COLUMNS)} columns, got {len(parts)}')
        clip_id, path, split, labels, duration = parts
        try:
            duration_s = float(duration) if duration else 0.0
        except ValueError:
            raise FormatError(f'manifest line {lineno}: bad duration {duration!r}') from None
        rows.append(ManifestRow(
            clip_id=clip_id,
            path=path,
            split=split,
            labels=tuple(label for label in labels.split(';') if label),
            duration_s=duration_s,
        ))
    return Manifest(vocab=vocab, rows=rows, root=Path(root))


def format_manifest(manifest: Manifest):
    lines = [VOCAB_PREFIX + ' ' + ';'.join(manifest.vocab), '\t'.join(COLUMNS)]
    for row in manifest.rows:
        lines.append('\t'.join([row.clip_id, row.path, row.split, ';'.join(row.labels), f'{row.duration_s:.3f}']))
    return '\n'.join(lines) + '\n'


def read_manifest(path):
    path = Path(path)
    try:
        text = path.read_text(encoding='utf-8')
    except OSError as e:
        raise IoError(f'cannot read manifest {path}: {e}') from e
    return parse_manifest(text, root=path.parent)


def write_manifest(path, manifest: Manifest):
    path = Path(path)
    try:
        path.write_text(format_manifest(manifest), encoding='utf-8')
    except OSError as e:
        raise IoError(f'cannot write manifest {path}: {e}') from e
    return path
