"""MCCK checkpoint files.

    b'MCCK' | u32 version | u32 header_len | header JSON
    | float32 little-endian payloads | u32 trailer_len | trailer JSON

The header lists every tensor (name, shape, dtype, offset, count) in payload
order. The trailer holds the ModelConfig, the task head spec and the training
state scalars. Optimizer moments travel as ordinary tensors named
'optim.exp_avg.<param>' and 'optim.exp_avg_sq.<param>'.
"""
import json
import os
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import torch

from shared.errors import CadenzaError, FormatError, IoError

from .config import ModelConfig, TaskSpec
from .models import FrameEncoder

MAGIC = b'MCCK'
VERSION = 1
OPTIM_PREFIX = 'optim.'
TASK_HEAD_PREFIX = 'task_head.'


def _u32(value):
    return np.array([value], dtype='<u4').tobytes()


def _read_u32(blob, offset):
    if offset + 4 > len(blob):
        raise FormatError('MCCK file is truncated')
    return int(np.frombuffer(blob, dtype='<u4', count=1, offset=offset)[0]), offset + 4


def _read_json(blob, offset):
    length, offset = _read_u32(blob, offset)
    if offset + length > len(blob):
        raise FormatError('MCCK file is truncated')
    try:
        return json.loads(blob[offset:offset + length].decode('utf-8')), offset + length
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f'MCCK metadata is corrupt: {e}') from e


@dataclass
class Checkpoint:
    model_config: ModelConfig
    task: TaskSpec = None
    tensors: dict = field(default_factory=dict)
    train_state: dict = field(default_factory=dict)

    @classmethod
    def from_model(cls, model: FrameEncoder, train_state=None):
        tensors = {name: t.detach().clone() for name, t in model.state_dict().items()}
        meta = {}
        if train_state is not None:
            tensors.update(train_state.named_tensors())
            meta = train_state.to_dict()
        return cls(model.cfg, model.task, tensors, meta)

    def model_tensors(self):
        return {k: v for k, v in self.tensors.items() if not k.startswith(OPTIM_PREFIX)}

    def optimizer_tensors(self):
        return {k: v for k, v in self.tensors.items() if k.startswith(OPTIM_PREFIX)}

    def build_model(self, task: TaskSpec = None, dropout_rate=None) -> FrameEncoder:
        """Rebuild the encoder; a task differing from the stored one gets a fresh head."""
        cfg = self.model_config if dropout_rate is None else replace(self.model_config, dropout_rate=dropout_rate)
        task = task or self.task
        model = FrameEncoder(cfg, task)
        weights = self.model_tensors()
        if task != self.task:
            weights = {k: v for k, v in weights.items() if not k.startswith(TASK_HEAD_PREFIX)}
        missing, unexpected = model.load_state_dict(weights, strict=False)
        if unexpected or any(not k.startswith(TASK_HEAD_PREFIX) for k in missing):
            raise FormatError(
                f'checkpoint does not match the model: missing {missing}, unexpected {unexpected}'
            )
        return model


def encode_checkpoint(ckpt: Checkpoint) -> bytes:
    entries = []
    payloads = []
    offset = 0
    for name, tensor in ckpt.tensors.items():
        array = tensor.detach().cpu().contiguous().numpy().astype('<f4')
        entries.append({
            'name': name,
            'shape': list(array.shape),
            'dtype': 'f32',
            'offset': offset,
            'count': int(array.size),
        })
        payloads.append(array.tobytes())
        offset += 4 * array.size

    header = json.dumps({'tensors': entries}, sort_keys=True).encode('utf-8')
    trailer = json.dumps({
        'model_config': asdict(ckpt.model_config),
        'task': asdict(ckpt.task) if ckpt.task is not None else None,
        'train_state': ckpt.train_state,
    }, sort_keys=True).encode('utf-8')
    return b''.join([
        MAGIC, _u32(VERSION), _u32(len(header)), header,
        *payloads,
        _u32(len(trailer)), trailer,
    ])


def _decode_tensors(blob, entries, payload_start):
    tensors = {}
    payload_bytes = 0
    for entry in entries:
        if entry['dtype'] != 'f32':
            raise FormatError(f"tensor {entry['name']} has unsupported dtype {entry['dtype']}")
        start = payload_start + entry['offset']
        end = start + 4 * entry['count']
        if end > len(blob):
            raise FormatError(f"MCCK payload for {entry['name']} is truncated")
        array = np.frombuffer(blob[start:end], dtype='<f4').reshape(entry['shape'])
        tensors[entry['name']] = torch.from_numpy(array.astype(np.float32))
        payload_bytes += 4 * entry['count']
    return tensors, payload_start + payload_bytes


def decode_checkpoint(blob: bytes) -> Checkpoint:
    if blob[:4] != MAGIC:
        raise FormatError('not an MCCK checkpoint')
    version, offset = _read_u32(blob, 4)
    if version != VERSION:
        raise FormatError(f'unsupported MCCK version {version}')
    header, offset = _read_json(blob, offset)

    try:
        tensors, offset = _decode_tensors(blob, header['tensors'], offset)
        trailer, _ = _read_json(blob, offset)
        task = trailer.get('task')
        return Checkpoint(
            model_config=ModelConfig(**trailer['model_config']),
            task=TaskSpec(**task) if task else None,
            tensors=tensors,
            train_state=trailer.get('train_state') or {},
        )
    except CadenzaError:
        raise
    except (KeyError, TypeError, ValueError, AttributeError) as e:
        raise FormatError(f'MCCK metadata is malformed: {e!r}') from e


def save_checkpoint(path, model: FrameEncoder, train_state=None):
    """Write model weights (and optionally a TrainState) to path atomically.

    train_state must provide named_tensors() and to_dict().
    """
    blob = encode_checkpoint(Checkpoint.from_model(model, train_state))
    tmp = f'{path}.tmp'
    try:
        with open(tmp, 'wb') as f:
            f.write(blob)
        os.replace(tmp, path)
    except OSError as e:
        raise IoError(f'cannot write checkpoint {path}: {e}') from e
    return path


def load_checkpoint(path) -> Checkpoint:
    try:
        with open(path, 'rb') as f:
            blob = f.read()
    except OSError as e:
        raise IoError(f'cannot read checkpoint {path}: {e}') from e
    return decode_checkpoint(blob)
