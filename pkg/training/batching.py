import numpy as np
import torch

from shared.errors import InvalidInput


def pad_batch(arrays, dtype=torch.float32):
    """Stack N_i x C arrays into B x N_max x C plus a B x N_max mask that is True on padding."""
    if not arrays:
        raise InvalidInput('cannot pad an empty batch')
    arrays = [np.asarray(a) for a in arrays]
    n_max = max(a.shape[0] for a in arrays)
    width = arrays[0].shape[1]
    x = torch.zeros(len(arrays), n_max, width, dtype=dtype)
    pad_mask = torch.ones(len(arrays), n_max, dtype=torch.bool)
    for i, a in enumerate(arrays):
        if a.shape[1] != width:
            raise InvalidInput(f'batch mixes {width} and {a.shape[1]} channels')
        x[i, :a.shape[0]] = torch.as_tensor(a, dtype=dtype)
        pad_mask[i, :a.shape[0]] = False
    return x, pad_mask


def batches(indices, batch_size):
    for start in range(0, len(indices), batch_size):
        yield indices[start:start + batch_size]
