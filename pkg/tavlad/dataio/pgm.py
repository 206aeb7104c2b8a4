import logging
from pathlib import Path

import numpy as np

from ..error import ContractError
from .binary import write_bytes

LOG = logging.getLogger(__name__)


def to_pixels(values):
    """round(m * 255) with halves away from zero, clipped to 0..255"""
    scaled = np.asarray(values, dtype=np.float64) * 255.0
    return np.clip(np.floor(scaled + 0.5), 0, 255).astype(np.uint8)


def export_attention_pgm(attn, grid, out_dir):
    """Write frame_<t>.pgm (binary P5, maxval 255) for every row of a T x N map"""
    attn = np.asarray(attn, dtype=np.float64)
    rows, cols = grid
    if attn.ndim != 2 or attn.shape[1] != rows * cols:
        raise ContractError(
            f'attention map {attn.shape} does not match grid {rows}x{cols}')
    out_dir = Path(out_dir)
    header = f'P5\n{cols} {rows}\n255\n'.encode('ascii')
    paths = []
    for t, frame in enumerate(attn):
        path = out_dir / f'frame_{t}.pgm'
        write_bytes(path, header + to_pixels(frame).reshape(rows, cols).tobytes())
        paths.append(path)
    LOG.info('wrote %d attention images to %s', len(paths), out_dir)
    return paths
