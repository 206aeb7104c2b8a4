"""
Synthetic action dataset.

Each class is an ordered path through ``segments`` unit-norm prototypes.
Within a video the signal content steps through the prototypes of the path,
one segment at a time, while its cell random-walks over the grid; every other
cell is pure Gaussian noise. With ``reversed_pairs`` class 2m+1 is the exact
time reversal of class 2m (same walk, same noise), so any encoder that
ignores frame order can not tell a pair apart.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..attention import AttentionWeights
from ..error import ConfigError, DataIOError
from ..numerics import Rng
from .formats import FeatureVolume, write_attention_weights, write_features
from .manifest import DatasetManifest, Record, write_manifest

LOG = logging.getLogger(__name__)

SPLITS = ('train', 'val', 'test')
ATTENTION_FILE = 'attention.tavw'
VIDEO_DIR = 'videos'
MASK_DIR = 'masks'

# stay, up, down, left, right
_MOVES = ((0, 0), (-1, 0), (1, 0), (0, -1), (0, 1))


@dataclass(frozen=True)
class SyntheticSpec:
    num_classes: int = 4
    videos_per_class: int = 40
    frames: int = 12
    sample_frames: int = 8
    grid_rows: int = 4
    grid_cols: int = 4
    channels: int = 16
    prototypes: int = 4
    segments: int = 2
    noise: float = 0.1
    signal_cells: int = 1
    reversed_pairs: bool = True
    clamp: bool = False
    attention_scale: float = 6.0
    val_fraction: float = 0.2
    test_fraction: float = 0.2
    seed: int = 0
    threads: Optional[int] = None

    def __post_init__(self):
        positive = ('num_classes', 'videos_per_class', 'frames',
                    'sample_frames', 'grid_rows', 'grid_cols', 'channels',
                    'prototypes', 'segments', 'signal_cells')
        for name in positive:
            if getattr(self, name) < 1:
                raise ConfigError(f'{name} must be positive')
        if self.signal_cells > self.N:
            raise ConfigError(
                f'{self.signal_cells} signal cells do not fit a '
                f'{self.grid_rows}x{self.grid_cols} grid')
        if self.segments > self.prototypes:
            raise ConfigError(
                f'{self.segments} segments need at least as many prototypes, '
                f'got {self.prototypes}')
        if self.noise < 0:
            raise ConfigError(f'noise must be non-negative, got {self.noise}')
        if min(self.split_sizes()) < 1:
            raise ConfigError(
                f'{self.videos_per_class} videos per class leave an empty '
                f'split with fractions val={self.val_fraction} '
                f'test={self.test_fraction}')

    @classmethod
    def from_config(cls, config):
        return cls(**{f.name: getattr(config, f.name) for f in fields(cls)})

    @property
    def N(self):
        return self.grid_rows * self.grid_cols

    @property
    def grid(self):
        return (self.grid_rows, self.grid_cols)

    def split_sizes(self):
        """Videos per class in (train, val, test)"""
        if not (0 <= self.val_fraction < 1 and 0 <= self.test_fraction < 1
                and self.val_fraction + self.test_fraction < 1):
            raise ConfigError(
                f'split fractions val={self.val_fraction} '
                f'test={self.test_fraction} must be in [0, 1) and sum below 1')
        n_val = int(round(self.videos_per_class * self.val_fraction))
        n_test = int(round(self.videos_per_class * self.test_fraction))
        return (self.videos_per_class - n_val - n_test, n_val, n_test)

    def split_of(self, v):
        n_train, n_val, _ = self.split_sizes()
        if v < n_train:
            return 'train'
        if v < n_train + n_val:
            return 'val'
        return 'test'


@dataclass(frozen=True)
class SyntheticVideo:
    volume: FeatureVolume
    mask: np.ndarray


@dataclass(frozen=True)
class SyntheticDataset:
    root: Path
    manifests: Dict[str, Path]
    counts: Dict[str, int]
    attention_weights: Path
    prototypes: np.ndarray


def make_prototypes(spec, rng):
    protos = rng.normal((spec.prototypes, spec.channels))
    if spec.clamp:
        protos = np.abs(protos)
    return protos / np.linalg.norm(protos, axis=1, keepdims=True)


def class_paths(spec, rng):
    """Prototype index sequence of every class, shape (num_classes, segments)"""
    paths = np.empty((spec.num_classes, spec.segments), dtype=np.intp)
    for c in range(spec.num_classes):
        if spec.reversed_pairs and c % 2 == 1:
            paths[c] = paths[c - 1][::-1]
        elif spec.reversed_pairs and c + 1 < spec.num_classes:
            m = c // 2
            paths[c] = [(m * spec.segments + s) % spec.prototypes
                        for s in range(spec.segments)]
        else:
            order = rng.split(f'class-{c}').permutation(spec.prototypes)
            paths[c] = order[:spec.segments]
    return paths


def _trajectory(protos, frames):
    """Signal content per frame: frame t shows segment t*S//T of the path"""
    S = len(protos)
    segment = np.minimum(np.arange(frames) * S // frames, S - 1)
    return protos[segment]


def _walk(spec, rng):
    anchor = int(rng.integers(spec.N))
    moves = rng.integers(len(_MOVES), size=spec.frames)
    row, col = divmod(anchor, spec.grid_cols)
    anchors = []
    for t in range(spec.frames):
        if t > 0:
            dr, dc = _MOVES[moves[t]]
            row = min(max(row + dr, 0), spec.grid_rows - 1)
            col = min(max(col + dc, 0), spec.grid_cols - 1)
        anchors.append(row * spec.grid_cols + col)
    return np.array(anchors, dtype=np.intp)


def render_video(spec, prototypes, path, rng):
    """Forward-time video of one class path"""
    content = _trajectory(prototypes[path], spec.frames)
    anchors = _walk(spec, rng.split('walk'))
    data = spec.noise * rng.split('noise').normal(
        (spec.frames, spec.N, spec.channels))
    mask = np.zeros((spec.frames, spec.N), dtype=bool)
    offsets = np.arange(spec.signal_cells)
    for t in range(spec.frames):
        cells = (anchors[t] + offsets) % spec.N
        data[t, cells] += content[t]
        mask[t, cells] = True
    if spec.clamp:
        data = np.maximum(data, 0.0)
    return SyntheticVideo(FeatureVolume(data, spec.grid), mask)


def video_name(c, v):
    return f'c{c:02d}_v{v:03d}'


def _generate_one(spec, prototypes, paths, root, c, v):
    base = c - 1 if spec.reversed_pairs and c % 2 == 1 else c
    rng = Rng(spec.seed).split(f'video-{base}-{v}')
    video = render_video(spec, prototypes, paths[base], rng)
    if base != c:
        video = SyntheticVideo(
            FeatureVolume(video.volume.data[::-1], spec.grid),
            video.mask[::-1].copy())
    name = video_name(c, v)
    write_features(root / VIDEO_DIR / f'{name}.tavf', video.volume)
    mask_path = root / MASK_DIR / f'{name}.npy'
    try:
        mask_path.parent.mkdir(parents=True, exist_ok=True)
        np.save(mask_path, video.mask)
    except OSError as ex:
        raise DataIOError(f'cannot write {str(mask_path)!r}: {ex}') from ex
    return name


def gen_synthetic(spec, out_dir):
    """Write videos, masks, attention weights and split manifests"""
    root = Path(out_dir)
    rng = Rng(spec.seed)
    prototypes = make_prototypes(spec, rng.split('prototypes'))
    paths = class_paths(spec, rng.split('classes'))
    write_attention_weights(
        root / ATTENTION_FILE,
        AttentionWeights(spec.attention_scale * prototypes))

    jobs = [(c, v) for c in range(spec.num_classes)
            for v in range(spec.videos_per_class)]
    with ThreadPoolExecutor(max_workers=spec.threads) as executor:
        names = list(executor.map(
            lambda job: _generate_one(spec, prototypes, paths, root, *job),
            jobs))

    records = {split: [] for split in SPLITS}
    for (c, v), name in zip(jobs, names):
        records[spec.split_of(v)].append(
            Record(f'{VIDEO_DIR}/{name}.tavf', c))
    manifests = {}
    for split in SPLITS:
        manifest = DatasetManifest(
            root=root,
            num_classes=spec.num_classes,
            channels=spec.channels,
            grid=spec.grid,
            attention_weights=ATTENTION_FILE,
            sample_frames=spec.sample_frames,
            records=tuple(records[split]),
            records_file=f'{split}.txt',
            masks=MASK_DIR,
        )
        manifests[split] = root / f'{split}.toml'
        write_manifest(manifests[split], manifest)
        LOG.info('%s: %d videos', split, len(records[split]))
    return SyntheticDataset(
        root=root,
        manifests=manifests,
        counts={split: len(records[split]) for split in SPLITS},
        attention_weights=root / ATTENTION_FILE,
        prototypes=prototypes,
    )
