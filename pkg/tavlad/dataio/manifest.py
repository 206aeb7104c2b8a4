"""
Dataset manifests.

A split is a toml header (``train.toml``)::

    num_classes = 4
    channels = 16
    grid = [4, 4]
    attention_weights = "attention.tavw"
    sample_frames = 8
    records = "train.txt"
    masks = "masks"            # optional

and a records file with one ``path<TAB>label`` line per video; ``#`` starts a
comment line. Paths are relative to the header's directory.
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import toml
from validr import T, Invalid, modelclass

from ..error import ContractError, DataIOError
from .formats import read_attention_weights, read_features

LOG = logging.getLogger(__name__)


@modelclass(immutable=True)
class ManifestHeader:
    num_classes = T.int.min(1)
    channels = T.int.min(1)
    grid = T.list(T.int.min(1)).minlen(2).maxlen(2)
    attention_weights = T.str
    sample_frames = T.int.min(1)
    records = T.str
    masks = T.str.optional


@dataclass(frozen=True)
class Record:
    path: str
    label: int


@dataclass(frozen=True)
class DatasetManifest:
    root: Path
    num_classes: int
    channels: int
    grid: Tuple[int, int]
    attention_weights: str
    sample_frames: int
    records: Tuple[Record, ...]
    records_file: str = 'records.txt'
    masks: Optional[str] = None

    def __len__(self):
        return len(self.records)

    @property
    def N(self):
        return self.grid[0] * self.grid[1]

    def resolve(self, path):
        return self.root / path


@dataclass(frozen=True)
class VideoDataset:
    features: np.ndarray
    labels: np.ndarray
    num_classes: int
    names: Tuple[str, ...]

    def __len__(self):
        return len(self.labels)


def uniform_sample(total, count):
    """Centered strata: index_j = floor((j + 0.5) * total / count)"""
    if total < 1 or count < 1:
        raise ContractError(
            f'uniform_sample needs positive sizes, got {total}, {count}')
    j = np.arange(count)
    return ((2 * j + 1) * total) // (2 * count)


def _read_text(path):
    try:
        return Path(path).read_text(encoding='utf-8')
    except OSError as ex:
        raise DataIOError(f'cannot read {str(path)!r}: {ex.strerror}') from ex


def _parse_records(text, path, num_classes):
    records = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        parts = line.split('\t')
        if len(parts) != 2:
            raise DataIOError(
                f'{path}:{lineno}: expected "path<TAB>label", got {line!r}')
        try:
            label = int(parts[1])
        except ValueError:
            raise DataIOError(
                f'{path}:{lineno}: label {parts[1]!r} is not an integer') \
                from None
        if not 0 <= label < num_classes:
            raise DataIOError(
                f'{path}:{lineno}: label {label} out of range '
                f'[0, {num_classes})')
        records.append(Record(parts[0], label))
    return tuple(records)


def read_manifest(path, check_files=True):
    path = Path(path)
    try:
        raw = toml.loads(_read_text(path))
    except toml.TomlDecodeError as ex:
        raise DataIOError(f'{str(path)!r} is not valid TOML: {ex}') from None
    try:
        header = ManifestHeader(**raw)
    except Invalid as ex:
        raise DataIOError(f'{str(path)!r}: {ex.message}') from None
    root = path.parent
    records = _parse_records(
        _read_text(root / header.records), root / header.records,
        header.num_classes)
    manifest = DatasetManifest(
        root=root,
        num_classes=header.num_classes,
        channels=header.channels,
        grid=tuple(header.grid),
        attention_weights=header.attention_weights,
        sample_frames=header.sample_frames,
        records=records,
        records_file=header.records,
        masks=header.masks,
    )
    if check_files:
        missing = [r.path for r in records
                   if not manifest.resolve(r.path).is_file()]
        if not manifest.resolve(header.attention_weights).is_file():
            missing.append(header.attention_weights)
        if missing:
            raise DataIOError(
                f'{str(path)!r} references missing files: {missing[:5]}')
    return manifest


def write_manifest(path, manifest):
    path = Path(path)
    header = {
        'num_classes': manifest.num_classes,
        'channels': manifest.channels,
        'grid': list(manifest.grid),
        'attention_weights': manifest.attention_weights,
        'sample_frames': manifest.sample_frames,
        'records': manifest.records_file,
    }
    if manifest.masks is not None:
        header['masks'] = manifest.masks
    lines = ['# path\tlabel']
    lines.extend(f'{r.path}\t{r.label}' for r in manifest.records)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(toml.dumps(header), encoding='utf-8')
        (path.parent / manifest.records_file).write_text(
            '\n'.join(lines) + '\n', encoding='utf-8')
    except OSError as ex:
        raise DataIOError(f'cannot write {str(path)!r}: {ex.strerror}') from ex


def load_attention_weights(manifest):
    weights = read_attention_weights(
        manifest.resolve(manifest.attention_weights))
    if weights.P != manifest.channels:
        raise ContractError(
            f'attention weights have P={weights.P}, manifest says '
            f'{manifest.channels}')
    return weights


def load_dataset(manifest):
    """Uniformly sampled features (n, T_s, N, P) and labels of every record"""
    if not manifest.records:
        raise ContractError('manifest has no videos')
    n, Ts = len(manifest.records), manifest.sample_frames
    features = np.empty((n, Ts, manifest.N, manifest.channels))
    for i, record in enumerate(manifest.records):
        volume = read_features(manifest.resolve(record.path))
        if volume.grid != manifest.grid or volume.P != manifest.channels:
            raise ContractError(
                f'{record.path}: grid {volume.grid} P={volume.P} does not '
                f'match manifest grid {manifest.grid} P={manifest.channels}')
        features[i] = volume.data[uniform_sample(volume.T, Ts)]
    LOG.info('loaded %d videos from %s', n, manifest.root)
    return VideoDataset(
        features=features,
        labels=np.array([r.label for r in manifest.records], dtype=np.intp),
        num_classes=manifest.num_classes,
        names=tuple(Path(r.path).stem for r in manifest.records),
    )


def load_signal_masks(manifest):
    """Boolean (n, T_s, N) signal-cell masks at the sampled frames"""
    if manifest.masks is None:
        raise ContractError('manifest has no masks directory')
    masks = []
    for record in manifest.records:
        path = manifest.resolve(manifest.masks) / f'{Path(record.path).stem}.npy'
        try:
            mask = np.load(path)
        except OSError as ex:
            raise DataIOError(f'cannot read {str(path)!r}: {ex}') from ex
        if mask.ndim != 2 or mask.shape[1] != manifest.N:
            raise ContractError(
                f'{str(path)!r}: mask shape {mask.shape} does not match '
                f'N={manifest.N}')
        masks.append(mask[uniform_sample(len(mask), manifest.sample_frames)])
    return np.array(masks, dtype=bool)
