from .formats import (
    FeatureVolume,
    ContainerFlags,
    read_features,
    write_features,
    read_attention_weights,
    write_attention_weights,
    read_container,
    write_container,
)
from .manifest import (
    DatasetManifest,
    VideoDataset,
    Record,
    uniform_sample,
    read_manifest,
    write_manifest,
    load_dataset,
    load_attention_weights,
    load_signal_masks,
)
from .synthetic import SyntheticSpec, gen_synthetic
from .pgm import export_attention_pgm

__all__ = (
    'FeatureVolume',
    'ContainerFlags',
    'read_features',
    'write_features',
    'read_attention_weights',
    'write_attention_weights',
    'read_container',
    'write_container',
    'DatasetManifest',
    'VideoDataset',
    'Record',
    'uniform_sample',
    'read_manifest',
    'write_manifest',
    'load_dataset',
    'load_attention_weights',
    'load_signal_masks',
    'SyntheticSpec',
    'gen_synthetic',
    'export_attention_pgm',
)
