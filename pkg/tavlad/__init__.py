from .attention import AttentionWeights, CamMap, winning_class, cam, attention_map
from .codebook import (
    Codebook,
    sample_features,
    kmeans,
    init_assignment_params,
    build_codebook,
)
from .vlad import membership, encode_frame, encode_video_sum, vlad_oracle
from .temporal import GruParams, gru_step, aggregate, finalize_descriptor
from .model import (
    ModelParams,
    ForwardOutput,
    init_params,
    forward,
    loss,
    save_checkpoint,
    load_checkpoint,
)
from .trainer import lr_schedule, AdamState, adam_update, train_stage, evaluate
from .helper import find_version

__version__ = find_version()
__all__ = (
    'AttentionWeights',
    'CamMap',
    'winning_class',
    'cam',
    'attention_map',
    'Codebook',
    'sample_features',
    'kmeans',
    'init_assignment_params',
    'build_codebook',
    'membership',
    'encode_frame',
    'encode_video_sum',
    'vlad_oracle',
    'GruParams',
    'gru_step',
    'aggregate',
    'finalize_descriptor',
    'ModelParams',
    'ForwardOutput',
    'init_params',
    'forward',
    'loss',
    'save_checkpoint',
    'load_checkpoint',
    'lr_schedule',
    'AdamState',
    'adam_update',
    'train_stage',
    'evaluate',
)
