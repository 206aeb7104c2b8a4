"""
The full pipeline: attention, VLAD encoding, temporal aggregation,
normalization and a linear classifier.

Parameters live in one flat name -> tensor registry (see ``TENSOR_NAMES``)
so a training step can swap any subset for ``Var`` leaves and the same
``forward_batch`` serves plain and recorded evaluation.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, Optional

import numpy as np

from .attention import AttentionWeights, attend
from .codebook import Codebook
from .dataio.formats import ContainerFlags, read_container, write_container
from .error import ContractError
from .numerics import ops
from .numerics.ops import shape_of
from .temporal import DEFAULT_HIDDEN, GRU_NAMES, GruParams, finalize, run_gru
from .vlad import encode

LOG = logging.getLogger(__name__)

AGGREGATORS = ('gru', 'sum')
MODES = ('train', 'eval')

GRU_TENSORS = tuple(f'gru.{name}' for name in GRU_NAMES)
FC_TENSORS = ('fc.weights', 'fc.bias')
CODEBOOK_TRAINABLE = (
    'codebook.centers', 'codebook.assign_weights', 'codebook.assign_bias')
ATTENTION_TRAINABLE = ('attention.weights',)

STAGE_TRAINABLE = {
    0: (),
    1: GRU_TENSORS + FC_TENSORS,
    2: GRU_TENSORS + FC_TENSORS + ATTENTION_TRAINABLE + CODEBOOK_TRAINABLE,
}


@dataclass(frozen=True)
class ModelParams:
    tensors: Dict[str, np.ndarray]
    aggregator: str = 'gru'
    attention_enabled: bool = True
    dropout_rate: float = 0.5
    stage: int = 1

    def __post_init__(self):
        if self.aggregator not in AGGREGATORS:
            raise ContractError(f'unknown aggregator {self.aggregator!r}')
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ContractError(
                f'dropout rate must be in [0, 1), got {self.dropout_rate}')
        if self.stage not in STAGE_TRAINABLE:
            raise ContractError(f'unknown training stage {self.stage}')
        tensors = {k: np.asarray(v, dtype=np.float64)
                   for k, v in self.tensors.items()}
        object.__setattr__(self, 'tensors', tensors)
        required = set(CODEBOOK_TRAINABLE) | {'codebook.alpha'} \
            | set(ATTENTION_TRAINABLE) | set(FC_TENSORS)
        if self.aggregator == 'gru':
            required |= set(GRU_TENSORS)
        missing = sorted(required - set(tensors))
        if missing:
            raise ContractError(f'model is missing tensors: {missing}')
        # construction validates the shapes of each group
        attention = self.attention_weights
        codebook = self.codebook
        if attention.P != codebook.P:
            raise ContractError(
                f'attention: weights have P={attention.P}, '
                f'codebook has P={codebook.P}')
        if self.aggregator == 'gru' and self.gru.input_size != codebook.P:
            raise ContractError(
                f'temporal: GRU input size {self.gru.input_size} does not '
                f'match P={codebook.P}')
        fc_w, fc_b = tensors['fc.weights'], tensors['fc.bias']
        if fc_w.shape != (fc_w.shape[0], self.descriptor_size) \
                or fc_b.shape != fc_w.shape[:1]:
            raise ContractError(
                f'classifier: weights {fc_w.shape} and bias {fc_b.shape} do '
                f'not fit a descriptor of size {self.descriptor_size}')

    @property
    def attention_weights(self):
        return AttentionWeights(
            self.tensors['attention.weights'],
            self.tensors.get('attention.bias'))

    @property
    def codebook(self):
        return Codebook.from_tensors(self.tensors)

    @property
    def gru(self) -> Optional[GruParams]:
        if self.aggregator != 'gru':
            return None
        return GruParams.from_tensors(self.tensors)

    @property
    def fc_weights(self):
        return self.tensors['fc.weights']

    @property
    def fc_bias(self):
        return self.tensors['fc.bias']

    @property
    def K(self):
        return self.tensors['codebook.centers'].shape[0]

    @property
    def P(self):
        return self.tensors['codebook.centers'].shape[1]

    @property
    def hidden(self):
        if self.aggregator == 'gru':
            return self.tensors['gru.Wz'].shape[0]
        return None

    @property
    def descriptor_size(self):
        return self.K * (self.hidden if self.aggregator == 'gru' else self.P)

    @property
    def num_classes(self):
        return self.tensors['fc.weights'].shape[0]

    def trainable(self, freeze_attention=False):
        """Names of the tensors the current stage updates"""
        names = []
        for name in STAGE_TRAINABLE[self.stage]:
            if name not in self.tensors:
                continue
            if name in ATTENTION_TRAINABLE and (
                    freeze_attention or not self.attention_enabled):
                continue
            names.append(name)
        return tuple(names)

    def with_tensors(self, updates):
        return replace(self, tensors={**self.tensors, **updates})

    def replace(self, **changes):
        return replace(self, **changes)

    def flags(self):
        return ContainerFlags(
            aggregator=self.aggregator,
            attention_enabled=self.attention_enabled,
            dropout_rate=self.dropout_rate,
            stage=self.stage,
        )


@dataclass(frozen=True)
class ForwardOutput:
    logits: np.ndarray
    descriptor: np.ndarray
    attention: Optional[np.ndarray] = field(default=None)


def init_params(codebook, attention_weights, num_classes, rng,
                hidden=DEFAULT_HIDDEN, aggregator='gru',
                attention_enabled=True, dropout_rate=0.5):
    """
    Fresh stage-1 parameters around a fixed codebook and attention weights.

    GRU and classifier weights are uniform in (-1/sqrt(fan), 1/sqrt(fan));
    the classifier bias starts at zero.
    """
    if num_classes < 1:
        raise ContractError(f'num_classes must be positive, got {num_classes}')
    if attention_weights.P != codebook.P:
        raise ContractError(
            f'attention: weights have P={attention_weights.P}, codebook has '
            f'P={codebook.P}')
    tensors = {'attention.weights': attention_weights.weights}
    if attention_weights.bias is not None:
        tensors['attention.bias'] = attention_weights.bias
    tensors.update(codebook.tensors())
    if aggregator == 'gru':
        if hidden < 1:
            raise ContractError(f'hidden size must be positive, got {hidden}')
        gru = GruParams.init(codebook.P, hidden, rng.split('gru'))
        tensors.update(gru.tensors())
        size = codebook.K * hidden
    else:
        size = codebook.K * codebook.P
    bound = 1.0 / np.sqrt(size)
    u = rng.split('fc.weights').uniform((num_classes, size))
    tensors['fc.weights'] = (2.0 * u - 1.0) * bound
    tensors['fc.bias'] = np.zeros(num_classes)
    return ModelParams(
        tensors=tensors,
        aggregator=aggregator,
        attention_enabled=attention_enabled,
        dropout_rate=dropout_rate,
        stage=1,
    )


def _dropout_mask(shape, rate, rng):
    keep = rng.uniform(shape) >= rate
    return keep / (1.0 - rate)


def forward_batch(videos, tensors, params, train=False, rng=None):
    """
    Logits (B, C), descriptors (B, D) and attention (B, T, N) or None for
    videos of shape (B, T, N, P).

    ``tensors`` maps every registry name to an ndarray or a Var; ``params``
    supplies the flags.
    """
    videos = np.asarray(videos, dtype=np.float64)
    if videos.ndim != 4 or 0 in videos.shape:
        raise ContractError(
            f'model: videos must be non-empty (B, T, N, P), got {videos.shape}')
    P = shape_of(tensors['codebook.centers'])[1]
    if videos.shape[-1] != P:
        raise ContractError(
            f'vlad: features have P={videos.shape[-1]}, model expects {P}')
    attn = None
    if params.attention_enabled:
        attn = attend(videos, tensors['attention.weights'],
                      tensors.get('attention.bias'))
    frames = encode(videos, attn, tensors['codebook.centers'],
                    tensors['codebook.assign_weights'],
                    tensors['codebook.assign_bias'])
    if params.aggregator == 'gru':
        states = run_gru(frames, {n: tensors[f'gru.{n}'] for n in GRU_NAMES})
    else:
        states = ops.sum(frames, axis=-3)
    descriptor = finalize(states)
    features = descriptor
    if train and params.dropout_rate > 0:
        if rng is None:
            raise ContractError('model: train mode needs an rng for dropout')
        mask = _dropout_mask(shape_of(descriptor), params.dropout_rate, rng)
        features = ops.mul(descriptor, mask)
    fc_w = tensors['fc.weights']
    if shape_of(fc_w)[1] != shape_of(descriptor)[-1]:
        raise ContractError(
            f'classifier: weights {shape_of(fc_w)} do not fit descriptors '
            f'{shape_of(descriptor)}')
    logits = ops.add(ops.matmul(features, ops.transpose(fc_w)),
                     tensors['fc.bias'])
    return logits, descriptor, attn


def forward(video, params, mode='eval', rng=None):
    if mode not in MODES:
        raise ContractError(f'unknown mode {mode!r}')
    data = np.asarray(getattr(video, 'data', video), dtype=np.float64)
    if data.ndim != 3:
        raise ContractError(
            f'model: video must be T x N x P, got {data.shape}')
    logits, descriptor, attn = forward_batch(
        data[None], params.tensors, params, train=mode == 'train', rng=rng)
    return ForwardOutput(
        logits=logits[0],
        descriptor=descriptor[0],
        attention=None if attn is None else attn[0],
    )


def loss(logits, label):
    """Cross-entropy of one logits vector against a class index"""
    C = shape_of(logits)[-1]
    return ops.cross_entropy(ops.reshape(logits, (1, C)), [label])


def save_checkpoint(params, path):
    write_container(path, params.tensors, params.flags())


def load_checkpoint(path):
    tensors, flags = read_container(path)
    if flags.stage == 0:
        raise ContractError(f'{str(path)!r} holds a codebook, not a model')
    return ModelParams(
        tensors=tensors,
        aggregator=flags.aggregator,
        attention_enabled=flags.attention_enabled,
        dropout_rate=flags.dropout_rate,
        stage=flags.stage,
    )
