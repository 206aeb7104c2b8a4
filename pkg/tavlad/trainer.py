"""
Two-stage training with ADAM and a step-decay learning rate.

Every epoch draws its shuffle from ``Rng(seed).split('epoch-<e>')`` and each
batch's dropout masks from that stream's ``split('batch-<b>')``, so a run is
fixed by (seed, config, data).
"""
import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np

from .error import ContractError, DataIOError, NonFiniteLossError
from .model import ModelParams, forward_batch
from .numerics import GradientTape, Rng, ops
from .numerics.ops import value_of

LOG = logging.getLogger(__name__)

HISTORY_COLUMNS = ('epoch', 'lr', 'train_loss', 'train_acc', 'val_acc')


def lr_schedule(epoch, base_lr, cfg):
    """base_lr * decay_factor ** (epoch // decay_every)"""
    if epoch < 0:
        raise ContractError(f'epoch must be non-negative, got {epoch}')
    return base_lr * cfg.decay_factor ** (epoch // cfg.decay_every)


@dataclass(frozen=True)
class AdamState:
    m: Dict[str, np.ndarray]
    v: Dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def zeros(cls, params):
        return cls(
            m={k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()},
            v={k: np.zeros_like(v, dtype=np.float64) for k, v in params.items()},
        )


def adam_update(params, grads, state, lr, cfg):
    """
    One bias-corrected ADAM step over every tensor in ``params``.

    ``params`` and ``grads`` are name -> tensor mappings; a single tensor is
    accepted too and returned unwrapped. Returns (params, state).
    """
    single = not isinstance(params, dict)
    if single:
        params, grads = {'': params}, {'': grads}
    if state is None:
        state = AdamState.zeros(params)
    step = state.step + 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    correct1 = 1.0 - b1 ** step
    correct2 = 1.0 - b2 ** step
    new_params, new_m, new_v = {}, dict(state.m), dict(state.v)
    for name, theta in params.items():
        theta = np.asarray(theta, dtype=np.float64)
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != theta.shape:
            raise ContractError(
                f'gradient of {name!r} has shape {g.shape}, parameter has '
                f'{theta.shape}')
        m = b1 * state.m.get(name, 0.0) + (1.0 - b1) * g
        v = b2 * state.v.get(name, 0.0) + (1.0 - b2) * g * g
        m_hat = m / correct1
        v_hat = v / correct2
        new_params[name] = theta - lr * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
        new_m[name], new_v[name] = m, v
    state = AdamState(m=new_m, v=new_v, step=step)
    if single:
        return new_params[''], state
    return new_params, state


@dataclass(frozen=True)
class HistoryEntry:
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    val_acc: float


@dataclass
class History:
    entries: List[HistoryEntry] = field(default_factory=list)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, index):
        return self.entries[index]

    def append(self, entry):
        self.entries.append(entry)

    def column(self, name):
        return [getattr(e, name) for e in self.entries]

    def write_csv(self, path):
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open('w', newline='') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(HISTORY_COLUMNS)
                for e in self.entries:
                    writer.writerow([e.epoch] + [
                        repr(float(getattr(e, k))) for k in HISTORY_COLUMNS[1:]])
        except OSError as ex:
            raise DataIOError(f'cannot write {str(path)!r}: {ex.strerror}') \
                from ex


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    confusion: np.ndarray
    predictions: np.ndarray

    @property
    def correct(self):
        return int(np.trace(self.confusion))

    @property
    def total(self):
        return int(self.confusion.sum())


@dataclass(frozen=True)
class TrainResult:
    params: ModelParams
    best_params: ModelParams
    history: History

    def __iter__(self):
        return iter((self.params, self.history))


def _check_dataset(dataset, params, what):
    if len(dataset) == 0:
        raise ContractError(f'{what} set is empty')
    features = dataset.features
    if features.ndim != 4 or features.shape[-1] != params.P:
        raise ContractError(
            f'{what} set features {features.shape} do not match P={params.P}')
    if len(dataset.labels) != len(features):
        raise ContractError(
            f'{what} set has {len(features)} videos and '
            f'{len(dataset.labels)} labels')
    labels = np.asarray(dataset.labels)
    if labels.min() < 0 or labels.max() >= params.num_classes:
        raise ContractError(
            f'{what} set labels out of range [0, {params.num_classes})')


def evaluate(dataset, params, batch_size=32):
    """Eval-mode accuracy and confusion counts (rows true, columns predicted)"""
    _check_dataset(dataset, params, 'evaluation')
    predictions = []
    for start in range(0, len(dataset), batch_size):
        logits, _, _ = forward_batch(
            dataset.features[start:start + batch_size], params.tensors, params)
        predictions.append(np.argmax(logits, axis=1))
    predictions = np.concatenate(predictions)
    labels = np.asarray(dataset.labels, dtype=np.intp)
    C = params.num_classes
    confusion = np.zeros((C, C), dtype=np.int64)
    np.add.at(confusion, (labels, predictions), 1)
    accuracy = float(np.count_nonzero(predictions == labels)) / len(labels)
    return EvalResult(accuracy=accuracy, confusion=confusion,
                      predictions=predictions)


def _train_epoch(dataset, params, names, state, lr, epoch, cfg):
    rng = Rng(cfg.seed).split(f'epoch-{epoch}')
    order = rng.permutation(len(dataset))
    total = 0.0
    for batch, start in enumerate(range(0, len(order), cfg.batch_size)):
        index = order[start:start + cfg.batch_size]
        tape = GradientTape()
        watched = {n: tape.watch(params.tensors[n]) for n in names}
        logits, _, _ = forward_batch(
            dataset.features[index], {**params.tensors, **watched}, params,
            train=True, rng=rng.split(f'batch-{batch}'))
        batch_loss = ops.cross_entropy(logits, dataset.labels[index])
        value = float(value_of(batch_loss))
        if not math.isfinite(value):
            raise NonFiniteLossError(epoch, batch, value)
        grads = tape.gradient(batch_loss, watched)
        current = {n: params.tensors[n] for n in names}
        updated, state = adam_update(current, grads, state, lr, cfg)
        params = params.with_tensors(updated)
        total += value * len(index)
        LOG.debug('epoch %d batch %d: loss %.6f', epoch, batch, value)
    return params, state, total / len(order)


def train_stage(train_set, val_set, params, cfg):
    """
    Run ``cfg.epochs`` epochs of stage ``cfg.stage`` training.

    Only ``params.trainable(cfg.freeze_attention)`` tensors change; the
    returned ``best_params`` are those after the epoch with the strictly
    highest validation accuracy (first such epoch wins).
    """
    if params.stage > cfg.stage:
        raise ContractError(
            f'a stage-{params.stage} model can not be trained in stage '
            f'{cfg.stage}')
    params = params.replace(stage=cfg.stage, dropout_rate=cfg.dropout_rate)
    _check_dataset(train_set, params, 'training')
    _check_dataset(val_set, params, 'validation')
    names = params.trainable(cfg.freeze_attention)
    LOG.info('stage %d trains %s', cfg.stage, ', '.join(names))
    state = AdamState.zeros({n: params.tensors[n] for n in names})
    history = History()
    best_params, best_acc = params, -1.0
    for epoch in range(cfg.epochs):
        lr = lr_schedule(epoch, cfg.base_lr, cfg)
        params, state, train_loss = _train_epoch(
            train_set, params, names, state, lr, epoch, cfg)
        train_acc = evaluate(train_set, params, cfg.batch_size).accuracy
        val_acc = evaluate(val_set, params, cfg.batch_size).accuracy
        history.append(HistoryEntry(
            epoch=epoch, lr=lr, train_loss=train_loss,
            train_acc=train_acc, val_acc=val_acc))
        LOG.info('epoch %d: lr %.3g loss %.6f train_acc %.4f val_acc %.4f',
                 epoch, lr, train_loss, train_acc, val_acc)
        if val_acc > best_acc:
            best_params, best_acc = params, val_acc
    return TrainResult(params=params, best_params=best_params, history=history)
