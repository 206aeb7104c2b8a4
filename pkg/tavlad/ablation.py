"""
Configuration ladder: order-blind sum pooling, then GRU pooling at each
hidden size, then the attention model trained in two stages, with and
without frozen attention weights in stage 2.
"""
import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from terminaltables import SingleTable

from .attention import attend
from .error import ContractError, DataIOError
from .model import init_params
from .numerics import Rng
from .trainer import evaluate, train_stage

LOG = logging.getLogger(__name__)

CSV_COLUMNS = ('name', 'aggregator', 'attention', 'hidden', 'freeze_attention',
               'test_acc', 'contrast_before', 'contrast_after')


def attention_contrast(features, masks, weights, bias=None):
    """Mean attention on signal cells minus mean attention on background"""
    masks = np.asarray(masks, dtype=bool)
    attn = attend(features, weights, bias)
    if attn.shape != masks.shape:
        raise ContractError(
            f'attention {attn.shape} does not match masks {masks.shape}')
    if masks.all() or not masks.any():
        raise ContractError('masks need both signal and background cells')
    return float(attn[masks].mean() - attn[~masks].mean())


@dataclass(frozen=True)
class AblationRow:
    name: str
    aggregator: str
    attention: bool
    hidden: Optional[int]
    freeze_attention: bool
    test_acc: float
    contrast_before: Optional[float] = None
    contrast_after: Optional[float] = None


@dataclass(frozen=True)
class AblationResult:
    rows: Tuple[AblationRow, ...]

    def table(self):
        def fmt(x):
            return '-' if x is None else f'{x:.4f}'
        rows = [('Configuration', 'Test accuracy', 'Contrast before',
                 'Contrast after')]
        for r in self.rows:
            rows.append((r.name, f'{r.test_acc:.4f}', fmt(r.contrast_before),
                         fmt(r.contrast_after)))
        return SingleTable(rows, title='Ablation').table

    def write_csv(self, path):
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open('w', newline='') as f:
                writer = csv.writer(f, lineterminator='\n')
                writer.writerow(CSV_COLUMNS)
                for r in self.rows:
                    writer.writerow(['' if getattr(r, k) is None
                                     else getattr(r, k) for k in CSV_COLUMNS])
        except OSError as ex:
            raise DataIOError(f'cannot write {str(path)!r}: {ex.strerror}') \
                from ex


def _contrast(dataset, masks, params):
    if masks is None:
        return None
    aw = params.attention_weights
    return attention_contrast(dataset.features, masks, aw.weights, aw.bias)


def _run(name, datasets, codebook, attention_weights, config, aggregator,
         attention, hidden, freeze=False, masks=None):
    LOG.info('ablation: %s', name)
    params = init_params(
        codebook, attention_weights, datasets['train'].num_classes,
        Rng(config.seed).split(f'init-{name}'), hidden=hidden or config.hidden,
        aggregator=aggregator, attention_enabled=attention,
        dropout_rate=config.dropout_rate)
    cfg = config.train_config(stage=1)
    params = train_stage(datasets['train'], datasets['val'], params, cfg) \
        .best_params
    before = after = None
    if attention:
        before = _contrast(datasets['test'], masks, params)
        cfg = config.train_config(stage=2, freeze_attention=freeze)
        params = train_stage(
            datasets['train'], datasets['val'], params, cfg).best_params
        after = _contrast(datasets['test'], masks, params)
    acc = evaluate(datasets['test'], params, config.batch_size).accuracy
    LOG.info('ablation: %s test accuracy %.4f', name, acc)
    return AblationRow(
        name=name, aggregator=aggregator, attention=attention,
        hidden=hidden if aggregator == 'gru' else None,
        freeze_attention=freeze, test_acc=acc,
        contrast_before=before, contrast_after=after)


def run_ablation(datasets, codebook, attention_weights, config, masks=None):
    """
    ``datasets`` maps 'train', 'val' and 'test' to VideoDatasets; ``masks``
    are the test split's signal masks, used for the contrast columns.
    """
    rows = [_run('sum', datasets, codebook, attention_weights, config,
                 'sum', False, None)]
    for hidden in config.hidden_sizes:
        rows.append(_run(f'gru H={hidden}', datasets, codebook,
                         attention_weights, config, 'gru', False, hidden))
    for freeze in (False, True):
        name = f'attention H={config.hidden}'
        if freeze:
            name += ' frozen'
        rows.append(_run(name, datasets, codebook, attention_weights, config,
                         'gru', True, config.hidden, freeze=freeze,
                         masks=masks))
    return AblationResult(rows=tuple(rows))
