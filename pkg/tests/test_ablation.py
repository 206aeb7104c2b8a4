import csv

import numpy as np
import pytest

from tavlad.ablation import attention_contrast, run_ablation
from tavlad.codebook import Codebook
from tavlad.config import AblateConfig
from tavlad.dataio import (
    load_attention_weights,
    load_dataset,
    load_signal_masks,
    read_manifest,
)
from tavlad.error import ContractError
from tavlad.numerics import Rng


def test_attention_contrast_prefers_signal_cells():
    weights = 4.0 * np.eye(2)
    features = np.array([[[[1.0, 0.0], [0.0, 0.0]]]])
    masks = np.array([[[True, False]]])
    contrast = attention_contrast(features, masks, weights)
    expected = 1.0 / (1.0 + np.exp(-4.0)) - 0.5
    assert contrast == pytest.approx(expected)
    assert attention_contrast(features, ~masks, weights) == \
        pytest.approx(-expected)


def test_attention_contrast_needs_both_kinds_of_cell():
    features = np.ones((1, 1, 2, 2))
    with pytest.raises(ContractError):
        attention_contrast(features, np.ones((1, 1, 2), dtype=bool),
                           np.eye(2))
    with pytest.raises(ContractError):
        attention_contrast(features, np.ones((1, 2, 2), dtype=bool),
                           np.eye(2))


def test_run_ablation_ladder(synth_dir, tmp_path):
    manifests = {s: read_manifest(synth_dir / f'{s}.toml')
                 for s in ('train', 'val', 'test')}
    datasets = {s: load_dataset(m) for s, m in manifests.items()}
    weights = load_attention_weights(manifests['train'])
    P = manifests['train'].channels
    codebook = Codebook.from_centers(Rng(0).normal((2, P)), alpha=1.0)
    config = AblateConfig(hidden=4, hidden_sizes=[2, 4], stage1_epochs=1,
                          stage2_epochs=1, batch_size=4, dropout_rate=0.0)
    result = run_ablation(datasets, codebook, weights, config,
                          masks=load_signal_masks(manifests['test']))
    names = [row.name for row in result.rows]
    assert names == ['sum', 'gru H=2', 'gru H=4', 'attention H=4',
                     'attention H=4 frozen']
    for row in result.rows:
        assert 0.0 <= row.test_acc <= 1.0
    assert result.rows[0].hidden is None
    assert result.rows[0].contrast_before is None
    assert result.rows[-1].contrast_before is not None
    assert 'attention H=4 frozen' in result.table()

    path = tmp_path / 'ablation.csv'
    result.write_csv(path)
    with path.open() as f:
        rows = list(csv.reader(f))
    assert rows[0][0] == 'name' and rows[0][-1] == 'contrast_after'
    assert len(rows) == 6
