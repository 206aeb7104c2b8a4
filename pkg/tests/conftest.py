import numpy as np
import pytest

from tavlad.attention import AttentionWeights
from tavlad.codebook import Codebook
from tavlad.dataio import SyntheticSpec, gen_synthetic
from tavlad.dataio.manifest import VideoDataset
from tavlad.model import init_params
from tavlad.numerics import Rng

SMALL_SPEC = dict(
    num_classes=2,
    videos_per_class=5,
    frames=4,
    sample_frames=3,
    grid_rows=2,
    grid_cols=2,
    channels=4,
    prototypes=2,
    segments=2,
    noise=0.1,
    threads=2,
)


@pytest.fixture
def rng():
    return Rng(1234)


@pytest.fixture
def small_spec():
    return SyntheticSpec(**SMALL_SPEC)


@pytest.fixture(scope='session')
def synth_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp('synth')
    gen_synthetic(SyntheticSpec(**SMALL_SPEC), root)
    return root


def make_codebook(rng, K=3, P=5, alpha=1.0):
    return Codebook.from_centers(0.5 * rng.normal((K, P)), alpha=alpha)


def make_params(seed=0, K=3, P=5, C=2, H=4, aggregator='gru', attention=True,
                dropout_rate=0.0, alpha=1.0):
    rng = Rng(seed)
    codebook = make_codebook(rng.split('codebook'), K=K, P=P, alpha=alpha)
    weights = AttentionWeights(0.5 * rng.split('attention').normal((C, P)))
    return init_params(
        codebook, weights, C, rng.split('init'), hidden=H,
        aggregator=aggregator, attention_enabled=attention,
        dropout_rate=dropout_rate)


def make_videos(seed, B=2, T=3, N=4, P=5, scale=0.5):
    return scale * Rng(seed).normal((B, T, N, P))


def make_dataset(features, labels, num_classes):
    labels = np.asarray(labels, dtype=np.intp)
    return VideoDataset(
        features=np.asarray(features, dtype=np.float64),
        labels=labels,
        num_classes=num_classes,
        names=tuple(f'v{i}' for i in range(len(labels))),
    )
