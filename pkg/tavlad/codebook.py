import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.distance import cdist

from .error import ContractError
from .dataio.formats import (
    ContainerFlags, read_container, read_features, write_container)

LOG = logging.getLogger(__name__)

CODEBOOK_TENSORS = (
    'codebook.centers', 'codebook.assign_weights', 'codebook.assign_bias',
    'codebook.alpha')
DEFAULT_ALPHA = 1000.0
DEFAULT_MAX_ITER = 100
SAMPLES_PER_CLUSTER = 100


@dataclass(frozen=True)
class Codebook:
    centers: np.ndarray
    assign_weights: np.ndarray
    assign_bias: np.ndarray
    alpha: float

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim != 2 or min(centers.shape) < 1:
            raise ContractError(f'centers must be K x P, got {centers.shape}')
        if self.alpha <= 0:
            raise ContractError(f'alpha must be positive, got {self.alpha}')
        weights = np.asarray(self.assign_weights, dtype=np.float64)
        bias = np.asarray(self.assign_bias, dtype=np.float64)
        if weights.shape != centers.shape or bias.shape != centers.shape[:1]:
            raise ContractError(
                f'assignment parameters {weights.shape}, {bias.shape} do not '
                f'match centers {centers.shape}')
        object.__setattr__(self, 'centers', centers)
        object.__setattr__(self, 'assign_weights', weights)
        object.__setattr__(self, 'assign_bias', bias)
        object.__setattr__(self, 'alpha', float(self.alpha))

    @classmethod
    def from_centers(cls, centers, alpha=DEFAULT_ALPHA):
        weights, bias = init_assignment_params(centers, alpha)
        return cls(centers, weights, bias, alpha)

    @classmethod
    def from_tensors(cls, tensors):
        return cls(
            centers=tensors['codebook.centers'],
            assign_weights=tensors['codebook.assign_weights'],
            assign_bias=tensors['codebook.assign_bias'],
            alpha=float(np.asarray(tensors['codebook.alpha']).reshape(-1)[0]),
        )

    def tensors(self):
        return {
            'codebook.centers': self.centers,
            'codebook.assign_weights': self.assign_weights,
            'codebook.assign_bias': self.assign_bias,
            'codebook.alpha': np.array([self.alpha]),
        }

    @property
    def K(self):
        return self.centers.shape[0]

    @property
    def P(self):
        return self.centers.shape[1]


@dataclass(frozen=True)
class KMeansResult:
    centers: np.ndarray
    trace: Tuple[float, ...]
    iterations: int
    converged: bool

    @property
    def distortion(self):
        return self.trace[-1]


def init_assignment_params(centers, alpha):
    """W_k = 2 alpha c_k, B_k = -alpha |c_k|^2"""
    if alpha <= 0:
        raise ContractError(f'alpha must be positive, got {alpha}')
    centers = np.asarray(centers, dtype=np.float64)
    weights = 2.0 * alpha * centers
    bias = -alpha * np.sum(centers * centers, axis=1)
    return weights, bias


def sample_features(manifest, n_samples, rng, k=1):
    """
    Draw ``n_samples`` (video, frame, cell) feature vectors with replacement.

    Every video file is read at most once; draws are made up front so the
    result depends only on the rng stream.
    """
    if not manifest.records:
        raise ContractError('manifest has no videos')
    if n_samples < max(k, 1):
        raise ContractError(
            f'need at least {max(k, 1)} samples, got {n_samples}')
    videos = rng.integers(len(manifest.records), size=n_samples)
    frame_u = rng.uniform(n_samples)
    cell_u = rng.uniform(n_samples)
    samples = np.empty((n_samples, manifest.channels))
    for v in np.unique(videos):
        record = manifest.records[v]
        volume = read_features(manifest.resolve(record.path))
        if volume.P != manifest.channels:
            raise ContractError(
                f'{record.path}: P={volume.P}, manifest says '
                f'{manifest.channels}')
        rows = np.flatnonzero(videos == v)
        frames = np.minimum((frame_u[rows] * volume.T).astype(int),
                            volume.T - 1)
        cells = np.minimum((cell_u[rows] * volume.N).astype(int),
                           volume.N - 1)
        samples[rows] = volume.data[frames, cells]
    return samples


def _seed_plus_plus(samples, k, rng):
    n = len(samples)
    chosen = [int(rng.integers(n))]
    closest = cdist(samples, samples[chosen], 'sqeuclidean')[:, 0]
    while len(chosen) < k:
        if closest.sum() > 0:
            idx = rng.choice(closest)
        else:
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(free[rng.integers(len(free))])
        chosen.append(idx)
        closest = np.minimum(
            closest, cdist(samples, samples[idx:idx + 1], 'sqeuclidean')[:, 0])
    return samples[chosen].copy()


def _update_centers(samples, assign, centers):
    updated = np.empty_like(centers)
    empty = []
    for j in range(len(centers)):
        members = samples[assign == j]
        if len(members):
            updated[j] = members.mean(axis=0)
        else:
            empty.append(j)
    if empty:
        far = np.sum((samples - updated[assign]) ** 2, axis=1)
        for j in empty:
            i = int(np.argmax(far))
            updated[j] = samples[i]
            far[i] = -1.0
            LOG.debug('re-seeded empty cluster %d at sample %d', j, i)
    return updated


def kmeans(samples, k, max_iter=DEFAULT_MAX_ITER, rng=None):
    """
    k-means++ seeding then Lloyd iterations until the assignment is a
    fixpoint or ``max_iter`` is reached. ``trace[i]`` is the distortion of
    the i-th assignment step and never increases.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise ContractError(f'samples must be n x P, got {samples.shape}')
    if k < 1 or len(samples) < k:
        raise ContractError(
            f'k-means needs n >= K >= 1, got n={len(samples)}, K={k}')
    if max_iter < 1:
        raise ContractError(f'max_iter must be positive, got {max_iter}')
    if rng is None:
        raise ContractError('k-means needs an rng')
    centers = _seed_plus_plus(samples, k, rng)
    rows = np.arange(len(samples))
    trace = []
    assign = None
    converged = False
    for iteration in range(max_iter):
        dist = cdist(samples, centers, 'sqeuclidean')
        new_assign = np.argmin(dist, axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            converged = True
            break
        assign = new_assign
        trace.append(float(np.sum(dist[rows, assign])))
        LOG.info('k-means iteration %d: distortion %.6f', iteration, trace[-1])
        centers = _update_centers(samples, assign, centers)
    return KMeansResult(
        centers=centers,
        trace=tuple(trace),
        iterations=len(trace),
        converged=converged,
    )


def save_codebook(codebook, path):
    """Codebook-only TAVC container, marked with stage 0"""
    write_container(path, codebook.tensors(), ContainerFlags(stage=0))


def load_codebook(path):
    """Codebook tensors of any TAVC container (codebook file or checkpoint)"""
    tensors, _ = read_container(path)
    missing = [name for name in CODEBOOK_TENSORS if name not in tensors]
    if missing:
        raise ContractError(f'{str(path)!r} has no codebook tensors {missing}')
    return Codebook.from_tensors(tensors)


def build_codebook(manifest, k, rng, n_samples=None, max_iter=DEFAULT_MAX_ITER,
                   alpha=DEFAULT_ALPHA):
    if n_samples is None:
        n_samples = SAMPLES_PER_CLUSTER * k
    samples = sample_features(manifest, n_samples, rng.split('samples'), k=k)
    result = kmeans(samples, k, max_iter=max_iter, rng=rng.split('kmeans'))
    return Codebook.from_centers(result.centers, alpha), result
