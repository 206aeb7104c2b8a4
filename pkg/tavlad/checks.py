"""
Finite-difference check of the whole pipeline on a tiny seeded instance.

Every variant (aggregator x attention x stage/freeze) compares the tape
gradient of the mean batch cross-entropy against central differences for
exactly the tensors that variant trains.
"""
import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from terminaltables import SingleTable

from .attention import AttentionWeights
from .codebook import Codebook
from .model import forward_batch, init_params
from .numerics import Rng, grad_check, ops
from .numerics.gradcheck import GradCheckReport

LOG = logging.getLogger(__name__)

TINY = dict(T=3, N=4, P=5, K=3, H=4, C=2, batch=2)
TINY_ALPHA = 1.0


@dataclass(frozen=True)
class Variant:
    aggregator: str
    attention: bool
    stage: int
    freeze_attention: bool = False

    @property
    def label(self):
        parts = [self.aggregator,
                 'attention' if self.attention else 'no-attention',
                 f'stage{self.stage}']
        if self.freeze_attention:
            parts.append('frozen')
        return '/'.join(parts)


VARIANTS = tuple(
    Variant(aggregator, attention, stage, freeze)
    for aggregator in ('gru', 'sum')
    for attention in (True, False)
    for stage, freeze in ((1, False), (2, False), (2, True))
)


@dataclass(frozen=True)
class SuiteResult:
    reports: Tuple[Tuple[Variant, GradCheckReport], ...]

    @property
    def passed(self):
        return all(report.passed for _, report in self.reports)

    def table(self):
        rows = [('Variant', 'Tensors', 'Worst tensor', 'Max rel error', 'OK')]
        for variant, report in self.reports:
            worst = report.worst
            rows.append((
                variant.label,
                len(report.checks),
                worst.name if worst else '-',
                f'{worst.max_rel_error:.3e}' if worst else '-',
                'yes' if report.passed else 'NO',
            ))
        return SingleTable(rows, title='Gradient check').table


def tiny_instance(seed):
    rng = Rng(seed)
    T, N, P, K, C, B = (TINY[k] for k in ('T', 'N', 'P', 'K', 'C', 'batch'))
    videos = 0.5 * rng.split('videos').normal((B, T, N, P))
    labels = np.arange(B) % C
    codebook = Codebook.from_centers(
        0.5 * rng.split('centers').normal((K, P)), alpha=TINY_ALPHA)
    attention = AttentionWeights(0.5 * rng.split('attention').normal((C, P)))
    return videos, labels, codebook, attention


def check_variant(variant, seed=0, eps=1e-5, tol=1e-4):
    videos, labels, codebook, attention = tiny_instance(seed)
    params = init_params(
        codebook, attention, TINY['C'], Rng(seed).split('init'),
        hidden=TINY['H'], aggregator=variant.aggregator,
        attention_enabled=variant.attention, dropout_rate=0.0,
    ).replace(stage=variant.stage)
    names = params.trainable(variant.freeze_attention)

    def loss_fn(tensors):
        logits, _, _ = forward_batch(
            videos, {**params.tensors, **tensors}, params)
        return ops.cross_entropy(logits, labels)

    report = grad_check(
        loss_fn, {n: params.tensors[n] for n in names}, eps=eps, tol=tol)
    LOG.info('%s: %s', variant.label, 'pass' if report.passed else 'FAIL')
    return report


def run_gradcheck_suite(seed=0, eps=1e-5, tol=1e-4, variants=VARIANTS):
    reports = tuple(
        (variant, check_variant(variant, seed=seed, eps=eps, tol=tol))
        for variant in variants
    )
    return SuiteResult(reports=reports)
