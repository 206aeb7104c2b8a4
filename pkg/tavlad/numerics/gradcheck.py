import logging
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np
from terminaltables import SingleTable

from ..error import ContractError, GradCheckError
from .ops import value_of
from .tape import GradientTape, Var

LOG = logging.getLogger(__name__)

REL_FLOOR = 1e-8


@dataclass(frozen=True)
class ParamCheck:
    name: str
    max_rel_error: float
    worst_index: Tuple[int, ...]
    analytic: float
    numeric: float


@dataclass(frozen=True)
class GradCheckReport:
    checks: Dict[str, ParamCheck]
    tol: float

    @property
    def passed(self):
        return all(c.max_rel_error <= self.tol for c in self.checks.values())

    @property
    def worst(self):
        if not self.checks:
            return None
        return max(self.checks.values(), key=lambda c: c.max_rel_error)

    def failures(self):
        return [c for c in self.checks.values() if c.max_rel_error > self.tol]

    def table(self, title='Gradient check'):
        rows = [('Param', 'Max rel error', 'Worst index', 'Analytic',
                 'Numeric', 'OK')]
        for name, c in sorted(self.checks.items()):
            rows.append((
                name, f'{c.max_rel_error:.3e}', str(list(c.worst_index)),
                f'{c.analytic:+.6e}', f'{c.numeric:+.6e}',
                'yes' if c.max_rel_error <= self.tol else 'NO',
            ))
        return SingleTable(rows, title=title).table


def relative_error(analytic, numeric):
    return np.abs(analytic - numeric) / np.maximum(
        REL_FLOOR, np.abs(analytic) + np.abs(numeric))


def _scalar(loss):
    return float(np.asarray(value_of(loss)).reshape(-1)[0])


def grad_check(loss_fn, params, eps=1e-5, tol=1e-4):
    """
    Compare reverse-mode gradients of ``loss_fn`` with central differences.

    ``loss_fn`` maps a dict of name to tensor (ndarray or Var) to a scalar.
    It is called once on a tape for the analytic gradient and twice per
    coordinate on plain arrays.
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ContractError(f'eps must be in [1e-7, 1e-3], got {eps}')
    params = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    tape = GradientTape()
    watched = {k: tape.watch(v) for k, v in params.items()}
    loss = loss_fn(watched)
    if not np.isfinite(_scalar(loss)):
        raise ContractError('loss is not finite at the unperturbed point')
    if isinstance(loss, Var):
        analytic = tape.gradient(loss, watched)
    else:
        analytic = {k: np.zeros_like(v) for k, v in params.items()}

    checks = {}
    for name, value in params.items():
        numeric = np.zeros_like(value)
        for index in np.ndindex(value.shape):
            losses = []
            for sign in (1.0, -1.0):
                shifted = dict(params)
                perturbed = value.copy()
                perturbed[index] += sign * eps
                shifted[name] = perturbed
                f = _scalar(loss_fn(shifted))
                if not np.isfinite(f):
                    raise GradCheckError(name, index, '+' if sign > 0 else '-')
                losses.append(f)
            numeric[index] = (losses[0] - losses[1]) / (2.0 * eps)
        errors = relative_error(analytic[name], numeric)
        if errors.size:
            worst = np.unravel_index(int(np.argmax(errors)), errors.shape)
            checks[name] = ParamCheck(
                name=name,
                max_rel_error=float(errors[worst]),
                worst_index=tuple(int(i) for i in worst),
                analytic=float(analytic[name][worst]),
                numeric=float(numeric[worst]),
            )
        LOG.debug('gradcheck %s: %s', name, checks.get(name))
    return GradCheckReport(checks=checks, tol=tol)
