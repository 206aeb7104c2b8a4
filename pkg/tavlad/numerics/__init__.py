from .tape import GradientTape, Var
from .rng import Rng
from .gradcheck import grad_check, GradCheckReport, relative_error
from . import ops
from .ops import softmax, sigmoid, l2_normalize, intra_normalize, value_of

__all__ = (
    'GradientTape',
    'Var',
    'Rng',
    'grad_check',
    'GradCheckReport',
    'relative_error',
    'ops',
    'softmax',
    'sigmoid',
    'l2_normalize',
    'intra_normalize',
    'value_of',
)
