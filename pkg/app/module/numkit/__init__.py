from app.module.numkit.functional import Matrix, as_matrix, l2_normalize, l2_normalize_rows, softmax, softmax_rows
from app.module.numkit.gradcheck import GradCheckReport, grad_check
from app.module.numkit.layers import DenseLayer, GradSet, Mlp
from app.module.numkit.optim import AdamState, adam_step

__all__ = [
    "AdamState",
    "DenseLayer",
    "GradCheckReport",
    "GradSet",
    "Matrix",
    "Mlp",
    "adam_step",
    "as_matrix",
    "grad_check",
    "l2_normalize",
    "l2_normalize_rows",
    "softmax",
    "softmax_rows",
]
