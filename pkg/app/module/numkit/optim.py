from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from app.core.errors import NumericError, ShapeError
from app.module.numkit.layers import GradSet


@dataclass(eq=False)
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Mapping[str, np.ndarray], learning_rate: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        if learning_rate <= 0.0:
            raise NumericError(f"learning_rate must be positive, got {learning_rate}")
        return cls(
            learning_rate=learning_rate,
            beta1=beta1,
            beta2=beta2,
            epsilon=epsilon,
            first_moment={name: np.zeros_like(value) for name, value in params.items()},
            second_moment={name: np.zeros_like(value) for name, value in params.items()},
        )


def adam_step(params: Mapping[str, np.ndarray], grads: GradSet, state: AdamState) -> AdamState:
    """Bias-corrected Adam update applied in place to the live parameter arrays."""
    if state.learning_rate <= 0.0:
        raise NumericError(f"learning_rate must be positive, got {state.learning_rate}")
    if set(params) != set(state.first_moment):
        raise ShapeError("Adam state does not mirror the parameter set")
    grads.check_congruent(params)

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for name, param in params.items():
        g = grads[name]
        m = state.first_moment[name]
        v = state.second_moment[name]
        if m.shape != param.shape:
            raise ShapeError(f"Adam moment for {name} has shape {m.shape}, parameter has {param.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        param -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return state
