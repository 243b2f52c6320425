from typing import Dict, Mapping, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from Model.ModelParams import ModelParams
from Training.TrainConfig import TrainConfig
from util.FAConfException import ShapeException, TrainingAbortedException


class AdamState(BaseModel):
    """First and second moments per parameter plus the step counter."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    m: Dict[str, np.ndarray] = Field(default_factory=dict)
    v: Dict[str, np.ndarray] = Field(default_factory=dict)
    t: int = Field(0, ge=0)

    @classmethod
    def for_params(cls, params: ModelParams) -> "AdamState":
        return cls(m={name: np.zeros(p.shape) for name, p in params.items()},
                   v={name: np.zeros(p.shape) for name, p in params.items()})


def collect_grads(params: ModelParams) -> Dict[str, np.ndarray]:
    """Current gradients, zeros for parameters backward() did not reach."""
    return {name: p.grad if p.grad is not None else np.zeros(p.shape) for name, p in params.items()}


def adam_step(params: ModelParams, grads: Mapping[str, np.ndarray], state: AdamState, cfg: TrainConfig,
              epoch: Optional[int] = None, batch: Optional[int] = None) -> None:
    """
    Bias-corrected Adam update of every parameter, in place.

    Raises:
        TrainingAbortedException: If a gradient holds NaN or Inf; names the parameter.
        ShapeException: If a gradient or moment does not match its parameter.
    """
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingAbortedException("non-finite gradient", parameter=name, epoch=epoch, batch=batch)
        if grad.shape != params[name].shape or state.m[name].shape != grad.shape:
            raise ShapeException(f"gradient for '{name}' does not match the parameter",
                                 grad.shape, params[name].shape)

    state.t += 1
    lr, b1, b2 = cfg.learning_rate, cfg.beta1, cfg.beta2
    correction1 = 1.0 - b1 ** state.t
    correction2 = 1.0 - b2 ** state.t
    for name, grad in grads.items():
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * grad
        v *= b2
        v += (1.0 - b2) * grad * grad
        update = lr * (m / correction1) / (np.sqrt(v / correction2) + cfg.adam_eps)
        params[name].data -= update
