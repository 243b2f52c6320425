from collections import OrderedDict
from typing import Dict, Iterator, List, Literal, Mapping, Tuple

import numpy as np
from pydantic import BaseModel, Field

from Model.ModelConfig import ModelConfig
from TensorCore.RngState import RngState
from TensorCore.Tensor import Tensor
from util.FAConfException import ShapeException, ConfigException


class ParamSpec(BaseModel):
    """Name, shape and initializer of one trainable tensor."""
    name: str = Field(..., description="Dotted parameter name, e.g. 'icscm.weight'")
    shape: Tuple[int, ...] = Field(..., description="Tensor shape")
    fan_in: int = Field(0, ge=0, description="Inputs feeding one output unit; 0 for zero-initialized")
    init: Literal["uniform", "zeros"] = Field("uniform", description="Initializer")

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))


def weight(name: str, shape: Tuple[int, ...], fan_in: int) -> ParamSpec:
    return ParamSpec(name=name, shape=tuple(shape), fan_in=fan_in, init="uniform")


def zeros(name: str, shape: Tuple[int, ...]) -> ParamSpec:
    return ParamSpec(name=name, shape=tuple(shape), init="zeros")


def conv_specs(prefix: str, c_out: int, c_in: int, kernel: int) -> List[ParamSpec]:
    return [weight(f"{prefix}.weight", (c_out, c_in, kernel), c_in * kernel), zeros(f"{prefix}.bias", (c_out,))]


def model_param_specs(config: ModelConfig) -> List[ParamSpec]:
    """Every trainable tensor of the network, in manifest order."""
    from Model.BandAttention import band_attention_specs
    from Model.EMGBranch import emg_branch_specs
    from Model.FuseModule import fuse_module_specs
    from Model.ICSCM import icscm_specs
    from Model.MultiScale import multiscale_specs
    from Model.SEBlock import se_block_specs

    tokens = config.fuse_tokens
    specs = (band_attention_specs(config) + multiscale_specs(config) + icscm_specs(config)
             + se_block_specs(config) + emg_branch_specs(config) + fuse_module_specs(config)
             + [weight("head.weight", (config.n_classes, tokens), tokens), zeros("head.bias", (config.n_classes,))])
    names = [spec.name for spec in specs]
    if len(set(names)) != len(names):
        raise ConfigException(f"duplicate parameter names in {names}")
    return specs


class ModelParams:
    """
    Ordered name -> Tensor mapping holding every trainable value. All tensors
    require gradients; the order is the checkpoint manifest order.
    """

    def __init__(self, tensors: "OrderedDict[str, Tensor]") -> None:
        self._tensors = tensors

    @classmethod
    def init(cls, config: ModelConfig, rng: RngState) -> "ModelParams":
        """Weights uniform in +-1/sqrt(fan_in), biases and band logits zero."""
        tensors = OrderedDict()
        for spec in model_param_specs(config):
            if spec.init == "zeros":
                values = np.zeros(spec.shape)
            else:
                bound = 1.0 / np.sqrt(spec.fan_in)
                values = rng.uniform(spec.shape, -bound, bound)
            tensors[spec.name] = Tensor(values, requires_grad=True)
        return cls(tensors)

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: Mapping[str, np.ndarray]) -> "ModelParams":
        """
        Raises:
            ShapeException: If a tensor is missing, extra or has the wrong shape.
        """
        specs = model_param_specs(config)
        expected = {spec.name for spec in specs}
        extra = sorted(set(arrays) - expected)
        if extra:
            raise ShapeException(f"unexpected parameters {extra}")
        tensors = OrderedDict()
        for spec in specs:
            if spec.name not in arrays:
                raise ShapeException(f"missing parameter '{spec.name}'", spec.shape)
            values = np.asarray(arrays[spec.name], dtype=np.float64)
            if values.shape != spec.shape:
                raise ShapeException(f"parameter '{spec.name}' has the wrong shape", values.shape, spec.shape)
            tensors[spec.name] = Tensor(values, requires_grad=True)
        return cls(tensors)

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __iter__(self) -> Iterator[str]:
        return iter(self._tensors)

    def __len__(self) -> int:
        return len(self._tensors)

    def items(self):
        return self._tensors.items()

    def count(self) -> int:
        """Trainable scalars, by enumeration."""
        return int(sum(t.size for t in self._tensors.values()))

    def manifest(self) -> List[Tuple[str, Tuple[int, ...]]]:
        return [(name, tuple(t.shape)) for name, t in self._tensors.items()]

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.zero_grad()

    def arrays(self) -> Dict[str, np.ndarray]:
        """Copies of the current values."""
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def copy(self) -> "ModelParams":
        return ModelParams(OrderedDict((name, Tensor(t.data, requires_grad=True)) for name, t in self._tensors.items()))

    def detached(self) -> "ModelParams":
        """Same values without gradient tracking, for evaluation passes."""
        return ModelParams(OrderedDict((name, t.detach()) for name, t in self._tensors.items()))
