from typing import Literal, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, PrivateAttr

Shape = Union[int, Tuple[int, ...], Sequence[int]]


class RngState(BaseModel):
    """
    Seeded random stream. The algorithm is fixed to numpy's PCG64 fed through a
    SeedSequence, whose output is specified bit-for-bit across platforms, so an
    identical seed gives an identical draw sequence everywhere.

    Child streams (per fold, per epoch) are derived with `derive(*keys)`, which
    uses the SeedSequence spawn key rather than consuming draws from this stream.
    """
    seed: int = Field(..., ge=0, lt=2 ** 64, description="64-bit unsigned seed")
    algorithm: Literal["PCG64"] = Field("PCG64", description="Bit generator, fixed")

    _generator: np.random.Generator = PrivateAttr()

    def model_post_init(self, __context) -> None:
        self._generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(self.seed)))

    def derive(self, *keys: int) -> "RngState":
        """Independent stream for e.g. (fold, epoch); depends only on seed and keys."""
        sequence = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in keys))
        child_seed = int(sequence.generate_state(1, dtype=np.uint64)[0])
        return RngState(seed=child_seed)

    def uniform(self, shape: Shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._generator.uniform(low, high, size=shape)

    def normal(self, shape: Shape, scale: float = 1.0) -> np.ndarray:
        return self._generator.normal(0.0, scale, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self._generator.permutation(n)

    def integers(self, low: int, high: int, shape: Shape = None) -> np.ndarray:
        return self._generator.integers(low, high, size=shape)

    def sklearn_seed(self) -> int:
        """Seed folded into the 32-bit range scikit-learn accepts."""
        return int(self.seed % (2 ** 32))
