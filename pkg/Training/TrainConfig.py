from pydantic import BaseModel, ConfigDict, Field


class TrainConfig(BaseModel):
    """
    Optimization and evaluation settings. The defaults are the published
    hyperparameters; `desk()` is the setting the small synthetic runs use.
    """
    model_config = ConfigDict(extra="forbid")

    learning_rate: float = Field(1e-6, ge=0.0, description="Adam step size; 0 freezes the parameters")
    epochs: int = Field(500, ge=1, description="Passes over the training fold")
    batch_size: int = Field(100, ge=1, description="Trials per step; the last partial batch is kept")
    beta1: float = Field(0.9, ge=0.0, lt=1.0, description="Adam first-moment decay")
    beta2: float = Field(0.999, ge=0.0, lt=1.0, description="Adam second-moment decay")
    adam_eps: float = Field(1e-8, gt=0.0, description="Adam denominator epsilon")
    rdrop_alpha: float = Field(0.5, ge=0.0, description="Weight of the symmetric KL term")
    seed: int = Field(0, ge=0, lt=2 ** 64, description="Seed for init, splits, shuffling and dropout")
    folds: int = Field(5, ge=2, description="Cross-validation folds")
    stratified: bool = Field(True, description="Stratify folds by class")
    log_every: int = Field(10, ge=1, description="Epochs between progress lines")

    @classmethod
    def published(cls, **overrides) -> "TrainConfig":
        return cls(**overrides)

    @classmethod
    def desk(cls, **overrides) -> "TrainConfig":
        values = dict(learning_rate=1e-3, epochs=200)
        values.update(overrides)
        return cls(**values)
