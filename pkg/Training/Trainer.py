import math
from typing import List, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from DataIO.TrialSet import TrialSet
from FilterBank.FilterBank import FilterBank
from Model.FAConformer import evaluate_batches, forward_batch, prepare_eeg
from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams
from TensorCore.RngState import RngState
from Training.AdamOptimizer import AdamState, adam_step, collect_grads
from Training.Losses import rdrop_loss
from Training.TrainConfig import TrainConfig
from faconf_logging import logger, rich_console
from util.FAConfException import DataException, DomainException, TrainingAbortedException

HISTORY_COLUMNS = ["epoch", "train_loss", "val_acc"]


class PreparedSet(BaseModel):
    """Band-split trials ready for the network."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    x_mb: np.ndarray = Field(..., description="[n, N_b, C, T]")
    emg: np.ndarray = Field(..., description="[n, emg_channels, T]")
    labels: np.ndarray = Field(..., description="[n]")

    @model_validator(mode="after")
    def _same_count(self) -> "PreparedSet":
        n = self.labels.shape[0]
        if self.x_mb.shape[0] != n or self.emg.shape[0] != n:
            raise DataException(f"prepared set disagrees on trial count: {self.x_mb.shape[0]}, "
                                f"{self.emg.shape[0]}, {n}")
        return self

    @classmethod
    def from_trials(cls, trials: TrialSet, bank: FilterBank) -> "PreparedSet":
        return cls(x_mb=prepare_eeg(trials.eeg, bank), emg=trials.emg, labels=trials.labels)

    @property
    def n_trials(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, indices: np.ndarray) -> "PreparedSet":
        return PreparedSet(x_mb=self.x_mb[indices], emg=self.emg[indices], labels=self.labels[indices])


class EpochRecord(BaseModel):
    epoch: int = Field(..., ge=0)
    train_loss: float
    val_acc: float = Field(..., description="NaN when the validation set is empty")


def history_frame(history: List[EpochRecord]) -> pd.DataFrame:
    return pd.DataFrame([record.model_dump() for record in history], columns=HISTORY_COLUMNS)


def evaluate_accuracy(params: ModelParams, config: ModelConfig, data: PreparedSet, batch_size: int) -> float:
    if data.n_trials == 0:
        return math.nan
    logits, _ = evaluate_batches(data.x_mb, data.emg, config, params, batch_size)
    predictions = np.argmax(logits, axis=1)
    return float(np.mean(predictions == data.labels))


def train_fold(trainset: PreparedSet, valset: PreparedSet, model_config: ModelConfig,
               train_config: TrainConfig, rng: RngState) -> Tuple[ModelParams, List[EpochRecord]]:
    """
    Train one model from scratch.

    Every epoch reshuffles the training set with a stream derived from
    (rng, epoch); every batch runs two dropout passes, the R-Drop loss,
    backward and one Adam step. The last partial batch is kept.

    Args:
        trainset: Prepared training trials, nonempty.
        valset: Prepared validation trials; may be empty.
        rng: Fold stream; parameters come from rng.derive(0).

    Returns:
        (ModelParams, List[EpochRecord]): Final parameters and one record per epoch.

    Raises:
        DataException: On an empty training set.
        TrainingAbortedException: On a non-finite loss or gradient, with epoch and batch.
    """
    if trainset.n_trials == 0:
        raise DataException("training set is empty")

    params = ModelParams.init(model_config, rng.derive(0))
    state = AdamState.for_params(params)
    history: List[EpochRecord] = []
    batch_size = train_config.batch_size

    for epoch in range(train_config.epochs):
        epoch_rng = rng.derive(1, epoch)
        order = epoch_rng.permutation(trainset.n_trials)
        losses: List[float] = []
        for batch, start in enumerate(range(0, trainset.n_trials, batch_size)):
            idx = order[start:start + batch_size]
            x_mb = trainset.x_mb[idx]
            emg = trainset.emg[idx] if model_config.emg else None
            params.zero_grad()
            try:
                logits1 = forward_batch(x_mb, emg, model_config, params, epoch_rng, training=True)
                logits2 = forward_batch(x_mb, emg, model_config, params, epoch_rng, training=True)
                loss = rdrop_loss(logits1, logits2, trainset.labels[idx], train_config.rdrop_alpha)
                loss.backward()
            except DomainException as e:
                raise TrainingAbortedException(str(e), epoch=epoch, batch=batch, original_exception=e) from e
            adam_step(params, collect_grads(params), state, train_config, epoch=epoch, batch=batch)
            losses.append(loss.item())

        val_acc = evaluate_accuracy(params, model_config, valset, batch_size)
        record = EpochRecord(epoch=epoch, train_loss=float(np.mean(losses)), val_acc=val_acc)
        history.append(record)
        logger.debug(f"epoch {epoch}: {record}")
        if (epoch + 1) % train_config.log_every == 0 or epoch + 1 == train_config.epochs:
            rich_console.print(f"   [orange3]epoch {epoch + 1}/{train_config.epochs}: "
                               f"loss={record.train_loss:.4f} val_acc={val_acc:.3f}[/orange3]")
    return params, history
