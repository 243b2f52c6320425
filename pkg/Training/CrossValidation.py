from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field

from DataIO.TrialSet import TrialSet
from FilterBank.FilterBank import FilterBank
from Metrics.ConfusionMatrix import ConfusionMatrix, accuracy, confusion, kappa
from Model.FAConformer import evaluate_batches, param_count
from Model.ModelConfig import ModelConfig
from Model.ModelParams import ModelParams
from TensorCore.RngState import RngState
from Training.FoldScheduler import FoldJob, FoldScheduler
from Training.FoldSplit import FoldSplit, stratified_kfold
from Training.TrainConfig import TrainConfig
from Training.Trainer import EpochRecord, PreparedSet, history_frame, train_fold
from faconf_logging import logger, rich_console
from util.FAConfException import ConfigException


class FoldOutcome(BaseModel):
    """What a fold runner hands back: held-out predictions, history, trained params."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    predictions: np.ndarray
    history: List[EpochRecord] = Field(default_factory=list)
    params: Optional[ModelParams] = None


FoldRunner = Callable[[int, PreparedSet, PreparedSet, ModelConfig, TrainConfig, RngState], FoldOutcome]


class FoldResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    fold: int
    test_indices: np.ndarray
    predictions: np.ndarray
    confusion: ConfusionMatrix
    accuracy: float
    kappa: float
    history: List[EpochRecord]
    params: Optional[ModelParams] = None


class CVResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    variant: str
    param_count: int
    split: FoldSplit
    folds: List[FoldResult]

    @property
    def mean_accuracy(self) -> float:
        return float(np.mean([f.accuracy for f in self.folds]))

    @property
    def mean_kappa(self) -> float:
        return float(np.mean([f.kappa for f in self.folds]))

    def total_confusion(self) -> ConfusionMatrix:
        total = self.folds[0].confusion
        for result in self.folds[1:]:
            total = total + result.confusion
        return total

    def fold_frame(self) -> pd.DataFrame:
        return pd.DataFrame({"fold": [f.fold for f in self.folds],
                             "accuracy": [f.accuracy for f in self.folds],
                             "kappa": [f.kappa for f in self.folds]})

    def history_frames(self) -> Dict[int, pd.DataFrame]:
        return {f.fold: history_frame(f.history) for f in self.folds}

    def summary_line(self) -> str:
        return f"mean_acc={self.mean_accuracy:.6f} mean_kappa={self.mean_kappa:.6f}"


def train_and_predict(fold: int, trainset: PreparedSet, testset: PreparedSet, model_config: ModelConfig,
                      train_config: TrainConfig, rng: RngState) -> FoldOutcome:
    """Default fold runner: train from scratch, then predict the held-out trials."""
    params, history = train_fold(trainset, testset, model_config, train_config, rng)
    logits, _ = evaluate_batches(testset.x_mb, testset.emg, model_config, params, train_config.batch_size)
    return FoldOutcome(predictions=np.argmax(logits, axis=1).astype(np.int64), history=history, params=params)


def check_dataset(dataset: TrialSet, model_config: ModelConfig, bank: FilterBank) -> None:
    """
    Raises:
        ConfigException: Naming the first dimension the dataset and config disagree on.
    """
    pairs = [
        ("n_bands", bank.n_bands, model_config.n_bands),
        ("eeg_channels", dataset.eeg_channels, model_config.eeg_channels),
        ("emg_channels", dataset.emg_channels, model_config.emg_channels),
        ("time_points", dataset.time_points, model_config.time_points),
        ("n_classes", dataset.n_classes, model_config.n_classes),
    ]
    for name, actual, expected in pairs:
        if actual != expected:
            raise ConfigException(f"{name}: data has {actual}, model config expects {expected}")
    if abs(dataset.fs_hz - bank.fs_hz) > 1e-9:
        raise ConfigException(f"fs_hz: data is sampled at {dataset.fs_hz:g} Hz, filter bank designed for {bank.fs_hz:g} Hz")


def cross_validate(dataset: TrialSet, model_config: ModelConfig, train_config: TrainConfig, bank: FilterBank,
                   jobs: int = 1, fold_runner: Optional[FoldRunner] = None,
                   save_dir: Optional[str] = None, error_dir: Optional[str] = None) -> CVResult:
    """
    k-fold cross-validation: split, train k independent models, score each on
    its held-out fold, average accuracy and kappa.

    Every fold draws from RngState(seed).derive(fold), so results do not
    depend on `jobs`.

    Raises:
        ConfigException: If the dataset does not fit the model config or bank.
        DataException: If a class has fewer trials than folds.
        TrainingAbortedException: Propagated from a fold.
    """
    check_dataset(dataset, model_config, bank)
    runner = fold_runner or train_and_predict
    split = stratified_kfold(dataset.labels, train_config.folds, train_config.seed, train_config.stratified)
    prepared = PreparedSet.from_trials(dataset, bank)
    root = RngState(seed=train_config.seed)
    variant = model_config.variant_name()
    logger.info(f"cross-validating '{variant}' on {dataset.summary()}")

    scheduler = FoldScheduler(jobs=jobs, save_dir=save_dir, error_dir=error_dir, uuid=f"cv_{variant}")
    for fold, (train_idx, test_idx) in enumerate(split.folds()):
        def run(fold=fold, train_idx=train_idx, test_idx=test_idx) -> FoldOutcome:
            return runner(fold, prepared.subset(train_idx), prepared.subset(test_idx),
                          model_config, train_config, root.derive(fold))
        scheduler.add_job(FoldJob(fold=fold, name=f"{variant} fold {fold}", run=run))
    outcomes = scheduler.run_all()

    results = []
    for fold, ((_, test_idx), outcome) in enumerate(zip(split.folds(), outcomes)):
        cm = confusion(outcome.predictions, prepared.labels[test_idx], model_config.n_classes)
        results.append(FoldResult(fold=fold, test_indices=test_idx, predictions=outcome.predictions,
                                  confusion=cm, accuracy=accuracy(cm), kappa=kappa(cm),
                                  history=outcome.history, params=outcome.params))
        rich_console.print(f"   [green]fold {fold}: acc={results[-1].accuracy:.4f} "
                           f"kappa={results[-1].kappa:.4f}[/green]")

    return CVResult(variant=variant, param_count=param_count(model_config), split=split, folds=results)


def subject_frame(results: Dict[str, CVResult]) -> pd.DataFrame:
    """Per-subject mean accuracy and kappa plus a grand-mean row."""
    rows = [{"subject": subject, "mean_acc": r.mean_accuracy, "mean_kappa": r.mean_kappa}
            for subject, r in results.items()]
    frame = pd.DataFrame(rows, columns=["subject", "mean_acc", "mean_kappa"])
    if rows:
        grand = {"subject": "mean", "mean_acc": frame["mean_acc"].mean(), "mean_kappa": frame["mean_kappa"].mean()}
        frame = pd.concat([frame, pd.DataFrame([grand])], ignore_index=True)
    return frame
