from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from sklearn.model_selection import KFold, StratifiedKFold

from TensorCore.RngState import RngState
from util.FAConfException import DataException, ConfigException


class FoldSplit(BaseModel):
    """Fold id for every trial; the folds partition the trial indices."""
    assignments: List[int] = Field(..., description="Trial index -> fold id")
    k: int = Field(..., ge=2, description="Number of folds")

    @model_validator(mode="after")
    def _every_fold_used(self) -> "FoldSplit":
        ids = set(self.assignments)
        if ids and not ids <= set(range(self.k)):
            raise ValueError(f"fold ids must lie in [0, {self.k})")
        return self

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.assignments) != fold)

    def folds(self) -> List[Tuple[np.ndarray, np.ndarray]]:
        """(train, test) index arrays per fold."""
        return [(self.train_indices(fold), self.test_indices(fold)) for fold in range(self.k)]


def stratified_kfold(labels: Sequence[int], k: int, seed: int, stratified: bool = True) -> FoldSplit:
    """
    Shuffled k-fold split driven only by `seed`. Stratified splits keep the
    per-class counts of any two folds within one of each other.

    Raises:
        DataException: If a class has fewer than k members (stratified) or there
            are fewer than k trials.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise ConfigException(f"need at least 2 folds, got {k}")
    if labels.shape[0] < k:
        raise DataException(f"{labels.shape[0]} trials cannot fill {k} folds")
    random_state = RngState(seed=seed).sklearn_seed()
    if stratified:
        classes, counts = np.unique(labels, return_counts=True)
        for cls, count in zip(classes, counts):
            if count < k:
                raise DataException(f"class {int(cls)} has {int(count)} trials, fewer than {k} folds")
        splitter = StratifiedKFold(n_splits=k, shuffle=True, random_state=random_state)
    else:
        splitter = KFold(n_splits=k, shuffle=True, random_state=random_state)

    assignments = np.full(labels.shape[0], -1, dtype=np.int64)
    for fold, (_, test) in enumerate(splitter.split(np.zeros((labels.shape[0], 1)), labels)):
        assignments[test] = fold
    return FoldSplit(assignments=assignments.tolist(), k=k)
