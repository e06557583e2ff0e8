from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .ripper import fit_ruleset


class FoldSizeError(ValueError):
    pass


@dataclass(frozen=True)
class EvalMeasures:
    precision: float
    recall: float
    f_measure: float

    def __post_init__(self):
        for name in ("precision", "recall", "f_measure"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} outside [0, 1]")

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f_measure": self.f_measure}


def confusion_measures(tp: int, fp: int, fn: int) -> EvalMeasures:
    """Precision, recall and F1 for the active class; empty denominators give 0."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    if precision + recall == 0:
        f = 0.0
    else:
        f = 2 * precision * recall / (precision + recall)
    return EvalMeasures(precision, recall, f)


def stratified_folds(y, k: int, seed: int = 0) -> list[np.ndarray]:
    """Split indices into ``k`` class-stratified test folds.

    Classes are shuffled separately and dealt round-robin; the dealing
    position carries over between classes so fold sizes differ by at most one.
    """
    y = np.asarray(y)
    if k < 2:
        raise FoldSizeError("need at least 2 folds")
    if len(y) < k:
        raise FoldSizeError(f"{len(y)} records cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    assignment = np.empty(len(y), dtype=int)
    offset = 0
    for label in np.unique(y):
        members = rng.permutation(np.nonzero(y == label)[0])
        assignment[members] = (np.arange(len(members)) + offset) % k
        offset += len(members)
    return [np.nonzero(assignment == f)[0] for f in range(k)]


def cross_validate(ds: Dataset, k: int = 10, seed: int = 0, return_folds: bool = False,
                   return_predictions: bool = False):
    """Stratified k-fold estimate of the learner, micro-averaged over folds.

    With ``return_folds`` the per-fold ``(tp, fp, fn, tn)`` counts come back
    alongside the measures; with ``return_predictions`` the held-out
    "active" prediction of every record.
    """
    y = ds.labels()
    folds = stratified_folds(y, k, seed)
    X = ds.matrix()
    names = ds.feature_names
    nominal = ds.nominal_indices()
    counts = []
    held_out = np.zeros(len(y), dtype=bool)
    for test in folds:
        train = np.setdiff1d(np.arange(len(y)), test, assume_unique=True)
        rs = fit_ruleset(X[train], y[train], names, nominal, seed)
        columns = {name: X[test, j] for j, name in enumerate(names)}
        pred = rs.predict_active(columns, len(test))
        held_out[test] = pred
        truth = y[test]
        counts.append((int((pred & truth).sum()), int((pred & ~truth).sum()),
                       int((~pred & truth).sum()), int((~pred & ~truth).sum())))
    tp, fp, fn, _ = (sum(c[i] for c in counts) for i in range(4))
    measures = confusion_measures(tp, fp, fn)
    out = (measures,)
    if return_folds:
        out += (counts,)
    if return_predictions:
        out += (held_out,)
    return out if len(out) > 1 else measures
