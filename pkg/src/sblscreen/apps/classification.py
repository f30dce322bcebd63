"""Sparse-representation classification over a labeled dictionary.

A test image is regressed on a dictionary whose columns are training
images of known digit class; per-class accumulated coefficient magnitudes,
normalized to a unit vector, score the classes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..problem import Problem, SparseSolution

__all__ = ["LabeledDictionary", "Undecidable", "classify", "N_CLASSES"]

N_CLASSES = 10


class Undecidable(ValueError):
    """Every class score is zero; no prediction can be made."""


@dataclass(frozen=True)
class LabeledDictionary:
    """A problem whose columns carry digit labels 0..9."""

    problem: Problem
    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=np.intp)
        object.__setattr__(self, "labels", labels)
        if labels.shape != (self.problem.n_features,):
            raise ValueError("labels length must match the number of columns")
        if labels.size and (labels.min() < 0 or labels.max() >= N_CLASSES):
            raise ValueError(f"labels must lie in 0..{N_CLASSES - 1}")


def classify(solution: SparseSolution, dictionary: LabeledDictionary) -> tuple[int, np.ndarray]:
    """Predict the digit of the image that ``solution`` represents.

    ``ABS_k`` sums ``|theta_i|`` over columns of class ``k``; the score
    vector is ``ABS / ||ABS||_2`` and the prediction is its argmax (ties to
    the smallest digit).  Raises :class:`Undecidable` when theta is all zero.
    """
    theta = solution.theta
    if theta.shape != (dictionary.problem.n_features,):
        raise ValueError("solution length must match the dictionary")
    abs_k = np.bincount(dictionary.labels, weights=np.abs(theta), minlength=N_CLASSES)
    norm = float(np.linalg.norm(abs_k))
    if norm == 0.0:
        raise Undecidable("all class scores are zero")
    prob = abs_k / norm
    return int(np.argmax(prob)), prob
