"""Shared problem container and screening bookkeeping types.

The linear model throughout is ``response = dictionary @ theta + noise``
with isotropic Gaussian noise of variance ``noise_level``.  Columns of the
dictionary are the features; the coordinate-descent solver and the
screening tests require unit-norm columns, which :func:`normalize_columns`
establishes.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Problem",
    "WeightVector",
    "SparseSolution",
    "Partition",
    "ZeroColumn",
    "NonPositiveBaseline",
    "normalize_columns",
    "lambda_max",
    "screening_percentage",
    "speedup_factor",
]


class ZeroColumn(ValueError):
    """A dictionary column is (numerically) the zero vector."""

    def __init__(self, index: int):
        self.index = int(index)
        super().__init__(f"dictionary column {index} has zero norm")


class NonPositiveBaseline(ValueError):
    """Baseline solve time must be positive to form a speedup factor."""


def _as_readonly(arr, dtype=float) -> np.ndarray:
    arr = np.asarray(arr, dtype=dtype)
    if arr.flags.writeable or not arr.flags.c_contiguous:
        arr = np.ascontiguousarray(arr).copy()
        arr.setflags(write=False)
    return arr


def normalize_columns(raw) -> tuple[np.ndarray, np.ndarray]:
    """Scale each column of ``raw`` to unit Euclidean norm.

    Returns ``(normalized, scales)`` such that ``normalized[:, i] * scales[i]``
    reproduces ``raw[:, i]``.  Raises :class:`ZeroColumn` for columns with
    norm below 1e-300.
    """
    raw = np.asarray(raw, dtype=float)
    if raw.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={raw.ndim}")
    scales = np.linalg.norm(raw, axis=0)
    bad = np.flatnonzero(scales < 1e-300)
    if bad.size:
        raise ZeroColumn(bad[0])
    return raw / scales, scales


@dataclass(frozen=True)
class Problem:
    """Immutable linear-system instance.

    Parameters
    ----------
    dictionary : ndarray of shape (n_samples, n_features)
        Feature matrix with columns ``phi_i``.
    response : ndarray of shape (n_samples,)
        Observed output ``Y``.
    noise_level : float
        Noise variance (the regularization weight of the inner l1 solves).

    A zero-column dictionary (``n_features == 0``) is permitted so that a
    fully screened problem can still be represented.
    """

    dictionary: np.ndarray
    response: np.ndarray
    noise_level: float

    def __post_init__(self):
        object.__setattr__(self, "dictionary", _as_readonly(self.dictionary))
        object.__setattr__(self, "response", _as_readonly(self.response))
        object.__setattr__(self, "noise_level", float(self.noise_level))
        if self.dictionary.ndim != 2:
            raise ValueError("dictionary must be a 2-D matrix")
        if self.response.ndim != 1:
            raise ValueError("response must be a 1-D vector")
        n_samples, n_features = self.dictionary.shape
        if n_samples < 1:
            raise ValueError("need at least one sample")
        if self.response.shape[0] != n_samples:
            raise ValueError(
                f"response length {self.response.shape[0]} does not match "
                f"dictionary rows {n_samples}"
            )
        if not np.isfinite(self.noise_level) or self.noise_level <= 0:
            raise ValueError("noise_level must be a positive finite real")
        if n_features and not np.all(np.isfinite(self.dictionary)):
            raise ValueError("dictionary contains non-finite entries")
        if not np.all(np.isfinite(self.response)):
            raise ValueError("response contains non-finite entries")
        if n_features:
            bad = np.flatnonzero(self.column_norms < 1e-300)
            if bad.size:
                raise ZeroColumn(bad[0])

    @property
    def n_samples(self) -> int:
        return self.dictionary.shape[0]

    @property
    def n_features(self) -> int:
        return self.dictionary.shape[1]

    @cached_property
    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.dictionary, axis=0)

    def has_unit_columns(self, tol: float = 1e-8) -> bool:
        if self.n_features == 0:
            return True
        return bool(np.max(np.abs(self.column_norms - 1.0)) <= tol)

    def normalized(self) -> tuple["Problem", np.ndarray]:
        """Return a column-normalized copy plus the per-column scales."""
        mat, scales = normalize_columns(self.dictionary)
        return Problem(mat, self.response, self.noise_level), scales

    def with_noise_level(self, noise_level: float) -> "Problem":
        return dataclasses.replace(self, noise_level=noise_level)


@dataclass(frozen=True)
class WeightVector:
    """Per-feature l1 weights for one inner weighted lasso."""

    u: np.ndarray
    u_min: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "u", _as_readonly(self.u))
        if self.u.ndim != 1:
            raise ValueError("weights must be a 1-D vector")
        if self.u.size and (not np.all(np.isfinite(self.u)) or np.any(self.u <= 0)):
            raise ValueError("all weights must be positive and finite")
        u_min = float(np.min(self.u)) if self.u.size else np.inf
        object.__setattr__(self, "u_min", u_min)

    @classmethod
    def ones(cls, n: int) -> "WeightVector":
        return cls(np.ones(int(n)))

    def __len__(self) -> int:
        return self.u.size


@dataclass(frozen=True)
class SparseSolution:
    """Solution vector with derived support and its optimality certificate."""

    theta: np.ndarray
    support: np.ndarray
    duality_gap: float

    def __post_init__(self):
        object.__setattr__(self, "theta", _as_readonly(self.theta))
        object.__setattr__(self, "support", _as_readonly(self.support, dtype=np.intp))
        object.__setattr__(self, "duality_gap", float(self.duality_gap))
        if self.duality_gap < 0:
            raise ValueError("duality_gap must be nonnegative")
        expected = np.flatnonzero(np.abs(self.theta) > self.support_tol)
        if not np.array_equal(np.sort(self.support), expected):
            raise ValueError("support does not match the support_tol rule")

    @property
    def support_tol(self) -> float:
        # scale-aware support detection
        linf = float(np.max(np.abs(self.theta))) if self.theta.size else 0.0
        return 1e-6 * max(1.0, linf)

    @classmethod
    def from_theta(cls, theta, duality_gap: float) -> "SparseSolution":
        theta = np.asarray(theta, dtype=float)
        linf = float(np.max(np.abs(theta))) if theta.size else 0.0
        tol = 1e-6 * max(1.0, linf)
        support = np.flatnonzero(np.abs(theta) > tol)
        return cls(theta, support, max(float(duality_gap), 0.0))


@dataclass(frozen=True)
class Partition:
    """Disjoint split of feature indices into selected and rejected sets."""

    selected: np.ndarray
    rejected: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "selected", _as_readonly(self.selected, dtype=np.intp))
        object.__setattr__(self, "rejected", _as_readonly(self.rejected, dtype=np.intp))
        merged = np.concatenate([self.selected, self.rejected])
        if not np.array_equal(np.sort(merged), np.arange(merged.size)):
            raise ValueError("selected/rejected must partition 0..n-1")

    @property
    def n_features(self) -> int:
        return self.selected.size + self.rejected.size


def lambda_max(problem: Problem) -> float:
    """Largest absolute correlation ``max_i |phi_i^T Y|``.

    With unit weights this is the smallest regularization level at which the
    zero vector is optimal for the inner l1 problem.
    """
    if problem.n_features == 0:
        raise ValueError("lambda_max is undefined for a 0-column problem")
    return float(np.max(np.abs(problem.dictionary.T @ problem.response)))


def screening_percentage(partition: Partition) -> float:
    """Fraction of features rejected by a screening pass."""
    n = partition.n_features
    if n == 0:
        return 0.0
    return partition.rejected.size / n


def speedup_factor(t_scr: float, t_red: float, t_ori: float) -> float:
    """(screening time + reduced-solve time) / unscreened-solve time.

    Values below 1 indicate the screening paid off.
    """
    if t_ori <= 0:
        raise NonPositiveBaseline(f"baseline time must be positive, got {t_ori}")
    if t_scr < 0 or t_red < 0:
        raise ValueError("times must be nonnegative")
    return (t_scr + t_red) / t_ori
