"""Certified solver for the weighted l1 subproblem.

Minimizes ``0.5*||Y - Phi theta||^2 + lam * sum_i u_i |theta_i|`` by cyclic
coordinate descent over unit-norm columns, stopping on a duality-gap
certificate.  The gap is evaluated against the dual

    max_eta  0.5*||Y||^2 - 0.5*||eta - Y||^2
    s.t.     |phi_i^T eta| <= lam * u_i

at the scaled-residual feasible point, so a returned solution carries a
proof of its suboptimality bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .problem import Problem, SparseSolution, WeightVector

__all__ = [
    "SolverConfig",
    "DualPoint",
    "KktReport",
    "NotConverged",
    "soft_threshold",
    "solve",
    "dual_point",
    "duality_gap",
    "kkt_check",
    "default_gap_tol",
]


class NotConverged(RuntimeError):
    """Sweep budget exhausted before the duality gap met its tolerance.

    Carries the best iterate seen (``solution``) and the number of sweeps.
    """

    def __init__(self, solution: SparseSolution, sweeps: int):
        self.solution = solution
        self.sweeps = sweeps
        super().__init__(
            f"no certificate after {sweeps} sweeps "
            f"(best gap {solution.duality_gap:.3e})"
        )


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rule for the coordinate-descent solver.

    ``gap_tol=None`` resolves to ``1e-8 * max(1, 0.5*||Y||^2)`` per problem.
    """

    gap_tol: float | None = None
    max_sweeps: int = 10_000
    check_every: int = 5

    def __post_init__(self):
        if self.gap_tol is not None and not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if self.check_every < 1:
            raise ValueError("check_every must be >= 1")


@dataclass(frozen=True)
class DualPoint:
    """Dual-feasible point ``eta`` and the shrink factor that produced it."""

    eta: np.ndarray
    feasibility_scale: float


@dataclass(frozen=True)
class KktReport:
    """Worst stationarity violations of a candidate solution."""

    active_violation: float
    inactive_violation: float
    worst_index: int


def default_gap_tol(response: np.ndarray) -> float:
    return 1e-8 * max(1.0, 0.5 * float(response @ response))


def soft_threshold(z, t):
    """Proximal map of the absolute value: ``sign(z) * max(|z| - t, 0)``."""
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


@njit(cache=True)
def coordinate_sweep(phi_t, resid, theta, thresh):
    """One cyclic pass of soft-threshold updates, ascending feature index.

    ``phi_t`` is the transposed dictionary (features by samples) with
    unit-norm rows; ``resid`` is maintained as ``Y - Phi theta`` in place.
    Returns the largest coordinate change of the sweep.
    """
    n, n_samples = phi_t.shape
    max_delta = 0.0
    for i in range(n):
        old = theta[i]
        rho = old  # + phi_i^T resid below; uses ||phi_i|| == 1
        for k in range(n_samples):
            rho += phi_t[i, k] * resid[k]
        t = thresh[i]
        if rho > t:
            new = rho - t
        elif rho < -t:
            new = rho + t
        else:
            new = 0.0
        delta = new - old
        if delta != 0.0:
            for k in range(n_samples):
                resid[k] -= phi_t[i, k] * delta
            theta[i] = new
            if abs(delta) > max_delta:
                max_delta = abs(delta)
    return max_delta


def objective(problem: Problem, weights: WeightVector, theta: np.ndarray) -> float:
    resid = problem.response - problem.dictionary @ theta
    penalty = problem.noise_level * float(weights.u @ np.abs(theta))
    return 0.5 * float(resid @ resid) + penalty


def dual_point(problem: Problem, weights: WeightVector, theta) -> DualPoint:
    """Scale the residual into the dual-feasible set.

    ``eta = s * (Y - Phi theta)`` with the largest ``s <= 1`` satisfying
    every constraint ``|phi_i^T eta| <= lam * u_i``.
    """
    theta = np.asarray(theta, dtype=float)
    resid = problem.response - problem.dictionary @ theta
    corr = problem.dictionary.T @ resid
    bounds = problem.noise_level * weights.u
    with np.errstate(divide="ignore"):
        ratios = np.where(np.abs(corr) > 0, bounds / np.abs(corr), np.inf)
    scale = float(min(1.0, ratios.min())) if ratios.size else 1.0
    return DualPoint(scale * resid, scale)


def duality_gap(problem: Problem, weights: WeightVector, theta, dual: DualPoint) -> float:
    """Primal objective minus dual objective at a feasible dual point."""
    theta = np.asarray(theta, dtype=float)
    y = problem.response
    primal = objective(problem, weights, theta)
    diff = dual.eta - y
    dual_val = 0.5 * float(y @ y) - 0.5 * float(diff @ diff)
    return primal - dual_val


def kkt_check(
    problem: Problem, weights: WeightVector, theta, tol: float
) -> tuple[bool, KktReport]:
    """Check first-order optimality of ``theta`` within ``tol``.

    Active coordinates must have residual correlation ``lam*u_i*sign(theta_i)``
    up to ``tol``; inactive ones must satisfy ``|phi_i^T resid| <= lam*u_i*(1+tol)``.
    """
    theta = np.asarray(theta, dtype=float)
    corr = problem.dictionary.T @ (problem.response - problem.dictionary @ theta)
    bounds = problem.noise_level * weights.u
    active = np.abs(theta) > tol

    act_viol = 0.0
    inact_viol = 0.0
    worst = -1
    if np.any(active):
        v = np.abs(corr[active] / bounds[active] - np.sign(theta[active]))
        act_viol = float(v.max())
        worst = int(np.flatnonzero(active)[np.argmax(v)])
    if np.any(~active):
        v = np.abs(corr[~active]) - bounds[~active] * (1.0 + tol)
        inact_viol = float(max(v.max(), 0.0))
        if inact_viol > act_viol:
            worst = int(np.flatnonzero(~active)[np.argmax(v)])
    ok = act_viol <= tol and inact_viol <= 0.0
    return ok, KktReport(act_viol, inact_viol, worst)


def solve(
    problem: Problem,
    weights: WeightVector,
    config: SolverConfig | None = None,
    warm_start=None,
) -> SparseSolution:
    """Solve the weighted l1 problem to a duality-gap certificate.

    Requires unit-norm columns.  Raises :class:`NotConverged` (carrying the
    best iterate) if ``max_sweeps`` full passes are not enough.
    """
    config = config or SolverConfig()
    n = problem.n_features
    if n == 0:
        return SparseSolution.from_theta(np.zeros(0), 0.0)
    if not problem.has_unit_columns(tol=1e-6):
        raise ValueError("solve requires unit-norm dictionary columns")
    if len(weights) != n:
        raise ValueError("weights length does not match feature count")

    y = problem.response
    gap_tol = config.gap_tol if config.gap_tol is not None else default_gap_tol(y)
    phi = problem.dictionary
    phi_t = np.ascontiguousarray(phi.T)
    thresh = np.ascontiguousarray(problem.noise_level * weights.u)

    if warm_start is None:
        theta = np.zeros(n)
    else:
        theta = np.array(warm_start, dtype=float).copy()
        if theta.shape != (n,):
            raise ValueError("warm_start has wrong length")
    resid = np.ascontiguousarray(y - phi @ theta)

    best_theta, best_gap = None, np.inf
    for sweep in range(1, config.max_sweeps + 1):
        max_delta = coordinate_sweep(phi_t, resid, theta, thresh)
        stalled = max_delta == 0.0
        if sweep % config.check_every == 0 or sweep == config.max_sweeps or stalled:
            # exact residual refresh removes incremental drift before certifying
            resid = np.ascontiguousarray(y - phi @ theta)
            dual = dual_point(problem, weights, theta)
            gap = duality_gap(problem, weights, theta, dual)
            if gap <= gap_tol:
                return SparseSolution.from_theta(theta, gap)
            if gap < best_gap:
                best_gap, best_theta = gap, theta.copy()
            if stalled:
                break
    raise NotConverged(SparseSolution.from_theta(best_theta, best_gap), sweep)
