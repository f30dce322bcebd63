"""Outer majorization-minimization loop of sparse Bayesian learning.

Each iteration turns the current curvature vector ``gamma_h`` into l1
weights ``u = sqrt(gamma_h)``, solves the weighted lasso (optionally after
a safe screening pass), maps the solution back to prior variances
``gamma = |theta| / sqrt(gamma_h)``, and refreshes
``gamma_h = diag(Phi^T Sigma_Y^{-1} Phi)`` with
``Sigma_Y = lam*I + Phi diag(gamma) Phi^T``.  The marginal-likelihood loss
``log|Sigma_Y| + Y^T Sigma_Y^{-1} Y`` is non-increasing along the way.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import screening, wlasso
from .problem import Problem, SparseSolution, WeightVector

__all__ = [
    "SblConfig",
    "SblState",
    "Posterior",
    "NonPositiveWeight",
    "FactorizationFailure",
    "init_gamma_h",
    "weights_from_gamma_h",
    "gamma_from_theta",
    "sigma_y",
    "loss",
    "update_gamma_h",
    "posterior_mean",
    "prune",
    "run",
]

_GAMMA_H_FLOOR = 1e-12


class NonPositiveWeight(ValueError):
    """gamma_h must be strictly positive to define l1 weights."""


class FactorizationFailure(RuntimeError):
    """Sigma_Y was numerically indefinite; Cholesky failed."""


@dataclass
class SblConfig:
    """Outer-loop controls.

    ``prune_eps=None`` resolves to ``1e-4 * max(gamma_opt.max(), 1e-300)``
    (scale-relative pruning); ``solver=None`` resolves to a tight inner
    tolerance ``1e-12 * max(1, 0.5*||Y||^2)`` so that the MM descent
    property survives inexact inner solves.
    """

    prune_eps: float | None = None
    conv_tol: float = 1e-6
    max_outer: int = 30
    screening: str = "off"
    solver: wlasso.SolverConfig | None = None

    def __post_init__(self):
        if self.prune_eps is not None and not self.prune_eps > 0:
            raise ValueError("prune_eps must be positive")
        if not self.conv_tol > 0:
            raise ValueError("conv_tol must be positive")
        if self.max_outer < 1:
            raise ValueError("max_outer must be >= 1")
        if self.screening not in ("off", "sphere", "dome", "tht"):
            raise ValueError(f"unknown screening variant: {self.screening!r}")


@dataclass
class SblState:
    """Evolving state of the outer loop."""

    gamma: np.ndarray
    gamma_h: np.ndarray
    theta_tmp: np.ndarray
    loss_history: list[float] = field(default_factory=list)
    iteration: int = 0


@dataclass(frozen=True)
class Posterior:
    """Posterior moments of theta under fixed gamma."""

    mean: np.ndarray
    covariance: np.ndarray | None = None


def init_gamma_h(n: int) -> np.ndarray:
    """All-ones initialization (the first inner solve is a plain lasso)."""
    if n < 1:
        raise ValueError("need at least one feature")
    return np.ones(int(n))


def weights_from_gamma_h(gamma_h) -> WeightVector:
    """l1 weights ``u_i = sqrt(gamma_h_i)``.

    The surrogate objective ``||Y - Phi theta||^2 + 2*lam*sum sqrt(gamma_h_i)|theta_i|``
    is half of ``0.5*||Y - Phi theta||^2 + lam*sum u_i|theta_i|``, so both
    scalings share their minimizers.
    """
    gamma_h = np.asarray(gamma_h, dtype=float)
    if np.any(gamma_h <= 0) or not np.all(np.isfinite(gamma_h)):
        raise NonPositiveWeight("gamma_h entries must be positive and finite")
    return WeightVector(np.sqrt(gamma_h))


def gamma_from_theta(theta_tmp, gamma_h) -> np.ndarray:
    """Variance update ``gamma_i = |theta_i| / sqrt(gamma_h_i)``."""
    theta_tmp = np.asarray(theta_tmp, dtype=float)
    gamma_h = np.asarray(gamma_h, dtype=float)
    if np.any(gamma_h <= 0):
        raise NonPositiveWeight("gamma_h entries must be positive")
    return np.abs(theta_tmp) / np.sqrt(gamma_h)


def sigma_y(problem: Problem, gamma) -> np.ndarray:
    """Marginal output covariance ``lam*I + Phi diag(gamma) Phi^T``."""
    gamma = np.asarray(gamma, dtype=float)
    phi = problem.dictionary
    n_samples = problem.n_samples
    out = problem.noise_level * np.eye(n_samples)
    cols = np.flatnonzero(gamma > 0)
    if cols.size:
        sub = phi[:, cols]
        out += (sub * gamma[cols]) @ sub.T
    return 0.5 * (out + out.T)


def _factor(problem: Problem, gamma):
    mat = sigma_y(problem, gamma)
    try:
        return scipy.linalg.cho_factor(mat, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise FactorizationFailure(str(exc)) from exc


def _loss_from_factor(problem: Problem, factor) -> float:
    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    y = problem.response
    quad = float(y @ scipy.linalg.cho_solve(factor, y))
    return logdet + quad


def loss(problem: Problem, gamma) -> float:
    """Marginal-likelihood loss ``log|Sigma_Y| + Y^T Sigma_Y^{-1} Y``."""
    return _loss_from_factor(problem, _factor(problem, gamma))


def _gamma_h_from_factor(problem: Problem, factor) -> np.ndarray:
    phi = problem.dictionary
    solved = scipy.linalg.cho_solve(factor, phi)
    return np.einsum("ij,ij->j", phi, solved)


def update_gamma_h(problem: Problem, gamma) -> np.ndarray:
    """Curvature update ``gamma_h_i = phi_i^T Sigma_Y^{-1} phi_i`` (all > 0)."""
    return _gamma_h_from_factor(problem, _factor(problem, gamma))


def posterior_mean(problem: Problem, gamma, with_covariance: bool = False) -> Posterior:
    """Posterior mean ``diag(gamma) Phi^T Sigma_Y^{-1} Y`` (and covariance).

    The covariance, when requested, is evaluated on the support
    ``{i: gamma_i > 0}`` through the Woodbury identity
    ``Gamma - Gamma Phi^T Sigma_Y^{-1} Phi Gamma`` (zeros elsewhere), so only
    the n_samples-sized factorization is ever formed.
    """
    gamma = np.asarray(gamma, dtype=float)
    factor = _factor(problem, gamma)
    phi = problem.dictionary
    mean = gamma * (phi.T @ scipy.linalg.cho_solve(factor, problem.response))
    cov = None
    if with_covariance:
        n = problem.n_features
        cov = np.zeros((n, n))
        cols = np.flatnonzero(gamma > 0)
        if cols.size:
            sub = phi[:, cols] * gamma[cols]
            block = np.diag(gamma[cols]) - sub.T @ scipy.linalg.cho_solve(factor, sub)
            block = 0.5 * (block + block.T)
            cov[np.ix_(cols, cols)] = block
    return Posterior(mean=mean, covariance=cov)


def prune(gamma, eps: float) -> np.ndarray:
    """Keep mask ``gamma_i > eps`` (boundary values are pruned)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return np.asarray(gamma, dtype=float) > eps


def _inner_solve(problem, weights, config, warm):
    """One (optionally screened) weighted lasso solve, zero-padded back."""
    n = problem.n_features
    if config.screening == "off":
        sol = wlasso.solve(problem, weights, config.solver, warm_start=warm)
        return sol.theta, sol.duality_gap
    mask = screening.screen(problem, weights, variant=config.screening)
    reduced, red_weights, index_map = screening.reduce_problem(problem, weights, mask)
    red_warm = warm[index_map] if warm is not None else None
    sol = wlasso.solve(reduced, red_weights, config.solver, warm_start=red_warm)
    return screening.pad_solution(sol.theta, index_map, n), sol.duality_gap


def run(problem: Problem, config: SblConfig | None = None) -> tuple[SparseSolution, SblState, Posterior]:
    """Iterate the MM loop until ``gamma`` converges, then prune and recover.

    Returns the pruned sparse solution (posterior mean under the pruned
    ``gamma``), the final state (with loss history), and the posterior.
    Inner-solver :class:`~sblscreen.wlasso.NotConverged` propagates with the
    partial state attached as its ``state`` attribute.
    """
    config = config or SblConfig()
    n = problem.n_features
    if n == 0:
        raise ValueError("need at least one feature")
    if not problem.has_unit_columns(tol=1e-6):
        raise ValueError("run requires unit-norm dictionary columns")

    solver = config.solver
    if solver is None:
        y = problem.response
        solver = wlasso.SolverConfig(
            gap_tol=1e-12 * max(1.0, 0.5 * float(y @ y)), max_sweeps=50_000
        )
    cfg = SblConfig(
        prune_eps=config.prune_eps,
        conv_tol=config.conv_tol,
        max_outer=config.max_outer,
        screening=config.screening,
        solver=solver,
    )

    gamma_h = init_gamma_h(n)
    gamma = np.zeros(n)
    theta = np.zeros(n)
    state = SblState(gamma=gamma, gamma_h=gamma_h, theta_tmp=theta)

    degenerate = not np.any(problem.response)
    for it in range(1, cfg.max_outer + 1):
        floored = np.maximum(gamma_h, _GAMMA_H_FLOOR)
        if np.any(floored != gamma_h):
            warnings.warn("gamma_h entries floored at 1e-12 before sqrt", RuntimeWarning)
        weights = weights_from_gamma_h(floored)

        if degenerate:
            theta = np.zeros(n)
            gap = 0.0
        else:
            try:
                theta, gap = _inner_solve(problem, weights, cfg, theta)
            except wlasso.NotConverged as exc:
                exc.state = state
                raise

        gamma_new = gamma_from_theta(theta, floored)
        factor = _factor(problem, gamma_new)
        state.loss_history.append(_loss_from_factor(problem, factor))
        state.iteration = it
        state.theta_tmp = theta
        state.gamma_h = gamma_h
        delta = float(np.max(np.abs(gamma_new - gamma))) if n else 0.0
        gamma = gamma_new
        state.gamma = gamma
        if delta < cfg.conv_tol:
            break
        gamma_h = _gamma_h_from_factor(problem, factor)

    eps = cfg.prune_eps
    if eps is None:
        eps = 1e-4 * max(float(gamma.max()) if gamma.size else 0.0, 1e-300)
    keep = prune(gamma, eps)
    gamma_pruned = np.where(keep, gamma, 0.0)
    posterior = posterior_mean(problem, gamma_pruned)
    solution = SparseSolution.from_theta(posterior.mean, gap)
    return solution, state, posterior
