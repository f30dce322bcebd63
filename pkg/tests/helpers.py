"""Shared instance builders and independent oracles for the test suite.

The oracles deliberately avoid the library's own formulas: lasso optima come
from support/sign enumeration, region maxima from dense arc search or a
generic NLP solver, matrix identities from dense inverses.
"""

from __future__ import annotations

from itertools import combinations, product

import numpy as np
from scipy.optimize import minimize

from sblscreen.problem import Problem, WeightVector, lambda_max, normalize_columns


def random_instance(
    seed: int,
    n_samples: int = 20,
    n_features: int = 60,
    sparsity: int = 4,
    noise: float = 0.05,
    weight_range=(1.0, 1.0),
    ratio: float = 0.3,
) -> tuple[Problem, WeightVector]:
    """Planted sparse instance with unit-norm Gaussian dictionary."""
    rng = np.random.default_rng(seed)
    mat, _ = normalize_columns(rng.normal(size=(n_samples, n_features)))
    theta = np.zeros(n_features)
    pos = rng.choice(n_features, size=sparsity, replace=False)
    theta[pos] = 2.0 * rng.normal(size=sparsity)
    y = mat @ theta + noise * rng.normal(size=n_samples)
    lam = ratio * float(np.max(np.abs(mat.T @ y)))
    lo, hi = weight_range
    u = rng.uniform(lo, hi, size=n_features) if hi > lo else np.full(n_features, lo)
    return Problem(mat, y, lam), WeightVector(u)


def enumerate_lasso(phi, y, lam, u) -> tuple[np.ndarray, float]:
    """Global weighted-lasso optimum by support/sign enumeration (n <= ~10).

    For every support S and sign pattern s, solves the stationarity system
    ``Phi_S^T Phi_S theta_S = Phi_S^T y - lam * u_S * s``, keeps sign-feasible
    candidates, and returns the best objective among them (the true optimum's
    pattern is always enumerated).
    """
    phi = np.asarray(phi, dtype=float)
    y = np.asarray(y, dtype=float)
    u = np.asarray(u, dtype=float)
    n = phi.shape[1]

    def obj(theta):
        r = y - phi @ theta
        return 0.5 * float(r @ r) + lam * float(u @ np.abs(theta))

    best_theta = np.zeros(n)
    best_obj = obj(best_theta)
    for size in range(1, n + 1):
        for support in combinations(range(n), size):
            sub = phi[:, support]
            gram = sub.T @ sub
            rhs_base = sub.T @ y
            for signs in product((-1.0, 1.0), repeat=size):
                s = np.array(signs)
                try:
                    theta_s = np.linalg.solve(gram, rhs_base - lam * u[list(support)] * s)
                except np.linalg.LinAlgError:
                    continue
                if np.any(np.sign(theta_s) != s):
                    continue
                theta = np.zeros(n)
                theta[list(support)] = theta_s
                val = obj(theta)
                if val < best_obj:
                    best_obj, best_theta = val, theta
    return best_theta, best_obj


def dome_max_oracle(t1: float, t2: float, r: float, psi_d: float, grid: int = 20001) -> float:
    """max of (eta - c)^T phi over the dome, by dense search on the arc.

    In the plane spanned by the plane normal and phi, the dome projects to a
    disk cut by a half-plane; a linear objective peaks on the circular arc
    (chord maxima coincide with the arc endpoints, which are included).
    """
    a = r * t1
    b = r * np.sqrt(max(t2 * t2 - t1 * t1, 0.0))
    psi = min(max(psi_d, -1.0), 1.0)
    g0 = np.arccos(-psi)
    angles = np.linspace(g0, 2.0 * np.pi - g0, grid)
    vals = a * np.cos(angles) + b * np.sin(angles)
    return float(vals.max())


def two_plane_max_oracle(
    t1: float, t2: float, t3: float, psi1: float, psi2: float, tau: float, r: float
) -> float:
    """max of (eta - c)^T phi over sphere cut by two half-spaces.

    Works in the 3-D span of the two plane normals and phi.  Enumerates the
    KKT active sets of the linear program (ball only, ball + one plane via
    orthogonal projection, ball + both planes via line-sphere intersection),
    keeps the feasible candidates, and polishes with SLSQP started from
    each; the best feasible value found is the maximum because a linear
    objective over a convex set has no spurious local maxima.
    """
    n1 = np.array([1.0, 0.0, 0.0])
    s = np.sqrt(max(1.0 - tau * tau, 1e-30))
    n2 = np.array([tau, s, 0.0])
    # phi has coordinates with n1.phi = t1, n2.phi = t2, |phi| = t3
    a2 = (t2 - tau * t1) / s
    a3 = np.sqrt(max(t3 * t3 - t1 * t1 - a2 * a2, 0.0))
    phi = np.array([t1, a2, a3])

    def feasible(w):
        return (
            w @ w <= 1.0 + 1e-9
            and n1 @ w <= -psi1 + 1e-9
            and n2 @ w <= -psi2 + 1e-9
        )

    candidates = []
    # ball active only
    if t3 > 0:
        candidates.append(phi / np.linalg.norm(phi))
    # ball + one plane active: cap center plus in-cap projection of phi
    for n, psi in ((n1, psi1), (n2, psi2)):
        if abs(psi) <= 1.0:
            perp = phi - (n @ phi) * n
            nrm = np.linalg.norm(perp)
            w = -psi * n + (np.sqrt(1.0 - psi * psi) * perp / nrm if nrm > 1e-14 else 0.0)
            candidates.append(w)
    # ball + both planes active: the two ends of the intersection segment
    denom = 1.0 - tau * tau
    if denom > 1e-14:
        b1 = (-psi1 + tau * psi2) / denom
        b2 = (-psi2 + tau * psi1) / denom
        w0 = b1 * n1 + b2 * n2
        slack = 1.0 - float(w0 @ w0)
        if slack >= 0:
            e3 = np.array([0.0, 0.0, 1.0])
            for sign in (1.0, -1.0):
                candidates.append(w0 + sign * np.sqrt(slack) * e3)
    if psi1 <= 0 and psi2 <= 0:
        candidates.append(np.zeros(3))

    cons = (
        {"type": "ineq", "fun": lambda w: 1.0 - w @ w},
        {"type": "ineq", "fun": lambda w: -psi1 - n1 @ w},
        {"type": "ineq", "fun": lambda w: -psi2 - n2 @ w},
    )
    best = -np.inf
    for w0 in candidates:
        if feasible(w0):
            best = max(best, float(w0 @ phi))
        res = minimize(
            lambda w: -(w @ phi),
            w0,
            method="SLSQP",
            constraints=cons,
            options={"maxiter": 200, "ftol": 1e-14},
        )
        if feasible(res.x):
            best = max(best, float(res.x @ phi))
    return r * best


def random_dome_config(rng):
    """Consistent (t1, t2, r, psi_d) drawn from actual vectors."""
    dim = 6
    n = rng.normal(size=dim)
    n /= np.linalg.norm(n)
    phi = rng.normal(size=dim) * rng.uniform(0.5, 2.0)
    t1 = float(n @ phi)
    t2 = float(np.linalg.norm(phi))
    r = float(rng.uniform(0.2, 3.0))
    psi = float(rng.uniform(-0.999, 0.999))
    return t1, t2, r, psi


def random_two_plane_config(rng):
    """Consistent (t1, t2, t3, psi1, psi2, tau, r) with a nonempty region."""
    dim = 6
    while True:
        n1 = rng.normal(size=dim)
        n1 /= np.linalg.norm(n1)
        n2 = rng.normal(size=dim)
        n2 /= np.linalg.norm(n2)
        tau = float(n1 @ n2)
        if abs(tau) > 0.98:
            continue
        psi1 = float(rng.uniform(-0.97, 0.97))
        psi2 = float(rng.uniform(-0.97, 0.97))
        if np.arccos(psi1) + np.arccos(psi2) < np.arccos(tau) + 0.02:
            continue
        phi = rng.normal(size=dim) * rng.uniform(0.5, 2.0)
        t1 = float(n1 @ phi)
        t2 = float(n2 @ phi)
        t3 = float(np.linalg.norm(phi))
        r = float(rng.uniform(0.2, 3.0))
        return t1, t2, t3, psi1, psi2, tau, r


def ratio_problem(problem: Problem, ratio: float) -> Problem:
    """Copy of ``problem`` with noise level set to ``ratio * lambda_max``."""
    return problem.with_noise_level(ratio * lambda_max(problem))
