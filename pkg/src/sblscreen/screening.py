"""Safe feature elimination for one weighted l1 subproblem.

The dual optimum ``eta_hat`` is the projection of ``Y`` onto the dual
feasible set, so any feasible point yields a bounding sphere centered at
``Y``.  Cutting that sphere with one half-space (dome) or two (two-plane
region) tightens the bound.  Feature ``i`` is rejected when

    max_{eta in region} |phi_i^T eta| < lam * u_i,

a sufficient condition for ``theta_hat_i = 0``: removal provably leaves
the optimum unchanged after zero-padding.

Degenerate geometry falls back down the ladder
two-plane -> dome -> sphere -> exact dual test at radius zero,
so a screening pass always returns a mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .problem import Partition, Problem, WeightVector, lambda_max

__all__ = [
    "Sphere",
    "HalfSpace",
    "Region",
    "ScreenMask",
    "DegenerateResponse",
    "RadiusZero",
    "NoUsefulPlane",
    "NoSecondPlane",
    "DomainError",
    "LengthMismatch",
    "feasible_point",
    "build_sphere",
    "sphere_test",
    "select_plane_1",
    "select_plane_2",
    "m1",
    "m2",
    "dome_test",
    "tht_test",
    "w_tht_screen",
    "screen",
    "reduce_problem",
    "pad_solution",
]

# clamp for psi/tau ahead of any sqrt(1 - x^2), per the tangency convention
_PSI_CLIP = 1.0 - 1e-12
_SLACK = 1e-9


class DegenerateResponse(ValueError):
    """Y = 0 (or orthogonal to every column): no sphere can be built."""


class RadiusZero(ValueError):
    """Bounding sphere has radius zero; the exact dual test applies."""


class NoUsefulPlane(ValueError):
    """Best cutting plane misses the sphere entirely (psi_d < -1)."""


class NoSecondPlane(ValueError):
    """No admissible second plane exists (n == 1 or all |psi_2| > 1)."""


class DomainError(ValueError):
    """Geometry arguments violate the bound's preconditions."""


class LengthMismatch(ValueError):
    """Reduced solution and index map disagree in size."""


@dataclass(frozen=True)
class Sphere:
    """Ball ``||eta - center|| <= radius`` containing the dual optimum."""

    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")


@dataclass(frozen=True)
class HalfSpace:
    """Constraint ``normal^T eta <= offset`` cut from a dual constraint.

    ``psi`` is the signed distance fraction ``(normal^T c - offset) / r``
    relative to the bounding sphere; ``source_index`` and ``sign`` record
    which signed column generated the plane.
    """

    normal: np.ndarray
    offset: float
    psi: float
    source_index: int
    sign: float

    def __post_init__(self):
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=float))
        nrm = float(np.linalg.norm(self.normal))
        if abs(nrm - 1.0) > 1e-9:
            raise ValueError(f"plane normal must be unit length, got {nrm}")


@dataclass(frozen=True)
class Region:
    """Sphere, dome (sphere cut by one plane), or two-plane intersection."""

    variant: str
    sphere: Sphere
    planes: tuple[HalfSpace, ...] = ()
    dome_center: np.ndarray | None = field(default=None)
    dome_radius: float | None = field(default=None)
    tau: float | None = field(default=None)

    @classmethod
    def from_sphere(cls, sphere: Sphere) -> "Region":
        return cls("sphere", sphere)

    @classmethod
    def make_dome(cls, sphere: Sphere, plane: HalfSpace) -> "Region":
        if abs(plane.psi) > 1.0 + _SLACK:
            raise DomainError(f"dome requires |psi_d| <= 1, got {plane.psi}")
        psi = float(np.clip(plane.psi, -_PSI_CLIP, _PSI_CLIP))
        c_d = sphere.center - psi * sphere.radius * plane.normal
        r_d = sphere.radius * np.sqrt(1.0 - psi * psi)
        return cls("dome", sphere, (plane,), dome_center=c_d, dome_radius=float(r_d))

    @classmethod
    def make_two_plane(cls, sphere: Sphere, p1: HalfSpace, p2: HalfSpace) -> "Region":
        for p in (p1, p2):
            if abs(p.psi) > 1.0 + _SLACK:
                raise DomainError(f"two-plane region requires |psi| <= 1, got {p.psi}")
        tau = float(p1.normal @ p2.normal)
        psi1 = float(np.clip(p1.psi, -_PSI_CLIP, _PSI_CLIP))
        psi2 = float(np.clip(p2.psi, -_PSI_CLIP, _PSI_CLIP))
        tau_c = float(np.clip(tau, -_PSI_CLIP, _PSI_CLIP))
        if np.arccos(psi1) + np.arccos(psi2) < np.arccos(tau_c) - _SLACK:
            raise DomainError("two-plane region is empty for these psi/tau")
        return cls("two_plane", sphere, (p1, p2), tau=tau)


@dataclass(frozen=True)
class ScreenMask:
    """Boolean rejection flags, one per feature."""

    rejected: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rejected", np.asarray(self.rejected, dtype=bool))

    @property
    def n_rejected(self) -> int:
        return int(self.rejected.sum())

    def to_partition(self) -> Partition:
        return Partition(
            selected=np.flatnonzero(~self.rejected),
            rejected=np.flatnonzero(self.rejected),
        )


def feasible_point(problem: Problem, weights: WeightVector, lam_max: float) -> np.ndarray:
    """Dual-feasible point ``eta' = lam * Y * u_min / lam_max``.

    Feasible because ``|phi_i^T Y| <= lam_max`` and ``u_min <= u_i``.
    """
    if lam_max <= 0 or not np.any(problem.response):
        raise DegenerateResponse("cannot build a feasible point from Y = 0")
    scale = problem.noise_level * weights.u_min / lam_max
    return scale * problem.response


def build_sphere(problem: Problem, eta_prime: np.ndarray) -> Sphere:
    """Sphere centered at ``Y`` through the feasible point.

    Contains the dual optimum because ``eta_hat`` is the projection of ``Y``
    onto the feasible set, so ``||eta_hat - Y|| <= ||eta' - Y||``.
    """
    c = problem.response
    return Sphere(c, float(np.linalg.norm(np.asarray(eta_prime, dtype=float) - c)))


def _reject_margin(rho, lam_u, r, norms):
    # strict inequalities are decided with a rounding-scale cushion so that
    # features sitting exactly on a test boundary (e.g. active constraints)
    # are kept, never dropped, under floating-point noise
    return 1e-12 * (np.abs(rho) + lam_u + r * norms)


def sphere_test(sphere: Sphere, problem: Problem, weights: WeightVector) -> ScreenMask:
    """Reject i iff ``|c^T phi_i| < lam*u_i - r*||phi_i||``.

    At ``r == 0`` this is exactly the dual optimality test on ``eta_hat = Y``.
    """
    rho = problem.dictionary.T @ sphere.center
    lam_u = problem.noise_level * weights.u
    bound = lam_u - sphere.radius * problem.column_norms
    margin = _reject_margin(rho, lam_u, sphere.radius, problem.column_norms)
    return ScreenMask(np.abs(rho) < bound - margin)


def select_plane_1(sphere: Sphere, problem: Problem, weights: WeightVector) -> HalfSpace:
    """Pick the signed column cutting the sphere deepest.

    Maximizes ``(phi^T c - lam*u_i)/||phi||`` over ``{+-phi_i}``; ties break
    to the smallest index with the positive sign first.
    """
    if sphere.radius <= 0.0:
        raise RadiusZero("sphere radius is zero; use the exact dual test")
    rho = problem.dictionary.T @ sphere.center
    norms = problem.column_norms
    scores = (np.abs(rho) - problem.noise_level * weights.u) / norms
    i_star = int(np.argmax(scores))
    psi_d = float(scores[i_star] / sphere.radius)
    if psi_d < -1.0:
        raise NoUsefulPlane("best plane does not reach the sphere")
    sign = 1.0 if rho[i_star] >= 0 else -1.0
    return HalfSpace(
        normal=sign * problem.dictionary[:, i_star] / norms[i_star],
        offset=problem.noise_level * weights.u[i_star] / norms[i_star],
        psi=psi_d,
        source_index=i_star,
        sign=sign,
    )


def select_plane_2(region: Region, problem: Problem, weights: WeightVector) -> HalfSpace:
    """Pick the second plane against the dome's circumsphere.

    Requires the first plane to satisfy ``0 < psi_d <= 1`` so that
    ``B(c_d, r_d)`` still bounds the dual optimum.  Candidates are signed
    columns other than the first plane's, scored by
    ``(phi^T c_d - lam*u_i)/||phi||``; candidates whose plane misses the
    original sphere (``|psi_2| > 1``) are inadmissible.
    """
    if region.variant != "dome":
        raise ValueError("second plane is selected against a dome region")
    plane1 = region.planes[0]
    if not plane1.psi > 0:
        raise ValueError("circumsphere shrinkage requires 0 < psi_d <= 1")
    if problem.n_features <= 1:
        raise NoSecondPlane("only one feature")

    sphere = region.sphere
    rho = problem.dictionary.T @ sphere.center
    t = problem.dictionary.T @ region.dome_center
    norms = problem.column_norms
    lam_u = problem.noise_level * weights.u
    scores = (np.abs(t) - lam_u) / norms
    signs = np.where(t >= 0, 1.0, -1.0)
    psi2 = (signs * rho - lam_u) / (norms * sphere.radius)

    admissible = np.abs(psi2) <= 1.0 + _SLACK
    admissible[plane1.source_index] = False
    if not np.any(admissible):
        raise NoSecondPlane("no candidate plane intersects the sphere")
    masked = np.where(admissible, scores, -np.inf)
    j_star = int(np.argmax(masked))
    return HalfSpace(
        normal=signs[j_star] * problem.dictionary[:, j_star] / norms[j_star],
        offset=lam_u[j_star] / norms[j_star],
        psi=float(psi2[j_star]),
        source_index=j_star,
        sign=float(signs[j_star]),
    )


def _check_t3(t1, t3):
    if np.any(np.asarray(t3) <= 0):
        raise DomainError("t3 (the column norm) must be positive")
    if np.any(np.abs(t1) > np.asarray(t3) + _SLACK):
        raise DomainError("need |t1| <= t3 (Cauchy-Schwarz)")


def m1(t1, t2, r: float, psi_d: float):
    """Exact maximum of ``(eta - c)^T phi`` over a dome.

    ``t1 = n^T phi``, ``t2 = ||phi||``; accepts scalars or arrays of equal
    shape.  Value is ``r*t2`` when the plane is slack at the maximizer, else
    ``-psi_d*r*t1 + r*sqrt(t2^2 - t1^2)*sqrt(1 - psi_d^2)``.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    if abs(psi_d) > 1.0 + _SLACK:
        raise DomainError(f"|psi_d| must be <= 1, got {psi_d}")
    _check_t3(t1, t2)
    psi = float(np.clip(psi_d, -_PSI_CLIP, _PSI_CLIP))
    cross = np.sqrt(np.maximum(t2 * t2 - t1 * t1, 0.0))
    active = -psi * r * t1 + r * cross * np.sqrt(1.0 - psi * psi)
    out = np.where(t1 < -psi * t2, r * t2, active)
    return float(out) if out.ndim == 0 else out


def m2(t1, t2, t3, psi1: float, psi2: float, tau: float, r: float):
    """Exact maximum of ``(eta - c)^T phi`` over sphere cut by two planes.

    ``t1 = n_1^T phi``, ``t2 = n_2^T phi``, ``t3 = ||phi||``; ``tau`` is the
    plane-normal inner product.  Branches: both planes slack, one plane
    active (either), or both active; the both-active branch carries the
    ``1/(1 - tau^2)`` factor of the span decomposition.
    """
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    t3 = np.asarray(t3, dtype=float)
    for name, val in (("psi1", psi1), ("psi2", psi2), ("tau", tau)):
        if abs(val) > 1.0 + _SLACK:
            raise DomainError(f"|{name}| must be <= 1, got {val}")
    _check_t3(t1, t3)
    _check_t3(t2, t3)
    p1 = float(np.clip(psi1, -_PSI_CLIP, _PSI_CLIP))
    p2 = float(np.clip(psi2, -_PSI_CLIP, _PSI_CLIP))
    tc = float(np.clip(tau, -_PSI_CLIP, _PSI_CLIP))
    if np.arccos(p1) + np.arccos(p2) < np.arccos(tc) - _SLACK:
        raise DomainError("region is empty: arccos(psi1)+arccos(psi2) < arccos(tau)")

    s1 = np.sqrt(1.0 - p1 * p1)
    s2 = np.sqrt(1.0 - p2 * p2)
    d1 = np.sqrt(np.maximum(t3 * t3 - t1 * t1, 0.0))
    d2 = np.sqrt(np.maximum(t3 * t3 - t2 * t2, 0.0))

    cond_a = (t1 < -p1 * t3) & (t2 < -p2 * t3)
    with np.errstate(divide="ignore", invalid="ignore"):
        cond_b = (t1 >= -p1 * t3) & ((t2 - tc * t1) / d1 < (-p2 + tc * p1) / s1)
        cond_c = (t2 >= -p2 * t3) & ((t1 - tc * t2) / d2 < (-p1 + tc * p2) / s2)

    one_tau = 1.0 - tc * tc
    h_psi = np.sqrt(max(one_tau + 2.0 * tc * p1 * p2 - p1 * p1 - p2 * p2, 0.0))
    h_t = np.sqrt(np.maximum(one_tau * t3 * t3 + 2.0 * tc * t1 * t2 - t1 * t1 - t2 * t2, 0.0))
    both = (r / one_tau) * (-((p1 - tc * p2) * t1 + (p2 - tc * p1) * t2) + h_psi * h_t)

    out = np.where(
        cond_a,
        r * t3,
        np.where(
            cond_b,
            -r * t1 * p1 + r * d1 * s1,
            np.where(cond_c, -r * t2 * p2 + r * d2 * s2, both),
        ),
    )
    return float(out) if out.ndim == 0 else out


def dome_test(region: Region, problem: Problem, weights: WeightVector) -> ScreenMask:
    """Reject i iff ``V_l < c^T phi_i < V_u`` with the dome bound ``m1``."""
    if region.variant != "dome":
        raise ValueError("dome_test requires a dome region")
    plane = region.planes[0]
    sphere = region.sphere
    rho = problem.dictionary.T @ sphere.center
    t1 = problem.dictionary.T @ plane.normal
    t2 = problem.column_norms
    lam_u = problem.noise_level * weights.u
    v_u = lam_u - m1(t1, t2, sphere.radius, plane.psi)
    v_l = m1(-t1, t2, sphere.radius, plane.psi) - lam_u
    margin = _reject_margin(rho, lam_u, sphere.radius, t2)
    return ScreenMask((v_l + margin < rho) & (rho < v_u - margin))


def tht_test(region: Region, problem: Problem, weights: WeightVector) -> ScreenMask:
    """Reject i iff ``V_l < c^T phi_i < V_u`` with the two-plane bound ``m2``."""
    if region.variant != "two_plane":
        raise ValueError("tht_test requires a two-plane region")
    p1, p2 = region.planes
    sphere = region.sphere
    rho = problem.dictionary.T @ sphere.center
    t1 = problem.dictionary.T @ p1.normal
    t2 = problem.dictionary.T @ p2.normal
    t3 = problem.column_norms
    lam_u = problem.noise_level * weights.u
    args = (p1.psi, p2.psi, region.tau, sphere.radius)
    v_u = lam_u - m2(t1, t2, t3, *args)
    v_l = m2(-t1, -t2, t3, *args) - lam_u
    margin = _reject_margin(rho, lam_u, sphere.radius, t3)
    return ScreenMask((v_l + margin < rho) & (rho < v_u - margin))


def screen(
    problem: Problem,
    weights: WeightVector,
    lam: float | None = None,
    variant: str = "tht",
) -> ScreenMask:
    """Run the screening ladder capped at ``variant``.

    ``variant`` is one of ``"sphere"``, ``"dome"``, ``"tht"``; degenerate
    geometry falls back to the next-simpler test, and a zero-radius sphere
    falls back to the exact dual test (which ``sphere_test`` realizes).
    Raises :class:`DegenerateResponse` when ``Y = 0``.
    """
    if variant not in ("sphere", "dome", "tht"):
        raise ValueError(f"unknown screening variant: {variant!r}")
    if lam is not None and lam != problem.noise_level:
        problem = problem.with_noise_level(lam)
    if not np.any(problem.response):
        raise DegenerateResponse("cannot screen with Y = 0")

    lam_max = lambda_max(problem)
    if lam_max == 0.0:
        # every correlation is zero: theta_hat = 0, so everything is safe to drop
        return ScreenMask(np.ones(problem.n_features, dtype=bool))
    eta_p = feasible_point(problem, weights, lam_max)
    sphere = build_sphere(problem, eta_p)

    if variant == "sphere":
        return sphere_test(sphere, problem, weights)
    try:
        plane1 = select_plane_1(sphere, problem, weights)
    except (RadiusZero, NoUsefulPlane):
        return sphere_test(sphere, problem, weights)
    dome = Region.make_dome(sphere, plane1)

    if variant == "dome" or plane1.psi <= 0:
        return dome_test(dome, problem, weights)
    try:
        plane2 = select_plane_2(dome, problem, weights)
        tau = float(plane1.normal @ plane2.normal)
        if abs(tau) > _PSI_CLIP:
            raise NoSecondPlane("plane normals are numerically collinear")
        region = Region.make_two_plane(sphere, plane1, plane2)
    except (NoSecondPlane, DomainError):
        return dome_test(dome, problem, weights)
    return tht_test(region, problem, weights)


def w_tht_screen(problem: Problem, weights: WeightVector, lam: float | None = None) -> ScreenMask:
    """Weighted two-hyperplane screening pass (the full ladder)."""
    return screen(problem, weights, lam=lam, variant="tht")


def reduce_problem(
    problem: Problem, weights: WeightVector, mask: ScreenMask
) -> tuple[Problem, WeightVector, np.ndarray]:
    """Drop rejected columns; the index map recovers original positions.

    All-rejected is not an error: the result is a 0-column problem whose
    solution is the empty vector.
    """
    if mask.rejected.shape != (problem.n_features,):
        raise LengthMismatch("mask length does not match feature count")
    keep = np.flatnonzero(~mask.rejected)
    reduced = Problem(problem.dictionary[:, keep], problem.response, problem.noise_level)
    return reduced, WeightVector(weights.u[keep]), keep


def pad_solution(reduced_theta, index_map, n: int) -> np.ndarray:
    """Zero-pad a reduced solution back to the original feature positions."""
    reduced_theta = np.asarray(reduced_theta, dtype=float)
    index_map = np.asarray(index_map, dtype=np.intp)
    if reduced_theta.shape != index_map.shape:
        raise LengthMismatch(
            f"reduced theta has length {reduced_theta.size}, map {index_map.size}"
        )
    if index_map.size and (index_map.min() < 0 or index_map.max() >= n):
        raise LengthMismatch("index map entries out of range")
    full = np.zeros(int(n))
    full[index_map] = reduced_theta
    return full
