"""PSF-dictionary imaging: feature rendering, source localization, metrics.

A point source at ``(x0, y0)`` with width ``sigma_xy`` contributes to pixel
``(i, j)`` the product of two pixel-integrated Gaussian masses
``delta_e(x_i - x0) * delta_e(y_j - y0)``.  Targets are nonnegative
combinations of such features plus Gaussian noise; reconstruction quality
is scored by PSNR and a set-level IoU over detection boxes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from ..problem import SparseSolution, normalize_columns

__all__ = [
    "PsfParams",
    "PsfPrior",
    "ImageGrid",
    "DetectionBox",
    "EmptySet",
    "DimensionMismatch",
    "delta_e",
    "render_feature",
    "sample_dictionary",
    "generate_target",
    "iou",
    "group_iou",
    "psnr",
    "localize",
]

_SQRT2 = math.sqrt(2.0)


class EmptySet(ValueError):
    """Group IoU needs at least one detection and one ground truth."""


class DimensionMismatch(ValueError):
    """Images being compared must share their pixel grid."""


@dataclass(frozen=True)
class PsfParams:
    """Single-source parameters: center (pixels), width, background."""

    x0: float
    y0: float
    sigma_xy: float
    bg: float = 0.0

    def __post_init__(self):
        if not self.sigma_xy > 0:
            raise ValueError("sigma_xy must be positive")


@dataclass(frozen=True)
class PsfPrior:
    """Sampling prior for feature parameters.

    Centers are uniform over the grid (or Gaussian around its middle when
    ``kind='gaussian'``, truncated to the grid); widths are uniform over
    ``sigma_range``.
    """

    sigma_range: tuple[float, float] = (0.7, 2.0)
    kind: str = "uniform"

    def __post_init__(self):
        lo, hi = self.sigma_range
        if not (0 < lo <= hi):
            raise ValueError("sigma_range must satisfy 0 < lo <= hi")
        if self.kind not in ("uniform", "gaussian"):
            raise ValueError(f"unknown prior kind: {self.kind!r}")


@dataclass(frozen=True)
class ImageGrid:
    """Pixel raster with 1-based integer pixel-center coordinates."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", np.asarray(self.pixels, dtype=float))
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be >= 1")
        if self.pixels.shape != (self.height, self.width):
            raise ValueError(
                f"pixels shape {self.pixels.shape} does not match "
                f"(height, width) = ({self.height}, {self.width})"
            )

    def vectorize(self) -> np.ndarray:
        """Row-major flattening; fixed convention across the package."""
        return self.pixels.ravel(order="C")

    @classmethod
    def from_vector(cls, vec, width: int, height: int) -> "ImageGrid":
        vec = np.asarray(vec, dtype=float)
        return cls(width, height, vec.reshape(height, width, order="C"))


@dataclass(frozen=True)
class DetectionBox:
    """Axis-aligned square around a detected (or true) source center."""

    cx: float
    cy: float
    half: float

    def __post_init__(self):
        if not self.half > 0:
            raise ValueError("half-width must be positive")


def delta_e(u, sigma: float):
    """Gaussian mass inside one pixel interval centered ``u`` away.

    ``0.5*(erf((u+0.5)/(sqrt(2)*sigma)) - erf((u-0.5)/(sqrt(2)*sigma)))``.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    u = np.asarray(u, dtype=float)
    denom = _SQRT2 * sigma
    out = 0.5 * (erf((u + 0.5) / denom) - erf((u - 0.5) / denom))
    return float(out) if out.ndim == 0 else out


def render_feature(params: PsfParams, width: int, height: int) -> ImageGrid:
    """Expected photon counts of one source on the pixel grid.

    Separable: ``pixels[j-1, i-1] = delta_e(i - x0) * delta_e(j - y0) + bg``
    for ``i in 1..width``, ``j in 1..height``.  The source intensity is not
    rendered; it lives in the regression coefficient.
    """
    margin = 2.0 * params.sigma_xy
    if not (1 - margin <= params.x0 <= width + margin):
        raise ValueError("x0 lies outside the grid extended by 2*sigma")
    if not (1 - margin <= params.y0 <= height + margin):
        raise ValueError("y0 lies outside the grid extended by 2*sigma")
    xs = delta_e(np.arange(1, width + 1) - params.x0, params.sigma_xy)
    ys = delta_e(np.arange(1, height + 1) - params.y0, params.sigma_xy)
    return ImageGrid(width, height, np.outer(ys, xs) + params.bg)


def sample_dictionary(
    n: int,
    width: int,
    height: int,
    prior: PsfPrior | None = None,
    seed: int = 0,
) -> tuple[np.ndarray, list[PsfParams]]:
    """Draw ``n`` feature parameter triples and render the unit-norm columns.

    Returns ``(matrix, params)`` with ``matrix`` of shape
    ``(width*height, n)``; deterministic in ``seed``.
    """
    if n < 1:
        raise ValueError("need at least one feature")
    prior = prior or PsfPrior()
    rng = np.random.default_rng(seed)
    lo, hi = prior.sigma_range
    if prior.kind == "uniform":
        x0 = rng.uniform(1.0, width, size=n)
        y0 = rng.uniform(1.0, height, size=n)
    else:
        x0 = np.clip(rng.normal((1 + width) / 2, width / 4, size=n), 1.0, width)
        y0 = np.clip(rng.normal((1 + height) / 2, height / 4, size=n), 1.0, height)
    sig = rng.uniform(lo, hi, size=n)
    params = [PsfParams(float(a), float(b), float(s)) for a, b, s in zip(x0, y0, sig)]
    cols = np.column_stack([render_feature(p, width, height).vectorize() for p in params])
    matrix, _ = normalize_columns(cols)
    return matrix, params


def generate_target(
    sources: list[tuple[PsfParams, float]],
    width: int,
    height: int,
    noise_level: float,
    seed: int = 0,
) -> tuple[ImageGrid, ImageGrid]:
    """Clean and noisy multi-source images.

    ``clean = sum_i weight_i * feature_i`` (weights must be nonnegative:
    intensities); ``noisy`` adds iid Gaussian noise of variance
    ``noise_level`` per pixel.
    """
    if any(w < 0 for _, w in sources):
        raise ValueError("source weights (intensities) must be nonnegative")
    clean = np.zeros((height, width))
    for params, weight in sources:
        clean += weight * render_feature(params, width, height).pixels
    rng = np.random.default_rng(seed)
    noisy = clean + rng.normal(0.0, math.sqrt(noise_level), size=clean.shape)
    return ImageGrid(width, height, clean), ImageGrid(width, height, noisy)


def iou(a: DetectionBox, b: DetectionBox) -> float:
    """Intersection over union of two axis-aligned boxes (0 when disjoint)."""
    ix = min(a.cx + a.half, b.cx + b.half) - max(a.cx - a.half, b.cx - b.half)
    iy = min(a.cy + a.half, b.cy + b.half) - max(a.cy - a.half, b.cy - b.half)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = 4.0 * a.half * a.half + 4.0 * b.half * b.half - inter
    return inter / union


def group_iou(detections: list[DetectionBox], truths: list[DetectionBox]) -> float:
    """Set-level IoU: match each member of the larger side's complement.

    With ``m`` detections and ``n`` truths: when ``m > n`` average each
    detection's best IoU over truths; otherwise average each truth's best
    IoU over detections.  Equal sets score exactly 1.
    """
    if not detections or not truths:
        raise EmptySet("need at least one detection and one ground truth")
    table = np.array([[iou(d, t) for t in truths] for d in detections])
    if len(detections) > len(truths):
        return float(table.max(axis=1).mean())
    return float(table.max(axis=0).mean())


def psnr(original: ImageGrid, reconstructed: ImageGrid) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical images."""
    if (original.width, original.height) != (reconstructed.width, reconstructed.height):
        raise DimensionMismatch("images must share dimensions")
    mse = float(np.mean((original.pixels - reconstructed.pixels) ** 2))
    if mse == 0.0:
        return math.inf
    peak = float(np.max(original.pixels))
    return 20.0 * math.log10(peak / math.sqrt(mse))


def localize(
    solution: SparseSolution,
    params: list[PsfParams],
    merge_radius: float = 1.0,
    box_half: float = 1.5,
) -> list[DetectionBox]:
    """Detection boxes at the centers of supported features.

    Support centers within ``merge_radius`` of an existing cluster centroid
    are merged by ``|theta|``-weighted averaging (strongest features seed
    clusters first), so several features explaining one source yield one box.
    """
    if solution.theta.shape != (len(params),):
        raise ValueError("solution length must match the parameter list")
    idx = sorted(solution.support, key=lambda i: -abs(solution.theta[i]))
    clusters: list[list[float]] = []  # [wx, wy, w]
    for i in idx:
        w = abs(float(solution.theta[i]))
        x, y = params[i].x0, params[i].y0
        for cl in clusters:
            cx, cy = cl[0] / cl[2], cl[1] / cl[2]
            if math.hypot(x - cx, y - cy) <= merge_radius:
                cl[0] += w * x
                cl[1] += w * y
                cl[2] += w
                break
        else:
            clusters.append([w * x, w * y, w])
    return [DetectionBox(cl[0] / cl[2], cl[1] / cl[2], box_half) for cl in clusters]
