"""Experiment orchestration: lambda sweeps, Monte-Carlo loops, CSV/plots.

Every experiment is fully determined by its config and seed (re-running
reproduces the CSV except for the timing columns).  Per-trial random
streams derive from ``seed + trial_index``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import median

import numpy as np

from . import sbl, screening, wlasso
from .apps import classification, imaging
from .datasets import load_builtin_digits, load_idx
from .problem import Problem, SparseSolution, WeightVector, lambda_max, normalize_columns

__all__ = [
    "ExperimentConfig",
    "RunRecord",
    "EmptyInput",
    "build_instance",
    "run_screen_bench",
    "run_classification",
    "run_imaging",
    "emit_csv",
    "parse_csv",
    "emit_plots",
]

CSV_HEADER = "ratio,t_ori,t_scr,t_red,screening_pct,speedup,max_diff,metric,stderr"

# smallest usable lambda/lambda_max; ratio 0 is floored here to keep the
# noise level positive
MIN_RATIO = 1e-6

_DEFAULT_GRID = tuple(np.round(np.arange(0.0, 1.01, 0.1), 10))


class EmptyInput(ValueError):
    """No records to emit."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs for one experiment; unused fields are ignored per task."""

    dataset: str = "synthetic-random"
    lambda_grid: tuple[float, ...] = _DEFAULT_GRID
    n_monte_carlo: int = 5
    grid_len: int | None = None
    batch: int = 20
    screening: str = "tht"
    seed: int = 0
    out_dir: str | None = None
    gap_tol: float | None = None
    max_outer: int = 12
    conv_tol: float = 1e-5
    measure_baseline: bool = True
    # dataset sizing
    n_rows: int = 100
    dict_cols: int = 1000
    sparsity: int = 5
    per_class: int = 100
    side: int = 28
    n_sources: int = 4
    n_targets: int = 5
    target_noise: float = 1e-3
    images_path: str | None = None
    labels_path: str | None = None
    docword_path: str | None = None
    bow_docs: int = 50
    bow_words: int = 40

    def __post_init__(self):
        grid = tuple(float(r) for r in self.lambda_grid)
        object.__setattr__(self, "lambda_grid", grid)
        if not grid:
            raise ValueError("lambda_grid must be nonempty")
        if any(r < 0 or r > 1 for r in grid):
            raise ValueError("lambda ratios must lie in [0, 1]")
        if self.grid_len is None:
            object.__setattr__(self, "grid_len", len(grid))
        elif self.grid_len != len(grid):
            raise ValueError("grid_len must equal len(lambda_grid)")
        for name in ("n_monte_carlo", "batch"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.dataset not in ("synthetic-random", "synthetic-psf", "mnist", "bow"):
            raise ValueError(f"unknown dataset: {self.dataset!r}")
        if self.screening not in ("off", "sphere", "dome", "tht"):
            raise ValueError(f"unknown screening variant: {self.screening!r}")


@dataclass(frozen=True)
class RunRecord:
    """One sweep point; ``metric``/``stderr``/``max_solution_diff`` may be
    NaN when a task does not measure them."""

    ratio: float
    t_ori: float
    t_scr: float
    t_red: float
    screening_pct: float
    max_solution_diff: float
    metric: float
    stderr: float

    def __post_init__(self):
        for name in ("t_ori", "t_scr", "t_red"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not (0.0 <= self.screening_pct <= 1.0):
            raise ValueError("screening_pct must lie in [0, 1]")
        if np.isfinite(self.max_solution_diff) and self.max_solution_diff < 0:
            raise ValueError("max_solution_diff must be nonnegative")

    @property
    def speedup(self) -> float:
        if self.t_ori <= 0:
            return float("nan")
        return (self.t_scr + self.t_red) / self.t_ori


def _effective_lambda(ratio: float, lam_max: float) -> float:
    return max(ratio, MIN_RATIO) * lam_max


def build_instance(config: ExperimentConfig) -> Problem:
    """Materialize the single (Problem) instance a screen-bench runs on.

    ``synthetic-random`` plants a sparse signal under a Gaussian dictionary;
    ``synthetic-psf`` renders a sampled PSF dictionary and a multi-source
    target; ``mnist`` regresses a held-out image on image columns (built-in
    digits when no IDX paths are given); ``bow`` defers to the docword
    loader.  ``noise_level`` is a placeholder 1.0, replaced per sweep ratio.
    """
    rng = np.random.default_rng(config.seed)
    if config.dataset == "synthetic-random":
        raw = rng.normal(size=(config.n_rows, config.dict_cols))
        mat, _ = normalize_columns(raw)
        theta = np.zeros(config.dict_cols)
        pos = rng.choice(config.dict_cols, size=config.sparsity, replace=False)
        theta[pos] = rng.normal(size=config.sparsity) * 2.0
        y = mat @ theta + 0.05 * rng.normal(size=config.n_rows)
        return Problem(mat, y, 1.0)
    if config.dataset == "synthetic-psf":
        mat, params = imaging.sample_dictionary(
            config.dict_cols, config.side, config.side, seed=config.seed
        )
        # one dominant source keeps the target coherent with the dictionary,
        # which is what makes screening effective at moderate ratios
        sources = _pick_sources(rng, config.side, config.n_sources, dominant=True)
        _, noisy = generate_imaging_target(sources, config.side, 1e-4, config.seed)
        return Problem(mat, noisy.vectorize(), 1.0)
    if config.dataset == "mnist":
        images, _ = _load_digit_pool(config)
        idx = rng.permutation(len(images))
        cols = images[idx[: config.dict_cols]].T
        y = images[idx[config.dict_cols]]
        mat, _ = normalize_columns(cols)
        y = y / np.linalg.norm(y)
        return Problem(mat, y, 1.0)
    if config.dataset == "bow":
        from .datasets import BowSubsetSpec, load_bow

        if config.docword_path is None:
            raise ValueError("bow dataset requires docword_path")
        spec = BowSubsetSpec(n_docs=config.bow_docs, n_words=config.bow_words)
        return load_bow(config.docword_path, spec, seed=config.seed)
    raise ValueError(config.dataset)


def _pick_sources(
    rng, side: int, n_sources: int, dominant: bool = False
) -> list[tuple[imaging.PsfParams, float]]:
    sources = []
    for k in range(n_sources):
        p = imaging.PsfParams(
            float(rng.uniform(side * 0.2, side * 0.8)),
            float(rng.uniform(side * 0.2, side * 0.8)),
            float(rng.uniform(0.8, 1.5)),
        )
        if dominant:
            weight = 2.5 if k == 0 else float(rng.uniform(0.3, 0.7))
        else:
            weight = float(rng.uniform(0.5, 1.5))
        sources.append((p, weight))
    return sources


def generate_imaging_target(sources, side: int, noise_level: float, seed: int):
    return imaging.generate_target(sources, side, side, noise_level, seed=seed)


def _load_digit_pool(config: ExperimentConfig):
    if config.images_path and config.labels_path:
        return load_idx(config.images_path, config.labels_path)
    return load_builtin_digits(side=config.side)


def _timed_solve(problem, weights, solver) -> tuple[SparseSolution, float]:
    start = time.perf_counter()
    solution = wlasso.solve(problem, weights, solver)
    return solution, time.perf_counter() - start


def run_screen_bench(config: ExperimentConfig) -> list[RunRecord]:
    """Time unscreened vs screened single l1 solves over the ratio grid.

    ``t_ori`` is the median of three unscreened timings; any failure still
    flushes the partial CSV to ``out_dir`` before propagating.
    """
    base = build_instance(config)
    weights = WeightVector.ones(base.n_features)
    lam_max = lambda_max(base)
    solver = wlasso.SolverConfig(gap_tol=config.gap_tol)
    records: list[RunRecord] = []
    try:
        for ratio in config.lambda_grid:
            problem = base.with_noise_level(_effective_lambda(ratio, lam_max))
            solution = None
            times = []
            for _ in range(3):
                solution, elapsed = _timed_solve(problem, weights, solver)
                times.append(elapsed)
            t_ori = median(times)

            start = time.perf_counter()
            mask = screening.screen(problem, weights, variant=config.screening)
            t_scr = time.perf_counter() - start
            reduced, red_weights, index_map = screening.reduce_problem(
                problem, weights, mask
            )
            red_solution, t_red = _timed_solve(reduced, red_weights, solver)
            padded = screening.pad_solution(
                red_solution.theta, index_map, problem.n_features
            )
            diff = float(np.max(np.abs(solution.theta - padded))) if padded.size else 0.0
            records.append(
                RunRecord(
                    ratio=ratio,
                    t_ori=t_ori,
                    t_scr=t_scr,
                    t_red=t_red,
                    screening_pct=screening_percentage_of(mask),
                    max_solution_diff=diff,
                    metric=float("nan"),
                    stderr=float("nan"),
                )
            )
    except Exception:
        _flush_partial(records, config)
        raise
    return records


def screening_percentage_of(mask: screening.ScreenMask) -> float:
    n = mask.rejected.size
    return float(mask.rejected.sum() / n) if n else 0.0


def _flush_partial(records, config):
    if records and config.out_dir:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        emit_csv(records, out / "partial.csv")


def _sbl_config(config: ExperimentConfig, screening_variant: str) -> sbl.SblConfig:
    solver = None
    if config.gap_tol is not None:
        solver = wlasso.SolverConfig(gap_tol=config.gap_tol)
    return sbl.SblConfig(
        conv_tol=config.conv_tol,
        max_outer=config.max_outer,
        screening=screening_variant,
        solver=solver,
    )


def run_classification(config: ExperimentConfig):
    """Monte-Carlo digit classification over the ratio grid.

    Per trial a fresh labeled dictionary (``per_class`` columns per digit)
    and a fresh test batch are drawn; accuracy is averaged per ratio across
    ``n_monte_carlo`` trials with its standard error.  Returns
    ``(records, table)`` where ``table`` rows are
    ``(ratio, mean_accuracy, stderr, per_trial_accuracies)``.  When
    ``measure_baseline`` is off, the unscreened timing and solution-diff
    columns are NaN-like (t_ori=0).
    """
    images, labels = _load_digit_pool(config)
    n_ratios = len(config.lambda_grid)
    acc = np.zeros((config.n_monte_carlo, n_ratios))
    t_scrn = np.zeros(n_ratios)
    t_base = np.zeros(n_ratios)
    max_diff = np.zeros(n_ratios)
    pct = np.zeros(n_ratios)
    pct_count = 0

    cfg_scr = _sbl_config(config, config.screening)
    cfg_off = _sbl_config(config, "off")

    for trial in range(config.n_monte_carlo):
        rng = np.random.default_rng(config.seed + trial)
        dict_idx, test_idx = _split_digit_indices(rng, labels, config)
        cols, _ = normalize_columns(images[dict_idx].T)
        dict_labels = labels[dict_idx]

        for j, ratio in enumerate(config.lambda_grid):
            for t in test_idx:
                y = images[t]
                nrm = np.linalg.norm(y)
                if nrm == 0:
                    continue
                y = y / nrm
                base = Problem(cols, y, 1.0)
                lam = _effective_lambda(ratio, lambda_max(base))
                problem = base.with_noise_level(lam)

                start = time.perf_counter()
                solution, _, _ = sbl.run(problem, cfg_scr)
                t_scrn[j] += time.perf_counter() - start

                if config.measure_baseline:
                    start = time.perf_counter()
                    ref, _, _ = sbl.run(problem, cfg_off)
                    t_base[j] += time.perf_counter() - start
                    diff = float(np.max(np.abs(ref.theta - solution.theta)))
                    max_diff[j] = max(max_diff[j], diff)

                labeled = classification.LabeledDictionary(base, dict_labels)
                try:
                    pred, _ = classification.classify(solution, labeled)
                except classification.Undecidable:
                    pred = -1
                acc[trial, j] += float(pred == labels[t])
            acc[trial, j] /= len(test_idx)
        # screening percentage of the first inner pass, for reporting
        if config.screening != "off":
            for j, ratio in enumerate(config.lambda_grid):
                y = images[test_idx[0]]
                y = y / np.linalg.norm(y)
                base = Problem(cols, y, 1.0)
                lam = _effective_lambda(ratio, lambda_max(base))
                mask = screening.screen(
                    base.with_noise_level(lam),
                    WeightVector.ones(base.n_features),
                    variant=config.screening,
                )
                pct[j] += screening_percentage_of(mask)
            pct_count += 1

    if pct_count:
        pct /= pct_count
    mean = acc.mean(axis=0)
    stderr = acc.std(axis=0, ddof=1) / np.sqrt(config.n_monte_carlo) \
        if config.n_monte_carlo > 1 else np.zeros(n_ratios)

    records = []
    table = []
    for j, ratio in enumerate(config.lambda_grid):
        records.append(
            RunRecord(
                ratio=ratio,
                t_ori=t_base[j],
                t_scr=0.0,
                t_red=t_scrn[j],
                screening_pct=float(pct[j]),
                max_solution_diff=float(max_diff[j]) if config.measure_baseline else float("nan"),
                metric=float(mean[j]),
                stderr=float(stderr[j]),
            )
        )
        table.append((ratio, float(mean[j]), float(stderr[j]), tuple(acc[:, j])))
    return records, table


def _split_digit_indices(rng, labels, config: ExperimentConfig):
    dict_idx = []
    for digit in range(classification.N_CLASSES):
        pool = np.flatnonzero(labels == digit)
        take = min(config.per_class, max(1, pool.size // 2))
        dict_idx.extend(rng.choice(pool, size=take, replace=False))
    dict_idx = np.array(sorted(dict_idx))
    rest = np.setdiff1d(np.arange(len(labels)), dict_idx)
    test_idx = rng.choice(rest, size=min(config.batch, rest.size), replace=False)
    return dict_idx, test_idx


def run_imaging(config: ExperimentConfig):
    """Source localization and denoising sweep on synthetic PSF targets.

    Returns ``(records_iou, records_psnr)``; the two lists share timing and
    screening columns and differ in the metric.  When ``out_dir`` is set,
    original/blurred/reconstructed images of each target are written per
    ratio.
    """
    mat, params = imaging.sample_dictionary(
        config.dict_cols, config.side, config.side, seed=config.seed
    )
    cfg = _sbl_config(config, config.screening)
    cfg_off = _sbl_config(config, "off")

    targets = []
    for k in range(config.n_targets):
        rng = np.random.default_rng(config.seed + k)
        sources = _pick_sources(rng, config.side, config.n_sources)
        clean, noisy = imaging.generate_target(
            sources, config.side, config.side, config.target_noise, seed=config.seed + k
        )
        truth = [
            imaging.DetectionBox(p.x0, p.y0, 1.5) for p, w in sources if w > 0
        ]
        targets.append((clean, noisy, truth))

    records_iou, records_psnr = [], []
    for ratio in config.lambda_grid:
        ious, psnrs = [], []
        t_run = 0.0
        t_base = 0.0
        max_diff = float("nan") if not config.measure_baseline else 0.0
        pcts = []
        for k, (clean, noisy, truth) in enumerate(targets):
            y = noisy.vectorize()
            base = Problem(mat, y, 1.0)
            lam = _effective_lambda(ratio, lambda_max(base))
            problem = base.with_noise_level(lam)

            start = time.perf_counter()
            solution, _, _ = sbl.run(problem, cfg)
            t_run += time.perf_counter() - start

            if config.measure_baseline:
                start = time.perf_counter()
                ref, _, _ = sbl.run(problem, cfg_off)
                t_base += time.perf_counter() - start
                max_diff = max(max_diff, float(np.max(np.abs(ref.theta - solution.theta))))

            recon_vec = mat @ solution.theta
            recon = imaging.ImageGrid.from_vector(recon_vec, config.side, config.side)
            psnrs.append(imaging.psnr(clean, recon))
            boxes = imaging.localize(solution, params)
            if boxes:
                ious.append(imaging.group_iou(boxes, truth))
            else:
                ious.append(0.0)
            if config.screening != "off":
                mask = screening.screen(
                    problem, WeightVector.ones(problem.n_features),
                    variant=config.screening,
                )
                pcts.append(screening_percentage_of(mask))
            if config.out_dir:
                _save_images(config, ratio, k, clean, noisy, recon)

        n_t = len(targets)
        shared = dict(
            ratio=ratio,
            t_ori=t_base,
            t_scr=0.0,
            t_red=t_run,
            screening_pct=float(np.mean(pcts)) if pcts else 0.0,
            max_solution_diff=max_diff,
        )
        records_iou.append(
            RunRecord(metric=float(np.mean(ious)),
                      stderr=float(np.std(ious) / np.sqrt(n_t)), **shared)
        )
        finite = [p for p in psnrs if np.isfinite(p)]
        records_psnr.append(
            RunRecord(metric=float(np.mean(finite)) if finite else float("inf"),
                      stderr=float(np.std(finite) / np.sqrt(n_t)) if finite else 0.0,
                      **shared)
        )
    return records_iou, records_psnr


def _save_images(config, ratio, k, clean, noisy, recon):
    from matplotlib import image as mpimg

    out = Path(config.out_dir) / "images" / f"ratio_{ratio:g}"
    out.mkdir(parents=True, exist_ok=True)
    for name, grid in (("original", clean), ("blurred", noisy), ("reconstructed", recon)):
        mpimg.imsave(out / f"target{k}_{name}.png", grid.pixels, cmap="viridis")


def emit_csv(records: list[RunRecord], path) -> Path:
    """Write records with the fixed header at 12 significant digits."""
    if not records:
        raise EmptyInput("no records to emit")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER]
    for r in records:
        fields = (
            r.ratio, r.t_ori, r.t_scr, r.t_red, r.screening_pct,
            r.speedup, r.max_solution_diff, r.metric, r.stderr,
        )
        lines.append(",".join(f"{v:.12g}" for v in fields))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def parse_csv(path) -> list[RunRecord]:
    """Read back an emitted CSV (speedup column is derived, not stored)."""
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"unexpected CSV header in {path}")
    records = []
    for line in lines[1:]:
        vals = [float(v) for v in line.split(",")]
        records.append(
            RunRecord(
                ratio=vals[0], t_ori=vals[1], t_scr=vals[2], t_red=vals[3],
                screening_pct=vals[4], max_solution_diff=vals[6],
                metric=vals[7], stderr=vals[8],
            )
        )
    return records


def emit_plots(records: list[RunRecord], out_dir) -> list[Path]:
    """Static PNG plots of screening percentage and speedup vs ratio."""
    if not records:
        raise EmptyInput("no records to plot")
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ratios = [r.ratio for r in records]
    paths = []
    for name, values, ylabel in (
        ("screening_pct", [r.screening_pct for r in records], "screening percentage"),
        ("speedup", [r.speedup for r in records], "speedup factor (t_scr+t_red)/t_ori"),
    ):
        fig = Figure(figsize=(5, 3.5))
        FigureCanvasAgg(fig)
        ax = fig.add_subplot(111)
        ax.plot(ratios, values, marker="o")
        if name == "speedup":
            ax.axhline(1.0, color="gray", lw=0.8, ls="--")
        ax.set_xlabel("lambda / lambda_max")
        ax.set_ylabel(ylabel)
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        target = out_dir / f"{name}.png"
        fig.savefig(target, dpi=120)
        paths.append(target)
    return paths
