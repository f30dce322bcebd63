"""Command-line front end: dataset sweeps, classification, reconstruction.

Subcommands
-----------
screen-bench   time unscreened vs screened l1 solves over a ratio grid
classify       Monte-Carlo digit classification (IDX files or built-in digits)
reconstruct    PSF imaging sweep with IoU/PSNR metrics and result images
sbl-solve      one SBL fit on a dataset instance; writes the solution CSV

A line-oriented ``key=value`` config file (``--config``) supplies defaults;
explicit flags override it.  Exit code 0 on success; on failure one
machine-readable line ``ERROR <Type>: <message>`` goes to stderr.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import sbl
from .bench import (
    ExperimentConfig,
    emit_csv,
    emit_plots,
    run_classification,
    run_imaging,
    run_screen_bench,
)
from .problem import lambda_max

__all__ = ["main", "parse_config_file", "build_parser"]

_CONFIG_FIELDS = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def parse_config_file(path) -> dict:
    """Parse ``key=value`` lines; '#' starts a comment, blanks are skipped."""
    values: dict = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _CONFIG_FIELDS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        values[key] = _coerce(key, val)
    return values


def _coerce(key: str, val: str):
    if key == "lambda_grid":
        return tuple(float(v) for v in val.split(",") if v.strip())
    if key in ("out_dir", "dataset", "screening", "images_path", "labels_path", "docword_path"):
        return val
    if key == "measure_baseline":
        return val.lower() in ("1", "true", "yes", "on")
    if key in ("gap_tol", "conv_tol"):
        return None if val.lower() == "none" else float(val)
    if key == "grid_len":
        return None if val.lower() == "none" else int(val)
    return int(val) if val.lstrip("+-").isdigit() else float(val)


def _ratio_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sblscreen",
        description="Sparse Bayesian learning with safe screening: benchmarks and applications.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=str, default=None, help="key=value config file")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--out", type=str, default=None, help="output directory")
        p.add_argument(
            "--screening", choices=["off", "sphere", "dome", "tht"], default=None
        )
        p.add_argument(
            "--ratios", type=str, default=None,
            help="comma-separated lambda/lambda_max grid, e.g. 0,0.1,...,1.0",
        )

    p = sub.add_parser("screen-bench", help="screening percentage / speedup sweep")
    common(p)
    p.add_argument("--dataset", default=None,
                   choices=["synthetic-random", "synthetic-psf", "mnist", "bow"])
    p.add_argument("--rows", type=int, default=None, help="samples for synthetic-random")
    p.add_argument("--cols", type=int, default=None, help="dictionary columns")
    p.add_argument("--docword", type=str, default=None, help="UCI docword file (bow)")
    p.add_argument("--images", type=str, default=None, help="IDX image file (mnist)")
    p.add_argument("--labels", type=str, default=None, help="IDX label file (mnist)")

    p = sub.add_parser("classify", help="Monte-Carlo digit classification")
    common(p)
    p.add_argument("--images", type=str, default=None, help="IDX image file")
    p.add_argument("--labels", type=str, default=None, help="IDX label file")
    p.add_argument("--n1", type=int, default=None, help="Monte-Carlo trials")
    p.add_argument("--n3", type=int, default=None, help="test images per trial")
    p.add_argument("--per-class", type=int, default=None, help="dictionary columns per digit")
    p.add_argument("--no-baseline", action="store_true",
                   help="skip the unscreened reference runs")

    p = sub.add_parser("reconstruct", help="PSF imaging sweep (IoU and PSNR)")
    common(p)
    p.add_argument("--cols", type=int, default=None, help="sampled dictionary columns")
    p.add_argument("--side", type=int, default=None, help="image side length in pixels")
    p.add_argument("--sources", type=int, default=None, help="light sources per target")
    p.add_argument("--targets", type=int, default=None, help="number of target images")
    p.add_argument("--no-baseline", action="store_true")

    p = sub.add_parser("sbl-solve", help="one SBL fit; writes theta/gamma CSV")
    common(p)
    p.add_argument("--dataset", default=None,
                   choices=["synthetic-random", "synthetic-psf", "mnist", "bow"])
    p.add_argument("--ratio", type=float, default=0.3, help="lambda/lambda_max")
    p.add_argument("--rows", type=int, default=None)
    p.add_argument("--cols", type=int, default=None)
    p.add_argument("--docword", type=str, default=None)
    p.add_argument("--images", type=str, default=None)
    p.add_argument("--labels", type=str, default=None)
    return parser


def _make_config(args, **task_specific) -> ExperimentConfig:
    values: dict = {}
    if args.config:
        values.update(parse_config_file(args.config))
    overrides = {
        "seed": args.seed,
        "out_dir": args.out,
        "screening": args.screening,
        "lambda_grid": _ratio_list(args.ratios) if args.ratios else None,
    }
    for attr, key in (
        ("dataset", "dataset"), ("rows", "n_rows"), ("cols", "dict_cols"),
        ("docword", "docword_path"), ("images", "images_path"),
        ("labels", "labels_path"), ("n1", "n_monte_carlo"), ("n3", "batch"),
        ("per_class", "per_class"), ("side", "side"), ("sources", "n_sources"),
        ("targets", "n_targets"),
    ):
        if hasattr(args, attr):
            overrides[key] = getattr(args, attr)
    if getattr(args, "no_baseline", False):
        overrides["measure_baseline"] = False
    for key, val in overrides.items():
        if val is not None:
            values[key] = val
    values.update(task_specific)
    return ExperimentConfig(**values)


def _out_dir(config: ExperimentConfig) -> Path:
    out = Path(config.out_dir) if config.out_dir else Path("sblscreen-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_screen_bench(args) -> int:
    config = _make_config(args)
    records = run_screen_bench(config)
    out = _out_dir(config)
    emit_csv(records, out / "screen_bench.csv")
    emit_plots(records, out)
    for r in records:
        print(
            f"ratio={r.ratio:.3g} screening_pct={r.screening_pct:.4f} "
            f"speedup={r.speedup:.4f} max_diff={r.max_solution_diff:.3e}"
        )
    print(f"wrote {out / 'screen_bench.csv'}")
    return 0


def _cmd_classify(args) -> int:
    config = _make_config(args, dataset="mnist")
    records, table = run_classification(config)
    out = _out_dir(config)
    emit_csv(records, out / "classification.csv")
    emit_plots(records, out)
    for ratio, mean, err, _ in table:
        print(f"ratio={ratio:.3g} accuracy={mean:.4f} stderr={err:.4f}")
    print(f"wrote {out / 'classification.csv'}")
    return 0


def _cmd_reconstruct(args) -> int:
    config = _make_config(args, dataset="synthetic-psf")
    records_iou, records_psnr = run_imaging(config)
    out = _out_dir(config)
    emit_csv(records_iou, out / "imaging_iou.csv")
    emit_csv(records_psnr, out / "imaging_psnr.csv")
    emit_plots(records_iou, out)
    for ri, rp in zip(records_iou, records_psnr):
        print(f"ratio={ri.ratio:.3g} group_iou={ri.metric:.4f} psnr={rp.metric:.2f} dB")
    print(f"wrote {out / 'imaging_iou.csv'} and {out / 'imaging_psnr.csv'}")
    return 0


def _cmd_sbl_solve(args) -> int:
    from .bench import MIN_RATIO, build_instance
    from .problem import WeightVector  # noqa: F401  (re-exported for scripts)

    config = _make_config(args)
    base = build_instance(config)
    lam = max(args.ratio, MIN_RATIO) * lambda_max(base)
    problem = base.with_noise_level(lam)
    cfg = sbl.SblConfig(screening=config.screening, max_outer=config.max_outer,
                        conv_tol=config.conv_tol)
    solution, state, _ = sbl.run(problem, cfg)
    out = _out_dir(config)
    path = out / "sbl_solution.csv"
    lines = ["index,theta,gamma"]
    for i in range(problem.n_features):
        lines.append(f"{i},{solution.theta[i]:.12g},{state.gamma[i]:.12g}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(
        f"ratio={args.ratio:.3g} support={solution.support.size} "
        f"outer_iters={state.iteration} final_loss={state.loss_history[-1]:.6g}"
    )
    print(f"wrote {path}")
    return 0


_COMMANDS = {
    "screen-bench": _cmd_screen_bench,
    "classify": _cmd_classify,
    "reconstruct": _cmd_reconstruct,
    "sbl-solve": _cmd_sbl_solve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Exception as exc:  # single machine-readable failure line
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
