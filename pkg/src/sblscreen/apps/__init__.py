"""Applications: sparse-representation classification and PSF imaging."""

from .classification import LabeledDictionary, Undecidable, classify
from .imaging import (
    DetectionBox,
    DimensionMismatch,
    EmptySet,
    ImageGrid,
    PsfParams,
    PsfPrior,
    delta_e,
    generate_target,
    group_iou,
    iou,
    localize,
    psnr,
    render_feature,
    sample_dictionary,
)

__all__ = [
    "LabeledDictionary",
    "Undecidable",
    "classify",
    "DetectionBox",
    "DimensionMismatch",
    "EmptySet",
    "ImageGrid",
    "PsfParams",
    "PsfPrior",
    "delta_e",
    "generate_target",
    "group_iou",
    "iou",
    "localize",
    "psnr",
    "render_feature",
    "sample_dictionary",
]
