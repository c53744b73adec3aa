"""Dataset engineering for form key-value annotations.

Parse and lint FUNSD-style annotation files, normalize relation chains
into question/answer/other labels, rasterize pages into 2-channel
segmentation inputs with 4-class targets, score predictions, and pair
detected key/value components by nearest centroid.

The heavy pixel kernels have a compiled backend with a pure NumPy
fallback; ``formkv.kernels.BACKEND`` names the one in use.
"""

from .model import (
    AnnotationError,
    BBox,
    Entity,
    Form,
    ParseError,
    SchemaError,
    Word,
    compute_stats,
    parse_form,
    serialize_form,
)
from .lint import LintReport, lint_dataset, lint_form
from .revise import CycleError, Patch, RevisionDiff, build_graph, normalize_labels, revise_form
from .raster import ClassMask, SegClass, build_input, rasterize_target, rasterize_text_mask
from .metrics import LossConfig, combined_loss, dice_loss, iou_per_class, mean_iou, weighted_cross_entropy
from .pairing import Component, KVPair, extract_components, pair_nearest

__version__ = "0.1.0"

__all__ = [
    "AnnotationError", "BBox", "Entity", "Form", "ParseError", "SchemaError",
    "Word", "compute_stats", "parse_form", "serialize_form",
    "LintReport", "lint_dataset", "lint_form",
    "CycleError", "Patch", "RevisionDiff", "build_graph", "normalize_labels",
    "revise_form",
    "ClassMask", "SegClass", "build_input", "rasterize_target",
    "rasterize_text_mask",
    "LossConfig", "combined_loss", "dice_loss", "iou_per_class", "mean_iou",
    "weighted_cross_entropy",
    "Component", "KVPair", "extract_components", "pair_nearest",
    "__version__",
]
