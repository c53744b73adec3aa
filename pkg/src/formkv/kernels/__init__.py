"""Pixel kernels shared by the rasterizer, metrics, and pairing stages.

The hot inner loops (box filling, 8-connected component labeling,
confusion counting) exist twice: a Cython extension (``_fast``) and a
numpy reference implementation (``_ref``) with identical semantics.
The extension is preferred when importable; set ``FORMKV_PURE=1`` to
force the reference backend. ``benchmarks/bench_kernels.py`` compares
the two.
"""

import os

if os.environ.get("FORMKV_PURE"):
    from . import _ref as _backend

    BACKEND = "reference"
else:
    try:
        from . import _fast as _backend  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        from . import _ref as _backend  # type: ignore[no-redef]

        BACKEND = "reference"

fill_boxes = _backend.fill_boxes
label_components = _backend.label_components
confusion_matrix = _backend.confusion_matrix

__all__ = ["BACKEND", "fill_boxes", "label_components", "confusion_matrix"]
