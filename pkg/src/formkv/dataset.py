"""Directory-level loading and writing of FUNSD-layout datasets.

Layout::

    <root>/training_data/annotations/<source_id>.json
    <root>/training_data/images/<source_id>.png
    <root>/testing_data/{annotations,images}/...

Page dimensions are read from the paired image header. For image-less
workflows (stats on annotations alone) a fixed ``page_dims`` override can
be supplied instead.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from .model import Form, parse_form, serialize_form

log = logging.getLogger(__name__)

SPLIT_DIRS = {"training": "training_data", "testing": "testing_data"}
SPLIT_NAMES = {"training": "train", "testing": "test"}


class DatasetError(Exception):
    """Missing directories or files in a dataset tree."""


@dataclass(frozen=True)
class FormLocation:
    source_id: str
    annotation_path: Path
    image_path: Path | None


def annotations_dir(root: Path | str, split: str) -> Path:
    return Path(root) / SPLIT_DIRS[split] / "annotations"


def images_dir(root: Path | str, split: str) -> Path:
    return Path(root) / SPLIT_DIRS[split] / "images"


def read_page_dims(image_path: Path | str) -> tuple[int, int]:
    """(width, height) from the image header; the pixel data is not decoded."""
    from PIL import Image

    with Image.open(image_path) as image:
        return image.size


def discover_split(root: Path | str, split: str,
                   images_root: Path | str | None = None) -> list[FormLocation]:
    """Locate annotation/image pairs for one split, sorted by source id.

    ``images_root`` lets revised annotation trees borrow page images from
    the original dataset root.
    """
    if split not in SPLIT_DIRS:
        raise DatasetError(f"unknown split {split!r} (expected 'training' or 'testing')")
    ann_dir = annotations_dir(root, split)
    if not ann_dir.is_dir():
        raise DatasetError(f"missing annotations directory: {ann_dir}")
    img_dir = images_dir(images_root if images_root is not None else root, split)
    locations = []
    for ann_path in sorted(ann_dir.glob("*.json")):
        source_id = ann_path.stem
        image_path: Path | None = img_dir / f"{source_id}.png"
        if not image_path.is_file():
            matches = sorted(img_dir.glob(f"{source_id}.*")) if img_dir.is_dir() else []
            image_path = matches[0] if matches else None
        locations.append(FormLocation(source_id, ann_path, image_path))
    return locations


def load_form_file(location: FormLocation, split: str,
                   page_dims: tuple[int, int] | None = None) -> Form:
    if page_dims is None:
        if location.image_path is None:
            raise DatasetError(
                f"{location.source_id}: no page image found and no page_dims override")
        page_dims = read_page_dims(location.image_path)
    raw = location.annotation_path.read_bytes()
    return parse_form(raw, location.source_id, page_dims, split=SPLIT_NAMES[split])


def load_split(root: Path | str, split: str, *,
               images_root: Path | str | None = None,
               page_dims: tuple[int, int] | None = None) -> list[Form]:
    """Load every form of one split, sorted by source id."""
    return [load_form_file(location, split, page_dims)
            for location in discover_split(root, split, images_root)]


def write_annotations(forms, root: Path | str, split: str) -> list[Path]:
    """Write forms as annotation files under ``<root>/<split dir>/annotations``."""
    out_dir = annotations_dir(root, split)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for form in forms:
        path = out_dir / f"{form.source_id}.json"
        path.write_bytes(serialize_form(form))
        paths.append(path)
    return paths


def load_page_image(image_path: Path | str):
    """Page image as uint8 array, (H, W) grayscale or (H, W, 3) RGB."""
    import numpy as np
    from PIL import Image

    with Image.open(image_path) as image:
        if image.mode in ("1", "P", "LA", "RGBA", "CMYK", "I", "F", "I;16"):
            image = image.convert("RGB")
        array = np.asarray(image)
    if array.ndim == 3 and array.shape[2] > 3:
        array = array[:, :, :3]
    return array
