"""Command-line entry point: ``formkv <command> ...``.

Commands cover the whole pipeline: dataset stats, lint validation,
revision, rasterization, prediction scoring, key/value pairing, and
review overlays, plus utilities for the train/validation split
manifest, archive checksums, and a synthetic demo dataset.

Exit codes follow one contract everywhere: 0 success, 1 domain findings
(lint errors, failed forms, checksum mismatch), 2 environment or usage
problems (missing paths, unreadable files, bad flags).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import random
import sys
from pathlib import Path

from . import dataset, metrics, pairing, raster, render, synthetic
from .lint import lint_dataset
from .model import AnnotationError, compute_stats
from .revise import PatchError, load_patches, revise_dataset

SPLIT_CHOICES = ("training", "testing")


def _fail(message: str, code: int = 2) -> "SystemExit":
    print(f"error: {message}", file=sys.stderr)
    return SystemExit(code)


def _page_dims(text: str) -> tuple[int, int]:
    try:
        width, height = text.lower().split("x")
        return int(width), int(height)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"expected WIDTHxHEIGHT, e.g. 762x1000, got {text!r}")


def _dataset_options(parser: argparse.ArgumentParser, *,
                     split_optional: bool = False) -> None:
    parser.add_argument("--root", required=True, type=Path,
                        help="dataset root (contains training_data/testing_data)")
    parser.add_argument("--split", choices=SPLIT_CHOICES,
                        required=not split_optional,
                        help="which split to process"
                             + (" (default: both)" if split_optional else ""))
    parser.add_argument("--images-root", type=Path, default=None,
                        help="take page images from this root instead "
                             "(for revised annotation trees)")
    parser.add_argument("--page-dims", type=_page_dims, default=None, metavar="WxH",
                        help="fixed page size for image-less workflows")


def _load_forms(args, split: str):
    try:
        return dataset.load_split(args.root, split, images_root=args.images_root,
                                  page_dims=args.page_dims)
    except (dataset.DatasetError, AnnotationError, OSError) as exc:
        raise _fail(str(exc))


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_stats(args) -> int:
    splits = [args.split] if args.split else list(SPLIT_CHOICES)
    forms = [form for split in splits for form in _load_forms(args, split)]
    print(compute_stats(forms).table())
    return 0


def cmd_validate(args) -> int:
    report = lint_dataset(_load_forms(args, args.split),
                          box_tolerance=args.tolerance)
    print(report.to_text())
    if report.error_count or (args.strict and report.warning_count):
        return 1
    return 0


def cmd_revise(args) -> int:
    forms = _load_forms(args, args.split)
    try:
        patches = load_patches(args.patches)
    except (PatchError, OSError) as exc:
        raise _fail(str(exc))
    outcome = revise_dataset(forms, patches)
    dataset.write_annotations(outcome.forms, args.out, args.split)
    diff_dir = Path(args.out) / dataset.SPLIT_DIRS[args.split] / "diffs"
    diff_dir.mkdir(parents=True, exist_ok=True)
    for diff in outcome.diffs:
        path = diff_dir / f"{diff.source_id}.diff.json"
        path.write_text(json.dumps(diff.to_dict(), indent=1) + "\n", "utf-8")
    print(f"{len(outcome.forms)} forms revised, "
          f"{outcome.labels_changed} labels changed")
    for source_id, message in outcome.failures:
        print(f"FAILED {source_id}: {message}", file=sys.stderr)
    return 1 if outcome.failures else 0


def cmd_rasterize(args) -> int:
    try:
        locations = dataset.discover_split(args.root, args.split, args.images_root)
    except dataset.DatasetError as exc:
        raise _fail(str(exc))
    out = Path(args.out)
    records = []
    for location in locations:
        if location.image_path is None:
            raise _fail(f"{location.source_id}: no page image "
                        "(rasterize needs the image channel)")
        try:
            form = dataset.load_form_file(location, args.split)
            image = dataset.load_page_image(location.image_path)
            records.append(raster.export_pair(form, image, out, pad16=args.pad16))
        except (AnnotationError, OSError, ValueError) as exc:
            raise _fail(str(exc))
    raster.write_manifest(records, out / "manifest.json")
    print(f"wrote {len(records)} input/target pairs to {out}")
    return 0


def _class_map_files(path: Path) -> dict[str, Path]:
    """Map source id -> class-map PNG; `<id>_target.png` and `<id>.png` both fit."""
    if path.is_file():
        return {_strip_target(path.stem): path}
    if not path.is_dir():
        raise _fail(f"no such file or directory: {path}")
    files = {}
    for candidate in sorted(path.glob("*.png")):
        if candidate.stem.endswith(("_text", "_gray")):
            continue
        files[_strip_target(candidate.stem)] = candidate
    if not files:
        raise _fail(f"no class-map PNGs under {path}")
    return files


def _strip_target(stem: str) -> str:
    return stem[:-len("_target")] if stem.endswith("_target") else stem


def cmd_evaluate(args) -> int:
    pred_files = _class_map_files(args.pred)
    target_files = _class_map_files(args.target)
    try:
        preds = {sid: raster.load_target(p).classes for sid, p in pred_files.items()}
        targets = {sid: raster.load_target(p).classes for sid, p in target_files.items()}
        report = metrics.evaluate_dataset(preds, targets)
    except (ValueError, OSError) as exc:
        raise _fail(str(exc))
    print(report.to_text(include_background=not args.no_background))
    return 0


def cmd_pair(args) -> int:
    pred_files = _class_map_files(args.pred)
    forms = {}
    if args.root is not None:
        forms = {form.source_id: form for form in _load_forms(args, args.split)}
    output = {}
    for source_id, path in sorted(pred_files.items()):
        try:
            mask = raster.load_target(path)
        except (ValueError, OSError) as exc:
            raise _fail(str(exc))
        pairs, unmatched = pairing.find_pairs(mask, args.min_area)
        form = forms.get(source_id)
        records = pairing.pairs_to_report(pairs, form)
        line = f"{source_id}: {len(pairs)} pairs, {len(unmatched)} unmatched values"
        if form is not None:
            line += f", {sum(r['hit'] for r in records)} hits"
        print(line)
        output[source_id] = {
            "pairs": records,
            "unmatched_values": [c.to_record() for c in unmatched],
        }
    if args.out is not None:
        Path(args.out).write_text(json.dumps(output, indent=1) + "\n", "utf-8")
    return 0


def cmd_render(args) -> int:
    try:
        locations = dataset.discover_split(args.root, args.split, args.images_root)
    except dataset.DatasetError as exc:
        raise _fail(str(exc))
    after = {}
    if args.diff_root is not None:
        after = {form.source_id: form
                 for form in dataset.load_split(
                     args.diff_root, args.split,
                     images_root=args.images_root or args.root)}
    style = render.RenderStyle(line_width=args.line_width, arrowheads=args.arrows)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for location in locations:
        if location.image_path is None:
            raise _fail(f"{location.source_id}: no page image to draw on")
        try:
            form = dataset.load_form_file(location, args.split)
            image = dataset.load_page_image(location.image_path)
        except (AnnotationError, OSError) as exc:
            raise _fail(str(exc))
        if args.diff_root is not None:
            if form.source_id not in after:
                raise _fail(f"{form.source_id}: missing from --diff-root")
            canvas = render.render_diff(form, after[form.source_id], image, style)
            name = f"{form.source_id}_diff.png"
        else:
            canvas = render.render_overlay(form, image, style)
            name = f"{form.source_id}_overlay.png"
        render.save_png(canvas, out / name)
        count += 1
    print(f"wrote {count} overlays to {out}")
    return 0


def cmd_split(args) -> int:
    try:
        locations = dataset.discover_split(args.root, "training")
    except dataset.DatasetError as exc:
        raise _fail(str(exc))
    ids = [location.source_id for location in locations]
    if args.train_count > len(ids):
        raise _fail(f"asked for {args.train_count} training forms "
                    f"but the split has only {len(ids)}")
    shuffled = sorted(ids)
    random.Random(args.seed).shuffle(shuffled)
    manifest = {
        "seed": args.seed,
        "train": sorted(shuffled[:args.train_count]),
        "validation": sorted(shuffled[args.train_count:]),
    }
    Path(args.out).write_text(json.dumps(manifest, indent=1) + "\n", "utf-8")
    print(f"{len(manifest['train'])} train / {len(manifest['validation'])} "
          f"validation ids -> {args.out}")
    return 0


def cmd_checksum(args) -> int:
    digest = hashlib.sha256()
    try:
        with open(args.archive, "rb") as handle:
            for chunk in iter(lambda: handle.read(1 << 20), b""):
                digest.update(chunk)
    except OSError as exc:
        raise _fail(str(exc))
    hexdigest = digest.hexdigest()
    print(f"sha256  {hexdigest}  {args.archive}")
    if args.expect is not None:
        if hexdigest != args.expect.lower():
            print(f"MISMATCH: expected {args.expect}", file=sys.stderr)
            return 1
        print("OK")
    return 0


def cmd_synth(args) -> int:
    written = synthetic.make_dataset(args.out, train_forms=args.train_forms,
                                     test_forms=args.test_forms, seed=args.seed)
    print(f"wrote {len(written['training'])} training and "
          f"{len(written['testing'])} testing forms under {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="formkv",
        description="Form key/value dataset tooling: stats, lint, revision, "
                    "rasterization, evaluation, pairing, and overlays.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset counts per split")
    _dataset_options(p, split_optional=True)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("validate", help="run the annotation linter")
    _dataset_options(p)
    p.add_argument("--tolerance", type=int, default=3,
                   help="pixels a word box may stick out of its entity box")
    p.add_argument("--strict", action="store_true",
                   help="warnings also fail the run")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("revise", help="normalize labels, applying patches first")
    _dataset_options(p)
    p.add_argument("--patches", type=Path, default=None,
                   help="directory of <source_id>.patch.json files")
    p.add_argument("--out", required=True, type=Path,
                   help="output dataset root for revised annotations")
    p.set_defaults(func=cmd_revise)

    p = sub.add_parser("rasterize", help="write input channels and target masks")
    _dataset_options(p)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--pad16", action=argparse.BooleanOptionalAction, default=True,
                   help="pad outputs to multiples of 16")
    p.set_defaults(func=cmd_rasterize)

    p = sub.add_parser("evaluate", help="score predicted class maps against targets")
    p.add_argument("--pred", required=True, type=Path,
                   help="prediction PNG or directory of them")
    p.add_argument("--target", required=True, type=Path,
                   help="target PNG or directory (rasterize output works)")
    p.add_argument("--no-background", action="store_true",
                   help="report only the foreground mean IoU")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("pair", help="extract and pair key/value components")
    p.add_argument("--pred", required=True, type=Path,
                   help="class-map PNG or directory of them")
    p.add_argument("--min-area", type=int, default=pairing.DEFAULT_MIN_AREA,
                   help="drop components smaller than this many pixels")
    p.add_argument("--root", type=Path, default=None,
                   help="dataset root for ground-truth hit flags")
    p.add_argument("--split", choices=SPLIT_CHOICES, default="testing")
    p.add_argument("--images-root", type=Path, default=None)
    p.add_argument("--page-dims", type=_page_dims, default=None, metavar="WxH")
    p.add_argument("--out", type=Path, default=None,
                   help="write the full pairing report as JSON")
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("render", help="draw annotation overlays for review")
    _dataset_options(p)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--diff-root", type=Path, default=None,
                   help="revised dataset root; draws label diffs instead")
    p.add_argument("--line-width", type=int, default=2)
    p.add_argument("--arrows", action=argparse.BooleanOptionalAction, default=True,
                   help="arrowheads on relation edges")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("split", help="write the train/validation split manifest")
    p.add_argument("--root", required=True, type=Path)
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--train-count", type=int, default=99,
                   help="forms assigned to training; the rest validate")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("checksum", help="sha256 of a dataset archive")
    p.add_argument("archive", type=Path)
    p.add_argument("--expect", default=None,
                   help="fail (exit 1) unless the digest matches")
    p.set_defaults(func=cmd_checksum)

    p = sub.add_parser("synth", help="generate a synthetic demo dataset")
    p.add_argument("--out", required=True, type=Path)
    p.add_argument("--train-forms", type=int, default=8)
    p.add_argument("--test-forms", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
