"""Dataset ingestion and file formats.

Dataset layout (one directory per split, or a single flat directory)::

    root/<split>/images/<image id>.png
    root/<split>/annotations/<image id>.json

Annotation schema, one file per image::

    {"image": "<image id>", "keypoints": [{"x": 12, "y": 40, "direct": true}, ...]}

Coordinates are 0-based pixel indices unless ``one_based=True`` is passed to
:func:`load_dataset`. Other layouts plug in through the ``adapter`` argument,
a callable mapping the raw JSON object to ``(image_id, keypoints)``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Optional, Sequence

import numpy as np
from PIL import Image

from .bbox import BoundingBox, BoxSet
from .imaging import Keypoint, KeypointClass, KeypointSet, as_gray_image, check_in_bounds
from .saliency import SaliencyConfig

__all__ = [
    "SPLITS",
    "IMAGE_SUFFIXES",
    "AnnotationRecord",
    "DatasetEntry",
    "DatasetIndex",
    "LoadReport",
    "read_image",
    "write_image",
    "parse_annotation",
    "load_dataset",
    "write_dataset",
    "boxset_to_record",
    "boxset_from_record",
    "write_boxsets",
    "read_boxsets",
    "export_yolo",
    "parse_yolo",
    "DEFAULT_CLASS_MAP",
    "save_attention_map",
    "load_attention_map",
    "parse_config",
    "format_config",
    "read_config",
    "write_config",
]

log = logging.getLogger(__name__)

SPLITS = ("train", "val", "test")
IMAGE_SUFFIXES = (".png", ".tif", ".tiff", ".pgm")


# images ------------------------------------------------------------------

def read_image(path) -> np.ndarray:
    """Read an 8- or 16-bit single-channel image, normalized by its container maximum."""
    with Image.open(path) as im:
        mode = im.mode
        arr = np.asarray(im)
    if arr.ndim != 2:
        raise ValueError(f"{path}: expected a single-channel image, got mode {mode}")
    if mode == "L":
        scale = 255.0
    elif mode.startswith("I;16") or (mode == "I" and arr.max(initial=0) <= 65535 and arr.min(initial=0) >= 0):
        scale = 65535.0
    elif mode == "1":
        scale = 1.0
    else:
        raise ValueError(f"{path}: unsupported image mode {mode}")
    return as_gray_image(arr.astype(np.float64) / scale)


def write_image(path, image: np.ndarray, bits: int = 8) -> None:
    image = np.asarray(image, dtype=np.float64)
    if bits == 8:
        Image.fromarray(np.round(image * 255).astype(np.uint8), mode="L").save(path)
    elif bits == 16:
        Image.fromarray(np.round(image * 65535).astype(np.uint16)).save(path)
    else:
        raise ValueError(f"bits must be 8 or 16, got {bits}")


def _image_size(path) -> tuple[int, int]:
    with Image.open(path) as im:
        if len(im.getbands()) != 1:
            raise ValueError(f"{path}: expected a single-channel image, got mode {im.mode}")
        return im.size


# annotations -------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationRecord:
    image_id: str
    keypoints: KeypointSet

    def to_json(self) -> dict:
        return {
            "image": self.image_id,
            "keypoints": [
                {"x": kp.x, "y": kp.y, "direct": kp.cls is KeypointClass.DIRECT} for kp in self.keypoints
            ],
        }


def parse_annotation(obj: Mapping, one_based: bool = False) -> AnnotationRecord:
    image_id = obj["image"]
    if not isinstance(image_id, str):
        raise ValueError("'image' must be a string")
    offset = 1 if one_based else 0
    kps = []
    for raw in obj["keypoints"]:
        x, y = raw["x"], raw["y"]
        if not all(isinstance(v, int) and not isinstance(v, bool) for v in (x, y)):
            raise ValueError(f"keypoint coordinates must be integers, got {raw}")
        if not isinstance(raw["direct"], bool):
            raise ValueError(f"'direct' must be a boolean, got {raw}")
        cls = KeypointClass.DIRECT if raw["direct"] else KeypointClass.INDIRECT
        kps.append(Keypoint(x - offset, y - offset, cls))
    return AnnotationRecord(image_id, KeypointSet(kps))


@dataclass(frozen=True)
class DatasetEntry:
    image_id: str
    image_path: Path
    annotation: AnnotationRecord
    width: int
    height: int
    split: str = ""

    @property
    def keypoints(self) -> KeypointSet:
        return self.annotation.keypoints

    def load_image(self) -> np.ndarray:
        return read_image(self.image_path)


@dataclass
class LoadReport:
    skipped: list[str] = field(default_factory=list)
    failures: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.skipped and not self.failures

    def summary(self) -> str:
        lines = [f"{len(self.skipped)} skipped, {len(self.failures)} failed"]
        lines += [f"  skipped {name}: no annotation" for name in self.skipped]
        lines += [f"  failed {name}: {msg}" for name, msg in self.failures]
        return "\n".join(lines)


@dataclass
class DatasetIndex:
    root: Path
    entries: list[DatasetEntry]
    report: LoadReport

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)


Adapter = Callable[[Mapping], AnnotationRecord]


def _split_dirs(root: Path, split: str) -> list[tuple[str, Path]]:
    if split == "all":
        found = [(s, root / s) for s in SPLITS if (root / s).is_dir()]
        return found or [("", root)]
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS + ('all',)}, got {split!r}")
    if not (root / split).is_dir():
        raise FileNotFoundError(f"no {split!r} split under {root}")
    return [(split, root / split)]


def load_dataset(
    root,
    split: str = "all",
    adapter: Optional[Adapter] = None,
    one_based: bool = False,
) -> DatasetIndex:
    """Index image/annotation pairs under ``root``.

    Images without an annotation are skipped; malformed annotations and
    out-of-bounds keypoints are collected in the load report instead of
    raising.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} is not a readable directory")
    parse = adapter or (lambda obj: parse_annotation(obj, one_based))
    entries: list[DatasetEntry] = []
    report = LoadReport()
    for split_name, base in _split_dirs(root, split):
        img_dir, ann_dir = base / "images", base / "annotations"
        if not img_dir.is_dir():
            continue
        for img_path in sorted(p for p in img_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES):
            image_id = img_path.stem
            ann_path = ann_dir / f"{image_id}.json"
            if not ann_path.is_file():
                report.skipped.append(image_id)
                continue
            try:
                with open(ann_path, encoding="utf-8") as fh:
                    record = parse(json.load(fh))
                width, height = _image_size(img_path)
                for kp in record.keypoints:
                    try:
                        check_in_bounds((height, width), kp)
                    except IndexError:
                        raise ValueError(
                            f"image {image_id}: keypoint ({kp.x}, {kp.y}) outside {width}x{height}"
                        ) from None
            except (ValueError, KeyError, TypeError, OSError) as exc:
                msg = f"{type(exc).__name__}: {exc}"
                log.warning("skipping %s: %s", image_id, msg)
                report.failures.append((image_id, msg))
                continue
            if record.image_id != image_id:
                log.debug("annotation id %r differs from file stem %r", record.image_id, image_id)
            entries.append(DatasetEntry(image_id, img_path, record, width, height, split_name))
    return DatasetIndex(root, entries, report)


def write_dataset(root, scenes: Iterable, split: Optional[str] = None, bits: int = 8) -> Path:
    """Write ``(image_id, image, keypoints)`` triples in the layout :func:`load_dataset` reads."""
    base = Path(root) / split if split else Path(root)
    (base / "images").mkdir(parents=True, exist_ok=True)
    (base / "annotations").mkdir(parents=True, exist_ok=True)
    for image_id, image, keypoints in scenes:
        write_image(base / "images" / f"{image_id}.png", image, bits)
        record = AnnotationRecord(image_id, KeypointSet(keypoints))
        with open(base / "annotations" / f"{image_id}.json", "w", encoding="utf-8") as fh:
            json.dump(record.to_json(), fh)
    return base


# box sets ----------------------------------------------------------------

def boxset_to_record(boxset: BoxSet) -> dict:
    return {
        "image": boxset.image_id,
        "boxes": [
            {
                "x_min": b.x_min,
                "y_min": b.y_min,
                "x_max": b.x_max,
                "y_max": b.y_max,
                "class": b.cls,
                "source_keypoints": list(b.sources),
            }
            for b in boxset.boxes
        ],
    }


def boxset_from_record(obj: Mapping) -> BoxSet:
    boxes = [
        BoundingBox(b["x_min"], b["y_min"], b["x_max"], b["y_max"], b.get("class", "unspecified"),
                    tuple(b.get("source_keypoints", ())))
        for b in obj["boxes"]
    ]
    return BoxSet(obj["image"], boxes)


def write_boxsets(path, boxsets: Iterable[BoxSet]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for bs in boxsets:
            fh.write(json.dumps(boxset_to_record(bs), sort_keys=True) + "\n")


def read_boxsets(path) -> list[BoxSet]:
    with open(path, encoding="utf-8") as fh:
        return [boxset_from_record(json.loads(line)) for line in fh if line.strip()]


# YOLO labels -------------------------------------------------------------

DEFAULT_CLASS_MAP = {"direct": 0, "indirect": 1, "unspecified": 0}


def export_yolo(boxes, image_dims: tuple[int, int], class_map: Mapping[str, int] = DEFAULT_CLASS_MAP) -> list[str]:
    """YOLO label lines ``<class> <x_center> <y_center> <width> <height>``.

    Geometry is normalized by the image width and height and uses corner
    distances, so a box from x=10 to x=50 has width 40.
    """
    w, h = image_dims
    lines = []
    for b in boxes:
        xc = (b.x_min + b.x_max) / 2 / w
        yc = (b.y_min + b.y_max) / 2 / h
        bw = (b.x_max - b.x_min) / w
        bh = (b.y_max - b.y_min) / h
        lines.append(f"{class_map[b.cls]} {xc:.6f} {yc:.6f} {bw:.6f} {bh:.6f}")
    return lines


def parse_yolo(lines: Iterable[str], image_dims: tuple[int, int], class_names: Sequence[str] = ("direct", "indirect")) -> list[BoundingBox]:
    w, h = image_dims
    boxes = []
    for line in lines:
        if not line.strip():
            continue
        c, xc, yc, bw, bh = line.split()
        xc, yc, bw, bh = float(xc) * w, float(yc) * h, float(bw) * w, float(bh) * h
        boxes.append(BoundingBox(
            max(0, round(xc - bw / 2)), max(0, round(yc - bh / 2)),
            min(w - 1, round(xc + bw / 2)), min(h - 1, round(yc + bh / 2)),
            class_names[int(c)],
        ))
    return boxes


# attention maps ----------------------------------------------------------

def save_attention_map(path, attention: np.ndarray, bits: int = 8) -> Path:
    """Write ``attention`` rescaled by ``1 / max`` plus a JSON sidecar holding the scale."""
    path = Path(path)
    attention = np.asarray(attention, dtype=np.float64)
    scale = float(attention.max())
    write_image(path, attention / scale if scale > 0 else attention, bits)
    sidecar = path.with_suffix(".json")
    with open(sidecar, "w", encoding="utf-8") as fh:
        json.dump({"scale": scale, "bits": bits, "width": attention.shape[1], "height": attention.shape[0]},
                  fh, sort_keys=True)
    return sidecar


def load_attention_map(path) -> np.ndarray:
    path = Path(path)
    with open(path.with_suffix(".json"), encoding="utf-8") as fh:
        meta = json.load(fh)
    return np.asarray(read_image(path)) * meta["scale"]


# config files ------------------------------------------------------------

_CONFIG_KEYS = {
    "alpha": float,
    "n_thresholds": int,
    "blob_fraction": float,
    "connectivity": str,
    "sampling": str,
    "seed": int,
}


def parse_config(text: str, base: Optional[SaliencyConfig] = None) -> SaliencyConfig:
    """Parse flat ``key=value`` lines (``#`` starts a comment) into a config."""
    values = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ValueError(f"line {n}: unknown key {key!r}")
        values[key] = _CONFIG_KEYS[key](value)
    base = base or SaliencyConfig()
    merged = {**base.__dict__, **values}
    return SaliencyConfig(**merged)


def format_config(config: SaliencyConfig) -> str:
    conn = "eight" if config.connectivity == 8 else "four"
    return (
        f"alpha={config.alpha!r}\n"
        f"n_thresholds={config.n_thresholds}\n"
        f"blob_fraction={config.blob_fraction!r}\n"
        f"connectivity={conn}\n"
        f"sampling={config.sampling}\n"
        f"seed={config.seed}\n"
    )


def read_config(path, base: Optional[SaliencyConfig] = None) -> SaliencyConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), base)


def write_config(path, config: SaliencyConfig) -> None:
    Path(path).write_text(format_config(config), encoding="utf-8")
