"""Axis-aligned bounding boxes with inclusive pixel bounds."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .imaging import Keypoint

__all__ = ["BOX_CLASSES", "BoundingBox", "BoxSet", "merge_identical"]

BOX_CLASSES = ("direct", "indirect", "unspecified")


@dataclass(frozen=True)
class BoundingBox:
    x_min: int
    y_min: int
    x_max: int
    y_max: int
    cls: str = "unspecified"
    sources: tuple[int, ...] = ()

    def __post_init__(self):
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, int(getattr(self, name)))
        cls = getattr(self.cls, "value", self.cls)
        if cls not in BOX_CLASSES:
            raise ValueError(f"unknown box class {cls!r}")
        object.__setattr__(self, "cls", cls)
        object.__setattr__(self, "sources", tuple(sorted(int(s) for s in self.sources)))
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(f"degenerate box {self.coords}")
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError(f"negative box coordinates {self.coords}")

    @property
    def coords(self) -> tuple[int, int, int, int]:
        return (self.x_min, self.y_min, self.x_max, self.y_max)

    @property
    def area(self) -> int:
        return (self.x_max - self.x_min + 1) * (self.y_max - self.y_min + 1)

    def contains(self, kp: Keypoint) -> bool:
        return self.x_min <= kp.x <= self.x_max and self.y_min <= kp.y <= self.y_max

    def fits(self, width: int, height: int) -> bool:
        return self.x_max < width and self.y_max < height


def merge_identical(boxes: Iterable[BoundingBox]) -> list[BoundingBox]:
    """Collapse pixel-identical boxes into one, pooling their source keypoints.

    First-seen order is kept. Merged boxes of different classes become
    ``unspecified``.
    """
    merged: dict[tuple[int, int, int, int], BoundingBox] = {}
    for box in boxes:
        prev = merged.get(box.coords)
        if prev is None:
            merged[box.coords] = box
            continue
        cls = prev.cls if prev.cls == box.cls else "unspecified"
        merged[box.coords] = BoundingBox(*box.coords, cls=cls, sources=set(prev.sources) | set(box.sources))
    return list(merged.values())


@dataclass
class BoxSet:
    image_id: str
    boxes: list[BoundingBox] = field(default_factory=list)
    approximate: bool = False

    def __len__(self) -> int:
        return len(self.boxes)

    def __iter__(self):
        return iter(self.boxes)

    def validate(self, width: int, height: int) -> None:
        for box in self.boxes:
            if not box.fits(width, height):
                raise ValueError(f"box {box.coords} exceeds {width}x{height} image {self.image_id!r}")


def as_box_list(boxes) -> Sequence[BoundingBox]:
    if isinstance(boxes, BoxSet):
        return boxes.boxes
    return list(boxes)
