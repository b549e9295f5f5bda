"""Pixel-level primitives: images, keypoints, thresholding, flood fill, labeling.

Images are plain 2-D ``float64`` arrays with values in ``[0, 1]`` and Boolean
maps are ``bool`` arrays of the same shape. Keypoint coordinates are 0-based
``(x, y)`` = ``(column, row)``; the 1-based convention only appears in
external annotation files when an adapter asks for it.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Sequence, Union

import numpy as np
from scipy import ndimage as ndi

__all__ = [
    "KeypointClass",
    "Keypoint",
    "KeypointSet",
    "Connectivity",
    "as_gray_image",
    "as_binary_map",
    "intensity_at",
    "threshold",
    "flood_fill",
    "label_components",
    "connected_components",
    "structure_for",
    "check_in_bounds",
]


class KeypointClass(str, Enum):
    DIRECT = "direct"
    INDIRECT = "indirect"


@dataclass(frozen=True, order=True)
class Keypoint:
    """A single annotated fixation point (0-based column ``x``, row ``y``)."""

    x: int
    y: int
    cls: KeypointClass = KeypointClass.DIRECT

    def __post_init__(self):
        if isinstance(self.x, bool) or isinstance(self.y, bool):
            raise TypeError("keypoint coordinates must be integers")
        object.__setattr__(self, "x", int(self.x))
        object.__setattr__(self, "y", int(self.y))
        object.__setattr__(self, "cls", KeypointClass(self.cls))
        if self.x < 0 or self.y < 0:
            raise ValueError(f"negative keypoint coordinates ({self.x}, {self.y})")


class KeypointSet(Sequence[Keypoint]):
    """Ordered, duplicate-free collection of keypoints.

    Two keypoints are duplicates when they share pixel *and* class; the same
    pixel annotated once as direct and once as indirect is allowed.
    """

    def __init__(self, items: Iterable[Keypoint] = ()):
        seen = set()
        kept = []
        for kp in items:
            if not isinstance(kp, Keypoint):
                kp = Keypoint(*kp)
            if kp in seen:
                raise ValueError(f"duplicate keypoint {kp}")
            seen.add(kp)
            kept.append(kp)
        self._items = tuple(kept)

    def __getitem__(self, index):
        if isinstance(index, slice):
            return KeypointSet(self._items[index])
        return self._items[index]

    def __len__(self) -> int:
        return len(self._items)

    def __iter__(self) -> Iterator[Keypoint]:
        return iter(self._items)

    def __eq__(self, other) -> bool:
        if isinstance(other, KeypointSet):
            return self._items == other._items
        return NotImplemented

    def __hash__(self) -> int:
        return hash(self._items)

    def __repr__(self) -> str:
        return f"KeypointSet({list(self._items)!r})"

    def by_class(self) -> dict[KeypointClass, "KeypointSet"]:
        groups: dict[KeypointClass, list[Keypoint]] = {}
        for kp in self._items:
            groups.setdefault(kp.cls, []).append(kp)
        return {cls: KeypointSet(kps) for cls, kps in groups.items()}


Connectivity = Union[int, str]

_CONNECTIVITY_NAMES = {"four": 4, "eight": 8, "4": 4, "8": 8}


def _conn_value(connectivity: Connectivity) -> int:
    if isinstance(connectivity, str):
        try:
            return _CONNECTIVITY_NAMES[connectivity.lower()]
        except KeyError:
            raise ValueError(f"unknown connectivity {connectivity!r}") from None
    if connectivity in (4, 8):
        return int(connectivity)
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity!r}")


def structure_for(connectivity: Connectivity) -> np.ndarray:
    """3x3 structuring element for 4- or 8-neighbourhood labeling."""
    if _conn_value(connectivity) == 8:
        return np.ones((3, 3), dtype=bool)
    return ndi.generate_binary_structure(2, 1)


def as_gray_image(data) -> np.ndarray:
    """Validate ``data`` as a grayscale image and return it as a read-only float array."""
    img = np.array(data, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite values")
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image intensities must lie in [0, 1]")
    img.setflags(write=False)
    return img


def as_binary_map(data) -> np.ndarray:
    bmap = np.asarray(data)
    if bmap.ndim != 2:
        raise ValueError(f"expected a 2-D map, got shape {bmap.shape}")
    if bmap.dtype != bool:
        if not np.isin(bmap, (0, 1)).all():
            raise ValueError("binary map values must be 0 or 1")
        bmap = bmap.astype(bool)
    return bmap


def check_in_bounds(shape: tuple[int, int], keypoint: Keypoint) -> None:
    h, w = shape
    if not (0 <= keypoint.x < w and 0 <= keypoint.y < h):
        raise IndexError(f"keypoint ({keypoint.x}, {keypoint.y}) outside {w}x{h} image")


def intensity_at(image: np.ndarray, keypoint: Keypoint) -> float:
    check_in_bounds(image.shape, keypoint)
    return float(image[keypoint.y, keypoint.x])


def threshold(image: np.ndarray, theta: float) -> np.ndarray:
    """Boolean map of pixels with intensity ``>= theta`` (inclusive)."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"threshold must lie in [0, 1], got {theta}")
    return np.asarray(image) >= theta


def label_components(bmap: np.ndarray, connectivity: Connectivity = 8) -> tuple[np.ndarray, int]:
    """Label the active pixels of ``bmap``; returns ``(labels, count)`` with 0 as background."""
    labels, count = ndi.label(as_binary_map(bmap), structure=structure_for(connectivity))
    return labels, int(count)


def flood_fill(bmap: np.ndarray, seed: Keypoint, connectivity: Connectivity = 8) -> np.ndarray:
    """Connected component of active pixels containing ``seed``.

    An inactive seed yields an all-False map rather than an error.
    """
    bmap = as_binary_map(bmap)
    check_in_bounds(bmap.shape, seed)
    if not bmap[seed.y, seed.x]:
        return np.zeros(bmap.shape, dtype=bool)
    labels, _ = label_components(bmap, connectivity)
    return labels == labels[seed.y, seed.x]


def connected_components(bmap: np.ndarray, connectivity: Connectivity = 8) -> list[np.ndarray]:
    """One mask per connected component, in scan order of first pixel."""
    labels, count = label_components(bmap, connectivity)
    return [labels == i for i in range(1, count + 1)]
