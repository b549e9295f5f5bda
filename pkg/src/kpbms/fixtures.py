"""Synthetic night-scene fixtures: bright blobs with radial falloff on a dark, noisy
background, plus unannotated lights touching the image border.

Two flavours are produced:

``clean``
    Well separated blobs, one keypoint each at the blob maximum.
``hard``
    Groups of touching blobs, some of them saturated so that neighbours share
    an intensity plateau at 1.0.

Intensities are quantized to the 8-bit grid so fixtures survive a round trip
through image files unchanged.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .imaging import Keypoint, KeypointClass, KeypointSet, as_gray_image

__all__ = ["Scene", "make_scene", "make_fixture_set", "quantize"]

BACKGROUND = 0.06


class Scene(NamedTuple):
    image_id: str
    image: np.ndarray
    keypoints: KeypointSet


def quantize(img: np.ndarray, levels: int = 255) -> np.ndarray:
    return np.round(np.clip(img, 0.0, 1.0) * levels) / levels


def _blob(shape, cx, cy, sigma, peak, gain=1.0):
    yy, xx = np.mgrid[: shape[0], : shape[1]]
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    return np.minimum(1.0, gain * peak * np.exp(-d2 / (2.0 * sigma**2)))


def _reach(sigma, peak, gain, level=0.02):
    # radius beyond which the blob stays below ``level``
    return sigma * np.sqrt(2.0 * np.log(max(gain * peak / level, 1.0)))


def _place(rng, shape, radius, taken, margin, tries=200):
    h, w = shape
    lo = int(np.ceil(radius)) + margin
    for _ in range(tries):
        if w - lo <= lo or h - lo <= lo:
            return None
        cx = int(rng.integers(lo, w - lo))
        cy = int(rng.integers(lo, h - lo))
        if all(np.hypot(cx - x, cy - y) > radius + r + 2 for x, y, r in taken):
            return cx, cy
    return None


def _border_light(rng, shape, taken):
    h, w = shape
    sigma = rng.uniform(2.5, 5.0)
    peak = rng.uniform(0.5, 1.0)
    r = _reach(sigma, peak, 1.0)
    for _ in range(100):
        side = rng.integers(4)
        if side == 0:
            cx, cy = int(rng.integers(0, w)), 0
        elif side == 1:
            cx, cy = int(rng.integers(0, w)), h - 1
        elif side == 2:
            cx, cy = 0, int(rng.integers(0, h))
        else:
            cx, cy = w - 1, int(rng.integers(0, h))
        if all(np.hypot(cx - x, cy - y) > r + rr + 2 for x, y, rr in taken):
            taken.append((cx, cy, r))
            return _blob(shape, cx, cy, sigma, peak)
    return None


def make_scene(
    rng: np.random.Generator,
    width: int = 160,
    height: int = 120,
    n_blobs: int = 3,
    kind: str = "clean",
    distractors: int = 1,
    image_id: str = "",
) -> Scene:
    """Draw one synthetic scene and its keypoints from ``rng``."""
    if kind not in ("clean", "hard"):
        raise ValueError(f"unknown fixture kind {kind!r}")
    shape = (height, width)
    img = rng.uniform(0.0, BACKGROUND, size=shape)
    taken: list[tuple[float, float, float]] = []
    keypoints = []

    def cls():
        return KeypointClass.DIRECT if rng.random() < 0.6 else KeypointClass.INDIRECT

    placed = 0
    while placed < n_blobs:
        if kind == "clean":
            sigma = rng.uniform(1.5, 4.0)
            peak = rng.uniform(0.55, 1.0)
            r = _reach(sigma, peak, 1.0)
            pos = _place(rng, shape, r, taken, margin=2)
            if pos is None:
                break
            img = np.maximum(img, _blob(shape, *pos, sigma, peak))
            taken.append((*pos, r))
            keypoints.append(Keypoint(pos[0], pos[1], cls()))
            placed += 1
            continue

        # hard: a group of two or three touching blobs
        size = int(min(rng.integers(2, 4), n_blobs - placed)) or 1
        sigma = rng.uniform(2.0, 3.5)
        saturated = rng.random() < 0.5
        gain = rng.uniform(2.0, 3.0) if saturated else 1.0
        step = sigma * (rng.uniform(1.2, 1.8) if saturated else rng.uniform(2.2, 3.0))
        angle = rng.uniform(0, np.pi)
        group_r = _reach(sigma, 1.0, gain) + step * (size - 1)
        pos = _place(rng, shape, group_r, taken, margin=2)
        if pos is None:
            break
        taken.append((*pos, group_r))
        for i in range(size):
            cx = int(round(pos[0] + i * step * np.cos(angle)))
            cy = int(round(pos[1] + i * step * np.sin(angle)))
            peak = rng.uniform(0.6, 1.0)
            img = np.maximum(img, _blob(shape, cx, cy, sigma, peak, gain))
            kp = Keypoint(cx, cy, cls())
            if kp not in keypoints:
                keypoints.append(kp)
            placed += 1

    for _ in range(distractors):
        light = _border_light(rng, shape, taken)
        if light is not None:
            img = np.maximum(img, light)

    return Scene(image_id, as_gray_image(quantize(img)), KeypointSet(keypoints))


def make_fixture_set(
    n: int,
    kind: str = "clean",
    seed: int = 0,
    width: int = 160,
    height: int = 120,
    blobs: tuple[int, int] = (2, 5),
    distractors: int = 1,
) -> list[Scene]:
    """``n`` reproducible scenes named ``<kind>_0000``, ``<kind>_0001``, ..."""
    rng = np.random.default_rng(seed)
    scenes = []
    for i in range(n):
        n_blobs = int(rng.integers(blobs[0], blobs[1] + 1))
        scenes.append(make_scene(rng, width, height, n_blobs, kind, distractors, image_id=f"{kind}_{i:04d}"))
    return scenes
