"""Keypoint-seeded Boolean map saliency.

A grayscale image is binarized at ``N`` thresholds sampled below the keypoint
intensity; each Boolean map is reduced to the regions connected to the
keypoint(s), L2-normalized, and the results are averaged into a mean attention
map. The classic border-seeded BMS activation is available for comparison and
for the centre-surround intersection variant.
"""

from __future__ import annotations

import warnings
import zlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage as ndi

from .imaging import (
    Connectivity,
    Keypoint,
    KeypointClass,
    KeypointSet,
    _conn_value,
    as_binary_map,
    check_in_bounds,
    intensity_at,
    label_components,
    structure_for,
    threshold,
)

__all__ = [
    "SaliencyConfig",
    "ZeroIntensityWarning",
    "job_rng",
    "sample_thresholds",
    "sample_interval",
    "activation_keypoint",
    "activation_bms_baseline",
    "activation_combined",
    "normalize_activation",
    "mean_attention",
    "saliency_for_keypoint",
    "saliency_for_seeds",
    "saliency_per_class",
    "bms_saliency",
]


SAMPLING_MODES = ("random", "evenly_spaced")


class ZeroIntensityWarning(UserWarning):
    """A keypoint sits on a zero-intensity pixel and produces no saliency."""


@dataclass(frozen=True)
class SaliencyConfig:
    alpha: float = 0.5
    n_thresholds: int = 50
    connectivity: int = 8
    sampling: str = "random"
    seed: int = 0
    blob_fraction: float = 0.3

    def __post_init__(self):
        object.__setattr__(self, "connectivity", _conn_value(self.connectivity))
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if int(self.n_thresholds) != self.n_thresholds or self.n_thresholds < 1:
            raise ValueError(f"n_thresholds must be a positive integer, got {self.n_thresholds}")
        object.__setattr__(self, "n_thresholds", int(self.n_thresholds))
        if self.sampling not in SAMPLING_MODES:
            raise ValueError(f"sampling must be one of {SAMPLING_MODES}, got {self.sampling!r}")
        if not 0.0 < self.blob_fraction <= 1.0:
            raise ValueError(f"blob_fraction must lie in (0, 1], got {self.blob_fraction}")
        object.__setattr__(self, "seed", int(self.seed))

    def deterministic(self) -> "SaliencyConfig":
        return replace(self, sampling="evenly_spaced")


def job_rng(seed: int, image_id: str = "", index: int = 0) -> np.random.Generator:
    """Independent random stream for one (image, keypoint) job.

    Streams depend only on their key, so results do not depend on the order
    in which parallel jobs are scheduled.
    """
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, zlib.crc32(str(image_id).encode()), int(index)]
    return np.random.default_rng(np.random.SeedSequence(key))


def sample_interval(low: float, high: float, n: int, sampling: str, rng=None) -> np.ndarray:
    if sampling == "evenly_spaced":
        return np.linspace(low, high, n)
    if rng is None:
        rng = np.random.default_rng()
    return rng.uniform(low, high, n)


def sample_thresholds(phi: float, config: SaliencyConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """``N`` thresholds in ``[alpha * phi, phi]``.

    Random mode draws from ``rng`` or, if omitted, from a generator seeded
    with ``config.seed``.
    """
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"phi must lie in [0, 1], got {phi}")
    if rng is None and config.sampling == "random":
        rng = np.random.default_rng(config.seed)
    return sample_interval(config.alpha * phi, phi, config.n_thresholds, config.sampling, rng)


def _seed_labels(labels: np.ndarray, seeds: Sequence[Keypoint]) -> np.ndarray:
    hits = np.array([labels[kp.y, kp.x] for kp in seeds], dtype=labels.dtype)
    return np.unique(hits[hits > 0])


def activation_keypoint(bool_map: np.ndarray, seeds: Sequence[Keypoint], connectivity: Connectivity = 8) -> np.ndarray:
    """Union of flood fills of ``bool_map`` from every seed.

    Seeds on inactive pixels contribute nothing; no seeds gives an empty map.
    """
    bool_map = as_binary_map(bool_map)
    for kp in seeds:
        check_in_bounds(bool_map.shape, kp)
    if len(seeds) == 0:
        return np.zeros(bool_map.shape, dtype=bool)
    labels, _ = label_components(bool_map, connectivity)
    keep = _seed_labels(labels, seeds)
    if keep.size == 0:
        return np.zeros(bool_map.shape, dtype=bool)
    return np.isin(labels, keep)


def activation_bms_baseline(bool_map: np.ndarray, connectivity: Connectivity = 8) -> np.ndarray:
    """Clear every component of ``bool_map`` that touches the image border."""
    bool_map = as_binary_map(bool_map)
    labels, count = label_components(bool_map, connectivity)
    if count == 0:
        return np.zeros(bool_map.shape, dtype=bool)
    border = np.concatenate([labels[0], labels[-1], labels[:, 0], labels[:, -1]])
    touching = np.unique(border[border > 0])
    return (labels > 0) & ~np.isin(labels, touching)


def activation_combined(m_bms: np.ndarray, m_kp: np.ndarray) -> np.ndarray:
    m_bms = as_binary_map(m_bms)
    m_kp = as_binary_map(m_kp)
    if m_bms.shape != m_kp.shape:
        raise ValueError(f"shape mismatch {m_bms.shape} vs {m_kp.shape}")
    return m_bms & m_kp


def normalize_activation(m: np.ndarray) -> np.ndarray:
    """L2-normalize an activation map; an empty map stays all zeros."""
    m = as_binary_map(m)
    count = int(np.count_nonzero(m))
    if count == 0:
        return np.zeros(m.shape, dtype=np.float64)
    return m * (1.0 / np.sqrt(count))


def mean_attention(maps: Sequence[np.ndarray], n: int) -> np.ndarray:
    if len(maps) == 0:
        raise ValueError("mean_attention needs at least one map")
    if len(maps) != n:
        raise ValueError(f"expected {n} maps, got {len(maps)}")
    shape = np.shape(maps[0])
    total = np.zeros(shape, dtype=np.float64)
    for a in maps:
        if np.shape(a) != shape:
            raise ValueError("attention maps differ in shape")
        total += a
    return total / n


def _nested_mean_attention(
    image: np.ndarray,
    seeds: Sequence[Keypoint],
    phis: np.ndarray,
    thetas: np.ndarray,
    connectivity: int,
) -> np.ndarray:
    # Activation maps shrink monotonically as the threshold rises, so every map
    # lives inside the loosest one: work on its bounding box and only relabel
    # when the next threshold actually cuts into the current activation.
    n = len(thetas)
    out = np.zeros(image.shape, dtype=np.float64)
    thetas = np.sort(thetas)
    loose = activation_keypoint(image >= thetas[0], seeds, connectivity)
    if not loose.any():
        return out

    rows = np.flatnonzero(loose.any(axis=1))
    cols = np.flatnonzero(loose.any(axis=0))
    crop = (slice(rows[0], rows[-1] + 1), slice(cols[0], cols[-1] + 1))
    sub = image[crop]
    cur = loose[crop]
    local = [(kp.y - rows[0], kp.x - cols[0]) for kp in seeds]
    struct = structure_for(connectivity)

    acc = np.zeros(sub.shape, dtype=np.float64)
    cur_min = sub[cur].min()
    weight = 1.0 / np.sqrt(np.count_nonzero(cur))
    pending = 0.0
    for theta in thetas:
        if cur_min < theta:
            np.add(acc, pending, out=acc, where=cur)
            pending = 0.0
            labels, count = ndi.label(cur & (sub >= theta), structure=struct)
            hits = {labels[r, c] for (r, c), phi in zip(local, phis) if phi >= theta}
            hits.discard(0)
            if not hits:
                break
            keep = np.zeros(count + 1, dtype=bool)
            keep[list(hits)] = True
            cur = keep[labels]
            cur_min = np.where(cur, sub, np.inf).min()
            weight = 1.0 / np.sqrt(np.count_nonzero(cur))
        pending += weight
    np.add(acc, pending, out=acc, where=cur)
    out[crop] = acc / n
    return out


def _direct_mean_attention(image, seeds, thetas, connectivity, csa):
    maps = []
    for theta in thetas:
        bmap = threshold(image, float(theta))
        m = activation_keypoint(bmap, seeds, connectivity)
        if csa:
            m = activation_combined(activation_bms_baseline(bmap, connectivity), m)
        maps.append(normalize_activation(m))
    return mean_attention(maps, len(maps))


def saliency_for_seeds(
    image: np.ndarray,
    seeds: Sequence[Keypoint],
    config: SaliencyConfig,
    rng: Optional[np.random.Generator] = None,
    csa: bool = False,
) -> np.ndarray:
    """Mean attention map seeded by one or more keypoints.

    Thresholds are drawn from ``[alpha * min(phi), max(phi)]`` over the seeds
    with positive intensity; a seed whose intensity is below a threshold is
    inactive for that map. Zero-intensity seeds are dropped with a
    :class:`ZeroIntensityWarning`. With ``csa=True`` every activation map is
    intersected with the border-seeded BMS activation.
    """
    image = np.asarray(image, dtype=np.float64)
    phis = np.array([intensity_at(image, kp) for kp in seeds], dtype=np.float64)
    live = phis > 0.0
    if not live.all():
        dark = [kp for kp, ok in zip(seeds, live) if not ok]
        warnings.warn(f"zero-intensity keypoints ignored: {dark}", ZeroIntensityWarning, stacklevel=2)
    seeds = [kp for kp, ok in zip(seeds, live) if ok]
    phis = phis[live]
    if len(seeds) == 0:
        return np.zeros(image.shape, dtype=np.float64)

    low, high = config.alpha * phis.min(), phis.max()
    if rng is None and config.sampling == "random":
        rng = np.random.default_rng(config.seed)
    thetas = sample_interval(low, high, config.n_thresholds, config.sampling, rng)
    if csa:
        return _direct_mean_attention(image, seeds, thetas, config.connectivity, csa=True)
    return _nested_mean_attention(image, seeds, phis, thetas, config.connectivity)


def saliency_for_keypoint(
    image: np.ndarray,
    keypoint: Keypoint,
    config: SaliencyConfig,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Saliency map using a single keypoint as fixation point.

    The keypoint pixel always attains the maximum of the returned map.
    """
    check_in_bounds(np.shape(image), keypoint)
    return saliency_for_seeds(image, [keypoint], config, rng)


def saliency_per_class(
    image: np.ndarray,
    keypoints: KeypointSet,
    config: SaliencyConfig,
    rng: Optional[np.random.Generator] = None,
    csa: bool = False,
) -> dict[KeypointClass, np.ndarray]:
    """One mean attention map per keypoint class present in ``keypoints``."""
    if rng is None and config.sampling == "random":
        rng = np.random.default_rng(config.seed)
    return {
        cls: saliency_for_seeds(image, list(group), config, rng, csa=csa)
        for cls, group in sorted(keypoints.by_class().items(), key=lambda kv: kv[0].value)
    }


def bms_saliency(image: np.ndarray, config: SaliencyConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Classic border-seeded BMS on a grayscale image.

    Thresholds span the full intensity range of the image; ``alpha`` is unused.
    """
    image = np.asarray(image, dtype=np.float64)
    if rng is None and config.sampling == "random":
        rng = np.random.default_rng(config.seed)
    thetas = sample_interval(float(image.min()), float(image.max()), config.n_thresholds, config.sampling, rng)
    maps = [
        normalize_activation(activation_bms_baseline(threshold(image, float(t)), config.connectivity))
        for t in thetas
    ]
    return mean_attention(maps, len(maps))
