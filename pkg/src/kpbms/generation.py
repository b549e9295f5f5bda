"""Bounding boxes from keypoint-seeded saliency.

For every keypoint a saliency map is computed with that keypoint as the only
seed, each map is binarized relative to its maximum, and the tight box of
every blob becomes a candidate. The final box set is the combination of
candidates with the best (F-score, quality) against all keypoints of the
image.
"""

from __future__ import annotations

import logging
from typing import Sequence

import numpy as np
from scipy import ndimage as ndi

from .bbox import BoundingBox, BoxSet, merge_identical
from .imaging import Connectivity, KeypointSet, Keypoint, structure_for
from .saliency import SaliencyConfig, job_rng, saliency_for_keypoint

__all__ = ["extract_blobs", "candidate_boxes", "select_combination", "generate", "DEFAULT_LIMIT"]

log = logging.getLogger(__name__)

DEFAULT_LIMIT = 10**6
_TOL = 1e-12


def extract_blobs(attention: np.ndarray, blob_fraction: float, connectivity: Connectivity = 8) -> list[BoundingBox]:
    """Tight boxes around blobs of ``attention >= blob_fraction * max``."""
    if not 0.0 < blob_fraction <= 1.0:
        raise ValueError(f"blob_fraction must lie in (0, 1], got {blob_fraction}")
    attention = np.asarray(attention, dtype=np.float64)
    peak = attention.max()
    if peak <= 0.0:
        return []
    labels, _ = ndi.label(attention >= blob_fraction * peak, structure=structure_for(connectivity))
    return [
        BoundingBox(sl[1].start, sl[0].start, sl[1].stop - 1, sl[0].stop - 1)
        for sl in ndi.find_objects(labels)
    ]


def candidate_boxes(
    image: np.ndarray,
    keypoints: KeypointSet,
    config: SaliencyConfig,
    image_id: str = "",
) -> list[list[BoundingBox]]:
    """Candidate boxes per keypoint, each tagged with its source keypoint and class."""
    result = []
    for j, kp in enumerate(keypoints):
        rng = job_rng(config.seed, image_id, j) if config.sampling == "random" else None
        amap = saliency_for_keypoint(image, kp, config, rng)
        blobs = extract_blobs(amap, config.blob_fraction, config.connectivity)
        if not blobs:
            log.info("keypoint %d of image %r produced no saliency", j, image_id)
        result.append(merge_identical(
            BoundingBox(*b.coords, cls=kp.cls.value, sources=(j,)) for b in blobs
        ))
    return result


def _coverage(boxes: Sequence[BoundingBox], keypoints: Sequence[Keypoint]) -> np.ndarray:
    xs = np.array([kp.x for kp in keypoints], dtype=np.int64)
    ys = np.array([kp.y for kp in keypoints], dtype=np.int64)
    return np.array(
        [(b.x_min <= xs) & (xs <= b.x_max) & (b.y_min <= ys) & (ys <= b.y_max) for b in boxes],
        dtype=bool,
    ).reshape(len(boxes), len(keypoints))


def _score_subsets(masks: np.ndarray, cover: np.ndarray, inv_nk: np.ndarray):
    """Vectorized (F, q) for subsets of boxes that each cover at least one keypoint."""
    n_boxes = masks.sum(axis=1)
    n_b = masks.astype(np.int64) @ cover.astype(np.int64)
    covered = n_b > 0
    tp = covered.sum(axis=1)
    m = cover.shape[1]
    recall = tp / m if m else np.ones(len(masks))
    # every pooled box covers a keypoint, so precision is 1
    f = 2 * recall / (1 + recall)
    with np.errstate(divide="ignore", invalid="ignore"):
        q_k = np.where(n_boxes > 0, (masks @ inv_nk) / np.maximum(n_boxes, 1), 1.0)
        inv_nb = np.where(covered, 1.0 / np.maximum(n_b, 1), 0.0)
        q_b = np.where(tp > 0, inv_nb.sum(axis=1) / np.maximum(tp, 1), 1.0)
    return f, q_k * q_b


def _pick_best(f, q, area):
    best_f = f.max()
    ok = f >= best_f - _TOL
    best_q = q[ok].max()
    ok &= q >= best_q - _TOL
    idx = np.flatnonzero(ok)
    return int(idx[np.argmin(area[idx])])


def _exhaustive(cover, inv_nk, areas) -> np.ndarray:
    u = cover.shape[0]
    total = 1 << u
    bits = np.arange(u, dtype=np.int64)
    best = None
    chunk = 1 << 16
    for start in range(0, total, chunk):
        ids = np.arange(start, min(total, start + chunk), dtype=np.int64)
        masks = ((ids[:, None] >> bits) & 1).astype(bool)
        f, q = _score_subsets(masks, cover, inv_nk)
        area = masks @ areas
        i = _pick_best(f, q, area)
        cand = (f[i], q[i], area[i], masks[i])
        if best is None or _better(cand, best):
            best = cand
    return best[3]


def _better(a, b) -> bool:
    if a[0] > b[0] + _TOL:
        return True
    if a[0] < b[0] - _TOL:
        return False
    if a[1] > b[1] + _TOL:
        return True
    if a[1] < b[1] - _TOL:
        return False
    return a[2] < b[2]


def _greedy(cover, inv_nk, areas) -> np.ndarray:
    u = cover.shape[0]
    chosen = np.zeros(u, dtype=bool)
    f0, q0 = _score_subsets(chosen[None], cover, inv_nk)
    current = (f0[0], q0[0], 0)
    while True:
        trial = np.repeat(chosen[None], u, axis=0)
        free = np.flatnonzero(~chosen)
        if free.size == 0:
            return chosen
        trial[free, free] = True
        trial = trial[free]
        f, q = _score_subsets(trial, cover, inv_nk)
        area = trial @ areas
        i = _pick_best(f, q, area)
        cand = (f[i], q[i], area[i])
        if not _better(cand, current):
            return chosen
        chosen = trial[i]
        current = cand


def select_combination(
    candidates: Sequence[Sequence[BoundingBox]],
    keypoints: KeypointSet,
    limit: int = DEFAULT_LIMIT,
    image_id: str = "",
) -> BoxSet:
    """Choose the candidate combination with maximal (F-score, q).

    Every subset of the pooled, deduplicated candidates is a combination.
    Ties go to the smaller total box area, then to the earliest subset in
    enumeration order. Candidates covering no keypoint can only add false
    positives and are dropped up front. When more than ``limit`` subsets
    would be scored, a greedy forward selection is used instead and the
    result is flagged ``approximate``.
    """
    pool = merge_identical(b for group in candidates for b in group)
    kps = list(keypoints)
    cover = _coverage(pool, kps)
    useful = cover.any(axis=1) if len(pool) else np.zeros(0, dtype=bool)
    pool = [b for b, ok in zip(pool, useful) if ok]
    cover = cover[useful]
    if not pool:
        return BoxSet(image_id, [])
    inv_nk = 1.0 / cover.sum(axis=1)
    areas = np.array([b.area for b in pool], dtype=np.int64)
    if (1 << len(pool)) <= limit:
        chosen, approximate = _exhaustive(cover, inv_nk, areas), False
    else:
        log.warning("image %r: %d candidates exceed the enumeration limit, using greedy selection", image_id, len(pool))
        chosen, approximate = _greedy(cover, inv_nk, areas), True
    return BoxSet(image_id, [b for b, keep in zip(pool, chosen) if keep], approximate)


def generate(
    image: np.ndarray,
    keypoints: KeypointSet,
    config: SaliencyConfig,
    image_id: str = "",
    limit: int = DEFAULT_LIMIT,
) -> BoxSet:
    """Full pipeline: per-keypoint saliency, blob boxes, combination selection."""
    candidates = candidate_boxes(image, keypoints, config, image_id)
    return select_combination(candidates, keypoints, limit, image_id)
