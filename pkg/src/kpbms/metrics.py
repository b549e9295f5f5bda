"""Keypoint-versus-box detection metric.

Boxes are judged against keypoints rather than reference boxes:

* a keypoint covered by at least one box is a true positive, an uncovered
  keypoint a false negative;
* a box covering no keypoint is a false positive.

TP is counted on keypoints and FP on boxes, so precision mixes the two
units. Quality is the product ``q = q_k * q_b``: ``q_k`` averages
``1 / n_k(b)`` over true-positive boxes (``n_k(b)`` keypoints inside box
``b``), ``q_b`` averages ``1 / n_b(k)`` over covered keypoints (``n_b(k)``
boxes covering ``k``).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .bbox import as_box_list
from .imaging import Keypoint

__all__ = ["MatchTable", "EvalReport", "match", "evaluate", "aggregate", "format_table"]

Q_B_MODES = ("covered", "all")


@dataclass(frozen=True)
class MatchTable:
    box_hits: tuple[tuple[int, ...], ...]
    keypoint_hits: tuple[tuple[int, ...], ...]


def match(boxes, keypoints: Sequence[Keypoint], strict_class: bool = False) -> MatchTable:
    """Containment relation between boxes and keypoints (inclusive bounds).

    Classes are ignored unless ``strict_class`` is set, in which case a box
    only covers keypoints of its own class (``unspecified`` boxes match any).
    """
    boxes = as_box_list(boxes)
    kps = list(keypoints)
    if not boxes or not kps:
        return MatchTable(tuple(() for _ in boxes), tuple(() for _ in kps))
    xs = np.array([kp.x for kp in kps])
    ys = np.array([kp.y for kp in kps])
    lo = np.array([[b.x_min, b.y_min] for b in boxes])
    hi = np.array([[b.x_max, b.y_max] for b in boxes])
    inside = (
        (lo[:, :1] <= xs) & (xs <= hi[:, :1]) & (lo[:, 1:] <= ys) & (ys <= hi[:, 1:])
    )
    if strict_class:
        kp_cls = np.array([kp.cls.value for kp in kps])
        for i, b in enumerate(boxes):
            if b.cls != "unspecified":
                inside[i] &= kp_cls == b.cls
    box_hits = tuple(tuple(np.flatnonzero(row).tolist()) for row in inside)
    kp_hits = tuple(tuple(np.flatnonzero(col).tolist()) for col in inside.T)
    return MatchTable(box_hits, kp_hits)


def _ratio(num: float, den: float, empty: float) -> float:
    return num / den if den else empty


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f_score: float
    q_k: float
    q_b: float
    q: float
    q_k_std: float
    q_b_std: float
    inv_n_k: tuple[float, ...] = ()
    inv_n_b: tuple[float, ...] = ()

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int, inv_n_k, inv_n_b) -> "EvalReport":
        inv_n_k = tuple(float(v) for v in inv_n_k)
        inv_n_b = tuple(float(v) for v in inv_n_b)
        precision = _ratio(tp, tp + fp, 1.0)
        recall = _ratio(tp, tp + fn, 1.0)
        f_score = _ratio(2 * precision * recall, precision + recall, 0.0)
        q_k = float(np.mean(inv_n_k)) if inv_n_k else 1.0
        q_b = float(np.mean(inv_n_b)) if inv_n_b else 1.0
        return cls(
            tp=tp,
            fp=fp,
            fn=fn,
            precision=precision,
            recall=recall,
            f_score=f_score,
            q_k=q_k,
            q_b=q_b,
            q=q_k * q_b,
            q_k_std=float(np.std(inv_n_k)) if inv_n_k else 0.0,
            q_b_std=float(np.std(inv_n_b)) if inv_n_b else 0.0,
            inv_n_k=inv_n_k,
            inv_n_b=inv_n_b,
        )

    def summary(self) -> dict:
        d = asdict(self)
        del d["inv_n_k"], d["inv_n_b"]
        return d

    def to_json(self, raw: bool = False) -> str:
        return json.dumps(asdict(self) if raw else self.summary(), sort_keys=True)


def evaluate(
    boxes,
    keypoints: Sequence[Keypoint],
    strict_class: bool = False,
    q_b_over: str = "covered",
) -> EvalReport:
    """Score one image's boxes against its keypoints.

    ``q_b_over="all"`` averages ``q_b`` over every annotated keypoint, with
    uncovered keypoints contributing 0, instead of over covered ones only.
    """
    if q_b_over not in Q_B_MODES:
        raise ValueError(f"q_b_over must be one of {Q_B_MODES}")
    table = match(boxes, keypoints, strict_class)
    tp = sum(1 for hits in table.keypoint_hits if hits)
    fn = len(table.keypoint_hits) - tp
    fp = sum(1 for hits in table.box_hits if not hits)
    inv_n_k = [1.0 / len(hits) for hits in table.box_hits if hits]
    if q_b_over == "covered":
        inv_n_b = [1.0 / len(hits) for hits in table.keypoint_hits if hits]
    else:
        inv_n_b = [1.0 / len(hits) if hits else 0.0 for hits in table.keypoint_hits]
    return EvalReport.from_counts(tp, fp, fn, inv_n_k, inv_n_b)


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Micro-average per-image reports by pooling counts and reciprocals."""
    if len(reports) == 0:
        raise ValueError("cannot aggregate an empty list of reports")
    return EvalReport.from_counts(
        sum(r.tp for r in reports),
        sum(r.fp for r in reports),
        sum(r.fn for r in reports),
        [v for r in reports for v in r.inv_n_k],
        [v for r in reports for v in r.inv_n_b],
    )


_COLUMNS = ("Precision", "Recall", "F-score", "q", "q_K", "q_B")


def format_table(reports: Mapping[str, EvalReport]) -> str:
    """Aligned plain-text table, one row per named report."""
    rows = [("Model",) + _COLUMNS]
    for name, r in reports.items():
        rows.append((
            name,
            f"{r.precision:.3f}",
            f"{r.recall:.3f}",
            f"{r.f_score:.3f}",
            f"{r.q:.3f}",
            f"{r.q_k:.3f} ± {r.q_k_std:.3f}",
            f"{r.q_b:.3f} ± {r.q_b_std:.3f}",
        ))
    widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
    lines = ["  ".join(cell.ljust(w) if i == 0 else cell.rjust(w) for i, (cell, w) in enumerate(zip(row, widths))).rstrip()
             for row in rows]
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines)
