"""Annotation-quality metrics: rotated-rectangle IoU and instance matching.

IoU comes from exact convex polygon clipping plus the shoelace area formula;
matching is greedy in descending IoU above the true-positive threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .boxfit import TopViewBox


def _clip_polygon(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon by a convex CCW polygon."""
    output = subject
    m = len(clip)
    for i in range(m):
        if len(output) == 0:
            break
        a = clip[i]
        b = clip[(i + 1) % m]
        edge = b - a
        # signed area sign: >= 0 keeps points on the edge, so boundary contact
        # degenerates to a zero-area sliver rather than disappearing oddly
        prev = output[-1]
        prev_side = edge[0] * (prev[1] - a[1]) - edge[1] * (prev[0] - a[0])
        result = []
        for curr in output:
            curr_side = edge[0] * (curr[1] - a[1]) - edge[1] * (curr[0] - a[0])
            if curr_side >= 0:
                if prev_side < 0:
                    t = prev_side / (prev_side - curr_side)
                    result.append(prev + t * (curr - prev))
                result.append(curr)
            elif prev_side >= 0:
                t = prev_side / (prev_side - curr_side)
                result.append(prev + t * (curr - prev))
            prev, prev_side = curr, curr_side
        output = np.asarray(result) if result else np.empty((0, 2))
    return output


def _shoelace_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def intersection_area(a: TopViewBox, b: TopViewBox) -> float:
    return _shoelace_area(_clip_polygon(a.corners(), b.corners()))


def rotated_iou(a: TopViewBox, b: TopViewBox) -> float:
    """area(a n b) / area(a u b), clamped into [0, 1]."""
    inter = intersection_area(a, b)
    union = a.area + b.area - inter
    if union <= 0:
        return 0.0
    return float(min(1.0, max(0.0, inter / union)))


@dataclass(frozen=True)
class MatchResult:
    """One frame's one-to-one assignment of annotations to ground truths."""

    pairs: list = field(default_factory=list)  # (annotation_id, gt_id, iou)
    unmatched_annotations: list = field(default_factory=list)
    unmatched_ground_truths: list = field(default_factory=list)


def match_instances(annotations, ground_truths, iou_threshold: float = 0.5
                    ) -> MatchResult:
    """Greedy descending-IoU matching among pairs strictly above the threshold.

    ``annotations`` and ``ground_truths`` are sequences of (id, TopViewBox).
    Each id ends up in at most one pair.
    """
    candidates = []
    for aid, abox in annotations:
        for gid, gbox in ground_truths:
            iou = rotated_iou(abox, gbox)
            if iou > iou_threshold:
                candidates.append((iou, str(aid), str(gid)))
    candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
    used_a: set = set()
    used_g: set = set()
    pairs = []
    for iou, aid, gid in candidates:
        if aid in used_a or gid in used_g:
            continue
        used_a.add(aid)
        used_g.add(gid)
        pairs.append((aid, gid, iou))
    return MatchResult(
        pairs=pairs,
        unmatched_annotations=[str(a) for a, _ in annotations if str(a) not in used_a],
        unmatched_ground_truths=[str(g) for g, _ in ground_truths if str(g) not in used_g],
    )


@dataclass(frozen=True)
class PrecisionRecall:
    true_positives: int
    false_positives: int
    false_negatives: int
    precision: float | None  # None when no annotations were made
    recall: float | None     # None when there is no ground truth
    mean_iou: float | None   # over matched pairs only

    def as_dict(self) -> dict:
        return {
            "true_positives": self.true_positives,
            "false_positives": self.false_positives,
            "false_negatives": self.false_negatives,
            "precision": self.precision,
            "recall": self.recall,
            "mean_iou": self.mean_iou,
        }


def precision_recall(match_results) -> PrecisionRecall:
    """Instance-level precision/recall and mean matched IoU across frames."""
    tp = fp = fn = 0
    ious = []
    for m in match_results:
        tp += len(m.pairs)
        fp += len(m.unmatched_annotations)
        fn += len(m.unmatched_ground_truths)
        ious.extend(iou for _, _, iou in m.pairs)
    precision = tp / (tp + fp) if (tp + fp) > 0 else None
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    mean_iou = float(np.mean(ious)) if ious else None
    return PrecisionRecall(tp, fp, fn, precision, recall, mean_iou)
