"""Detection-quality metrics: IoU, NMS, per-class AP, and mAP.

Matching uses a fixed IoU threshold (0.5 by default) and detections are
matched greedily in descending confidence order; AP is the area under the
precision-recall curve with all-point interpolation. Classes without any
ground-truth box are excluded from the mean rather than scored zero.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyGroundTruth, NoGroundTruth, ParseError

MATCH_IOU_DEFAULT = 0.5
NMS_IOU_DEFAULT = 0.6


@dataclass(frozen=True)
class DetectionBox:
    """An axis-aligned box; confidence is None for ground truth."""

    frame_id: int
    class_id: int
    x_min: float
    y_min: float
    x_max: float
    y_max: float
    confidence: float | None = None

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ValueError(f"degenerate box: {self}")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def xyxy(self):
        return (self.x_min, self.y_min, self.x_max, self.y_max)


@dataclass(frozen=True)
class EvalResult:
    per_class_ap: dict
    mean_ap: float
    iou_threshold: float


def iou(a: DetectionBox, b: DetectionBox) -> float:
    """Intersection area over union area; 0 for disjoint boxes."""
    m = _kernels.iou_matrix(np.array([a.xyxy()]), np.array([b.xyxy()]))
    return float(m[0, 0])


def nms(boxes, iou_threshold: float = NMS_IOU_DEFAULT):
    """Greedy per-frame, per-class suppression.

    Keeps the highest-confidence box and drops same-class boxes overlapping
    it at or above the threshold; output is ordered by descending confidence
    with input order breaking ties.
    """
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError("NMS threshold must lie strictly in (0, 1)")
    groups = defaultdict(list)
    for pos, box in enumerate(boxes):
        if box.confidence is None:
            raise ValueError("NMS requires confidences on every box")
        groups[(box.frame_id, box.class_id)].append((pos, box))
    kept = []
    for key in sorted(groups):
        group = sorted(groups[key], key=lambda pb: (-pb[1].confidence, pb[0]))
        arr = np.array([pb[1].xyxy() for pb in group])
        for idx in _kernels.nms_keep(arr, iou_threshold):
            kept.append(group[idx])
    kept.sort(key=lambda pb: (-pb[1].confidence, pb[0]))
    return [box for _, box in kept]


def _match_flags(dets, gts, iou_threshold):
    """TP flags for confidence-ordered detections of one class.

    Each detection greedily claims the unmatched same-frame ground-truth box
    of highest IoU >= threshold (earliest box on exact ties).
    """
    order = sorted(range(len(dets)), key=lambda i: (-dets[i].confidence, i))
    gt_by_frame = defaultdict(list)
    for pos, gt in enumerate(gts):
        gt_by_frame[gt.frame_id].append(pos)
    gt_boxes = np.array([g.xyxy() for g in gts]) if gts else np.zeros((0, 4))
    matched = [False] * len(gts)
    flags = np.zeros(len(dets), dtype=bool)
    for rank, det_idx in enumerate(order):
        det = dets[det_idx]
        candidates = gt_by_frame.get(det.frame_id, ())
        if not candidates:
            continue
        ious = _kernels.iou_matrix(np.array([det.xyxy()]), gt_boxes[candidates])[0]
        best_pos = -1
        best_iou = -1.0
        for j, gt_pos in enumerate(candidates):
            if matched[gt_pos]:
                continue
            if ious[j] >= iou_threshold and ious[j] > best_iou:
                best_iou = ious[j]
                best_pos = gt_pos
        if best_pos >= 0:
            matched[best_pos] = True
            flags[rank] = True
    return flags


def _ap_from_flags(flags, n_gt):
    """Area under the PR curve by all-point interpolation."""
    if n_gt == 0:
        raise NoGroundTruth("AP undefined without ground truth")
    if len(flags) == 0:
        return 0.0
    tp = np.cumsum(flags)
    fp = np.cumsum(~flags)
    recall = tp / n_gt
    precision = tp / (tp + fp)
    mrec = np.concatenate(([0.0], recall))
    mpre = np.concatenate(([1.0], precision))
    for i in range(len(mpre) - 2, -1, -1):
        mpre[i] = max(mpre[i], mpre[i + 1])
    ap = 0.0
    for i in range(1, len(mrec)):
        ap += (mrec[i] - mrec[i - 1]) * mpre[i]
    return float(ap)


def average_precision(dets, gts, class_id: int,
                      iou_threshold: float = MATCH_IOU_DEFAULT) -> float:
    """AP for one class at a fixed matching-IoU threshold."""
    if not (0.0 < iou_threshold < 1.0):
        raise ValueError("matching threshold must lie strictly in (0, 1)")
    class_gts = [g for g in gts if g.class_id == class_id]
    if not class_gts:
        raise NoGroundTruth(f"no ground-truth boxes for class {class_id}")
    class_dets = [d for d in dets if d.class_id == class_id]
    flags = _match_flags(class_dets, class_gts, iou_threshold)
    return _ap_from_flags(flags, len(class_gts))


def mean_ap(dets, gts, iou_threshold: float = MATCH_IOU_DEFAULT) -> EvalResult:
    """Mean of per-class APs over the classes present in the ground truth."""
    classes = sorted({g.class_id for g in gts})
    if not classes:
        raise EmptyGroundTruth("mAP undefined on an empty ground-truth set")
    per_class = {c: average_precision(dets, gts, c, iou_threshold) for c in classes}
    return EvalResult(per_class_ap=per_class,
                      mean_ap=float(sum(per_class.values()) / len(per_class)),
                      iou_threshold=iou_threshold)


def read_boxes_csv(path):
    """Load boxes from `frame_id,class_id,xmin,ymin,xmax,ymax[,confidence]`."""
    boxes = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError(f"{path}: empty boxes file")
            has_conf = len(header) >= 7
            for row in reader:
                if not row:
                    continue
                try:
                    conf = None
                    if has_conf and len(row) >= 7 and row[6] != "":
                        conf = float(row[6])
                    boxes.append(DetectionBox(
                        frame_id=int(row[0]), class_id=int(row[1]),
                        x_min=float(row[2]), y_min=float(row[3]),
                        x_max=float(row[4]), y_max=float(row[5]),
                        confidence=conf))
                except (ValueError, IndexError) as exc:
                    raise ParseError(f"{path}: bad box row {row!r}: {exc}") from exc
    except OSError as exc:
        raise ParseError(f"cannot read boxes file {path!r}: {exc}") from exc
    return boxes


def write_boxes_csv(path, boxes, with_confidence=True):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        header = ["frame_id", "class_id", "xmin", "ymin", "xmax", "ymax"]
        if with_confidence:
            header.append("confidence")
        writer.writerow(header)
        for box in boxes:
            row = [box.frame_id, box.class_id, repr(box.x_min), repr(box.y_min),
                   repr(box.x_max), repr(box.y_max)]
            if with_confidence:
                row.append("" if box.confidence is None else repr(box.confidence))
            writer.writerow(row)
