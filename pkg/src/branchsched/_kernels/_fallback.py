"""Pure-Python/numpy implementations of the hot kernels.

Arithmetic here must match `_core.pyx` operation for operation: both
backends are required to produce bit-identical results so that seeded runs
hash the same regardless of whether the extension compiled.
"""

import numpy as np

BACKEND = "python"


def scan_budget_argmax(acc, energy, l_det, c0, c1, rf2, interval, k,
                       e0, l0, idle_w):
    """Feasibility scan over branches ordered by canonical id.

    Computes per-branch amortized latency l = (l_det + (i-1)*(c0 + c1*rf2*k))/i
    and effective energy e' = energy - idle_w*l/1000 (gross when idle_w = 0),
    then picks the feasible branch maximizing accuracy with ties broken by
    lower energy, lower latency, first index (= lexicographic id).

    Unbounded budgets are passed as +inf. Returns (best_index, feasible_count,
    min_latency, min_energy); best_index is -1 when nothing is feasible.
    """
    n = len(acc)
    best = -1
    best_a = best_e = best_l = 0.0
    feasible = 0
    min_l = np.inf
    min_e = np.inf
    for idx in range(n):
        i = interval[idx]
        lat = l_det[idx]
        if i > 1:
            lat = (lat + (i - 1.0) * (c0[idx] + c1[idx] * rf2[idx] * k[idx])) / i
        en = energy[idx]
        if idle_w > 0.0:
            en = en - idle_w * lat / 1000.0
            if en < 0.0:
                en = 0.0
        if lat < min_l:
            min_l = lat
        if en < min_e:
            min_e = en
        if en > e0 or lat > l0:
            continue
        feasible += 1
        a = acc[idx]
        if best < 0 or a > best_a or (a == best_a and (en < best_e or (en == best_e and lat < best_l))):
            best = idx
            best_a, best_e, best_l = a, en, lat
    return best, feasible, float(min_l), float(min_e)


def iou_matrix(a, b):
    """Pairwise IoU between two (N, 4) and (M, 4) arrays of xyxy boxes."""
    a = np.asarray(a, dtype=np.float64).reshape(-1, 4)
    b = np.asarray(b, dtype=np.float64).reshape(-1, 4)
    ix1 = np.maximum(a[:, None, 0], b[None, :, 0])
    iy1 = np.maximum(a[:, None, 1], b[None, :, 1])
    ix2 = np.minimum(a[:, None, 2], b[None, :, 2])
    iy2 = np.minimum(a[:, None, 3], b[None, :, 3])
    iw = np.maximum(ix2 - ix1, 0.0)
    ih = np.maximum(iy2 - iy1, 0.0)
    inter = iw * ih
    area_a = (a[:, 2] - a[:, 0]) * (a[:, 3] - a[:, 1])
    area_b = (b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])
    union = area_a[:, None] + area_b[None, :] - inter
    out = np.zeros_like(inter)
    np.divide(inter, union, out=out, where=union > 0.0)
    return out


def nms_keep(boxes, iou_threshold):
    """Greedy suppression over priority-ordered boxes of one frame and class.

    Returns the kept indices in order. Row 0 has the highest priority.
    """
    boxes = np.asarray(boxes, dtype=np.float64).reshape(-1, 4)
    n = boxes.shape[0]
    alive = np.ones(n, dtype=bool)
    keep = []
    ious = iou_matrix(boxes, boxes) if n > 1 else None
    for idx in range(n):
        if not alive[idx]:
            continue
        keep.append(idx)
        if ious is not None:
            alive &= ious[idx] < iou_threshold
            alive[idx] = False
    return keep
