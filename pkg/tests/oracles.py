"""Independent brute-force oracles used to check the fast paths.

These deliberately re-derive results with the dumbest possible algorithms
(full scans, nested loops, explicit PR-curve integration) and stay
decoupled from the library internals they validate.
"""

import numpy as np


def eq4_latency(profile, branch, tracked_objects):
    if branch.interval == 1:
        return profile.detector_latency_ms
    rf = branch.tracker_resize
    rf2 = rf * rf
    l_trk = profile.tracker_c0_ms + profile.tracker_c1_ms_per_obj * rf2 * tracked_objects
    return (profile.detector_latency_ms + (branch.interval - 1.0) * l_trk) / branch.interval


def schedule_oracle(store, branches, ctx, budget, tracked_objects, idle_w=0.0):
    """Exhaustive argmax with the documented tie-break.

    Returns (branch, latency, energy, accuracy, feasible_count) or
    (None, min_latency, min_energy, None, 0) when nothing fits.
    """
    e0 = budget.energy_j_per_frame if budget.energy_j_per_frame is not None else float("inf")
    l0 = budget.latency_ms_per_frame if budget.latency_ms_per_frame is not None else float("inf")
    feasible = []
    min_lat = float("inf")
    min_en = float("inf")
    for branch in sorted(branches, key=lambda b: b.id):
        profile = store.get(branch.id, ctx)
        lat = eq4_latency(profile, branch, tracked_objects)
        en = profile.energy_per_frame_j
        if idle_w > 0.0:
            en = max(0.0, en - idle_w * lat / 1000.0)
        min_lat = min(min_lat, lat)
        min_en = min(min_en, en)
        if lat <= l0 and en <= e0:
            feasible.append((branch, lat, en, profile.accuracy))
    if not feasible:
        return None, min_lat, min_en, None, 0
    best = max(feasible, key=lambda t: (t[3], -t[2], -t[1]))
    return best[0], best[1], best[2], best[3], len(feasible)


def pareto_oracle(points):
    """O(n^2) dominance filter over (branch_id, cost, accuracy) triples.

    Exact duplicates on (cost, accuracy) collapse to the smallest id.
    """
    kept = []
    for bid, cost, acc in points:
        dominated = False
        for obid, ocost, oacc in points:
            if obid == bid:
                continue
            if ocost <= cost and oacc >= acc and (ocost < cost or oacc > acc):
                dominated = True
                break
            if ocost == cost and oacc == acc and obid < bid:
                dominated = True
                break
        if not dominated:
            kept.append((bid, cost, acc))
    kept.sort(key=lambda t: t[1])
    return kept


def _iou(a, b):
    ix1, iy1 = max(a[0], b[0]), max(a[1], b[1])
    ix2, iy2 = min(a[2], b[2]), min(a[3], b[3])
    iw, ih = max(0.0, ix2 - ix1), max(0.0, iy2 - iy1)
    inter = iw * ih
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union if union > 0 else 0.0


def ap_oracle(dets, gts, class_id, iou_threshold):
    """Naive AP: greedy best-IoU matching then explicit PR integration."""
    gt = [g for g in gts if g.class_id == class_id]
    dt = [d for d in dets if d.class_id == class_id]
    order = sorted(range(len(dt)), key=lambda i: (-dt[i].confidence, i))
    matched = set()
    flags = []
    for det_idx in order:
        det = dt[det_idx]
        best, best_iou = None, -1.0
        for gt_idx, g in enumerate(gt):
            if gt_idx in matched or g.frame_id != det.frame_id:
                continue
            value = _iou(det.xyxy(), g.xyxy())
            if value >= iou_threshold and value > best_iou:
                best, best_iou = gt_idx, value
        if best is not None:
            matched.add(best)
            flags.append(True)
        else:
            flags.append(False)
    n_gt = len(gt)
    precisions, recalls = [], []
    tp = 0
    for rank, flag in enumerate(flags, start=1):
        tp += int(flag)
        precisions.append(tp / rank)
        recalls.append(tp / n_gt)
    ap = 0.0
    prev_recall = 0.0
    for i in range(len(flags)):
        step = recalls[i] - prev_recall
        if step > 0:
            envelope = max(precisions[j] for j in range(i, len(flags)))
            ap += step * envelope
        prev_recall = recalls[i]
    return ap


def mean_ap_oracle(dets, gts, iou_threshold):
    classes = sorted({g.class_id for g in gts})
    aps = [ap_oracle(dets, gts, c, iou_threshold) for c in classes]
    return sum(aps) / len(aps)


def line_fit_oracle(samples):
    """numpy least-squares line as an independent calibration check."""
    threads = np.array([t for t, _ in samples], dtype=float)
    utils = np.array([u for _, u in samples], dtype=float)
    slope, intercept = np.polyfit(threads, utils, 1)
    return float(slope), float(intercept)
