"""Discrete-time tracking-by-detection pipeline simulator.

Frames stream through in Groups of Frames: the detector runs on the first
frame of each GoF and a tracker propagates its boxes across the rest. All
DNN and tracker kernels are synthetic: latencies, power draw, and detection
quality come from a parametric kernel spec, so runs are fast, deterministic
under a seed, and still exercise the full pipeline (NMS, confidence
filtering, per-GoF latency accounting, 1-second power sampling).

Power modes scale the kernel: a mode's latency factor stretches compute
time and its power factor scales energy per unit of work, so active-phase
power draw is base * power_factor / latency_factor. Contention scales
latency linearly and leaves power draw untouched.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .branchspace import BranchConfig, DetectorKind, TrackerKind, enumerate_branches
from .errors import KernelCoverage, ModeMismatch, ParseError, ZeroFrames
from .evalmetrics import NMS_IOU_DEFAULT, DetectionBox, mean_ap, nms
from .models import predict_energy
from .profiles import (BranchProfile, Device, ProfileStore, RuntimeContext,
                       reuse_detection_profiles)


@dataclass(frozen=True)
class PowerModeSpec:
    """One device power mode: budget, online cores, module frequency caps."""

    device: Device
    mode_id: int
    power_budget_w: float | None
    online_cpu_cores: int
    max_cpu_mhz: float
    max_gpu_mhz: float
    max_dla_mhz: float | None
    idle_power_w: float

    def __post_init__(self):
        object.__setattr__(self, "device", Device(self.device))
        if self.online_cpu_cores < 1:
            raise ValueError("a mode needs at least one online core")
        freqs = [self.max_cpu_mhz, self.max_gpu_mhz]
        if self.max_dla_mhz is not None:
            freqs.append(self.max_dla_mhz)
        if any(f <= 0 for f in freqs):
            raise ValueError("module frequencies must be positive")
        if self.idle_power_w < 0:
            raise ValueError("idle power must be non-negative")


def _agx_modes():
    budgets = [None, 10, 15, 30, 30, 30, 30, 15]
    cores = [8, 2, 4, 8, 6, 4, 2, 4]
    cpu = [2265.6, 1200, 1200, 1200, 1450, 1780, 2100, 2188]
    gpu = [1377, 520, 670, 900, 900, 900, 900, 670]
    dla = [1395.2, 550, 750, 1050, 1050, 1050, 1050, 115.2]
    return {m: PowerModeSpec(Device.AGX_XAVIER, m, budgets[m], cores[m],
                             cpu[m], gpu[m], dla[m], idle_power_w=3.5)
            for m in range(8)}


def _nx_modes():
    budgets = [15, 15, 15, 10, 10]
    cores = [2, 4, 6, 2, 4]
    cpu = [1900, 1400, 1400, 1500, 1200]
    gpu = [1100, 1100, 1100, 800, 800]
    dla = [1100, 1100, 1100, 900, 900]
    # Idle watts for modes 0/2/4 are bench measurements; 1/3 borrow neighbors.
    idle = [3.25, 3.25, 3.38, 3.08, 3.08]
    return {m: PowerModeSpec(Device.XAVIER_NX, m, budgets[m], cores[m],
                             cpu[m], gpu[m], dla[m], idle_power_w=idle[m])
            for m in range(5)}


POWER_MODES = {
    Device.AGX_XAVIER: _agx_modes(),
    Device.XAVIER_NX: _nx_modes(),
    Device.TX2: {0: PowerModeSpec(Device.TX2, 0, 15, 6, 2000, 1300, None,
                                  idle_power_w=2.5)},
}


def power_mode_spec(device, mode_id: int) -> PowerModeSpec:
    """Built-in mode table lookup; Synthetic accepts any mode id."""
    device = Device(device)
    if device is Device.SYNTHETIC:
        return PowerModeSpec(device, mode_id, None, 8, 1000, 1000, 1000,
                             idle_power_w=3.0)
    try:
        return POWER_MODES[device][mode_id]
    except KeyError:
        raise KernelCoverage(f"no power mode {mode_id} for {device}") from None


# Affine MedianFlow cost anchored at 6.5 ms for one object and 344 ms for a
# hundred on the reference board; the other trackers scale off it.
_MF_C1 = (344.0 - 6.5) / 99.0
_MF_C0 = 6.5 - _MF_C1

_DEFAULT_TRACKER_BASE = {
    TrackerKind.MEDIANFLOW: (_MF_C0, _MF_C1),
    TrackerKind.KCF: (2.2, 4.8),
    TrackerKind.CSRT: (4.5, 11.0),
    TrackerKind.OPTICALFLOW: (1.8, 2.6),
}

_DEFAULT_DETECTOR_BASE_MS = {
    DetectorKind.EFFDET_D0: 35.0,
    DetectorKind.EFFDET_D3: 190.0,
    DetectorKind.SSD: 25.0,
    DetectorKind.FRCNN: 160.0,
    DetectorKind.YOLO: 420.0,
}

_DEFAULT_REF_RESOLUTION = {
    DetectorKind.SSD: 320,
    DetectorKind.FRCNN: 576,
    DetectorKind.YOLO: 576,
}

_DEFAULT_DETECTOR_ACTIVE_W = {
    DetectorKind.EFFDET_D0: 6.0,
    DetectorKind.EFFDET_D3: 9.5,
    DetectorKind.SSD: 5.0,
    DetectorKind.FRCNN: 10.0,
    DetectorKind.YOLO: 11.0,
}

_DEFAULT_ACCURACY_BASE = {
    DetectorKind.EFFDET_D0: 0.5507,
    DetectorKind.EFFDET_D3: 0.6387,
    DetectorKind.SSD: 0.486,
    DetectorKind.FRCNN: 0.511,
    DetectorKind.YOLO: 0.495,
}

_DEFAULT_MODE_FACTORS = {
    Device.AGX_XAVIER: {0: (1.0, 1.0), 1: (2.6, 0.55), 2: (1.8, 0.6),
                        3: (1.35, 0.8), 4: (1.35, 0.82), 5: (1.4, 0.85),
                        6: (1.5, 0.9), 7: (1.7, 0.75)},
    Device.XAVIER_NX: {0: (1.0, 1.0), 1: (1.1, 0.97), 2: (1.25, 0.95),
                       3: (1.3, 0.92), 4: (1.18, 0.9)},
    Device.TX2: {0: (1.0, 1.0)},
    Device.SYNTHETIC: {0: (1.0, 1.0), 1: (1.8, 0.6), 2: (2.5, 0.5)},
}


@dataclass(frozen=True)
class SyntheticKernelSpec:
    """Parametric stand-in for trained detector and tracker kernels.

    Latency model: detector_base_ms scaled by (resolution/ref)^exponent, a
    per-proposal surcharge for two-stage detection, a feature-map factor,
    the mode latency factor, and the linear contention factor. Accuracy is
    an analytic surface over (detector, resolution, proposals, feature maps,
    interval, resize, threshold), non-increasing in interval and
    non-decreasing in resolution.
    """

    detector_base_ms: dict = field(default_factory=lambda: dict(_DEFAULT_DETECTOR_BASE_MS))
    detector_ref_resolution: dict = field(default_factory=lambda: dict(_DEFAULT_REF_RESOLUTION))
    resolution_latency_exponent: float = 2.0
    proposal_ms_per_count: float = 1.0
    feature_map_latency_base: float = 0.55
    feature_map_latency_per_map: float = 0.1125
    tracker_base: dict = field(default_factory=lambda: dict(_DEFAULT_TRACKER_BASE))
    mode_factors: dict = field(default_factory=lambda: {d: dict(m) for d, m in _DEFAULT_MODE_FACTORS.items()})
    contention_latency_slope: float = 0.02
    detector_active_w: dict = field(default_factory=lambda: dict(_DEFAULT_DETECTOR_ACTIVE_W))
    tracker_active_w: float = 1.5
    accuracy_base: dict = field(default_factory=lambda: dict(_DEFAULT_ACCURACY_BASE))
    resolution_accuracy_exponent: float = 0.12
    interval_retention_floor: float = 0.62
    interval_retention_tau: float = 20.0
    resize_accuracy_penalty: float = 0.16
    threshold_accuracy_penalty: float = 0.1
    feature_map_accuracy_base: float = 0.7
    feature_map_accuracy_per_map: float = 0.075
    proposal_accuracy_scale: float = 0.35
    proposal_accuracy_tau: float = 10.0
    latency_noise_sigma: float = 0.0
    # Scene model for the synthetic detector output.
    scene_objects: int = 8
    scene_classes: int = 4
    image_width: int = 1280
    image_height: int = 720
    emitted_candidates: int = 14
    detection_jitter_px: float = 3.0
    tracker_drift_px_per_frame: float = 1.5
    fixed_detections: int | None = None
    fixed_detection_confidence: float = 0.9

    # --- latency ---

    def mode_factor(self, device, mode_id: int):
        device = Device(device)
        try:
            lat_f, pow_f = self.mode_factors[device][mode_id]
        except KeyError:
            raise KernelCoverage(f"kernel has no factors for {device} mode {mode_id}") from None
        return float(lat_f), float(pow_f)

    def contention_factor(self, level: float) -> float:
        return 1.0 + self.contention_latency_slope * level

    def detector_latency_ms(self, branch: BranchConfig, ctx: RuntimeContext) -> float:
        try:
            base = self.detector_base_ms[branch.detector]
        except KeyError:
            raise KernelCoverage(f"kernel has no latency for {branch.detector}") from None
        if branch.resolution is not None:
            ref = self.detector_ref_resolution[branch.detector]
            base = base * (branch.resolution / ref) ** self.resolution_latency_exponent
        if branch.proposals is not None:
            base = base + self.proposal_ms_per_count * branch.proposals
        if branch.feature_maps is not None:
            base = base * (self.feature_map_latency_base
                           + self.feature_map_latency_per_map * len(branch.feature_maps))
        lat_f, _ = self.mode_factor(ctx.device, ctx.power_mode)
        return base * lat_f * self.contention_factor(ctx.contention_level)

    def tracker_affine(self, tracker, ctx: RuntimeContext):
        """Context-scaled (c0, c1) at resize factor 1.0."""
        tracker = TrackerKind(tracker) if tracker is not None else TrackerKind.MEDIANFLOW
        try:
            c0, c1 = self.tracker_base[tracker]
        except KeyError:
            raise KernelCoverage(f"kernel has no cost for tracker {tracker}") from None
        lat_f, _ = self.mode_factor(ctx.device, ctx.power_mode)
        scale = lat_f * self.contention_factor(ctx.contention_level)
        return c0 * scale, c1 * scale

    # --- power ---

    def detector_power_w(self, branch: BranchConfig, ctx: RuntimeContext) -> float:
        lat_f, pow_f = self.mode_factor(ctx.device, ctx.power_mode)
        return self.detector_active_w[branch.detector] * pow_f / lat_f

    def tracker_power_w(self, ctx: RuntimeContext) -> float:
        lat_f, pow_f = self.mode_factor(ctx.device, ctx.power_mode)
        return self.tracker_active_w * pow_f / lat_f

    # --- accuracy ---

    def detection_quality(self, branch: BranchConfig) -> float:
        """Detector-side accuracy in [0, 1] before tracking degradation."""
        try:
            acc = self.accuracy_base[branch.detector]
        except KeyError:
            raise KernelCoverage(f"kernel has no accuracy for {branch.detector}") from None
        if branch.resolution is not None:
            ref = self.detector_ref_resolution[branch.detector]
            acc = acc * (branch.resolution / ref) ** self.resolution_accuracy_exponent
        if branch.proposals is not None:
            acc = acc * (1.0 - self.proposal_accuracy_scale
                         * math.exp(-branch.proposals / self.proposal_accuracy_tau))
        if branch.feature_maps is not None:
            acc = acc * (self.feature_map_accuracy_base
                         + self.feature_map_accuracy_per_map * len(branch.feature_maps))
        return min(1.0, max(0.0, acc))

    def degrade(self, base_accuracy: float, branch: BranchConfig) -> float:
        """Tracking-side retention applied to an interval-1 accuracy."""
        if branch.interval == 1:
            return base_accuracy
        floor = self.interval_retention_floor
        retention = floor + (1.0 - floor) * math.exp(-(branch.interval - 1) / self.interval_retention_tau)
        rf = branch.tracker_resize
        retention *= 1.0 - self.resize_accuracy_penalty * (1.0 - rf) ** 2
        retention *= 1.0 - self.threshold_accuracy_penalty * branch.confidence_threshold
        return min(1.0, max(0.0, base_accuracy * retention))

    def accuracy(self, branch: BranchConfig) -> float:
        return self.degrade(self.detection_quality(branch), branch)

    # --- scene / detections ---

    def ground_truth_boxes(self, frame: int):
        """Scripted ground truth: objects on deterministic linear orbits."""
        boxes = []
        for obj in range(self.scene_objects):
            w = 40.0 + 10.0 * (obj % 7)
            h = 35.0 + 9.0 * (obj % 5)
            speed_x = ((obj * 13 + 5) % 9) - 4.0
            speed_y = ((obj * 7 + 3) % 9) - 4.0
            span_x = self.image_width - w
            span_y = self.image_height - h
            x = (37.0 * obj * obj + 11.0 * obj + speed_x * frame) % span_x
            y = (53.0 * obj * obj + 17.0 * obj + speed_y * frame) % span_y
            boxes.append(DetectionBox(frame_id=frame, class_id=obj % self.scene_classes,
                                      x_min=x, y_min=y, x_max=x + w, y_max=y + h))
        return boxes

    def emit_detections(self, branch: BranchConfig, frame: int, seed: int):
        """Raw detector output for one frame: perturbed truth plus clutter."""
        if self.fixed_detections is not None:
            return self._fixed_grid(frame, self.fixed_detections)
        rng = np.random.default_rng([seed, frame])
        quality = self.detection_quality(branch)
        jitter = self.detection_jitter_px * (1.0 - quality) * 2.0
        dets = []
        for gt in self.ground_truth_boxes(frame):
            offsets = rng.normal(0.0, jitter, size=2) if jitter > 0 else (0.0, 0.0)
            conf = float(np.clip(0.2 + 0.75 * quality * rng.random(), 0.01, 0.99))
            dets.append(DetectionBox(frame_id=frame, class_id=gt.class_id,
                                     x_min=gt.x_min + offsets[0], y_min=gt.y_min + offsets[1],
                                     x_max=gt.x_max + offsets[0], y_max=gt.y_max + offsets[1],
                                     confidence=conf))
        for fp in range(max(0, self.emitted_candidates - self.scene_objects)):
            w = 30.0 + 60.0 * rng.random()
            h = 30.0 + 60.0 * rng.random()
            x = rng.random() * (self.image_width - w)
            y = rng.random() * (self.image_height - h)
            conf = float(np.clip(0.05 + 0.3 * rng.random(), 0.01, 0.99))
            dets.append(DetectionBox(frame_id=frame, class_id=int(rng.integers(self.scene_classes)),
                                     x_min=x, y_min=y, x_max=x + w, y_max=y + h,
                                     confidence=conf))
        return dets

    def _fixed_grid(self, frame: int, count: int):
        """Non-overlapping constant-confidence boxes for closed-form tests."""
        boxes = []
        for idx in range(count):
            col, row = idx % 16, idx // 16
            x, y = 5.0 + 78.0 * col, 5.0 + 62.0 * row
            boxes.append(DetectionBox(frame_id=frame, class_id=0,
                                      x_min=x, y_min=y, x_max=x + 60.0, y_max=y + 50.0,
                                      confidence=self.fixed_detection_confidence))
        return boxes

    def propagate(self, tracked, from_frame: int, to_frame: int, resize: float, rng):
        """Tracker output: boxes follow the scene with resize-scaled drift."""
        drift_scale = self.tracker_drift_px_per_frame * (to_frame - from_frame) / max(resize, 1e-6)
        out = []
        for box in tracked:
            dx, dy = rng.normal(0.0, drift_scale, size=2) if drift_scale > 0 else (0.0, 0.0)
            out.append(replace(box, frame_id=to_frame,
                               x_min=box.x_min + dx, x_max=box.x_max + dx,
                               y_min=box.y_min + dy, y_max=box.y_max + dy))
        return out

    # --- serialization ---

    def to_dict(self):
        doc = {
            "detector_base_ms": {d.value: v for d, v in self.detector_base_ms.items()},
            "detector_ref_resolution": {d.value: v for d, v in self.detector_ref_resolution.items()},
            "resolution_latency_exponent": self.resolution_latency_exponent,
            "proposal_ms_per_count": self.proposal_ms_per_count,
            "feature_map_latency_base": self.feature_map_latency_base,
            "feature_map_latency_per_map": self.feature_map_latency_per_map,
            "tracker_base": {t.value: list(v) for t, v in self.tracker_base.items()},
            "mode_factors": {d.value: {str(m): list(f) for m, f in modes.items()}
                             for d, modes in self.mode_factors.items()},
            "contention_latency_slope": self.contention_latency_slope,
            "detector_active_w": {d.value: v for d, v in self.detector_active_w.items()},
            "tracker_active_w": self.tracker_active_w,
            "accuracy_base": {d.value: v for d, v in self.accuracy_base.items()},
            "resolution_accuracy_exponent": self.resolution_accuracy_exponent,
            "interval_retention_floor": self.interval_retention_floor,
            "interval_retention_tau": self.interval_retention_tau,
            "resize_accuracy_penalty": self.resize_accuracy_penalty,
            "threshold_accuracy_penalty": self.threshold_accuracy_penalty,
            "feature_map_accuracy_base": self.feature_map_accuracy_base,
            "feature_map_accuracy_per_map": self.feature_map_accuracy_per_map,
            "proposal_accuracy_scale": self.proposal_accuracy_scale,
            "proposal_accuracy_tau": self.proposal_accuracy_tau,
            "latency_noise_sigma": self.latency_noise_sigma,
            "scene_objects": self.scene_objects,
            "scene_classes": self.scene_classes,
            "image_width": self.image_width,
            "image_height": self.image_height,
            "emitted_candidates": self.emitted_candidates,
            "detection_jitter_px": self.detection_jitter_px,
            "tracker_drift_px_per_frame": self.tracker_drift_px_per_frame,
            "fixed_detection_confidence": self.fixed_detection_confidence,
        }
        if self.fixed_detections is not None:
            doc["fixed_detections"] = self.fixed_detections
        return doc

    @classmethod
    def from_dict(cls, doc):
        kwargs = dict(doc)
        try:
            if "detector_base_ms" in kwargs:
                kwargs["detector_base_ms"] = {DetectorKind(k): float(v)
                                              for k, v in kwargs["detector_base_ms"].items()}
            if "detector_ref_resolution" in kwargs:
                kwargs["detector_ref_resolution"] = {DetectorKind(k): int(v)
                                                     for k, v in kwargs["detector_ref_resolution"].items()}
            if "tracker_base" in kwargs:
                kwargs["tracker_base"] = {TrackerKind(k): tuple(float(x) for x in v)
                                          for k, v in kwargs["tracker_base"].items()}
            if "mode_factors" in kwargs:
                kwargs["mode_factors"] = {Device(d): {int(m): tuple(float(x) for x in f)
                                                      for m, f in modes.items()}
                                          for d, modes in kwargs["mode_factors"].items()}
            if "detector_active_w" in kwargs:
                kwargs["detector_active_w"] = {DetectorKind(k): float(v)
                                               for k, v in kwargs["detector_active_w"].items()}
            if "accuracy_base" in kwargs:
                kwargs["accuracy_base"] = {DetectorKind(k): float(v)
                                           for k, v in kwargs["accuracy_base"].items()}
            return cls(**kwargs)
        except (ValueError, TypeError, KeyError) as exc:
            raise ParseError(f"invalid kernel spec: {exc}") from exc


def default_kernel() -> SyntheticKernelSpec:
    return SyntheticKernelSpec()


def load_kernel(source) -> SyntheticKernelSpec:
    """Resolve "default", a JSON file path, or an inline dict to a kernel."""
    if isinstance(source, SyntheticKernelSpec):
        return source
    if isinstance(source, dict):
        return SyntheticKernelSpec.from_dict(source)
    if source in (None, "default"):
        return default_kernel()
    try:
        with open(source, "r", encoding="utf-8") as fh:
            return SyntheticKernelSpec.from_dict(json.load(fh))
    except OSError as exc:
        raise ParseError(f"cannot read kernel spec {source!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"kernel spec {source!r} is not valid JSON: {exc}") from exc


@dataclass(frozen=True)
class GoFRecord:
    """Latency accounting for one Group of Frames."""

    gof_index: int
    branch_id: str
    frames: int
    detector_ms: float
    tracker_ms_total: float
    gof_latency_ms_per_frame: float
    tracked_objects: int


@dataclass(frozen=True)
class PowerTrace:
    """Instantaneous board watts sampled at a 1-second interval."""

    samples: tuple  # ((t_seconds, watts), ...)
    device: Device
    mode_id: int

    def __post_init__(self):
        times = [t for t, _ in self.samples]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("trace timestamps must strictly increase")

    @property
    def watts(self):
        return [w for _, w in self.samples]


@dataclass(frozen=True)
class SimulationResult:
    gof_records: list
    power_trace: PowerTrace
    summary: dict
    detections: list
    ground_truth: list


def _context_at(base_ctx, steps, frame):
    ctx = base_ctx
    for start, step_ctx in steps:
        if frame >= start:
            ctx = step_ctx
        else:
            break
    return ctx


def simulate_stream(branch: BranchConfig, ctx: RuntimeContext,
                    kernel: SyntheticKernelSpec, frames: int,
                    schedule_hook=None, context_steps=None, seed: int = 0,
                    collect_detections: bool = True,
                    mode_spec: PowerModeSpec | None = None,
                    match_iou: float = 0.5) -> SimulationResult:
    """Run the pipeline for `frames` frames and account latency and power.

    `schedule_hook(gof_index, ctx)` may return a replacement branch at any
    GoF boundary. `context_steps` is a list of (start_frame, RuntimeContext)
    pairs that switch the runtime context mid-stream (contention steps).
    """
    if frames < 1:
        raise ZeroFrames("need at least one frame")
    steps = sorted(context_steps or [], key=lambda sc: sc[0])
    if mode_spec is None:
        mode_spec = power_mode_spec(ctx.device, ctx.power_mode)
    rng = np.random.default_rng([seed, 0xB5])
    kernel.mode_factor(ctx.device, ctx.power_mode)  # fail fast on coverage

    current = branch
    gof_records = []
    segments = []  # (duration_s, watts)
    detections = []
    ground_truth = []
    switches = 0
    usage = {}
    frame = 0
    gof_index = 0
    total_ms = 0.0
    while frame < frames:
        ctx_now = _context_at(ctx, steps, frame)
        if schedule_hook is not None:
            proposal = schedule_hook(gof_index, ctx_now)
            if proposal is not None and proposal.id != current.id:
                current = proposal
                switches += 1
        n = min(current.interval, frames - frame)

        det_ms = kernel.detector_latency_ms(current, ctx_now)
        if kernel.latency_noise_sigma > 0:
            det_ms *= max(0.05, 1.0 + rng.normal(0.0, kernel.latency_noise_sigma))
        raw = kernel.emit_detections(current, frame, seed)
        kept = nms(raw, NMS_IOU_DEFAULT)
        if current.interval > 1:
            ct = current.confidence_threshold
            tracked = [b for b in kept if b.confidence >= ct]
            k = len(tracked)
        else:
            tracked = []
            k = 0

        if current.interval > 1:
            c0, c1 = kernel.tracker_affine(current.tracker, ctx_now)
            rf = current.tracker_resize
            trk_ms = c0 + c1 * (rf * rf) * k
            if kernel.latency_noise_sigma > 0:
                trk_ms *= max(0.05, 1.0 + rng.normal(0.0, kernel.latency_noise_sigma))
        else:
            trk_ms = 0.0
        tracker_ms_total = (n - 1) * trk_ms
        gof_latency = (det_ms + tracker_ms_total) / n

        if collect_detections:
            ground_truth.extend(kernel.ground_truth_boxes(frame))
            detections.extend(kept)
            gof_rng = np.random.default_rng([seed, 1, frame])
            for offset in range(1, n):
                ground_truth.extend(kernel.ground_truth_boxes(frame + offset))
                if tracked:
                    detections.extend(kernel.propagate(
                        tracked, frame, frame + offset,
                        current.tracker_resize or 1.0, gof_rng))

        segments.append((det_ms / 1000.0, kernel.detector_power_w(current, ctx_now)))
        if tracker_ms_total > 0:
            segments.append((tracker_ms_total / 1000.0, kernel.tracker_power_w(ctx_now)))

        gof_records.append(GoFRecord(
            gof_index=gof_index, branch_id=current.id, frames=n,
            detector_ms=det_ms, tracker_ms_total=tracker_ms_total,
            gof_latency_ms_per_frame=gof_latency, tracked_objects=k))
        usage[current.id] = usage.get(current.id, 0) + 1
        total_ms += det_ms + tracker_ms_total
        frame += n
        gof_index += 1

    trace = _sample_trace(segments, mode_spec)
    energy_per_frame = predict_energy(trace.watts, frames)
    summary = {
        "frames": frames,
        "gofs": len(gof_records),
        "total_ms": total_ms,
        "mean_latency_ms_per_frame": total_ms / frames,
        "energy_j_per_frame": energy_per_frame,
        "mean_power_w": sum(trace.watts) / len(trace.samples),
        "branch_switches": switches,
        "branches_used": dict(sorted(usage.items())),
        "seed": seed,
    }
    if collect_detections and ground_truth:
        summary["map"] = mean_ap(detections, ground_truth, match_iou).mean_ap
    else:
        summary["map"] = None
    return SimulationResult(gof_records=gof_records, power_trace=trace,
                            summary=summary, detections=detections,
                            ground_truth=ground_truth)


def _sample_trace(segments, mode_spec) -> PowerTrace:
    """Instantaneous power at t = 0, 1, 2, ... over the active run."""
    total_s = sum(d for d, _ in segments)
    count = max(1, math.ceil(total_s))
    ends = np.cumsum([d for d, _ in segments])
    watts = [w for _, w in segments]
    samples = []
    for t in range(count):
        idx = int(np.searchsorted(ends, t, side="right"))
        idx = min(idx, len(watts) - 1)
        samples.append((t, mode_spec.idle_power_w + watts[idx]))
    return PowerTrace(samples=tuple(samples), device=mode_spec.device,
                      mode_id=mode_spec.mode_id)


def apply_power_mode(base_latency_ms: float, from_mode: PowerModeSpec,
                     to_mode: PowerModeSpec, kernel: SyntheticKernelSpec) -> float:
    """Rescale a latency between power modes of the same device."""
    if from_mode.device is not to_mode.device:
        raise ModeMismatch(f"{from_mode.device} vs {to_mode.device}")
    from_f, _ = kernel.mode_factor(from_mode.device, from_mode.mode_id)
    to_f, _ = kernel.mode_factor(to_mode.device, to_mode.mode_id)
    return base_latency_ms * to_f / from_f


def generate_profiles(domain, contexts, kernel: SyntheticKernelSpec,
                      sample_frames: int = 200, seed: int = 0) -> ProfileStore:
    """Offline profiling pass: simulate every (branch, context) pair.

    Detector and tracker costs are profiled separately (the tracker's affine
    pair comes from micro-profiling, not from the mixed stream), energy from
    the run's power trace, and accuracies from the interval-1 measurements
    replayed through the kernel's degradation model.
    """
    branches = enumerate_branches(domain)
    base_acc = {}
    for branch in branches:
        det, rd, np_, nm = branch.detector_side_key()
        base = BranchConfig(detector=det, resolution=rd, proposals=np_,
                            feature_maps=nm, interval=1)
        if base.id not in base_acc:
            base_acc[base.id] = kernel.detection_quality(base)
    accuracy_map = reuse_detection_profiles(base_acc, domain, kernel.degrade)

    records = []
    for branch in branches:
        for ctx in contexts:
            sim = simulate_stream(branch, ctx, kernel, sample_frames,
                                  collect_detections=False, seed=seed)
            c0, c1 = kernel.tracker_affine(branch.tracker, ctx)
            records.append(BranchProfile(
                branch_id=branch.id,
                context=ctx,
                detector_latency_ms=sim.gof_records[0].detector_ms,
                tracker_c0_ms=c0,
                tracker_c1_ms_per_obj=c1,
                accuracy=accuracy_map[branch.id],
                energy_per_frame_j=sim.summary["energy_j_per_frame"],
                sample_count=sample_frames,
            ))
    return ProfileStore(records)


def write_gof_csv(path, gof_records):
    import csv
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["gof_index", "branch_id", "frames", "detector_ms",
                         "tracker_ms_total", "latency_ms_per_frame", "tracked_objects"])
        for rec in gof_records:
            writer.writerow([rec.gof_index, rec.branch_id, rec.frames,
                             repr(rec.detector_ms), repr(rec.tracker_ms_total),
                             repr(rec.gof_latency_ms_per_frame), rec.tracked_objects])


def write_power_csv(path, trace: PowerTrace):
    import csv
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_s", "watts"])
        for t, w in trace.samples:
            writer.writerow([t, repr(w)])
