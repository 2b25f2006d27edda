"""Per-frame latency, energy, and accuracy prediction.

Latency amortizes one detector invocation over the interval:
l = (l_detector + (i - 1) * l_tracker) / i, with the tracker cost taken
from the affine per-object model scaled by the square of the resize
factor. Energy integrates a 1-second power trace and divides by the frame
count. Accuracy is a pure profile lookup; nothing adapts to content.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .branchspace import BranchConfig
from .errors import EmptyTrace, ZeroFrames
from .profiles import BranchProfile, ProfileStore, RuntimeContext


@dataclass(frozen=True)
class PredictedMetrics:
    latency_ms_per_frame: float
    energy_j_per_frame: float
    accuracy: float

    def __post_init__(self):
        object.__setattr__(self, "latency_ms_per_frame", float(self.latency_ms_per_frame))
        object.__setattr__(self, "energy_j_per_frame", float(self.energy_j_per_frame))
        object.__setattr__(self, "accuracy", float(self.accuracy))
        values = (self.latency_ms_per_frame, self.energy_j_per_frame, self.accuracy)
        if not all(math.isfinite(v) and v >= 0 for v in values):
            raise ValueError(f"metrics must be finite and non-negative: {self}")


def tracker_latency_ms(profile: BranchProfile, branch: BranchConfig,
                       tracked_objects: int) -> float:
    """Per-frame tracker cost: c0 + c1 * rf^2 * objects."""
    rf = branch.tracker_resize if branch.tracker_resize is not None else 1.0
    rf2 = rf * rf
    return profile.tracker_c0_ms + profile.tracker_c1_ms_per_obj * rf2 * tracked_objects


def predict_latency(profile: BranchProfile, branch: BranchConfig,
                    tracked_objects: int = 0) -> float:
    """Amortized per-frame latency of a branch in milliseconds."""
    if tracked_objects < 0:
        raise ValueError("tracked_objects must be non-negative")
    i = branch.interval
    if i == 1:
        return profile.detector_latency_ms
    l_trk = tracker_latency_ms(profile, branch, tracked_objects)
    return (profile.detector_latency_ms + (i - 1.0) * l_trk) / i


def predict_energy(power_samples, frames: int) -> float:
    """Joules per frame from instantaneous watts sampled at 1 s spacing."""
    samples = list(power_samples)
    if not samples:
        raise EmptyTrace("power trace has no samples")
    if frames <= 0:
        raise ZeroFrames("frame count must be positive")
    return sum(samples) * 1.0 / frames


def predict_accuracy(store: ProfileStore, branch: BranchConfig,
                     ctx: RuntimeContext) -> float:
    """Profiled accuracy of a branch; independent of contention by contract."""
    return store.get(branch.id, ctx).accuracy


def predict_metrics(store: ProfileStore, branch: BranchConfig, ctx: RuntimeContext,
                    tracked_objects: int = 0, idle_power_w: float = 0.0) -> PredictedMetrics:
    """Bundle the three per-branch predictions.

    `idle_power_w` > 0 switches the energy figure from gross board energy to
    net-of-idle energy (idle watts times the predicted frame time subtracted).
    """
    profile = store.get(branch.id, ctx)
    latency = predict_latency(profile, branch, tracked_objects)
    energy = profile.energy_per_frame_j
    if idle_power_w > 0.0:
        energy = energy - idle_power_w * latency / 1000.0
        if energy < 0.0:
            energy = 0.0
    return PredictedMetrics(latency_ms_per_frame=latency,
                            energy_j_per_frame=energy,
                            accuracy=profile.accuracy)
