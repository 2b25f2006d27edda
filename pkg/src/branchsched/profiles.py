"""Offline per-branch profiles keyed by runtime context.

A profile records what was measured for one branch on one device, power
mode, and contention level: detector latency, the affine tracker cost,
accuracy, and per-frame energy. Stores are immutable after load; queries
between stored contention levels are answered by linear interpolation,
which is justified by the measured linearity of the contention generator.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from enum import Enum

from .branchspace import BranchConfig, enumerate_branches, parse_branch_id
from .errors import (AccuracyMismatch, DuplicateEntry, MissingBase,
                     MissingCoverage, NotFound, OutOfRange, ParseError)

#: The discrete contention levels at which profiles are collected.
CONTENTION_LEVELS = (0, 1, 10, 20, 30, 40, 50, 60, 70, 80, 90, 99)

PROFILE_SCHEMA_VERSION = 1


class Device(str, Enum):
    AGX_XAVIER = "agx-xavier"
    XAVIER_NX = "xavier-nx"
    TX2 = "tx2"
    SYNTHETIC = "synthetic"

    def __str__(self):
        return self.value


#: Valid power-mode ids per device (None = any non-negative mode).
POWER_MODE_RANGE = {
    Device.AGX_XAVIER: range(0, 8),
    Device.XAVIER_NX: range(0, 5),
    Device.TX2: range(0, 1),
    Device.SYNTHETIC: None,
}


@dataclass(frozen=True)
class RuntimeContext:
    """Conditions a prediction: device, power mode, contention percent.

    Stored profiles always use the canonical contention levels; transient
    contexts produced by interpolation may carry any percent in [0, 99].
    """

    device: Device
    power_mode: int
    contention_level: float

    def __post_init__(self):
        object.__setattr__(self, "device", Device(self.device))
        valid_modes = POWER_MODE_RANGE[self.device]
        if self.power_mode < 0 or (valid_modes is not None and self.power_mode not in valid_modes):
            raise ValueError(f"power mode {self.power_mode} invalid for {self.device}")
        if not (0 <= self.contention_level <= 99):
            raise OutOfRange(f"contention level {self.contention_level} outside [0, 99]")
        if float(self.contention_level).is_integer():
            object.__setattr__(self, "contention_level", int(self.contention_level))

    @property
    def is_stored_level(self) -> bool:
        return self.contention_level in CONTENTION_LEVELS

    def key(self):
        return (self.device.value, self.power_mode, self.contention_level)

    def label(self) -> str:
        return f"{self.device.value}/{self.power_mode}/{self.contention_level}"

    def to_dict(self):
        return {"device": self.device.value, "power_mode": self.power_mode,
                "contention": self.contention_level}

    @classmethod
    def from_dict(cls, doc):
        return cls(device=Device(doc["device"]), power_mode=int(doc["power_mode"]),
                   contention_level=doc["contention"])


@dataclass(frozen=True)
class BranchProfile:
    """Offline measurements for one branch under one context.

    The tracker cost is the affine per-frame model c0 + c1 * objects at a
    resize factor of 1.0; callers scale c1 by the square of the branch's
    resize factor (pixel-count proportionality).
    """

    branch_id: str
    context: RuntimeContext
    detector_latency_ms: float
    tracker_c0_ms: float
    tracker_c1_ms_per_obj: float
    accuracy: float
    energy_per_frame_j: float
    sample_count: int = 1

    def __post_init__(self):
        if self.detector_latency_ms <= 0 or self.tracker_c0_ms <= 0:
            raise ValueError("latencies must be positive")
        if self.tracker_c1_ms_per_obj < 0:
            raise ValueError("per-object tracker cost must be non-negative")
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError("accuracy must lie in [0, 1]")
        if self.energy_per_frame_j < 0:
            raise ValueError("energy must be non-negative")

    def to_dict(self):
        return {
            "branch_id": self.branch_id,
            "context": self.context.to_dict(),
            "detector_latency_ms": self.detector_latency_ms,
            "tracker_c0_ms": self.tracker_c0_ms,
            "tracker_c1_ms_per_obj": self.tracker_c1_ms_per_obj,
            "accuracy": self.accuracy,
            "energy_per_frame_j": self.energy_per_frame_j,
            "samples": self.sample_count,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            branch_id=doc["branch_id"],
            context=RuntimeContext.from_dict(doc["context"]),
            detector_latency_ms=float(doc["detector_latency_ms"]),
            tracker_c0_ms=float(doc["tracker_c0_ms"]),
            tracker_c1_ms_per_obj=float(doc["tracker_c1_ms_per_obj"]),
            accuracy=float(doc["accuracy"]),
            energy_per_frame_j=float(doc["energy_per_frame_j"]),
            sample_count=int(doc.get("samples", 1)),
        )


class ProfileStore:
    """Immutable map from (branch_id, context) to BranchProfile."""

    def __init__(self, profiles):
        entries = {}
        for profile in profiles:
            if not profile.context.is_stored_level:
                raise ValueError(
                    f"stored profiles must use canonical contention levels, got "
                    f"{profile.context.contention_level}")
            key = (profile.branch_id, profile.context.key())
            if key in entries:
                raise DuplicateEntry(f"duplicate profile for {profile.branch_id} "
                                     f"@ {profile.context.label()}")
            entries[key] = profile
        self._entries = entries
        self._check_accuracy_constancy()
        self._levels_index = self._build_levels_index()
        self._planner_cache = {}

    def _check_accuracy_constancy(self):
        seen = {}
        for profile in self._entries.values():
            key = (profile.branch_id, profile.context.device)
            if key in seen and seen[key] != profile.accuracy:
                raise AccuracyMismatch(
                    f"branch {profile.branch_id} has accuracy {profile.accuracy} "
                    f"@ {profile.context.label()} but {seen[key]} elsewhere on "
                    f"{profile.context.device}")
            seen.setdefault(key, profile.accuracy)

    def _build_levels_index(self):
        index = {}
        for profile in self._entries.values():
            ctx = profile.context
            index.setdefault((profile.branch_id, ctx.device, ctx.power_mode), []) \
                 .append((ctx.contention_level, profile))
        for levels in index.values():
            levels.sort(key=lambda lp: lp[0])
        return index

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(sorted(self._entries.values(),
                           key=lambda p: (p.branch_id, p.context.key())))

    @property
    def contexts(self):
        return sorted({p.context for p in self._entries.values()},
                      key=lambda c: c.key())

    @property
    def branch_ids(self):
        return sorted({p.branch_id for p in self._entries.values()})

    def get(self, branch_id: str, ctx: RuntimeContext) -> BranchProfile:
        try:
            return self._entries[(branch_id, ctx.key())]
        except KeyError:
            raise NotFound(f"no profile for {branch_id} @ {ctx.label()}") from None

    def validate_coverage(self, branch_ids=None, contexts=None):
        """Every (branch, context) pair must be present; report the gaps."""
        branch_ids = list(branch_ids) if branch_ids is not None else self.branch_ids
        contexts = list(contexts) if contexts is not None else self.contexts
        missing = [(b, ctx.label()) for b in branch_ids for ctx in contexts
                   if (b, ctx.key()) not in self._entries]
        if missing:
            raise MissingCoverage(missing)

    def to_dict(self):
        return {"schema_version": PROFILE_SCHEMA_VERSION,
                "profiles": [p.to_dict() for p in self]}

    def save(self, path):
        text = json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"
        tmp = f"{path}.tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)


def lookup(store: ProfileStore, branch: BranchConfig, ctx: RuntimeContext) -> BranchProfile:
    """Exact profile for a branch at a stored context."""
    return store.get(branch.id, ctx)


def load_profiles(path, domain=None) -> ProfileStore:
    """Load and validate a profile file.

    When a domain is given, coverage is checked against its enumeration;
    otherwise against the branch ids present in the file itself.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read profile file {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"profile file {path!r} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict) or "profiles" not in doc:
        raise ParseError(f"profile file {path!r} lacks a 'profiles' array")
    if doc.get("schema_version") != PROFILE_SCHEMA_VERSION:
        raise ParseError(f"unsupported profile schema version {doc.get('schema_version')!r}")
    try:
        profiles = [BranchProfile.from_dict(rec) for rec in doc["profiles"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad profile record in {path!r}: {exc}") from exc
    for profile in profiles:
        parse_branch_id(profile.branch_id)  # ids must be canonical
    store = ProfileStore(profiles)
    required = [b.id for b in enumerate_branches(domain)] if domain is not None else None
    store.validate_coverage(branch_ids=required)
    return store


def interpolate_context(store: ProfileStore, branch: BranchConfig, device,
                        power_mode: int, contention: float) -> BranchProfile:
    """Profile at an arbitrary contention percent via piecewise-linear
    interpolation between the two bracketing stored levels.

    Latencies and energy interpolate; accuracy is contention-independent and
    is copied unchanged. Exact stored levels return the stored entry.
    """
    device = Device(device)
    if not (0 <= contention <= 99):
        raise OutOfRange(f"contention {contention} outside [0, 99]")
    if contention in CONTENTION_LEVELS:
        return store.get(branch.id, RuntimeContext(device, power_mode, contention))
    levels = store._levels_index.get((branch.id, device, power_mode), [])
    lo = max(((lv, p) for lv, p in levels if lv < contention), default=None,
             key=lambda lp: lp[0])
    hi = min(((lv, p) for lv, p in levels if lv > contention), default=None,
             key=lambda lp: lp[0])
    if lo is None or hi is None:
        raise NotFound(f"no bracketing stored levels around {contention}% for "
                       f"{branch.id} on {device}/{power_mode}")
    (lo_lv, lo_p), (hi_lv, hi_p) = lo, hi
    w = (contention - lo_lv) / (hi_lv - lo_lv)

    def lerp(a, b):
        return a + (b - a) * w

    return BranchProfile(
        branch_id=branch.id,
        context=RuntimeContext(device, power_mode, contention),
        detector_latency_ms=lerp(lo_p.detector_latency_ms, hi_p.detector_latency_ms),
        tracker_c0_ms=lerp(lo_p.tracker_c0_ms, hi_p.tracker_c0_ms),
        tracker_c1_ms_per_obj=lerp(lo_p.tracker_c1_ms_per_obj, hi_p.tracker_c1_ms_per_obj),
        accuracy=lo_p.accuracy,
        energy_per_frame_j=lerp(lo_p.energy_per_frame_j, hi_p.energy_per_frame_j),
        sample_count=min(lo_p.sample_count, hi_p.sample_count),
    )


def reuse_detection_profiles(base, domain, reuse_fn):
    """Accuracy entries for every branch from the interval-1 measurements.

    `base` maps interval-1 branch ids to measured accuracies; branches with
    a larger interval get `reuse_fn(base_accuracy, branch)` instead of a
    fresh evaluation, mirroring how saved detections are replayed offline.
    """
    out = {}
    for branch in enumerate_branches(domain):
        det, rd, np_, nm = branch.detector_side_key()
        base_branch = BranchConfig(detector=det, resolution=rd, proposals=np_,
                                   feature_maps=nm, interval=1)
        if base_branch.id not in base:
            raise MissingBase(f"no interval-1 accuracy for {base_branch.id}")
        base_acc = base[base_branch.id]
        out[branch.id] = base_acc if branch.interval == 1 else float(reuse_fn(base_acc, branch))
    return out
