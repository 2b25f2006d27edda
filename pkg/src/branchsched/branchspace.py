"""Knob domains, branch configurations, and branch enumeration.

An execution branch is one complete choice of detector-side and tracker-side
knobs that can run the detection task end to end. Knob choices are not
independent: proposals exist only for FRCNN, the resolution knob only for
detectors without a built-in input size, and tracker-side knobs only matter
when the detector interval is greater than one.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from .errors import EmptyDomain, InvalidBranch, ParseError


class DetectorKind(str, Enum):
    EFFDET_D0 = "effdet-d0"
    EFFDET_D3 = "effdet-d3"
    SSD = "ssd"
    FRCNN = "frcnn"
    YOLO = "yolo"

    def __str__(self):
        return self.value


class TrackerKind(str, Enum):
    MEDIANFLOW = "medianflow"
    KCF = "kcf"
    CSRT = "csrt"
    OPTICALFLOW = "opticalflow"

    def __str__(self):
        return self.value


#: Detectors whose input resolution is selectable (the EfficientDet variants
#: ship with a hard-coded input size tied to their scaling factor).
RESOLUTION_DETECTORS = frozenset({DetectorKind.SSD, DetectorKind.FRCNN, DetectorKind.YOLO})


@dataclass(frozen=True)
class KnobDomain:
    """Discrete choice sets for every efficiency knob.

    All lists are normalized to sorted, duplicate-free tuples so that
    enumeration order is deterministic. Instances are immutable and hashable.
    """

    detectors: tuple = ()
    detector_resolutions: tuple = ()  # ((DetectorKind, (int, ...)), ...)
    proposal_counts: tuple = ()
    feature_map_sets: tuple = ()  # ((int, ...), ...), SSD only
    trackers: tuple = ()
    tracker_resize_factors: tuple = ()
    confidence_thresholds: tuple = ()
    detector_intervals: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "detectors",
                           tuple(sorted({DetectorKind(d) for d in self.detectors}, key=lambda d: d.value)))
        res_map = dict(self.detector_resolutions)
        norm_res = []
        for det, resolutions in sorted(res_map.items(), key=lambda kv: DetectorKind(kv[0]).value):
            resolutions = tuple(sorted({int(r) for r in resolutions}))
            if any(r <= 0 for r in resolutions):
                raise ValueError("resolutions must be positive")
            norm_res.append((DetectorKind(det), resolutions))
        object.__setattr__(self, "detector_resolutions", tuple(norm_res))
        object.__setattr__(self, "proposal_counts", tuple(sorted({int(p) for p in self.proposal_counts})))
        if any(p <= 0 for p in self.proposal_counts):
            raise ValueError("proposal counts must be positive")
        object.__setattr__(self, "feature_map_sets",
                           tuple(sorted(tuple(sorted({int(i) for i in s})) for s in self.feature_map_sets)))
        object.__setattr__(self, "trackers",
                           tuple(sorted({TrackerKind(t) for t in self.trackers}, key=lambda t: t.value)))
        object.__setattr__(self, "tracker_resize_factors",
                           tuple(sorted({float(f) for f in self.tracker_resize_factors})))
        if any(not (0.0 < f <= 1.0) for f in self.tracker_resize_factors):
            raise ValueError("resize factors must lie in (0, 1]")
        object.__setattr__(self, "confidence_thresholds",
                           tuple(sorted({float(c) for c in self.confidence_thresholds})))
        if any(not (0.0 < c < 1.0) for c in self.confidence_thresholds):
            raise ValueError("confidence thresholds must lie strictly in (0, 1)")
        object.__setattr__(self, "detector_intervals",
                           tuple(sorted({int(i) for i in self.detector_intervals})))
        if any(i < 1 for i in self.detector_intervals):
            raise ValueError("detector intervals must be >= 1")

    def resolutions_for(self, detector: DetectorKind) -> tuple:
        for det, resolutions in self.detector_resolutions:
            if det is detector:
                return resolutions
        return ()


@dataclass(frozen=True)
class BranchConfig:
    """One execution branch: a full assignment of every applicable knob."""

    detector: DetectorKind
    interval: int
    resolution: int | None = None
    proposals: int | None = None
    feature_maps: tuple | None = None
    tracker: TrackerKind | None = None
    tracker_resize: float | None = None
    confidence_threshold: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "detector", DetectorKind(self.detector))
        if self.tracker is not None:
            object.__setattr__(self, "tracker", TrackerKind(self.tracker))
        if self.feature_maps is not None:
            object.__setattr__(self, "feature_maps", tuple(self.feature_maps))
        if self.interval < 1:
            raise InvalidBranch("interval must be >= 1")
        tracker_side = (self.tracker, self.tracker_resize, self.confidence_threshold)
        if self.interval == 1 and any(v is not None for v in tracker_side):
            raise InvalidBranch("interval 1 is detector-only: tracker knobs must be absent")
        if self.interval > 1 and any(v is None for v in tracker_side):
            raise InvalidBranch("interval > 1 requires tracker, tracker_resize and confidence_threshold")
        if (self.proposals is not None) != (self.detector is DetectorKind.FRCNN):
            raise InvalidBranch("proposals are present iff the detector is FRCNN")
        if self.resolution is not None and self.detector not in RESOLUTION_DETECTORS:
            raise InvalidBranch(f"{self.detector} has a built-in input resolution")
        if self.feature_maps is not None and self.detector is not DetectorKind.SSD:
            raise InvalidBranch("the feature-map knob exists only for SSD")
        if self.tracker_resize is not None and not (0.0 < self.tracker_resize <= 1.0):
            raise InvalidBranch("tracker_resize must lie in (0, 1]")
        if self.confidence_threshold is not None and not (0.0 < self.confidence_threshold < 1.0):
            raise InvalidBranch("confidence_threshold must lie strictly in (0, 1)")

    @property
    def id(self) -> str:
        return branch_id(self)

    def detector_side_key(self) -> tuple:
        """The knobs that identify a detector configuration, ignoring tracking."""
        return (self.detector, self.resolution, self.proposals, self.feature_maps)


# Canonical id field order; only present fields are emitted.
_ID_FIELDS = ("d", "rd", "np", "nm", "t", "rf", "ct", "i")


def branch_id(config: BranchConfig) -> str:
    """Canonical, stable string key for a branch (round-trips via parse_branch_id)."""
    parts = [f"d={config.detector.value}"]
    if config.resolution is not None:
        parts.append(f"rd={config.resolution}")
    if config.proposals is not None:
        parts.append(f"np={config.proposals}")
    if config.feature_maps is not None:
        parts.append("nm=" + "+".join(str(i) for i in config.feature_maps))
    if config.tracker is not None:
        parts.append(f"t={config.tracker.value}")
    if config.tracker_resize is not None:
        parts.append(f"rf={config.tracker_resize!r}")
    if config.confidence_threshold is not None:
        parts.append(f"ct={config.confidence_threshold!r}")
    parts.append(f"i={config.interval}")
    return ";".join(parts)


def parse_branch_id(text: str) -> BranchConfig:
    """Inverse of branch_id. Raises ParseError on malformed input."""
    fields = {}
    for chunk in text.split(";"):
        if "=" not in chunk:
            raise ParseError(f"malformed branch id segment {chunk!r} in {text!r}")
        key, _, value = chunk.partition("=")
        if key not in _ID_FIELDS:
            raise ParseError(f"unknown branch id field {key!r} in {text!r}")
        if key in fields:
            raise ParseError(f"duplicate field {key!r} in {text!r}")
        fields[key] = value
    if list(fields) != [f for f in _ID_FIELDS if f in fields]:
        raise ParseError(f"branch id fields out of canonical order in {text!r}")
    if "d" not in fields or "i" not in fields:
        raise ParseError(f"branch id must carry at least d and i: {text!r}")
    try:
        return BranchConfig(
            detector=DetectorKind(fields["d"]),
            resolution=int(fields["rd"]) if "rd" in fields else None,
            proposals=int(fields["np"]) if "np" in fields else None,
            feature_maps=tuple(int(i) for i in fields["nm"].split("+")) if "nm" in fields else None,
            tracker=TrackerKind(fields["t"]) if "t" in fields else None,
            tracker_resize=float(fields["rf"]) if "rf" in fields else None,
            confidence_threshold=float(fields["ct"]) if "ct" in fields else None,
            interval=int(fields["i"]),
        )
    except (ValueError, KeyError) as exc:
        if isinstance(exc, InvalidBranch):
            raise
        raise ParseError(f"cannot parse branch id {text!r}: {exc}") from exc


def enumerate_branches(domain: KnobDomain) -> list:
    """All valid branches of a domain, in deterministic order.

    For interval 1 the tracker-side knobs are dead configuration, so they
    collapse to a single detector-only branch per detector configuration.
    """
    if not domain.detectors:
        raise EmptyDomain("no detectors in domain")
    if not domain.detector_intervals:
        raise EmptyDomain("no detector intervals in domain")
    tracked_intervals = [i for i in domain.detector_intervals if i > 1]
    if tracked_intervals:
        if not domain.trackers:
            raise EmptyDomain("intervals > 1 require at least one tracker")
        if not domain.tracker_resize_factors:
            raise EmptyDomain("intervals > 1 require at least one resize factor")
        if not domain.confidence_thresholds:
            raise EmptyDomain("intervals > 1 require at least one confidence threshold")

    branches = []
    for det in domain.detectors:
        if det in RESOLUTION_DETECTORS:
            resolutions = domain.resolutions_for(det)
            if not resolutions:
                raise EmptyDomain(f"no resolutions declared for {det}")
        else:
            resolutions = (None,)
        proposals = domain.proposal_counts if det is DetectorKind.FRCNN else (None,)
        if det is DetectorKind.FRCNN and not domain.proposal_counts:
            raise EmptyDomain("FRCNN requires a non-empty proposal list")
        fmap_sets = domain.feature_map_sets if (det is DetectorKind.SSD and domain.feature_map_sets) else (None,)
        for rd in resolutions:
            for np_ in proposals:
                for nm in fmap_sets:
                    if 1 in domain.detector_intervals:
                        branches.append(BranchConfig(
                            detector=det, resolution=rd, proposals=np_,
                            feature_maps=nm, interval=1))
                    for i in tracked_intervals:
                        for tracker in domain.trackers:
                            for rf in domain.tracker_resize_factors:
                                for ct in domain.confidence_thresholds:
                                    branches.append(BranchConfig(
                                        detector=det, resolution=rd, proposals=np_,
                                        feature_maps=nm, tracker=tracker,
                                        tracker_resize=rf, confidence_threshold=ct,
                                        interval=i))
    return branches


def virtuoso_domain() -> KnobDomain:
    """The pruned multi-knob space: 155 branches over D0/D3/SSD."""
    return KnobDomain(
        detectors=(DetectorKind.EFFDET_D0, DetectorKind.EFFDET_D3, DetectorKind.SSD),
        detector_resolutions=((DetectorKind.SSD, (192, 256, 320)),),
        trackers=(TrackerKind.MEDIANFLOW,),
        tracker_resize_factors=(1.0, 0.5, 0.25),
        confidence_thresholds=(0.15, 0.30),
        detector_intervals=(1, 2, 4, 8, 20, 100),
    )


# Baseline spaces pin the tracker side to a single mid-range setting
# (MedianFlow, full-resolution tracking, 0.3 threshold, 8-frame interval)
# and vary only the detector-side knobs.
def frcnn_plus_domain() -> KnobDomain:
    """Resolution x proposal-count baseline space: 28 branches."""
    return KnobDomain(
        detectors=(DetectorKind.FRCNN,),
        detector_resolutions=((DetectorKind.FRCNN, (224, 320, 448, 576)),),
        proposal_counts=(1, 3, 5, 10, 20, 50, 100),
        trackers=(TrackerKind.MEDIANFLOW,),
        tracker_resize_factors=(1.0,),
        confidence_thresholds=(0.3,),
        detector_intervals=(8,),
    )


def yolo_plus_domain() -> KnobDomain:
    """Resolution-only baseline space: 12 branches."""
    return KnobDomain(
        detectors=(DetectorKind.YOLO,),
        detector_resolutions=((DetectorKind.YOLO,
                               (224, 256, 288, 320, 352, 384, 416, 448, 480, 512, 544, 576)),),
        trackers=(TrackerKind.MEDIANFLOW,),
        tracker_resize_factors=(1.0,),
        confidence_thresholds=(0.3,),
        detector_intervals=(8,),
    )


DOMAIN_PRESETS = {
    "virtuoso": virtuoso_domain,
    "frcnn+": frcnn_plus_domain,
    "yolo+": yolo_plus_domain,
}


def domain_from_dict(doc: dict) -> KnobDomain:
    """Build a domain from the JSON document schema."""
    try:
        return KnobDomain(
            detectors=tuple(DetectorKind(d) for d in doc.get("detectors", ())),
            detector_resolutions=tuple(
                (DetectorKind(d), tuple(res)) for d, res in doc.get("detector_resolutions", {}).items()),
            proposal_counts=tuple(doc.get("proposals", ())),
            feature_map_sets=tuple(tuple(s) for s in doc.get("feature_maps", ())),
            trackers=tuple(TrackerKind(t) for t in doc.get("trackers", ())),
            tracker_resize_factors=tuple(doc.get("tracker_resize", ())),
            confidence_thresholds=tuple(doc.get("confidence_thresholds", ())),
            detector_intervals=tuple(doc.get("intervals", ())),
        )
    except (ValueError, TypeError, AttributeError) as exc:
        raise ParseError(f"invalid domain document: {exc}") from exc


def domain_to_dict(domain: KnobDomain) -> dict:
    doc = {
        "detectors": [d.value for d in domain.detectors],
        "detector_resolutions": {d.value: list(r) for d, r in domain.detector_resolutions},
        "trackers": [t.value for t in domain.trackers],
        "tracker_resize": list(domain.tracker_resize_factors),
        "confidence_thresholds": list(domain.confidence_thresholds),
        "intervals": list(domain.detector_intervals),
        "proposals": list(domain.proposal_counts),
    }
    if domain.feature_map_sets:
        doc["feature_maps"] = [list(s) for s in domain.feature_map_sets]
    return doc


def load_domain(source) -> KnobDomain:
    """Resolve a preset name, a JSON file path, or an inline dict to a domain."""
    if isinstance(source, KnobDomain):
        return source
    if isinstance(source, dict):
        return domain_from_dict(source)
    if source in DOMAIN_PRESETS:
        return DOMAIN_PRESETS[source]()
    try:
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read domain file {source!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"domain file {source!r} is not valid JSON: {exc}") from exc
    return domain_from_dict(doc)
