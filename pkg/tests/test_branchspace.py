import json

import pytest

from branchsched import (BranchConfig, DetectorKind, KnobDomain, TrackerKind,
                         branch_id, enumerate_branches, frcnn_plus_domain,
                         parse_branch_id, virtuoso_domain, yolo_plus_domain)
from branchsched.branchspace import (DOMAIN_PRESETS, domain_from_dict,
                                     domain_to_dict, load_domain)
from branchsched.errors import EmptyDomain, InvalidBranch, ParseError


def test_virtuoso_domain_shape(domain):
    assert len(domain.detector_intervals) == 6
    assert domain.resolutions_for(DetectorKind.SSD) == (192, 256, 320)
    assert domain.trackers == (TrackerKind.MEDIANFLOW,)
    assert domain.tracker_resize_factors == (0.25, 0.5, 1.0)
    assert domain.confidence_thresholds == (0.15, 0.3)


def test_virtuoso_enumeration_count(branches):
    assert len(branches) == 155


def test_baseline_space_counts():
    assert len(enumerate_branches(frcnn_plus_domain())) == 28
    assert len(enumerate_branches(yolo_plus_domain())) == 12


def test_count_decomposition(branches):
    # 5 detector-side configs x (1 detector-only + 5*3*2 tracked) = 155
    detector_side = {b.detector_side_key() for b in branches}
    assert len(detector_side) == 5
    per_config = len(branches) // len(detector_side)
    assert per_config == 31
    assert sum(1 for b in branches if b.interval == 1) == 5


def test_branch_ids_unique_and_stable(domain, branches):
    ids = [b.id for b in branches]
    assert len(set(ids)) == len(ids)
    assert [b.id for b in enumerate_branches(domain)] == ids


def test_detector_only_id():
    cfg = BranchConfig(detector=DetectorKind.EFFDET_D0, interval=1)
    assert branch_id(cfg) == "d=effdet-d0;i=1"


def test_id_round_trip_all(branches):
    for branch in branches:
        assert parse_branch_id(branch.id) == branch


def test_id_round_trip_exotic():
    cfg = BranchConfig(detector=DetectorKind.SSD, resolution=256,
                       feature_maps=(1, 3, 4), tracker=TrackerKind.KCF,
                       tracker_resize=0.5, confidence_threshold=0.2, interval=4)
    assert parse_branch_id(cfg.id) == cfg
    assert "nm=1+3+4" in cfg.id


@pytest.mark.parametrize("text", [
    "", "nonsense", "d=effdet-d0", "i=1", "d=unknown-detector;i=1",
    "d=effdet-d0;i=one", "i=1;d=effdet-d0", "d=effdet-d0;d=effdet-d0;i=1",
    "d=effdet-d0;zz=3;i=1",
])
def test_parse_rejects_malformed(text):
    with pytest.raises(ParseError):
        parse_branch_id(text)


@pytest.mark.parametrize("kwargs", [
    dict(detector=DetectorKind.EFFDET_D0, interval=1, tracker=TrackerKind.KCF,
         tracker_resize=1.0, confidence_threshold=0.2),
    dict(detector=DetectorKind.EFFDET_D0, interval=8),
    dict(detector=DetectorKind.EFFDET_D0, interval=1, proposals=10),
    dict(detector=DetectorKind.SSD, interval=1),  # SSD without proposals OK, but:
])
def test_branch_invariants(kwargs):
    if kwargs.get("detector") is DetectorKind.SSD:
        BranchConfig(**kwargs)  # valid
        with pytest.raises(InvalidBranch):
            BranchConfig(detector=DetectorKind.EFFDET_D0, interval=1, resolution=320)
    else:
        with pytest.raises(InvalidBranch):
            BranchConfig(**kwargs)


def test_frcnn_requires_proposals():
    with pytest.raises(InvalidBranch):
        BranchConfig(detector=DetectorKind.FRCNN, resolution=320, interval=1)
    BranchConfig(detector=DetectorKind.FRCNN, resolution=320, proposals=10, interval=1)


def test_feature_maps_only_for_ssd():
    with pytest.raises(InvalidBranch):
        BranchConfig(detector=DetectorKind.YOLO, resolution=320,
                     feature_maps=(1, 2), interval=1)


def test_enumeration_respects_invariants(branches):
    for branch in branches:
        if branch.interval == 1:
            assert branch.tracker is None
            assert branch.tracker_resize is None
            assert branch.confidence_threshold is None
        else:
            assert branch.tracker is not None
            assert branch.tracker_resize is not None
            assert branch.confidence_threshold is not None
        assert (branch.resolution is not None) == (branch.detector is DetectorKind.SSD)


def test_subset_restriction_is_enumeration_subset(domain, branches):
    full_ids = {b.id for b in branches}
    restricted = KnobDomain(
        detectors=domain.detectors,
        detector_resolutions=domain.detector_resolutions,
        trackers=domain.trackers,
        tracker_resize_factors=(0.5,),
        confidence_thresholds=domain.confidence_thresholds,
        detector_intervals=(1, 4, 20),
    )
    sub_ids = {b.id for b in enumerate_branches(restricted)}
    assert sub_ids < full_ids


def test_empty_domain_errors():
    with pytest.raises(EmptyDomain):
        enumerate_branches(KnobDomain())
    with pytest.raises(EmptyDomain):
        enumerate_branches(KnobDomain(detectors=(DetectorKind.EFFDET_D0,),
                                      detector_intervals=(1, 8),
                                      tracker_resize_factors=(1.0,),
                                      confidence_thresholds=(0.3,)))
    with pytest.raises(EmptyDomain):
        enumerate_branches(KnobDomain(detectors=(DetectorKind.SSD,),
                                      detector_intervals=(1,)))


def test_domain_normalizes_lists():
    dom = KnobDomain(detectors=(DetectorKind.SSD, DetectorKind.SSD),
                     detector_resolutions={DetectorKind.SSD: [320, 192, 256, 192]},
                     detector_intervals=(8, 1, 1),
                     trackers=(TrackerKind.MEDIANFLOW,),
                     tracker_resize_factors=(1.0, 0.25),
                     confidence_thresholds=(0.3, 0.15))
    assert dom.detectors == (DetectorKind.SSD,)
    assert dom.resolutions_for(DetectorKind.SSD) == (192, 256, 320)
    assert dom.detector_intervals == (1, 8)


def test_domain_rejects_bad_values():
    with pytest.raises(ValueError):
        KnobDomain(confidence_thresholds=(0.0,))
    with pytest.raises(ValueError):
        KnobDomain(tracker_resize_factors=(1.5,))
    with pytest.raises(ValueError):
        KnobDomain(detector_intervals=(0,))


def test_domain_json_round_trip(domain, tmp_path):
    doc = domain_to_dict(domain)
    assert domain_from_dict(doc) == domain
    path = tmp_path / "domain.json"
    path.write_text(json.dumps(doc))
    assert load_domain(str(path)) == domain


def test_named_presets():
    assert set(DOMAIN_PRESETS) == {"virtuoso", "frcnn+", "yolo+"}
    assert load_domain("virtuoso") == virtuoso_domain()


def test_load_domain_missing_file():
    with pytest.raises(ParseError):
        load_domain("/nonexistent/domain.json")
