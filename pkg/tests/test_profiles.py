import json

import numpy as np
import pytest

from branchsched import (BranchConfig, Device, DetectorKind, ProfileStore,
                         RuntimeContext, TrackerKind, load_profiles,
                         lookup, reuse_detection_profiles)
from branchsched.errors import (AccuracyMismatch, DuplicateEntry, MissingBase,
                                MissingCoverage, NotFound, OutOfRange, ParseError)
from branchsched.profiles import (CONTENTION_LEVELS, BranchProfile,
                                  interpolate_context)

from conftest import SYN0, SYN50


def _profile(branch_id, ctx, det=100.0, c0=3.0, c1=3.4, acc=0.5, energy=1.0):
    return BranchProfile(branch_id=branch_id, context=ctx,
                         detector_latency_ms=det, tracker_c0_ms=c0,
                         tracker_c1_ms_per_obj=c1, accuracy=acc,
                         energy_per_frame_j=energy)


D0_ID = "d=effdet-d0;i=1"


def test_runtime_context_validation():
    RuntimeContext(Device.AGX_XAVIER, 7, 99)
    with pytest.raises(ValueError):
        RuntimeContext(Device.AGX_XAVIER, 8, 0)
    with pytest.raises(ValueError):
        RuntimeContext(Device.XAVIER_NX, 5, 0)
    with pytest.raises(ValueError):
        RuntimeContext(Device.TX2, 1, 0)
    with pytest.raises(OutOfRange):
        RuntimeContext(Device.SYNTHETIC, 0, 120)
    # Synthetic accepts any non-negative mode.
    RuntimeContext(Device.SYNTHETIC, 42, 0)


def test_store_counts(store, branches):
    assert len(store) == 310
    assert len(store.contexts) == 2
    assert set(store.branch_ids) == {b.id for b in branches}


def test_lookup_exact(store, branches):
    branch = branches[0]
    profile = lookup(store, branch, SYN0)
    assert profile is store.get(branch.id, SYN0)
    with pytest.raises(NotFound):
        lookup(store, branch, RuntimeContext(Device.SYNTHETIC, 0, 20))
    with pytest.raises(NotFound):
        store.get("d=yolo;rd=320;i=1", SYN0)


def test_accuracy_constant_across_contention(store, branches):
    for branch in branches[:20]:
        assert lookup(store, branch, SYN0).accuracy == lookup(store, branch, SYN50).accuracy


def test_accuracy_mismatch_rejected():
    with pytest.raises(AccuracyMismatch):
        ProfileStore([_profile(D0_ID, SYN0, acc=0.5),
                      _profile(D0_ID, SYN50, acc=0.6)])


def test_duplicate_entry_rejected():
    with pytest.raises(DuplicateEntry):
        ProfileStore([_profile(D0_ID, SYN0), _profile(D0_ID, SYN0)])


def test_non_canonical_level_rejected():
    ctx = RuntimeContext(Device.SYNTHETIC, 0, 42)
    with pytest.raises(ValueError):
        ProfileStore([_profile(D0_ID, ctx)])


def test_save_load_round_trip(store, domain, tmp_path):
    path1 = tmp_path / "profiles.json"
    path2 = tmp_path / "again.json"
    store.save(path1)
    reloaded = load_profiles(path1, domain=domain)
    assert len(reloaded) == len(store)
    reloaded.save(path2)
    assert path1.read_bytes() == path2.read_bytes()


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_profiles(path)
    path.write_text(json.dumps({"schema_version": 99, "profiles": []}))
    with pytest.raises(ParseError):
        load_profiles(path)
    with pytest.raises(ParseError):
        load_profiles(tmp_path / "missing.json")


def test_missing_coverage_names_pair(store, domain, tmp_path):
    doc = store.to_dict()
    removed = None
    kept = []
    for rec in doc["profiles"]:
        if removed is None and rec["branch_id"].endswith("i=100") and \
                rec["context"]["contention"] == 50:
            removed = rec
            continue
        kept.append(rec)
    doc["profiles"] = kept
    path = tmp_path / "gappy.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(MissingCoverage) as err:
        load_profiles(path, domain=domain)
    assert removed["branch_id"] in str(err.value)
    assert len(err.value.missing_pairs) == 1


def test_interpolation_midpoint():
    lo = _profile(D0_ID, RuntimeContext(Device.SYNTHETIC, 0, 0), det=100.0)
    hi = _profile(D0_ID, RuntimeContext(Device.SYNTHETIC, 0, 99), det=200.0)
    store = ProfileStore([lo, hi])
    branch = BranchConfig(detector=DetectorKind.EFFDET_D0, interval=1)
    prof = interpolate_context(store, branch, Device.SYNTHETIC, 0, 49.5)
    assert prof.detector_latency_ms == pytest.approx(150.0, abs=1e-12)
    assert prof.accuracy == lo.accuracy
    assert prof.context.contention_level == 49.5


def test_interpolation_identity_at_stored_level(store, branches):
    branch = branches[3]
    assert interpolate_context(store, branch, Device.SYNTHETIC, 0, 50) == \
        store.get(branch.id, SYN50)


def test_interpolation_matches_affine_ground_truth():
    rng = np.random.default_rng(5)
    branch = BranchConfig(detector=DetectorKind.EFFDET_D0, interval=1)
    slope, base = 1.7, 80.0
    profiles = [_profile(D0_ID, RuntimeContext(Device.SYNTHETIC, 0, lv),
                         det=base + slope * lv, energy=0.2 + 0.01 * lv)
                for lv in CONTENTION_LEVELS]
    store = ProfileStore(profiles)
    for _ in range(25):
        c = float(rng.uniform(0, 99))
        prof = interpolate_context(store, branch, Device.SYNTHETIC, 0, c)
        assert prof.detector_latency_ms == pytest.approx(base + slope * c, rel=1e-12)
        assert prof.energy_per_frame_j == pytest.approx(0.2 + 0.01 * c, rel=1e-12)


def test_interpolation_monotone_when_brackets_ordered(store, branches):
    branch = branches[7]
    lo = store.get(branch.id, SYN0).detector_latency_ms
    hi = store.get(branch.id, SYN50).detector_latency_ms
    assert hi >= lo
    last = lo
    for c in (5, 10.5, 20, 33.3, 49.9):
        value = interpolate_context(store, branch, Device.SYNTHETIC, 0, c).detector_latency_ms
        assert value >= last
        last = value


def test_interpolation_errors(store, branches):
    branch = branches[0]
    with pytest.raises(OutOfRange):
        interpolate_context(store, branch, Device.SYNTHETIC, 0, 120)
    # Levels 0 and 50 exist; 60.5 has no upper bracket.
    with pytest.raises(NotFound):
        interpolate_context(store, branch, Device.SYNTHETIC, 0, 60.5)
    with pytest.raises(NotFound):
        interpolate_context(store, branch, Device.TX2, 0, 25.5)


def test_reuse_covers_full_domain(domain, branches, kernel):
    base = {b.id: kernel.detection_quality(b) for b in branches if b.interval == 1}
    acc = reuse_detection_profiles(base, domain, kernel.degrade)
    assert len(acc) == 155
    for branch in branches:
        if branch.interval == 1:
            assert acc[branch.id] == base[branch.id]


def test_reuse_monotone_in_interval(domain, branches, kernel):
    base = {b.id: kernel.detection_quality(b) for b in branches if b.interval == 1}
    acc = reuse_detection_profiles(base, domain, kernel.degrade)
    groups = {}
    for branch in branches:
        if branch.interval == 1:
            continue
        key = branch.detector_side_key() + (branch.tracker, branch.tracker_resize,
                                            branch.confidence_threshold)
        groups.setdefault(key, []).append(branch)
    for group in groups.values():
        group.sort(key=lambda b: b.interval)
        values = [acc[b.id] for b in group]
        assert all(b <= a for a, b in zip(values, values[1:]))


def test_reuse_missing_base(domain, branches, kernel):
    base = {b.id: 0.5 for b in branches if b.interval == 1}
    victim = next(iter(base))
    del base[victim]
    with pytest.raises(MissingBase) as err:
        reuse_detection_profiles(base, domain, kernel.degrade)
    assert victim in str(err.value)
