import numpy as np
import pytest

from branchsched import (Budget, Device, ProfileStore, RuntimeContext,
                         default_kernel, enumerate_branches, generate_profiles,
                         virtuoso_domain)
from branchsched.profiles import BranchProfile

SYN0 = RuntimeContext(Device.SYNTHETIC, 0, 0)
SYN50 = RuntimeContext(Device.SYNTHETIC, 0, 50)


@pytest.fixture(scope="session")
def domain():
    return virtuoso_domain()


@pytest.fixture(scope="session")
def branches(domain):
    return enumerate_branches(domain)


@pytest.fixture(scope="session")
def kernel():
    return default_kernel()


@pytest.fixture(scope="session")
def store(domain, kernel):
    """Deterministic two-context store over the full 155-branch space."""
    return generate_profiles(domain, [SYN0, SYN50], kernel,
                             sample_frames=40, seed=7)


def random_store(branches, ctx, rng, energy_scale=1.0):
    """A store of independently random profiles for oracle comparisons."""
    profiles = []
    for branch in branches:
        acc = float(rng.uniform(0.2, 0.9))
        profiles.append(BranchProfile(
            branch_id=branch.id, context=ctx,
            detector_latency_ms=float(rng.uniform(5.0, 300.0)),
            tracker_c0_ms=float(rng.uniform(0.5, 6.0)),
            tracker_c1_ms_per_obj=float(rng.uniform(0.05, 4.0)),
            accuracy=acc,
            energy_per_frame_j=float(rng.uniform(0.05, 12.0)) * energy_scale,
            sample_count=1))
    return ProfileStore(profiles)


def random_budget(rng):
    kind = rng.integers(4)
    e0 = float(rng.uniform(0.05, 13.0)) if kind in (0, 2) else None
    l0 = float(rng.uniform(2.0, 320.0)) if kind in (1, 2) else None
    if kind == 3:
        e0 = float(rng.uniform(0.05, 13.0))
    return Budget(energy_j_per_frame=e0, latency_ms_per_frame=l0)
