"""Budget-constrained branch selection and Pareto-frontier extraction.

The scheduler picks the most accurate branch whose predicted energy and
latency fit the caller's per-frame budgets. Ties break toward lower energy,
then lower latency, then lexicographically smaller branch id, so decisions
are deterministic. The scan over all branches is a precomputed array sweep
executed by the kernel backend; a full 155-branch decision costs tens of
microseconds, far inside the sub-millisecond budget the runtime demands.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .branchspace import BranchConfig, KnobDomain, enumerate_branches
from .errors import NoFeasibleBranch
from .models import PredictedMetrics, predict_latency
from .profiles import ProfileStore, RuntimeContext


@dataclass(frozen=True)
class Budget:
    """Optional per-frame bounds; an absent bound means unconstrained."""

    energy_j_per_frame: float | None = None
    latency_ms_per_frame: float | None = None

    def __post_init__(self):
        for bound in (self.energy_j_per_frame, self.latency_ms_per_frame):
            if bound is not None and not (bound > 0 and math.isfinite(bound)):
                raise ValueError(f"budget bounds must be positive and finite: {self}")


@dataclass(frozen=True)
class ScheduleDecision:
    branch: BranchConfig
    predicted: PredictedMetrics
    feasible_count: int
    decision_time_us: float


@dataclass(frozen=True)
class FrontierPoint:
    branch: BranchConfig
    metrics: PredictedMetrics


class _BranchTable:
    """Per-(domain, context) arrays over branches in lexicographic-id order."""

    def __init__(self, store, branches, ctx):
        ordered = sorted(branches, key=lambda b: b.id)
        self.branches = ordered
        self.profiles = [store.get(b.id, ctx) for b in ordered]
        n = len(ordered)
        self.acc = np.empty(n)
        self.energy = np.empty(n)
        self.l_det = np.empty(n)
        self.c0 = np.empty(n)
        self.c1 = np.empty(n)
        self.rf2 = np.empty(n)
        self.interval = np.empty(n, dtype=np.int64)
        for idx, (branch, profile) in enumerate(zip(ordered, self.profiles)):
            self.acc[idx] = profile.accuracy
            self.energy[idx] = profile.energy_per_frame_j
            self.l_det[idx] = profile.detector_latency_ms
            self.c0[idx] = profile.tracker_c0_ms
            self.c1[idx] = profile.tracker_c1_ms_per_obj
            rf = branch.tracker_resize if branch.tracker_resize is not None else 1.0
            self.rf2[idx] = rf * rf
            self.interval[idx] = branch.interval

    def k_array(self, tracked_objects):
        if callable(tracked_objects):
            return np.array([float(tracked_objects(b)) for b in self.branches])
        return np.full(len(self.branches), float(tracked_objects))


def _branch_list(domain):
    if isinstance(domain, KnobDomain):
        return enumerate_branches(domain)
    return list(domain)


def _table_for(store: ProfileStore, domain, ctx: RuntimeContext) -> _BranchTable:
    if isinstance(domain, KnobDomain):
        key = (domain, ctx)
        table = store._planner_cache.get(key)
        if table is None:
            table = _BranchTable(store, enumerate_branches(domain), ctx)
            store._planner_cache[key] = table
        return table
    return _BranchTable(store, _branch_list(domain), ctx)


def schedule(store: ProfileStore, domain, ctx: RuntimeContext, budget: Budget,
             tracked_objects=0, idle_power_w: float = 0.0) -> ScheduleDecision:
    """Most accurate feasible branch under the budget.

    `domain` is a KnobDomain (cached per context) or an explicit branch list.
    `tracked_objects` is the expected number of objects handed to the tracker,
    either a count or a callable of the branch.
    """
    start = time.perf_counter()
    table = _table_for(store, domain, ctx)
    k = table.k_array(tracked_objects)
    e0 = budget.energy_j_per_frame if budget.energy_j_per_frame is not None else math.inf
    l0 = budget.latency_ms_per_frame if budget.latency_ms_per_frame is not None else math.inf
    best, feasible, min_lat, min_energy = _kernels.scan_budget_argmax(
        table.acc, table.energy, table.l_det, table.c0, table.c1, table.rf2,
        table.interval, k, e0, l0, idle_power_w)
    if best < 0:
        raise NoFeasibleBranch(min_latency_ms=min_lat, min_energy_j=min_energy)
    branch = table.branches[best]
    profile = table.profiles[best]
    latency = predict_latency(profile, branch, k[best])
    energy = profile.energy_per_frame_j
    if idle_power_w > 0.0:
        energy = max(0.0, energy - idle_power_w * latency / 1000.0)
    predicted = PredictedMetrics(latency_ms_per_frame=latency,
                                 energy_j_per_frame=energy,
                                 accuracy=profile.accuracy)
    elapsed_us = (time.perf_counter() - start) * 1e6
    return ScheduleDecision(branch=branch, predicted=predicted,
                            feasible_count=feasible, decision_time_us=elapsed_us)


def branch_metrics(store: ProfileStore, domain, ctx: RuntimeContext,
                   tracked_objects=0, idle_power_w: float = 0.0):
    """(branch, PredictedMetrics) for every branch, in id order."""
    table = _table_for(store, domain, ctx)
    k = table.k_array(tracked_objects)
    out = []
    for idx, (branch, profile) in enumerate(zip(table.branches, table.profiles)):
        latency = predict_latency(profile, branch, k[idx])
        energy = profile.energy_per_frame_j
        if idle_power_w > 0.0:
            energy = max(0.0, energy - idle_power_w * latency / 1000.0)
        out.append((branch, PredictedMetrics(latency_ms_per_frame=latency,
                                             energy_j_per_frame=energy,
                                             accuracy=profile.accuracy)))
    return out


def pareto_frontier(store: ProfileStore, domain, ctx: RuntimeContext,
                    objective: str = "latency", tracked_objects=0,
                    idle_power_w: float = 0.0):
    """Non-dominated (cost, accuracy) points, ascending in cost.

    `objective` selects the cost axis: "latency" or "energy". Branches with
    identical cost and accuracy collapse to the lexicographically smallest id.
    """
    if objective not in ("latency", "energy"):
        raise ValueError(f"objective must be 'latency' or 'energy', got {objective!r}")
    pairs = branch_metrics(store, domain, ctx, tracked_objects, idle_power_w)

    def cost(m):
        return m.latency_ms_per_frame if objective == "latency" else m.energy_j_per_frame

    pairs.sort(key=lambda bm: (cost(bm[1]), -bm[1].accuracy, bm[0].id))
    frontier = []
    best_acc = -math.inf
    for branch, metrics in pairs:
        if metrics.accuracy > best_acc:
            frontier.append(FrontierPoint(branch=branch, metrics=metrics))
            best_acc = metrics.accuracy
    return frontier


def reschedule_on_context_change(prev: ScheduleDecision, store: ProfileStore,
                                 domain, new_ctx: RuntimeContext, budget: Budget,
                                 tracked_objects=0, idle_power_w: float = 0.0) -> ScheduleDecision:
    """Re-run the scheduler for a new context at a GoF boundary.

    Returns the previous decision object unchanged when the same branch
    stays optimal, so callers can detect switches by identity.
    """
    fresh = schedule(store, domain, new_ctx, budget, tracked_objects, idle_power_w)
    if fresh.branch.id == prev.branch.id:
        return prev
    return fresh


def min_latency_branch(store: ProfileStore, domain, ctx: RuntimeContext,
                       tracked_objects=0):
    """The fastest branch regardless of budget (closest-effort fallback)."""
    pairs = branch_metrics(store, domain, ctx, tracked_objects)
    return min(pairs, key=lambda bm: (bm[1].latency_ms_per_frame, bm[0].id))[0]


def budget_schedule_hook(store: ProfileStore, domain, budget: Budget,
                         tracked_objects=0, idle_power_w: float = 0.0,
                         fallback_closest: bool = False):
    """GoF-boundary hook for the simulator, plus its observable state.

    The hook re-evaluates the budget under the GoF's context and returns the
    branch to run. When nothing is feasible it either falls back to the
    min-latency branch or leaves the current branch in place, counting the
    event in ``state["infeasible"]``.
    """
    state = {"decision": None, "infeasible": 0}

    def hook(gof_index, ctx):
        try:
            if state["decision"] is None:
                state["decision"] = schedule(store, domain, ctx, budget,
                                             tracked_objects, idle_power_w)
            else:
                state["decision"] = reschedule_on_context_change(
                    state["decision"], store, domain, ctx, budget,
                    tracked_objects, idle_power_w)
            return state["decision"].branch
        except NoFeasibleBranch:
            state["infeasible"] += 1
            if fallback_closest:
                return min_latency_branch(store, domain, ctx, tracked_objects)
            return None

    return hook, state
