"""Exception types shared across the package."""


class BranchSchedError(Exception):
    """Base class for all package errors."""


# --- branch space ---

class EmptyDomain(BranchSchedError):
    """A mandatory knob list is empty, so no branch can be enumerated."""


class InvalidBranch(BranchSchedError, ValueError):
    """A branch configuration violates a dependency rule."""


class ParseError(BranchSchedError, ValueError):
    """A serialized branch id or input document is malformed."""


# --- profiles ---

class DuplicateEntry(BranchSchedError):
    """Two profile records share the same (branch_id, context) key."""


class MissingCoverage(BranchSchedError):
    """A profile store does not cover the full branch x context grid."""

    def __init__(self, missing_pairs):
        self.missing_pairs = list(missing_pairs)
        preview = ", ".join(f"{b} @ {c}" for b, c in self.missing_pairs[:5])
        extra = len(self.missing_pairs) - 5
        if extra > 0:
            preview += f" (+{extra} more)"
        super().__init__(f"{len(self.missing_pairs)} missing profile entries: {preview}")


class NotFound(BranchSchedError, KeyError):
    """No profile entry exists for the requested (branch, context)."""


class OutOfRange(BranchSchedError, ValueError):
    """A query parameter lies outside its permitted range."""


class MissingBase(BranchSchedError):
    """An interval-1 base accuracy entry required for reuse is absent."""


class AccuracyMismatch(BranchSchedError):
    """A branch has different accuracy values across contexts of one device."""


# --- models ---

class EmptyTrace(BranchSchedError, ValueError):
    """A power trace with no samples was supplied."""


class ZeroFrames(BranchSchedError, ValueError):
    """A frame count of zero (or less) was supplied."""


# --- scheduler ---

class NoFeasibleBranch(BranchSchedError):
    """No enumerated branch satisfies the budget.

    Carries the achievable minima so callers can decide how to relax.
    """

    def __init__(self, min_latency_ms, min_energy_j):
        self.min_latency_ms = min_latency_ms
        self.min_energy_j = min_energy_j
        super().__init__(
            "no feasible branch: achievable minima are "
            f"{min_latency_ms:.6g} ms/frame and {min_energy_j:.6g} J/frame"
        )


# --- contention ---

class InsufficientSamples(BranchSchedError):
    """Too few calibration samples to fit the load line."""


class DegenerateFit(BranchSchedError):
    """Calibration data admits no usable positive-slope line."""


class SpawnFailure(BranchSchedError):
    """A load-generator worker could not be started."""


# --- simulator ---

class KernelCoverage(BranchSchedError):
    """The synthetic kernel has no parameters for the requested context."""


class ModeMismatch(BranchSchedError):
    """Two power modes belong to different devices."""


# --- evalmetrics ---

class NoGroundTruth(BranchSchedError):
    """AP was requested for a class with zero ground-truth boxes."""


class EmptyGroundTruth(BranchSchedError):
    """mAP was requested against an empty ground-truth set."""
