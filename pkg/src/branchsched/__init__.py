"""Adaptive multi-branch video-detection runtime toolkit.

Branch-space enumeration, profile-driven latency/energy/accuracy prediction,
budget-constrained scheduling with Pareto-frontier extraction, a calibrated
contention model, and a streaming tracking-by-detection pipeline simulator
running on synthetic kernels.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .branchspace import (BranchConfig, DetectorKind, KnobDomain, TrackerKind,
                          branch_id, domain_from_dict, domain_to_dict,
                          enumerate_branches, frcnn_plus_domain, load_domain,
                          parse_branch_id, virtuoso_domain, yolo_plus_domain)
from .contention import CGCalibration, calibrate, run_cpu_load, utilization_for
from .evalmetrics import (DetectionBox, EvalResult, average_precision, iou,
                          mean_ap, nms)
from .models import (PredictedMetrics, predict_accuracy, predict_energy,
                     predict_latency, predict_metrics)
from .profiles import (CONTENTION_LEVELS, BranchProfile, Device, ProfileStore,
                       RuntimeContext, interpolate_context, load_profiles,
                       lookup, reuse_detection_profiles)
from .scheduler import (Budget, FrontierPoint, ScheduleDecision,
                        budget_schedule_hook, min_latency_branch,
                        pareto_frontier, reschedule_on_context_change, schedule)
from .simulator import (GoFRecord, PowerModeSpec, PowerTrace,
                        SyntheticKernelSpec, apply_power_mode, default_kernel,
                        generate_profiles, load_kernel, power_mode_spec,
                        simulate_stream)

__version__ = "0.1.0"
