"""Synthetic contention: calibrated linear load model and a CPU burner.

The load generator's utilization grows linearly with worker threads until
it saturates at 99%, so a straight-line fit over the sub-saturation samples
is enough to invert "target level -> thread count". The real burner here is
a CPU duty-cycle loop (a desk-scale stand-in for a GPU add-kernel): it is
meant for integration tests and demos, never for unit-test determinism.
"""

from __future__ import annotations

import csv
import multiprocessing as mp
import time
from dataclasses import dataclass

from .errors import DegenerateFit, InsufficientSamples, ParseError, SpawnFailure
from .profiles import CONTENTION_LEVELS

SATURATION_PERCENT = 99.0
# A sample counts as saturated when within one percentage point of 99.
_SATURATION_BAND = SATURATION_PERCENT - 1.0


@dataclass(frozen=True)
class CGCalibration:
    """Fitted threads -> utilization line with saturation and its inverse."""

    slope: float
    intercept: float
    saturation: float
    max_threads: int
    level_to_threads: dict

    def __post_init__(self):
        if self.slope <= 0:
            raise DegenerateFit(f"non-positive slope {self.slope}")
        missing = set(CONTENTION_LEVELS) - set(self.level_to_threads)
        if missing:
            raise ValueError(f"level_to_threads misses levels {sorted(missing)}")


def calibrate(samples) -> CGCalibration:
    """Least-squares line over sub-saturation (threads, utilization) samples.

    Saturation is the plateau where two consecutive samples sit within one
    percentage point of 99; those and later samples are excluded from the fit.
    """
    pts = sorted((int(t), float(u)) for t, u in samples)
    if len(pts) < 3:
        raise InsufficientSamples(f"need at least 3 samples, got {len(pts)}")
    plateau_start = len(pts)
    for i in range(len(pts) - 1):
        if pts[i][1] >= _SATURATION_BAND and pts[i + 1][1] >= _SATURATION_BAND:
            plateau_start = i
            break
    fit_pts = pts[:plateau_start]
    if len(fit_pts) < 2:
        raise DegenerateFit("fewer than 2 samples below saturation")

    n = len(fit_pts)
    mean_t = sum(t for t, _ in fit_pts) / n
    mean_u = sum(u for _, u in fit_pts) / n
    sxx = sum((t - mean_t) ** 2 for t, _ in fit_pts)
    sxy = sum((t - mean_t) * (u - mean_u) for t, u in fit_pts)
    if sxx == 0:
        raise DegenerateFit("all sub-saturation samples share one thread count")
    slope = sxy / sxx
    if slope <= 0:
        raise DegenerateFit(f"fitted slope {slope} is not positive")
    intercept = mean_u - slope * mean_t

    max_threads = pts[-1][0]
    level_to_threads = {}
    for level in CONTENTION_LEVELS:
        threads = round((level - intercept) / slope)
        level_to_threads[level] = max(0, min(int(threads), max_threads))
    return CGCalibration(slope=slope, intercept=intercept,
                         saturation=SATURATION_PERCENT, max_threads=max_threads,
                         level_to_threads=level_to_threads)


def utilization_for(cal: CGCalibration, threads: int) -> float:
    """Predicted utilization percent, clamped to [0, saturation]."""
    if threads < 0:
        raise ValueError("thread count must be non-negative")
    predicted = cal.intercept + cal.slope * threads
    return max(0.0, min(predicted, cal.saturation))


def read_calibration_csv(path):
    """Load `threads,utilization` calibration samples."""
    samples = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None:
                raise ParseError(f"{path}: empty calibration file")
            for row in reader:
                if not row:
                    continue
                try:
                    samples.append((int(row[0]), float(row[1])))
                except (ValueError, IndexError) as exc:
                    raise ParseError(f"{path}: bad calibration row {row!r}") from exc
    except OSError as exc:
        raise ParseError(f"cannot read calibration file {path!r}: {exc}") from exc
    return samples


@dataclass(frozen=True)
class LoadReport:
    target_level: float
    duration_s: float
    workers: int
    worker_duty_percent: tuple
    achieved_percent: float


def _duty_worker(level: float, duration_s: float, queue):
    period = 0.1
    busy_share = level / 100.0
    busy_total = 0.0
    start = time.perf_counter()
    deadline = start + duration_s
    now = start
    while now < deadline:
        period_end = min(now + period, deadline)
        busy_until = min(now + period * busy_share, period_end)
        while time.perf_counter() < busy_until:
            pass
        busy_total += max(0.0, busy_until - now)
        remaining = period_end - time.perf_counter()
        if remaining > 0:
            time.sleep(remaining)
        now = time.perf_counter()
    elapsed = now - start
    queue.put(100.0 * busy_total / elapsed if elapsed > 0 else 0.0)


def run_cpu_load(level: float, duration_s: float, workers: int = 1) -> LoadReport:
    """Spawn busy-loop workers at the requested duty cycle and measure it.

    Each worker alternates spinning and sleeping over 100 ms periods with a
    busy share of level/100. Returns the measured average duty cycle.
    """
    if not (0 <= level <= 99):
        raise ValueError("level must lie in [0, 99]")
    if duration_s <= 0:
        raise ValueError("duration must be positive")
    if workers < 1:
        raise ValueError("need at least one worker")
    ctx = mp.get_context("spawn")
    queue = ctx.Queue()
    procs = []
    try:
        for _ in range(workers):
            proc = ctx.Process(target=_duty_worker, args=(level, duration_s, queue))
            proc.start()
            procs.append(proc)
    except OSError as exc:
        for proc in procs:
            proc.terminate()
        raise SpawnFailure(f"could not start load workers: {exc}") from exc
    duties = []
    for _ in procs:
        duties.append(queue.get(timeout=duration_s * 4 + 30))
    for proc in procs:
        proc.join()
    duties = tuple(sorted(duties))
    return LoadReport(target_level=level, duration_s=duration_s, workers=workers,
                      worker_duty_percent=duties,
                      achieved_percent=sum(duties) / len(duties))
