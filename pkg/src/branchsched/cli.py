"""Experiment runner CLI.

Subcommands: profile, schedule, frontier, simulate, contend, verify,
eval-map. Every output file is written atomically (temp + rename) and is a
pure function of the scenario plus seed, so reruns are byte-identical.
Exit codes: 0 success, 1 infeasible-only results, 2 usage or configuration
error, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, replace

from .branchspace import KnobDomain, enumerate_branches, load_domain
from .contention import run_cpu_load
from .errors import BranchSchedError, NoFeasibleBranch, ParseError
from .evalmetrics import mean_ap, read_boxes_csv
from .models import predict_energy
from .profiles import ProfileStore, RuntimeContext, load_profiles
from .scheduler import (Budget, budget_schedule_hook, pareto_frontier, schedule)
from .simulator import (SyntheticKernelSpec, load_kernel, generate_profiles,
                        power_mode_spec, simulate_stream, write_gof_csv,
                        write_power_csv)

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2
EXIT_INVARIANT = 3

#: Knob names accepted by --ablate, mapped to branch accessors.
ABLATABLE_KNOBS = {
    "detector": lambda b: b.detector,
    "resolution": lambda b: b.resolution,
    "proposals": lambda b: b.proposals,
    "feature_maps": lambda b: b.feature_maps,
    "tracker": lambda b: b.tracker,
    "tracker_resize": lambda b: b.tracker_resize,
    "confidence_threshold": lambda b: b.confidence_threshold,
    "interval": lambda b: b.interval,
}


@dataclass(frozen=True)
class Scenario:
    """One experiment description loaded from JSON."""

    name: str
    seed: int
    domain: KnobDomain
    contexts: tuple
    budgets: tuple
    kernel: SyntheticKernelSpec
    frames: int = 800
    profile_frames: int = 200
    tracked_objects: int = 8
    contention_schedule: tuple = ()
    ablate: str | None = None


def load_scenario(path, seed_override=None) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ParseError(f"cannot read scenario {path!r}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"scenario {path!r} is not valid JSON: {exc}") from exc
    try:
        contexts = tuple(RuntimeContext.from_dict(c) for c in doc["contexts"])
        budgets = tuple(Budget(energy_j_per_frame=b.get("energy_j_per_frame"),
                               latency_ms_per_frame=b.get("latency_ms_per_frame"))
                        for b in doc["budgets"])
        if not contexts or not budgets:
            raise ParseError(f"scenario {path!r} needs at least one context and one budget")
        seed = doc.get("seed")
        if seed_override is not None:
            seed = seed_override
        if seed is None:
            raise ParseError(f"scenario {path!r} must declare a seed (or pass --seed)")
        schedule_steps = tuple(
            (int(s["frame"]), s["level"]) for s in doc.get("contention_schedule", ()))
        ablate = doc.get("ablate")
        if ablate is not None and ablate not in ABLATABLE_KNOBS and ablate != "all":
            raise ParseError(f"unknown ablation knob {ablate!r}")
        return Scenario(
            name=doc.get("name", os.path.basename(path)),
            seed=int(seed),
            domain=load_domain(doc.get("domain", "virtuoso")),
            contexts=contexts,
            budgets=budgets,
            kernel=load_kernel(doc.get("kernel", "default")),
            frames=int(doc.get("frames", 800)),
            profile_frames=int(doc.get("profile_frames", 200)),
            tracked_objects=int(doc.get("tracked_objects", 8)),
            contention_schedule=schedule_steps,
            ablate=ablate,
        )
    except ParseError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid scenario {path!r}: {exc}") from exc


def _atomic_write(path, text):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _write_csv(path, header, rows):
    import io
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    _atomic_write(path, buf.getvalue())


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _idle_watts(ctx, enabled):
    return power_mode_spec(ctx.device, ctx.power_mode).idle_power_w if enabled else 0.0


# --- subcommands ---

def cmd_profile(args):
    scenario = load_scenario(args.scenario, args.seed)
    os.makedirs(args.out, exist_ok=True)
    store = generate_profiles(scenario.domain, scenario.contexts, scenario.kernel,
                              sample_frames=scenario.profile_frames, seed=scenario.seed)
    path = os.path.join(args.out, "profiles.json")
    store.save(path)
    n_branches = len(enumerate_branches(scenario.domain))
    print(f"wrote {path}: {len(store)} profiles "
          f"({n_branches} branches x {len(scenario.contexts)} contexts)")
    return EXIT_OK


def cmd_schedule(args):
    scenario = load_scenario(args.scenario, args.seed)
    store = load_profiles(args.profiles, domain=scenario.domain)
    os.makedirs(args.out, exist_ok=True)
    rows = []
    feasible_rows = 0
    for ctx in scenario.contexts:
        idle_w = _idle_watts(ctx, args.net_energy)
        for budget in scenario.budgets:
            try:
                decision = schedule(store, scenario.domain, ctx, budget,
                                    scenario.tracked_objects, idle_w)
            except NoFeasibleBranch as exc:
                if args.fallback_closest:
                    decision = schedule(store, scenario.domain, ctx, Budget(),
                                        scenario.tracked_objects, idle_w)
                    decision = replace(decision, feasible_count=0)
                else:
                    rows.append([ctx.label(), _fmt(budget.energy_j_per_frame),
                                 _fmt(budget.latency_ms_per_frame), "NONE",
                                 _fmt(exc.min_latency_ms), _fmt(exc.min_energy_j),
                                 "", 0, 0])
                    continue
            feasible_rows += 1
            rows.append([ctx.label(), _fmt(budget.energy_j_per_frame),
                         _fmt(budget.latency_ms_per_frame), decision.branch.id,
                         _fmt(decision.predicted.latency_ms_per_frame),
                         _fmt(decision.predicted.energy_j_per_frame),
                         _fmt(decision.predicted.accuracy),
                         decision.feasible_count, 0])
            print(f"{ctx.label()} e0={budget.energy_j_per_frame} "
                  f"l0={budget.latency_ms_per_frame} -> {decision.branch.id} "
                  f"({decision.decision_time_us:.1f} us)", file=sys.stderr)
    path = os.path.join(args.out, "schedule_sweep.csv")
    _write_csv(path, ["context", "budget_e0", "budget_l0", "branch_id",
                      "pred_latency_ms", "pred_energy_j", "pred_accuracy",
                      "feasible_count", "decision_us"], rows)
    print(f"wrote {path}: {len(rows)} rows, {feasible_rows} feasible")
    return EXIT_OK if feasible_rows else EXIT_INFEASIBLE


def _reference_branch_values(domain: KnobDomain):
    """Mid-range pin per knob, used to carve single-knob ablation slices."""
    def mid(seq):
        return seq[len(seq) // 2] if seq else None
    det = domain.detectors[0]
    tracked = [i for i in domain.detector_intervals if i > 1]
    return {
        "detector": det,
        "resolution": mid(domain.resolutions_for(det)),
        "proposals": mid(domain.proposal_counts) if det.value == "frcnn" else None,
        "feature_maps": None,
        "tracker": domain.trackers[0] if domain.trackers else None,
        "tracker_resize": mid(domain.tracker_resize_factors),
        "confidence_threshold": domain.confidence_thresholds[0] if domain.confidence_thresholds else None,
        "interval": mid(tracked) if tracked else domain.detector_intervals[0],
    }


def ablation_branches(domain: KnobDomain, knob: str):
    """Branches matching the reference on every knob except `knob`.

    Interval-1 branches carry no tracker-side knobs, so those fields match
    any reference value.
    """
    ref = _reference_branch_values(domain)
    selected = []
    for branch in enumerate_branches(domain):
        ok = True
        for name, accessor in ABLATABLE_KNOBS.items():
            if name == knob:
                continue
            value = accessor(branch)
            if value is None:
                continue  # knob not applicable to this branch
            if name != "interval" and branch.interval == 1 and name in (
                    "tracker", "tracker_resize", "confidence_threshold"):
                continue
            if value != ref[name]:
                ok = False
                break
        if ok:
            selected.append(branch)
    return selected


def cmd_frontier(args):
    scenario = load_scenario(args.scenario, args.seed)
    store = load_profiles(args.profiles, domain=scenario.domain)
    os.makedirs(args.out, exist_ok=True)
    ablate = args.ablate or scenario.ablate
    knobs = list(ABLATABLE_KNOBS) if ablate == "all" else [ablate] if ablate else []
    written = []
    for objective in ("latency", "energy"):
        rows = []
        for ctx in scenario.contexts:
            idle_w = _idle_watts(ctx, args.net_energy)
            variants = [("", scenario.domain)]
            variants += [(knob, ablation_branches(scenario.domain, knob)) for knob in knobs]
            for label, branches in variants:
                for point in pareto_frontier(store, branches, ctx, objective,
                                             scenario.tracked_objects, idle_w):
                    cost = (point.metrics.latency_ms_per_frame if objective == "latency"
                            else point.metrics.energy_j_per_frame)
                    rows.append([ctx.label(), objective, label, point.branch.id,
                                 _fmt(cost), _fmt(point.metrics.accuracy),
                                 _fmt(point.metrics.latency_ms_per_frame),
                                 _fmt(point.metrics.energy_j_per_frame)])
        path = os.path.join(args.out, f"frontier_{objective}.csv")
        _write_csv(path, ["context", "objective", "ablation", "branch_id",
                          "cost", "accuracy", "latency_ms", "energy_j"], rows)
        written.append(path)
        if args.svg:
            svg_path = os.path.join(args.out, f"frontier_{objective}.svg")
            _render_frontier_svg(svg_path, rows, objective)
            written.append(svg_path)
    print("wrote " + ", ".join(written))
    return EXIT_OK


def cmd_simulate(args):
    scenario = load_scenario(args.scenario, args.seed)
    store = load_profiles(args.profiles, domain=scenario.domain)
    os.makedirs(args.out, exist_ok=True)
    ctx0 = scenario.contexts[0]
    budget = scenario.budgets[0]
    idle_w = _idle_watts(ctx0, args.net_energy)
    steps = [(frame, replace(ctx0, contention_level=level))
             for frame, level in scenario.contention_schedule]
    hook, state = budget_schedule_hook(store, scenario.domain, budget,
                                       scenario.tracked_objects, idle_w,
                                       fallback_closest=args.fallback_closest)
    try:
        first_decision = schedule(store, scenario.domain, ctx0, budget,
                                  scenario.tracked_objects, idle_w)
        initial = first_decision.branch
    except NoFeasibleBranch as exc:
        if not args.fallback_closest:
            print(f"error: no feasible branch at start: {exc}", file=sys.stderr)
            return EXIT_INFEASIBLE
        initial = schedule(store, scenario.domain, ctx0, Budget(),
                           scenario.tracked_objects, idle_w).branch
    sim = simulate_stream(initial, ctx0, scenario.kernel, scenario.frames,
                          schedule_hook=hook, context_steps=steps,
                          seed=scenario.seed)
    gof_path = os.path.join(args.out, "gof.csv")
    power_path = os.path.join(args.out, "power.csv")
    write_gof_csv(gof_path, sim.gof_records)
    write_power_csv(power_path, sim.power_trace)
    summary = dict(sim.summary)
    summary["scenario"] = scenario.name
    summary["context"] = ctx0.label()
    summary["budget_e0"] = budget.energy_j_per_frame
    summary["budget_l0"] = budget.latency_ms_per_frame
    summary["infeasible_gofs"] = state["infeasible"]
    summary_path = os.path.join(args.out, "summary.json")
    _atomic_write(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    written = [gof_path, power_path, summary_path]
    if args.svg:
        svg_path = os.path.join(args.out, "power.svg")
        _render_power_svg(svg_path, sim.power_trace)
        written.append(svg_path)
    print("wrote " + ", ".join(written))
    print(f"mean latency {summary['mean_latency_ms_per_frame']:.3f} ms/frame, "
          f"{summary['energy_j_per_frame']:.4f} J/frame, "
          f"{summary['branch_switches']} branch switches")
    return EXIT_OK


def cmd_contend(args):
    report = run_cpu_load(args.level, args.duration, args.workers)
    print(f"target {report.target_level}% x {report.workers} workers for "
          f"{report.duration_s}s -> achieved {report.achieved_percent:.1f}% "
          f"(per worker: {', '.join(f'{d:.1f}' for d in report.worker_duty_percent)})")
    return EXIT_OK


def _parse_float(value):
    return None if value in ("", None) else float(value)


def _verify_frontier(path, problems):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    groups = {}
    for row in rows:
        groups.setdefault((row["context"], row["objective"], row["ablation"]), []).append(row)
    for key, group in groups.items():
        costs = [float(r["cost"]) for r in group]
        accs = [float(r["accuracy"]) for r in group]
        if costs != sorted(costs):
            problems.append(f"{path}: frontier {key} not sorted by cost")
        if any(b <= a for a, b in zip(accs, accs[1:])):
            problems.append(f"{path}: frontier {key} accuracy not strictly increasing")
        for i in range(len(group)):
            for j in range(len(group)):
                if i != j and costs[j] <= costs[i] and accs[j] >= accs[i] and (
                        costs[j] < costs[i] or accs[j] > accs[i]):
                    problems.append(f"{path}: frontier {key} row {i} dominated by row {j}")


def _verify_sweep(path, problems):
    with open(path, "r", encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    by_ctx_l0 = {}
    for row in rows:
        by_ctx_l0.setdefault((row["context"], row["budget_l0"]), []).append(row)
    for key, group in by_ctx_l0.items():
        bounded = [r for r in group if r["budget_e0"] != ""]
        bounded.sort(key=lambda r: float(r["budget_e0"]))
        accs = [float(r["pred_accuracy"]) if r["branch_id"] != "NONE" else -1.0
                for r in bounded]
        if any(b < a for a, b in zip(accs, accs[1:])):
            problems.append(f"{path}: accuracy not monotone in relaxed e0 for {key}")
    for row in rows:
        if row["branch_id"] == "NONE":
            continue
        e0 = _parse_float(row["budget_e0"])
        l0 = _parse_float(row["budget_l0"])
        if e0 is not None and float(row["pred_energy_j"]) > e0:
            problems.append(f"{path}: row violates e0: {row}")
        if l0 is not None and int(row["feasible_count"]) > 0 and float(row["pred_latency_ms"]) > l0:
            problems.append(f"{path}: row violates l0: {row}")


def _verify_simulation(out_dir, problems):
    gof_path = os.path.join(out_dir, "gof.csv")
    power_path = os.path.join(out_dir, "power.csv")
    summary_path = os.path.join(out_dir, "summary.json")
    with open(gof_path, "r", encoding="utf-8", newline="") as fh:
        gof_rows = list(csv.DictReader(fh))
    for row in gof_rows:
        det = float(row["detector_ms"])
        trk = float(row["tracker_ms_total"])
        frames = int(row["frames"])
        stated = float(row["latency_ms_per_frame"])
        expect = (det + trk) / frames
        if not math.isclose(stated, expect, rel_tol=1e-9, abs_tol=1e-12):
            problems.append(f"{gof_path}: GoF {row['gof_index']} latency "
                            f"{stated} != (det+trk)/frames {expect}")
    with open(power_path, "r", encoding="utf-8", newline="") as fh:
        watts = [float(r["watts"]) for r in csv.DictReader(fh)]
    with open(summary_path, "r", encoding="utf-8") as fh:
        summary = json.load(fh)
    frames = int(summary["frames"])
    energy = predict_energy(watts, frames)
    if not math.isclose(energy, float(summary["energy_j_per_frame"]),
                        rel_tol=1e-9, abs_tol=1e-12):
        problems.append(f"{summary_path}: energy/frame {summary['energy_j_per_frame']}"
                        f" != trace integral {energy}")
    total = sum(float(r["detector_ms"]) + float(r["tracker_ms_total"]) for r in gof_rows)
    if not math.isclose(total / frames, float(summary["mean_latency_ms_per_frame"]),
                        rel_tol=1e-9, abs_tol=1e-12):
        problems.append(f"{summary_path}: mean latency does not match GoF records")


def cmd_verify(args):
    problems = []
    checked = []
    for name in ("frontier_latency.csv", "frontier_energy.csv"):
        path = os.path.join(args.dir, name)
        if os.path.exists(path):
            _verify_frontier(path, problems)
            checked.append(name)
    sweep = os.path.join(args.dir, "schedule_sweep.csv")
    if os.path.exists(sweep):
        _verify_sweep(sweep, problems)
        checked.append("schedule_sweep.csv")
    if os.path.exists(os.path.join(args.dir, "gof.csv")):
        _verify_simulation(args.dir, problems)
        checked.append("gof.csv+power.csv+summary.json")
    if not checked:
        print(f"error: nothing to verify under {args.dir}", file=sys.stderr)
        return EXIT_USAGE
    for problem in problems:
        print(f"FAIL {problem}")
    print(f"verified {', '.join(checked)}: "
          f"{'OK' if not problems else f'{len(problems)} problems'}")
    return EXIT_OK if not problems else EXIT_INVARIANT


def cmd_eval_map(args):
    dets = read_boxes_csv(args.detections)
    gts = read_boxes_csv(args.ground_truth)
    result = mean_ap(dets, gts, args.iou)
    doc = {"iou_threshold": result.iou_threshold,
           "per_class_ap": {str(c): ap for c, ap in sorted(result.per_class_ap.items())},
           "mean_ap": result.mean_ap}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out_file:
        _atomic_write(args.out_file, text)
        print(f"wrote {args.out_file}")
    else:
        print(text, end="")
    return EXIT_OK


# --- SVG rendering (dependency-free line/scatter plots) ---

def _svg_header(width, height):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">\n'
            f'<rect width="{width}" height="{height}" fill="white"/>\n')


def _scale(values, lo_px, hi_px):
    lo, hi = min(values), max(values)
    span = (hi - lo) or 1.0
    return lambda v: lo_px + (v - lo) / span * (hi_px - lo_px)


def _render_frontier_svg(path, rows, objective):
    width, height = 640, 420
    full = [(float(r[4]), float(r[5])) for r in rows if r[2] == ""]
    if not full:
        return
    sx = _scale([c for c, _ in full], 50, width - 20)
    sy = _scale([a for _, a in full], height - 40, 20)
    parts = [_svg_header(width, height)]
    points = " ".join(f"{sx(c):.1f},{sy(a):.1f}" for c, a in full)
    parts.append(f'<polyline points="{points}" fill="none" stroke="#1f6fb2" stroke-width="2"/>\n')
    for c, a in full:
        parts.append(f'<circle cx="{sx(c):.1f}" cy="{sy(a):.1f}" r="3" fill="#1f6fb2"/>\n')
    parts.append(f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" '
                 f'font-size="12">{objective} per frame</text>\n')
    parts.append(f'<text x="14" y="{height / 2:.0f}" font-size="12" '
                 f'transform="rotate(-90 14 {height / 2:.0f})">accuracy</text>\n')
    parts.append("</svg>\n")
    _atomic_write(path, "".join(parts))


def _render_power_svg(path, trace):
    width, height = 640, 280
    pts = [(float(t), w) for t, w in trace.samples]
    if len(pts) < 2:
        pts = pts + [(pts[0][0] + 1.0, pts[0][1])]
    sx = _scale([t for t, _ in pts], 50, width - 20)
    sy = _scale([w for _, w in pts] + [0.0], height - 40, 20)
    parts = [_svg_header(width, height)]
    points = " ".join(f"{sx(t):.1f},{sy(w):.1f}" for t, w in pts)
    parts.append(f'<polyline points="{points}" fill="none" stroke="#b23a1f" stroke-width="1.5"/>\n')
    parts.append(f'<text x="{width / 2:.0f}" y="{height - 8}" text-anchor="middle" '
                 f'font-size="12">time (s)</text>\n')
    parts.append(f'<text x="14" y="{height / 2:.0f}" font-size="12" '
                 f'transform="rotate(-90 14 {height / 2:.0f})">watts</text>\n')
    parts.append("</svg>\n")
    _atomic_write(path, "".join(parts))


# --- argument parsing ---

def build_parser():
    parser = argparse.ArgumentParser(
        prog="branchsched",
        description="Adaptive multi-branch detection runtime: profiling, "
                    "scheduling, frontier extraction, and pipeline simulation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, profiles=False):
        p.add_argument("--scenario", required=True, help="scenario JSON path")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override scenario seed")
        p.add_argument("--net-energy", action="store_true",
                       help="subtract idle watts from predicted energy")
        p.add_argument("--fallback-closest", action="store_true",
                       help="on infeasible budgets fall back to the min-latency branch")
        if profiles:
            p.add_argument("--profiles", required=True, help="profile JSON path")

    p = sub.add_parser("profile", help="generate offline profiles")
    common(p)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("schedule", help="budget sweep over contexts")
    common(p, profiles=True)
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("frontier", help="Pareto frontier extraction")
    common(p, profiles=True)
    p.add_argument("--ablate", default=None,
                   help="single knob name or 'all' for per-knob frontiers")
    p.add_argument("--svg", action="store_true", help="also render SVG plots")
    p.set_defaults(func=cmd_frontier)

    p = sub.add_parser("simulate", help="streaming pipeline simulation")
    common(p, profiles=True)
    p.add_argument("--svg", action="store_true", help="also render SVG plots")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("contend", help="run the CPU duty-cycle load generator")
    p.add_argument("--level", type=float, required=True, help="duty percent in [0, 99]")
    p.add_argument("--duration", type=float, required=True, help="seconds")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_contend)

    p = sub.add_parser("verify", help="re-validate invariants from output files")
    p.add_argument("--dir", required=True, help="directory with emitted files")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval-map", help="mAP of detection CSV vs ground-truth CSV")
    p.add_argument("--detections", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--iou", type=float, default=0.5)
    p.add_argument("--out", dest="out_file", default=None, help="write JSON here")
    p.set_defaults(func=cmd_eval_map)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (BranchSchedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
