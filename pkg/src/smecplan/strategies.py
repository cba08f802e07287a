"""Strategy runners shared by the CLI and the test suites.

Every CLI verb reduces to these functions, so identical inputs produce
identical CSVs whether driven from the command line or from library code.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from .energymodel import Plan, check_feasibility, total_energy
from .linkbudget import RateTable
from .optimizer import (
    Infeasible,
    OptimizerState,
    ProblemContext,
    baseline_direct,
    baseline_local,
    bcd_solve,
    oracle_grid_search,
)
from .scenario import LabeledResult, ScenarioConfig, Task, TopologyMode, build_snapshots

STRATEGIES = ("direct", "local", "global")


def make_state(cfg: ScenarioConfig) -> OptimizerState:
    state = OptimizerState()
    for key, value in cfg.optimizer_options:
        if not hasattr(state, key):
            raise ValueError(f"unknown optimizer option {key!r}")
        setattr(state, key, type(getattr(state, key))(value))
    return state


def build_problem(cfg: ScenarioConfig, table: Optional[RateTable] = None) -> ProblemContext:
    snaps = build_snapshots(cfg, table)
    return ProblemContext.build(cfg.frame_bits(), cfg.gtfp_s(), snaps, cfg.link, cfg.compute)


def solve(cfg: ScenarioConfig, strategy: str, table: Optional[RateTable] = None) -> Plan:
    """Solve one scenario with one strategy; raises Infeasible when it is."""
    ctx = build_problem(cfg, table)
    if strategy == "direct":
        return baseline_direct(ctx)
    if strategy == "local":
        return baseline_local(ctx, make_state(cfg))
    if strategy == "global":
        return bcd_solve(ctx, make_state(cfg))
    raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")


def solve_per_frame(cfg: ScenarioConfig, table: Optional[RateTable] = None) -> Plan:
    """Optimize every frame as its own single-frame task and stitch the plans.

    Slot timing, rates and routing come from the full-task snapshots, so each
    frame sees exactly the physics it would in the joint problem; only the
    resource pooling across frames is given up.
    """
    snaps = build_snapshots(cfg, table)
    bits = cfg.frame_bits()
    t_gtf = cfg.gtfp_s()
    x_rows, rho_parts, f_rows, traces = [], [], [], []
    for k in range(len(bits)):
        sub = ProblemContext.build(bits[k : k + 1], t_gtf, snaps[k : k + 1], cfg.link, cfg.compute)
        plan_k = bcd_solve(sub, make_state(cfg))  # Infeasible propagates
        x_rows.append(plan_k.X[0])
        rho_parts.append(plan_k.rho[0])
        f_rows.append(plan_k.F[0])
        traces.extend(plan_k.trace)
    plan = Plan(X=np.array(x_rows), rho=np.array(rho_parts), F=np.array(f_rows))
    full = ProblemContext.build(bits, t_gtf, snaps, cfg.link, cfg.compute)
    total, plan.energy_breakdown = total_energy(plan, snaps, cfg.link, cfg.compute)
    report = check_feasibility(
        plan, snaps, t_gtf, cfg.link, cfg.compute, bits, proc_tol_cycles=full.cycles_cap * 1e-6
    )
    plan.feasible = report.feasible and math.isfinite(total)
    plan.violations = [c.name for c in report.violated()]
    plan.trace = traces
    return plan


# ---------------------------------------------------------------------------
# Sweeps
# ---------------------------------------------------------------------------

SWEEPABLE = ("W", "K", "eta", "d_gsd")


def apply_sweep_value(cfg: ScenarioConfig, param: str, value) -> ScenarioConfig:
    if param == "W":
        return replace(cfg, task=replace(cfg.task, frame_widths=(int(value),)))
    if param == "K":
        w0 = cfg.task.frame_widths[0]
        widths = (w0,) + (0,) * (int(value) - 1)
        return replace(cfg, task=replace(cfg.task, frame_widths=widths))
    if param == "eta":
        return replace(cfg, link=replace(cfg.link, isl_tx_fraction=float(value)))
    if param == "d_gsd":
        return replace(cfg, imaging=replace(cfg.imaging, gsd_m=float(value)))
    raise ValueError(f"unsweepable parameter {param!r}; expected one of {SWEEPABLE}")


def _sweep_point(args):
    name, cfg, param, value, strategy, table_rows = args
    table = RateTable(*table_rows) if table_rows else None
    point = apply_sweep_value(cfg, param, value)
    images = int(sum(point.task.frame_widths))
    label = f"{param}={value}"
    try:
        plan = solve(point, strategy, table)
        return LabeledResult(name, strategy, label, images, plan=plan)
    except Infeasible as exc:
        return LabeledResult(name, strategy, label, images, infeasible_binding=exc.binding)
    except Exception as exc:  # keep the sweep going; the row records the error
        return LabeledResult(name, strategy, label, images, error=f"{type(exc).__name__}: {exc}")


def run_sweep(
    name: str,
    cfg: ScenarioConfig,
    param: str,
    values: Sequence,
    strategies: Sequence[str],
    table: Optional[RateTable] = None,
    jobs: int = 1,
) -> list:
    table_rows = (table.efficiencies, table.snr_thresholds) if table else None
    work = [(name, cfg, param, v, s, table_rows) for v in values for s in strategies]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_point, work))
    else:
        results = [_sweep_point(w) for w in work]
    return results  # grid order: values outer, strategies inner


# ---------------------------------------------------------------------------
# Multi-frame vs per-frame comparison
# ---------------------------------------------------------------------------


def compare_task(cfg: ScenarioConfig, name: str, table: Optional[RateTable] = None) -> list:
    """Global joint optimization vs per-frame-independent vs both baselines."""
    images = int(sum(cfg.task.frame_widths))
    rows = []

    def attempt(strategy, fn):
        try:
            rows.append(LabeledResult(name, strategy, f"K={len(cfg.task.frame_widths)}", images, plan=fn()))
        except Infeasible as exc:
            rows.append(
                LabeledResult(
                    name, strategy, f"K={len(cfg.task.frame_widths)}", images, infeasible_binding=exc.binding
                )
            )

    attempt("global", lambda: solve(cfg, "global", table))
    attempt("per-frame", lambda: solve_per_frame(cfg, table))
    attempt("direct", lambda: solve(cfg, "direct", table))
    attempt("local", lambda: solve(cfg, "local", table))
    return rows


def multi_frame_savings(rows: Sequence[LabeledResult]) -> Optional[float]:
    """Relative energy saving of joint optimization over per-frame (0..1)."""
    by = {r.strategy: r for r in rows}
    joint, per = by.get("global"), by.get("per-frame")
    if not (joint and per and joint.feasible and per.feasible):
        return None
    e_joint = joint.plan.total_energy_j()
    e_per = per.plan.total_energy_j()
    if e_per <= 0:
        return 0.0
    return 1.0 - e_joint / e_per


# ---------------------------------------------------------------------------
# Randomized solver-vs-oracle instances
# ---------------------------------------------------------------------------


def oracle_instances(n_instances: int = 20, seed: int = 2024) -> list:
    """Small randomized tasks where exhaustive grid search is tractable."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n_instances):
        k_frames = 1 if i % 4 else 2
        eta = float(rng.choice([0.1, 1.0]))
        offset = int(rng.choice([0, 2, 5]))
        w1 = int(rng.integers(1, 13))
        widths = (w1,) if k_frames == 1 else (w1, int(rng.integers(0, max(2, w1))))
        source = 5
        n_support = int(rng.integers(1, 4))
        support_choices = {
            1: [source],
            2: [source, (source + 1) % 20],
            3: [(source - 1) % 20, source, (source + 1) % 20],
        }
        support = support_choices[n_support]
        mode = TopologyMode.V_D_EQUALS_V0 if offset == 0 else TopologyMode.V_D_OFFSET
        cfg = ScenarioConfig(
            link=replace(ScenarioConfig().link, isl_tx_fraction=eta),
            task=Task(source_sat=source, frame_widths=widths),
            topology_mode=mode,
            vd_offset_hops=offset,
        )
        out.append((f"inst{i:02d}[W={widths},eta={eta},vd+{offset},sup={n_support}]", cfg, support))
    return out


def oracle_check(n_instances: int = 20, seed: int = 2024, ratio_cap: float = 1.02) -> list:
    """Run solver and grid oracle on each instance; returns result dicts."""
    results = []
    for label, cfg, support in oracle_instances(n_instances, seed):
        snaps = build_snapshots(cfg)
        ctx = ProblemContext.build(
            cfg.frame_bits(), cfg.gtfp_s(), snaps, cfg.link, cfg.compute, support=support
        )
        k_frames = len(cfg.task.frame_widths)
        rho_step, share_steps = (0.25, 20) if k_frames == 1 else (0.5, 10)
        entry = {"label": label, "ok": False, "ratio": math.nan}
        try:
            oracle_plan = oracle_grid_search(ctx, support, rho_step=rho_step, share_steps=share_steps)
        except Infeasible:
            oracle_plan = None
        try:
            solver_plan = bcd_solve(ctx, OptimizerState())
        except Infeasible:
            solver_plan = None
        if oracle_plan is None and solver_plan is None:
            entry.update(ok=True, note="both infeasible")
        elif oracle_plan is None:
            # The coarse grid can miss a thin feasible region the solver finds.
            entry.update(ok=solver_plan.feasible, note="grid infeasible, solver feasible")
        elif solver_plan is None:
            entry.update(ok=False, note="solver infeasible but grid found a plan")
        else:
            ratio = solver_plan.total_energy_j() / max(oracle_plan.total_energy_j(), 1e-300)
            entry.update(
                ok=bool(ratio <= ratio_cap and solver_plan.feasible),
                ratio=ratio,
                note="",
                solver_j=solver_plan.total_energy_j(),
                oracle_j=oracle_plan.total_energy_j(),
            )
        results.append(entry)
    return results
