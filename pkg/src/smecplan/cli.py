"""Command-line front end.

Verbs: plan one scenario, sweep a parameter, compare strategies on a task,
cross-check the solver against the grid oracle, and list bundled scenarios.
Exit codes: 0 solved/ok, 2 infeasible, 1 error. Set SMEC_LOG=debug|info for
progress logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .linkbudget import RateTable
from .optimizer import Infeasible
from .scenario import (
    LabeledResult,
    ScenarioConfig,
    ScenarioError,
    builtin_scenarios,
    emit_results,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from .strategies import (
    STRATEGIES,
    SWEEPABLE,
    compare_task,
    multi_frame_savings,
    oracle_check,
    run_sweep,
    solve,
    solve_per_frame,
)

log = logging.getLogger("smecplan")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INFEASIBLE = 2


def _setup_logging() -> None:
    level = os.environ.get("SMEC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")


def _resolve_scenario(ref: str) -> ScenarioConfig:
    builtins = builtin_scenarios()
    if ref in builtins:
        return builtins[ref]
    return load_scenario(ref)


def _apply_overrides(cfg: ScenarioConfig, overrides) -> ScenarioConfig:
    if not overrides:
        return cfg
    data = scenario_to_dict(cfg)
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        parts = key.strip().split(".")
        if len(parts) != 2:
            raise ScenarioError(f"override key {key!r} must be section.field")
        section, fieldname = parts
        if section not in data:
            raise ScenarioError(f"override section {section!r} unknown")
        from .scenario import _parse_value  # same literal grammar as scenario files

        data[section][fieldname] = _parse_value(raw, f"override {key}")
    return scenario_from_dict(data)


def _load_table(path) -> RateTable:
    return RateTable.from_csv(path) if path else RateTable.shannon_default()


def _parse_values(spec: str):
    """Accept '1:40' (inclusive int range), '1:40:2', or 'a,b,c'."""
    if ":" in spec:
        parts = [int(p) for p in spec.split(":")]
        lo, hi = parts[0], parts[1]
        step = parts[2] if len(parts) > 2 else 1
        return list(range(lo, hi + 1, step))
    vals = []
    for tok in spec.split(","):
        tok = tok.strip()
        vals.append(float(tok) if ("." in tok or "e" in tok.lower()) else int(tok))
    return vals


def cmd_plan(args) -> int:
    cfg = _apply_overrides(_resolve_scenario(args.scenario), args.override)
    table = _load_table(args.rate_table)
    images = int(sum(cfg.task.frame_widths))
    name = Path(args.scenario).stem
    try:
        if args.strategy == "per-frame":
            plan = solve_per_frame(cfg, table)
        else:
            plan = solve(cfg, args.strategy, table)
    except Infeasible as exc:
        emit_results(
            [LabeledResult(name, args.strategy, "task", images, infeasible_binding=exc.binding)],
            args.out,
        )
        print(f"infeasible: binding constraint {exc.binding}", file=sys.stderr)
        return EXIT_INFEASIBLE
    emit_results([LabeledResult(name, args.strategy, "task", images, plan=plan)], args.out)
    total = plan.total_energy_j()
    per_img = total / images if images else 0.0
    print(f"feasible: {total:.6g} J total, {per_img:.6g} J/image, results in {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _apply_overrides(_resolve_scenario(args.scenario), args.override)
    table = _load_table(args.rate_table)
    strategies = args.strategy or list(STRATEGIES)
    values = _parse_values(args.values)
    name = Path(args.scenario).stem
    results = run_sweep(name, cfg, args.param, values, strategies, table, jobs=args.jobs)
    emit_results(results, args.out)
    n_feas = sum(r.feasible for r in results)
    n_err = sum(bool(r.error) for r in results)
    print(f"sweep: {len(results)} runs, {n_feas} feasible, {n_err} errors; results in {args.out}")
    for strategy in strategies:
        feas_vals = [r.param for r in results if r.strategy == strategy and r.feasible]
        frontier = feas_vals[-1] if feas_vals else "none"
        print(f"  {strategy}: feasible up to {frontier}")
    return EXIT_OK if n_err == 0 else EXIT_ERROR


def cmd_compare(args) -> int:
    cfg = _apply_overrides(_resolve_scenario(args.scenario), args.override)
    table = _load_table(args.rate_table)
    name = Path(args.scenario).stem
    rows = compare_task(cfg, name, table)
    emit_results(rows, args.out)
    images = max(int(sum(cfg.task.frame_widths)), 1)
    print(f"{'strategy':<12} {'feasible':<9} {'total J':>12} {'J/image':>12}")
    for r in rows:
        if r.feasible:
            tot = r.plan.total_energy_j()
            print(f"{r.strategy:<12} {'yes':<9} {tot:>12.5g} {tot / images:>12.5g}")
        else:
            print(f"{r.strategy:<12} {'no':<9} {'-':>12} {r.infeasible_binding:>12}")
    saving = multi_frame_savings(rows)
    if saving is not None:
        print(f"joint-vs-per-frame saving: {100 * saving:.2f}%")
    joint = next((r for r in rows if r.strategy == "global"), None)
    return EXIT_OK if joint is not None and joint.feasible else EXIT_INFEASIBLE


def cmd_oracle_check(args) -> int:
    results = oracle_check(n_instances=args.instances, seed=args.seed)
    worst = 0.0
    all_ok = True
    for r in results:
        tag = "ok" if r["ok"] else "FAIL"
        note = r.get("note", "")
        ratio = r["ratio"]
        ratio_s = f"{ratio:.5f}" if ratio == ratio else "-"
        print(f"[{tag}] {r['label']}: solver/oracle = {ratio_s} {note}")
        if ratio == ratio:
            worst = max(worst, ratio)
        all_ok &= r["ok"]
    print(f"worst ratio {worst:.5f} over {len(results)} instances")
    return EXIT_OK if all_ok else EXIT_ERROR


def cmd_scenarios(_args) -> int:
    for name, cfg in builtin_scenarios().items():
        widths = cfg.task.frame_widths
        brief = f"K={len(widths)}, images={int(sum(widths))}, mode={cfg.topology_mode.value}"
        if cfg.topology_mode.value == "v_d_offset":
            brief += f"+{cfg.vd_offset_hops}"
        print(f"{name:<18} {brief}, eta={cfg.link.isl_tx_fraction}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="smecplan", description=__doc__)
    p.add_argument("--version", action="version", version=f"smecplan {__version__}")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp, with_strategy=True):
        sp.add_argument("--scenario", required=True, help="builtin name or scenario file path")
        sp.add_argument("--out", default="results", help="output directory for CSVs")
        sp.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE")
        sp.add_argument("--rate-table", default=None, help="CSV MODCOD table (default: Shannon grid)")

    sp = sub.add_parser("plan", help="solve one scenario with one strategy")
    common(sp)
    sp.add_argument("--strategy", default="global", choices=list(STRATEGIES) + ["per-frame"])
    sp.set_defaults(fn=cmd_plan)

    sp = sub.add_parser("sweep", help="solve across a parameter grid")
    common(sp)
    sp.add_argument("--param", required=True, choices=list(SWEEPABLE))
    sp.add_argument("--values", required=True, help="lo:hi[:step] or comma list")
    sp.add_argument("--strategy", action="append", choices=list(STRATEGIES), help="repeatable; default all")
    sp.add_argument("--jobs", type=int, default=1, help="parallel workers across grid points")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("compare", help="joint vs per-frame vs baselines on one task")
    common(sp)
    sp.set_defaults(fn=cmd_compare)

    sp = sub.add_parser("oracle-check", help="randomized solver-vs-grid-oracle verification")
    sp.add_argument("--instances", type=int, default=20)
    sp.add_argument("--seed", type=int, default=2024)
    sp.set_defaults(fn=cmd_oracle_check)

    sp = sub.add_parser("scenarios", help="list bundled scenarios")
    sp.set_defaults(fn=cmd_scenarios)
    return p


def main(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception as exc:  # surface anything unexpected as exit 1
        log.exception("unhandled failure")
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
