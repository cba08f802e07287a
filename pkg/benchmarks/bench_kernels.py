#!/usr/bin/env python3
"""Benchmark the compiled projection kernels against the NumPy fallback.

Times the raw projection primitives in-process and a few end-to-end solves
in subprocesses (the backend is chosen at import time, so each end-to-end
measurement needs a fresh interpreter).

Usage: python benchmarks/bench_kernels.py [--quick]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from smecplan import _kernels_py as pure  # noqa: E402

try:
    from smecplan import _kernels as compiled  # noqa: E402
except ImportError:
    compiled = None


def time_call(fn, *args, repeat=200):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def bench_projections():
    rng = np.random.default_rng(1)
    cases = {
        "rows 1x21": (rng.normal(size=(1, 21)), np.ones(1), np.ones(21)),
        "rows 82x21": (rng.normal(size=(82, 21)), np.ones(82), np.ones(21)),
    }
    print(f"{'kernel':<28} {'python':>12} {'compiled':>12} {'speedup':>9}")
    for name, (v, totals, caps) in cases.items():
        t_py = time_call(pure.proj_rows_simplex_box, v, totals, caps)
        if compiled:
            t_c = time_call(compiled.proj_rows_simplex_box, v, totals, caps)
            print(f"{'proj_' + name:<28} {t_py * 1e6:>10.1f}us {t_c * 1e6:>10.1f}us {t_py / t_c:>8.1f}x")
        else:
            print(f"{'proj_' + name:<28} {t_py * 1e6:>10.1f}us {'-':>12}")

    for k in (1, 82):
        u = rng.normal(size=(k, 21))
        a = np.abs(rng.normal(size=(3, 21 * k))) / (21 * k)
        b = np.array([0.9, 1.1, 1.0]) * k / 21
        args = (u, np.ones(k), np.ones(21), a, b, 600, 1e-11)
        t_py = time_call(pure.dykstra_project, *args, repeat=20)
        if compiled:
            t_c = time_call(compiled.dykstra_project, *args, repeat=20)
            print(f"{f'dykstra {k}x21, 3 planes':<28} {t_py * 1e3:>10.2f}ms {t_c * 1e3:>10.2f}ms {t_py / t_c:>8.1f}x")
        else:
            print(f"{f'dykstra {k}x21, 3 planes':<28} {t_py * 1e3:>10.2f}ms {'-':>12}")


SOLVE_SNIPPET = """
import time
from dataclasses import replace
import smecplan
from smecplan.scenario import ScenarioConfig, Task, builtin_scenarios
from smecplan.strategies import solve
cfg = {cfg}
t0 = time.perf_counter()
plan = solve(cfg, "global")
print(f"{{smecplan.kernel_backend}}\t{{time.perf_counter() - t0:.3f}}\t{{plan.total_energy_j():.6f}}")
"""

SOLVE_CASES = {
    "single frame, W=20": "ScenarioConfig(task=Task(frame_widths=(20,)))",
    "single frame, W=36, far dest": (
        "replace(builtin_scenarios()['sweep-v5-eta1'], "
        "task=replace(builtin_scenarios()['sweep-v5-eta1'].task, frame_widths=(36,)))"
    ),
    "island scan (K=82)": "builtin_scenarios()['lapalma']",
}


def bench_solves(quick=False):
    print()
    print(f"{'end-to-end solve':<28} {'python':>12} {'compiled':>12} {'energy match':>13}")
    cases = dict(list(SOLVE_CASES.items())[: 2 if quick else 3])
    for name, cfg_expr in cases.items():
        results = {}
        for backend, env_val in (("python", "1"), ("compiled", "0")):
            env = dict(os.environ, SMECPLAN_PURE=env_val)
            out = subprocess.run(
                [sys.executable, "-c", SOLVE_SNIPPET.format(cfg=cfg_expr)],
                capture_output=True,
                text=True,
                env=env,
            )
            if out.returncode != 0:
                print(out.stderr, file=sys.stderr)
                raise SystemExit(1)
            tag, secs, energy = out.stdout.strip().split("\t")
            results[backend if tag == backend else tag] = (float(secs), float(energy))
        t_py = results.get("python", (float("nan"), 0))[0]
        t_c = results.get("compiled", (float("nan"), 0))[0]
        e_match = "yes" if abs(results["python"][1] - results["compiled"][1]) <= 1e-6 * max(
            1.0, results["python"][1]
        ) else "DIFFERS"
        print(f"{name:<28} {t_py:>11.2f}s {t_c:>11.2f}s {e_match:>13}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="skip the long end-to-end case")
    args = parser.parse_args()
    if compiled is None:
        print("compiled kernels not built; showing fallback timings only")
    bench_projections()
    if compiled is not None:
        bench_solves(args.quick)
