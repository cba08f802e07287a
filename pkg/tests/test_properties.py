"""Randomized property suites for the solver and the energy model.

The solver-level properties share one pool of randomized micro-instances so
a thousand cases stay affordable; pure-function properties draw their own
thousand samples directly.
"""

from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smecplan.energymodel import Plan, compression_cycles, total_energy
from smecplan.optimizer import (
    Infeasible,
    OptimizerState,
    ProblemContext,
    bcd_solve,
    energy_rho_gradient,
    optimal_frequencies,
)
from smecplan.scenario import ScenarioConfig, Task, TopologyMode, build_snapshots

N_CASES = 1000
D_IMG = 49_766_400.0


@given(st.floats(min_value=1e-3, max_value=5.0))
@settings(max_examples=N_CASES)
def test_unit_ratio_costs_nothing(eps):
    assert compression_cycles(1.0, eps) == 0.0


@given(
    st.floats(min_value=1.0, max_value=20.0),
    st.floats(min_value=1e-3, max_value=2.0),
    st.floats(min_value=0.0, max_value=1e10),
)
@settings(max_examples=N_CASES)
def test_cycles_nonnegative_and_monotone(rho, eps, bits):
    c = compression_cycles(rho, eps)
    assert c >= 0.0
    assert compression_cycles(rho + 0.1, eps) > c - 1e-15


def _random_cfg(rng, max_w=10):
    eta = float(rng.choice([0.1, 0.4, 1.0]))
    offset = int(rng.choice([0, 1, 3, 5]))
    w = int(rng.integers(1, max_w + 1))
    mode = TopologyMode.V_D_EQUALS_V0 if offset == 0 else TopologyMode.V_D_OFFSET
    base = ScenarioConfig()
    return ScenarioConfig(
        link=replace(base.link, isl_tx_fraction=eta),
        task=Task(frame_widths=(w,)),
        topology_mode=mode,
        vd_offset_hops=offset,
    )


def _ctx_of(cfg):
    snaps = build_snapshots(cfg)
    return ProblemContext.build(cfg.frame_bits(), cfg.gtfp_s(), snaps, cfg.link, cfg.compute)


class TestEnergyAccountingIdentity:
    def test_thousand_random_plans(self, rng):
        cfg = ScenarioConfig(task=Task(frame_widths=(3, 1)))
        snaps = build_snapshots(cfg)
        bits = cfg.frame_bits()
        for _ in range(N_CASES):
            x = rng.dirichlet(np.ones(21), size=2) * bits[:, None]
            rho = rng.uniform(1.0, 20.0, size=2)
            f, _ = optimal_frequencies(x, rho, cfg.compute, cfg.gtfp_s())
            plan = Plan(X=x, rho=rho, F=f)
            total, breakdown = total_energy(plan, snaps, cfg.link, cfg.compute)
            assert total == breakdown["scatter"] + breakdown["gather"] + breakdown["proc"]
            assert total >= 0.0


class TestRhoGradientMatchesFiniteDifferences:
    def test_thousand_random_points(self, rng):
        cfg = ScenarioConfig(task=Task(frame_widths=(4, 2)))
        ctx = _ctx_of(cfg)
        checked = 0
        while checked < N_CASES:
            u = rng.dirichlet(np.ones(21), size=2)
            rho = rng.uniform(1.5, 18.0, size=2)
            loads = ctx.sat_loads(u, rho)
            # stay away from the clamp kink where the model is not smooth
            if np.any(np.abs(loads - ctx.cycles_cap) < 0.05 * ctx.cycles_cap):
                continue
            grad = energy_rho_gradient(ctx, u, rho)
            for k in range(2):
                h = 1e-5 * rho[k]
                up, down = rho.copy(), rho.copy()
                up[k] += h
                down[k] -= h
                fd = (ctx.energy(u, up) - ctx.energy(u, down)) / (2 * h)
                if abs(fd) > 1e-12 * ctx.e_ref:
                    assert grad[k] == pytest.approx(fd, rel=1e-6, abs=1e-12 * ctx.e_ref)
            checked += 1


@pytest.fixture(scope="module")
def solved_pool():
    """One thousand solved micro-instances shared by the solver properties."""
    rng = np.random.default_rng(424242)
    pool = []
    while len(pool) < N_CASES:
        cfg = _random_cfg(rng)
        ctx = _ctx_of(cfg)
        state = OptimizerState()
        try:
            plan = bcd_solve(ctx, state)
        except Infeasible:
            continue
        pool.append((cfg, ctx, state, plan))
    return pool


class TestSolverProperties:
    def test_feasible_plans_satisfy_every_constraint(self, solved_pool):
        from smecplan.energymodel import check_feasibility

        for cfg, ctx, state, plan in solved_pool:
            assert plan.feasible
            report = check_feasibility(
                plan,
                ctx.snapshots,
                ctx.gtfp_s,
                ctx.link,
                ctx.compute,
                ctx.frame_bits,
                proc_tol_cycles=ctx.cycles_cap * 1e-6,
            )
            assert report.feasible, report.violated()
            # rate constraints hold against their exact budgets
            assert report.by_name("downlink").slack >= 0.0
            for c in report.constraints:
                if c.name.startswith("isl["):
                    assert c.slack >= 0.0

    def test_closed_form_frequency_constancy(self, solved_pool):
        for cfg, ctx, state, plan in solved_pool:
            assert np.all(plan.F.max(axis=0) == plan.F.min(axis=0))
            assert np.all(plan.F <= cfg.compute.f_cpu_hz * (1 + 1e-12))
            # interior clocks are exactly the load-matching point: the
            # processing budget is used in full wherever the clock runs
            loads = ctx.sat_loads(plan.X / np.maximum(ctx.frame_bits[:, None], 1e-300), plan.rho)
            f = plan.F[0]
            busy = f > 0
            assert np.allclose(loads[busy] / ctx.knt, f[busy], rtol=1e-9)

    def test_complementary_slackness(self, solved_pool):
        for cfg, ctx, state, plan in solved_pool:
            resid = ctx.proc_residual_rel(
                plan.X / np.maximum(ctx.frame_bits[:, None], 1e-300), plan.rho
            )
            lam = state.lambda_proc
            for sat in range(ctx.n_sats):
                if lam[sat] > 1e-9:
                    assert resid[sat] <= state.tau_proc

    def test_monotone_outer_descent(self, solved_pool):
        for cfg, ctx, state, plan in solved_pool:
            feas_rows = [
                r
                for r in plan.trace
                if r["proc_residual"] <= 1e-6 and r["downlink_residual"] <= 1e-6 and r["isl_residual"] <= 1e-6
            ]
            energies = [r["objective_j"] for r in feas_rows]
            for a, b in zip(energies, energies[1:]):
                assert b <= a * (1 + 1e-9)

    def test_multiplier_nonnegativity(self, solved_pool):
        for cfg, ctx, state, plan in solved_pool:
            assert np.all(state.lambda_proc >= 0)
            assert state.lambda_dl >= 0
            assert np.all(state.lambda_isl >= 0)
            assert np.all(state.lambda_rho >= 0)
            assert np.all(state.alpha_proc > 0)


class TestScalingInvariance:
    def test_common_power_rescaling(self, rng):
        for _ in range(N_CASES):
            cfg = _random_cfg(rng, max_w=5)
            kappa = float(rng.uniform(0.2, 5.0))
            scaled = replace(
                cfg,
                link=replace(
                    cfg.link,
                    tx_power_rf_w=cfg.link.tx_power_rf_w * kappa,
                    isl_power_w=cfg.link.isl_power_w * kappa,
                ),
                compute=replace(cfg.compute, p_proc_max_w=cfg.compute.p_proc_max_w * kappa),
            )
            try:
                plan_a = bcd_solve(_ctx_of(cfg), OptimizerState())
                plan_b = bcd_solve(_ctx_of(scaled), OptimizerState())
            except Infeasible:
                continue
            assert plan_b.total_energy_j() == pytest.approx(kappa * plan_a.total_energy_j(), rel=1e-6)
            delta = OptimizerState().delta
            du = np.linalg.norm((plan_b.X - plan_a.X) / np.maximum(cfg.frame_bits()[:, None], 1.0))
            drho = np.linalg.norm((plan_b.rho - plan_a.rho) / cfg.compute.rho_max)
            assert du + drho <= 2 * delta
