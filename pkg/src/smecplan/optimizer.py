"""Energy-minimizing planner: frequency closed form, penalty-based allocation
and compression steps, and the alternating outer loop that ties them together.

Solver layout
-------------
* CPU frequencies are never free variables: for a given allocation and
  compression vector, the cheapest feasible clock is the per-satellite
  average load over the task, clamped at the hardware maximum (clamping
  flags the plan as processing-infeasible until the allocation moves).
* The allocation step minimizes energy plus an augmented-Lagrangian penalty
  on the processing load, over the exact rate polytope: per-frame simplex
  boxes intersected with the downlink and ISL halfspaces. Iterates stay in
  the polytope via Dykstra's alternating projection (compiled kernel when
  available).
* The compression step runs projected gradient on rho in [1, rho_max] with
  augmented-Lagrangian terms for the rate constraints, refreshing the
  closed-form frequencies between multiplier updates.
* The outer loop alternates the two blocks until both stall, then polishes
  at a tighter tolerance. A returned plan is always exactly rate-feasible;
  persistent residuals raise Infeasible with the binding constraint named.

All internal iterates are normalized (allocation shares in [0,1], rho scaled
by rho_max, energies by a per-problem reference), which makes iteration
behaviour invariant to a common rescaling of the power parameters.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .energymodel import (
    ComplexityModel,
    ComputeConfig,
    Plan,
    check_feasibility,
    compression_cycles,
    compression_cycles_deriv,
    gather_bit_costs,
    scatter_bit_costs,
    total_energy,
)
from .linkbudget import LinkConfig
from .topology import TopologySnapshot


class Infeasible(Exception):
    """No plan satisfies the constraints; carries the binding constraint name."""

    def __init__(self, binding: str, detail: str = ""):
        self.binding = binding
        super().__init__(f"infeasible: {binding}" + (f" ({detail})" if detail else ""))


class IterationCapExceeded(Exception):
    """The solver hit its iteration budget without a usable iterate."""


# Rate budgets are shrunk by this relative margin inside the solver so that
# returned plans satisfy the true budgets strictly (exact-feasibility contract).
# The ladder below it: Dykstra accepts residuals one decade smaller, and the
# final row-sum rescale moves usages by less than that again.
RATE_MARGIN = 1e-7

_BIG_COST = 1e9  # stand-in bit cost for unusable links (rateless slots)


@dataclass
class OptimizerState:
    """Multipliers, penalties, tolerances and step memory for one solve."""

    delta: float = 1e-3  # termination tolerance on normalized iterates
    tau_proc: float = 1e-6  # relative processing-residual threshold
    tau_rate: float = 1e-6  # relative rate-residual threshold
    beta: float = 0.5  # penalty growth is alpha / beta
    alpha0: float = 1.0
    armijo: float = 1e-4
    shrink: float = 0.5
    inner_cap: int = 5000  # projected-gradient iterations per inner solve
    block_cap: int = 40  # inner-solve/multiplier rounds per block visit
    outer_cap: int = 100
    time_cap_s: float = 240.0  # wall-clock backstop per solve
    multi_start: int = 0
    seed: int = 0

    # Mutable solve state:
    lambda_proc: Optional[np.ndarray] = None
    alpha_proc: Optional[np.ndarray] = None
    lambda_dl: float = 0.0
    alpha_dl: float = 1.0
    lambda_isl: Optional[np.ndarray] = None
    alpha_isl: Optional[np.ndarray] = None
    lambda_rho: Optional[np.ndarray] = None
    alpha_rho: Optional[np.ndarray] = None
    slack_proc: Optional[np.ndarray] = None
    slack_dl: float = 0.0
    slack_isl: Optional[np.ndarray] = None
    slack_rho: Optional[np.ndarray] = None
    step_x: float = 1.0
    step_rho: float = 0.1
    cap_exceeded: bool = False
    deadline: float = math.inf
    trace: list = field(default_factory=list)

    def out_of_time(self) -> bool:
        return time.monotonic() > self.deadline

    def reset(self, n_sats: int, n_frames: int, n_edges: int) -> None:
        self.lambda_proc = np.zeros(n_sats)
        self.alpha_proc = np.full(n_sats, self.alpha0)
        self.lambda_dl = 0.0
        self.alpha_dl = self.alpha0
        self.lambda_isl = np.zeros(n_edges)
        self.alpha_isl = np.full(n_edges, self.alpha0)
        self.lambda_rho = np.zeros(n_frames)
        self.alpha_rho = np.full(n_frames, self.alpha0)
        self.slack_proc = np.zeros(n_sats)
        self.slack_dl = 0.0
        self.slack_isl = np.zeros(n_edges)
        self.slack_rho = np.zeros(n_frames)
        self.step_x = 1.0
        self.step_rho = 0.1
        self.cap_exceeded = False
        self.trace = []
        self.deadline = time.monotonic() + self.time_cap_s


@dataclass
class ProblemContext:
    """Immutable numeric view of one task: costs, budgets, routing coefficients."""

    frame_bits: np.ndarray  # D_k, shape (K,)
    gtfp_s: float
    snapshots: Sequence[TopologySnapshot]
    link: LinkConfig
    compute: ComputeConfig
    n_sats: int
    scat_cost: np.ndarray  # (K, N+1) energy per raw bit, scatter phase
    gath_cost: np.ndarray  # (K, N+1) energy per raw bit before 1/rho, gather phase
    cycles_cap: float  # per-satellite cycle budget over the task
    knt: float  # K * n_cores * T_GTF
    dl_budget: float  # T_GTF * sum_k R_k [bits]
    isl_budget: float  # K * T_GTF * R_ISL [bits]
    edges: list  # enforced ISL edges as (node, direction)
    edge_scat: np.ndarray  # (E, K, N) scatter indicators per enforced edge
    edge_gath: np.ndarray  # (E, K, N) gather indicators
    edge_direct: np.ndarray  # (E, K) direct-download relay indicators
    col_caps: np.ndarray  # (N+1,) per-column share cap (0 closes a column)
    e_ref: float = 1.0

    @classmethod
    def build(
        cls,
        frame_bits: Sequence[float],
        gtfp_s: float,
        snapshots: Sequence[TopologySnapshot],
        link: LinkConfig,
        compute: ComputeConfig,
        support: Optional[Sequence[int]] = None,
    ) -> "ProblemContext":
        d = np.asarray(frame_bits, dtype=float)
        k_frames = len(d)
        if k_frames != len(snapshots) or k_frames < 1:
            raise ValueError("frame_bits and snapshots must align, K >= 1")
        n = snapshots[0].n_sats
        scat = np.empty((k_frames, n + 1))
        gath = np.empty((k_frames, n + 1))
        for k, snap in enumerate(snapshots):
            scat[k] = scatter_bit_costs(snap, link)
            gath[k] = gather_bit_costs(snap, link)
        # Rateless slots: replace infinite bit costs with a huge finite cost so
        # gradients stay defined; the final evaluator still treats them as hard.
        scat[~np.isfinite(scat)] = _BIG_COST
        gath[~np.isfinite(gath)] = _BIG_COST

        edges = snapshots[0].enforced_edges()
        n_edges = len(edges)
        e_scat = np.zeros((n_edges, k_frames, n))
        e_gath = np.zeros((n_edges, k_frames, n))
        e_direct = np.zeros((n_edges, k_frames))
        for j, edge in enumerate(edges):
            for k, snap in enumerate(snapshots):
                idx = snap.edge_index(*edge)
                e_scat[j, k] = snap.scatter_edge_use[idx]
                e_gath[j, k] = snap.gather_edge_use[idx]
                e_direct[j, k] = snap.direct_edge_use[idx]

        col_caps = np.ones(n + 1)
        if support is not None:
            col_caps[:n] = 0.0
            for sat in support:
                col_caps[sat] = 1.0

        ctx = cls(
            frame_bits=d,
            gtfp_s=gtfp_s,
            snapshots=list(snapshots),
            link=link,
            compute=compute,
            n_sats=n,
            scat_cost=scat,
            gath_cost=gath,
            cycles_cap=k_frames * gtfp_s * compute.n_cores * compute.f_cpu_hz,
            knt=k_frames * compute.n_cores * gtfp_s,
            dl_budget=gtfp_s * sum(s.downlink_rate_bps for s in snapshots),
            isl_budget=k_frames * gtfp_s * link.isl_rate_bps,
            edges=edges,
            edge_scat=e_scat,
            edge_gath=e_gath,
            edge_direct=e_direct,
            col_caps=col_caps,
        )
        ctx.e_ref = max(ctx._reference_energy(), 1e-30)
        return ctx

    # -- energy pieces (bits-domain X is U * D[:, None]) --------------------

    def _reference_energy(self) -> float:
        """Scale for normalization: the all-at-source plan at rho_init."""
        rho0 = rho_init_from_parts(self.frame_bits, self.snapshots, self.gtfp_s, self.compute.rho_max)
        u0 = self.initial_shares()
        e = self.energy(u0, rho0)
        return e if math.isfinite(e) and e > 0 else 1.0

    def initial_shares(self) -> np.ndarray:
        u = np.zeros((len(self.frame_bits), self.n_sats + 1))
        src = self.snapshots[0].source_sat
        u[self.frame_bits > 0, src] = 1.0
        return u

    def cycles(self, rho: np.ndarray) -> np.ndarray:
        return np.asarray(
            compression_cycles(rho, self.compute.epsilon, self.compute.complexity_model)
        )

    def sat_loads(self, u: np.ndarray, rho: np.ndarray) -> np.ndarray:
        """Per-satellite cycle loads L_n."""
        dc = self.frame_bits * self.cycles(rho)
        return (u[:, : self.n_sats] * dc[:, None]).sum(axis=0)

    def proc_energy_of_loads(self, loads: np.ndarray) -> float:
        nu = self.compute.nu
        f_cap = self.compute.f_cpu_hz
        below = np.minimum(loads, self.cycles_cap)
        over = loads - below
        return float(nu * (below**3 / self.knt**2 + f_cap**2 * over).sum())

    def proc_energy_of_load_rows(self, loads: np.ndarray) -> np.ndarray:
        """Vectorized proc energy for a batch of load rows, shape (..., N)."""
        nu = self.compute.nu
        below = np.minimum(loads, self.cycles_cap)
        over = loads - below
        return nu * (below**3 / self.knt**2 + self.compute.f_cpu_hz**2 * over).sum(axis=-1)

    def proc_energy_grad_factor(self, loads: np.ndarray) -> np.ndarray:
        """d(proc energy)/dL_n."""
        nu = self.compute.nu
        f = np.minimum(loads / self.knt, self.compute.f_cpu_hz)
        clamped = loads > self.cycles_cap
        out = 3.0 * nu * f**2
        out[clamped] = nu * self.compute.f_cpu_hz**2
        return out

    def comm_coef(self, rho: np.ndarray) -> np.ndarray:
        """(K, N+1) energy coefficient of u for the communication phases."""
        return self.frame_bits[:, None] * (self.scat_cost + self.gath_cost / rho[:, None])

    def energy(self, u: np.ndarray, rho: np.ndarray) -> float:
        comm = float((u * self.comm_coef(rho)).sum())
        return comm + self.proc_energy_of_loads(self.sat_loads(u, rho))

    # -- constraint usages ---------------------------------------------------

    def dl_usage(self, u: np.ndarray, rho: np.ndarray) -> float:
        x = u * self.frame_bits[:, None]
        return float(x[:, self.n_sats].sum() + (x[:, : self.n_sats].sum(axis=1) / rho).sum())

    def isl_usage(self, u: np.ndarray, rho: np.ndarray) -> np.ndarray:
        x = u * self.frame_bits[:, None]
        xs = x[:, : self.n_sats]
        out = np.empty(len(self.edges))
        for j in range(len(self.edges)):
            out[j] = float(
                (x[:, self.n_sats] * self.edge_direct[j]).sum()
                + (xs * (self.edge_scat[j] + self.edge_gath[j] / rho[:, None])).sum()
            )
        return out

    def proc_residual_rel(self, u: np.ndarray, rho: np.ndarray) -> np.ndarray:
        return (self.sat_loads(u, rho) - self.cycles_cap) / self.cycles_cap

    def rate_residuals_rel(self, u: np.ndarray, rho: np.ndarray):
        dl = (self.dl_usage(u, rho) - self.dl_budget) / max(self.dl_budget, 1e-30)
        isl = (self.isl_usage(u, rho) - self.isl_budget) / self.isl_budget
        return dl, isl

    # -- halfspace matrices for the allocation polytope ----------------------

    def halfspaces(self, rho: np.ndarray):
        """(A, b) with A u_flat <= b encoding downlink and enforced-ISL budgets.

        Rows are scaled by their budgets so every constraint lives in the
        same normalized units as the allocation shares.
        """
        k_frames, n = len(self.frame_bits), self.n_sats
        rows = []
        rhs = []
        if self.dl_budget > 0:
            a_dl = np.empty((k_frames, n + 1))
            a_dl[:, :n] = (self.frame_bits / rho)[:, None]
            a_dl[:, n] = self.frame_bits
            rows.append(a_dl.reshape(-1) / self.dl_budget)
            rhs.append(1.0 - RATE_MARGIN)
        for j in range(len(self.edges)):
            a = np.empty((k_frames, n + 1))
            a[:, :n] = self.frame_bits[:, None] * (self.edge_scat[j] + self.edge_gath[j] / rho[:, None])
            a[:, n] = self.frame_bits * self.edge_direct[j]
            rows.append(a.reshape(-1) / self.isl_budget)
            rhs.append(1.0 - RATE_MARGIN)
        if not rows:
            return np.zeros((0, k_frames * (n + 1))), np.zeros(0)
        return np.vstack(rows), np.array(rhs)


# ---------------------------------------------------------------------------
# Closed-form frequencies and the rho initializer
# ---------------------------------------------------------------------------


def optimal_frequencies(x_bits: np.ndarray, rho: np.ndarray, compute: ComputeConfig, gtfp_s: float):
    """Cheapest feasible per-satellite clock: average load over the task.

    Returns (F, clamped) where F is (K, N) with one constant value per
    satellite column, and clamped marks satellites whose load does not fit
    even at the maximum clock (their F is pinned there so iteration can
    continue, but the plan is not processing-feasible).
    """
    k_frames, n = x_bits.shape[0], x_bits.shape[1] - 1
    cyc = np.asarray(compression_cycles(rho, compute.epsilon, compute.complexity_model))
    loads = (x_bits[:, :n] * cyc[:, None]).sum(axis=0)
    f_n = loads / (k_frames * compute.n_cores * gtfp_s)
    clamped = f_n > compute.f_cpu_hz
    f_n = np.minimum(f_n, compute.f_cpu_hz)
    return np.tile(f_n, (k_frames, 1)), clamped


def rho_init_from_parts(frame_bits, snapshots, gtfp_s: float, rho_max: float) -> np.ndarray:
    """Per-frame starting ratio: just enough compression for the slot downlink."""
    out = np.empty(len(frame_bits))
    for k, snap in enumerate(snapshots):
        r = snap.downlink_rate_bps
        if r <= 0:
            out[k] = rho_max
        else:
            out[k] = min(max(1.0, frame_bits[k] / (gtfp_s * r)), rho_max)
    return out


def rho_init(ctx: ProblemContext) -> np.ndarray:
    return rho_init_from_parts(ctx.frame_bits, ctx.snapshots, ctx.gtfp_s, ctx.compute.rho_max)


# ---------------------------------------------------------------------------
# Augmented-Lagrangian helpers (inequality form, slacks minimized out)
# ---------------------------------------------------------------------------


def _aug_value(lam, alpha, resid) -> float:
    m = np.maximum(0.0, lam + alpha * resid)
    return float(((m * m - np.square(lam)) / (2.0 * alpha)).sum())


def _aug_slope(lam, alpha, resid):
    return np.maximum(0.0, lam + alpha * resid)


# ---------------------------------------------------------------------------
# Allocation step (penalty method on the processing constraint)
# ---------------------------------------------------------------------------


def _x_objective(ctx: ProblemContext, state: OptimizerState, u, rho) -> float:
    loads = ctx.sat_loads(u, rho)
    e = float((u * ctx.comm_coef(rho)).sum()) + ctx.proc_energy_of_loads(loads)
    resid = (loads - ctx.cycles_cap) / ctx.cycles_cap
    return e / ctx.e_ref + _aug_value(state.lambda_proc, state.alpha_proc, resid)


def _x_gradient(ctx: ProblemContext, state: OptimizerState, u, rho):
    n = ctx.n_sats
    loads = ctx.sat_loads(u, rho)
    dc = ctx.frame_bits * ctx.cycles(rho)  # (K,)
    grad = ctx.comm_coef(rho).copy()
    proc_slope = ctx.proc_energy_grad_factor(loads)  # (N,)
    grad[:, :n] += dc[:, None] * proc_slope[None, :]
    grad /= ctx.e_ref
    resid = (loads - ctx.cycles_cap) / ctx.cycles_cap
    pen = _aug_slope(state.lambda_proc, state.alpha_proc, resid) / ctx.cycles_cap
    grad[:, :n] += dc[:, None] * pen[None, :]
    return grad


def _project_allocation(ctx: ProblemContext, u, a_mat, b_vec, warm=None, max_cycles=2000):
    """Project onto the allocation polytope, optionally warm-starting Dykstra.

    A residual near float precision is a converged projection; anything
    larger signals an (almost) empty intersection at this rho. `warm` is a
    dict carrying correction vectors between projections of nearby points.
    """
    totals = (ctx.frame_bits > 0).astype(float)
    p_rows = warm.get("rows") if warm else None
    p_half = warm.get("half") if warm else None
    proj, _, viol, p_rows, p_half = kernels.dykstra_project(
        u, totals, ctx.col_caps, a_mat, b_vec, max_cycles, 1e-11, p_rows, p_half
    )
    if warm is not None:
        warm["rows"], warm["half"] = p_rows, p_half
    return proj, viol <= 1e-8, viol


def _pg_minimize_x(ctx, state, u, rho, a_mat, b_vec, tol, cap):
    """Projected-gradient descent of the allocation objective; returns new u.

    One warm-started projection per backtracking trial; the step size is
    remembered across calls so later solves start near the right scale.
    """
    warm = {}
    u, ok, _ = _project_allocation(ctx, u, a_mat, b_vec, warm)
    if not ok:
        return u, False
    obj = _x_objective(ctx, state, u, rho)
    # A degenerate remembered step would make every move pass the descent
    # test while going nowhere; re-enter at a workable scale and let the
    # line search shrink it again if needed.
    step = max(state.step_x, 1e-3)
    stall_streak = 0
    for _ in range(cap):
        g = _x_gradient(ctx, state, u, rho)
        moved = False
        for _ in range(30):
            v, ok, _ = _project_allocation(ctx, u - step * g, a_mat, b_vec, warm, max_cycles=600)
            if not ok:
                # Projection trouble is about the set, not the step: retry
                # cold once, then hand control back to the outer blocks.
                v, ok, _ = _project_allocation(ctx, u - step * g, a_mat, b_vec, max_cycles=3000)
                if not ok:
                    state.step_x = step
                    return u, False
            new_obj = _x_objective(ctx, state, v, rho)
            gain = float((g * (v - u)).sum())
            if new_obj <= obj + state.armijo * gain + 1e-15:
                moved = True
                break
            step *= state.shrink
        if not moved:
            break
        delta = float(np.linalg.norm(v - u))
        stall_streak = stall_streak + 1 if obj - new_obj <= 1e-12 * max(1.0, abs(obj)) else 0
        u, obj = v, new_obj
        step = min(step * 1.4, 1e6)
        if delta <= tol or stall_streak >= 3:
            break
    state.step_x = step
    # Final exact (cold) projection so the returned point is cleanly inside.
    u_exact, ok, _ = _project_allocation(ctx, u, a_mat, b_vec)
    return (u_exact if ok else u), True


def ipdd_allocation(ctx: ProblemContext, u, rho, state: OptimizerState):
    """Allocation block: inexact primal solves alternated with multiplier updates.

    Frequencies are implicit in the objective (always the closed-form optimum
    for the current allocation), so each primal solve already reflects the
    latest refresh; multipliers and penalties for the processing constraint
    move between solves.
    """
    a_mat, b_vec = ctx.halfspaces(rho)
    pg_tol = max(0.05 * state.delta, 1e-6)
    for _ in range(state.block_cap):
        if state.out_of_time():
            state.cap_exceeded = True
            break
        u_prev = u.copy()
        u, ok = _pg_minimize_x(ctx, state, u, rho, a_mat, b_vec, pg_tol, state.inner_cap)
        if not ok:
            # Empty or numerically stuck polytope at this rho: let the
            # compression block move first.
            return u_prev, False
        resid = ctx.proc_residual_rel(u, rho)
        state.slack_proc = np.maximum(0.0, -resid)
        grow = resid > state.tau_proc
        state.lambda_proc = np.where(
            grow, state.lambda_proc, np.maximum(0.0, state.lambda_proc + state.alpha_proc * resid)
        )
        state.alpha_proc = np.where(grow, state.alpha_proc / state.beta, state.alpha_proc)
        if float(np.linalg.norm(u - u_prev)) <= state.delta:
            break
    return u, True


# ---------------------------------------------------------------------------
# Compression step (projected gradient on rho)
# ---------------------------------------------------------------------------


def _rho_objective(ctx, state, u, rho) -> float:
    loads = ctx.sat_loads(u, rho)
    e = float((u * ctx.comm_coef(rho)).sum()) + ctx.proc_energy_of_loads(loads)
    val = e / ctx.e_ref
    val += _aug_value(state.lambda_proc, state.alpha_proc, (loads - ctx.cycles_cap) / ctx.cycles_cap)
    dl_res, isl_res = ctx.rate_residuals_rel(u, rho)
    val += _aug_value(np.array([state.lambda_dl]), np.array([state.alpha_dl]), np.array([dl_res]))
    if len(ctx.edges):
        val += _aug_value(state.lambda_isl, state.alpha_isl, isl_res)
    cap_res = (rho - ctx.compute.rho_max) / ctx.compute.rho_max
    val += _aug_value(state.lambda_rho, state.alpha_rho, cap_res)
    return val


def energy_rho_gradient(ctx: ProblemContext, u, rho) -> np.ndarray:
    """d(total energy)/d(rho_k), pure energy terms only (no penalties)."""
    n = ctx.n_sats
    x = u * ctx.frame_bits[:, None]
    xs = x[:, :n]
    gather = (xs * ctx.gath_cost[:, :n]).sum(axis=1)
    grad = -gather / rho**2
    loads = ctx.sat_loads(u, rho)
    slope = ctx.proc_energy_grad_factor(loads)  # (N,)
    dcyc = np.asarray(compression_cycles_deriv(rho, ctx.compute.epsilon, ctx.compute.complexity_model))
    grad += (xs * slope[None, :]).sum(axis=1) * dcyc
    return grad


def _rho_gradient(ctx, state, u, rho) -> np.ndarray:
    n = ctx.n_sats
    x = u * ctx.frame_bits[:, None]
    xs = x[:, :n]
    grad = energy_rho_gradient(ctx, u, rho) / ctx.e_ref

    loads = ctx.sat_loads(u, rho)
    dcyc = np.asarray(compression_cycles_deriv(rho, ctx.compute.epsilon, ctx.compute.complexity_model))
    pen = _aug_slope(state.lambda_proc, state.alpha_proc, (loads - ctx.cycles_cap) / ctx.cycles_cap)
    grad += (xs * pen[None, :]).sum(axis=1) * dcyc / ctx.cycles_cap

    dl_res, isl_res = ctx.rate_residuals_rel(u, rho)
    dl_slope = float(_aug_slope(np.array([state.lambda_dl]), np.array([state.alpha_dl]), np.array([dl_res]))[0])
    grad += dl_slope * (-xs.sum(axis=1) / rho**2) / max(ctx.dl_budget, 1e-30)
    for j in range(len(ctx.edges)):
        s = float(_aug_slope(state.lambda_isl[j : j + 1], state.alpha_isl[j : j + 1], isl_res[j : j + 1])[0])
        if s:
            grad += s * (-(xs * ctx.edge_gath[j]).sum(axis=1) / rho**2) / ctx.isl_budget
    grad += _aug_slope(state.lambda_rho, state.alpha_rho, (rho - ctx.compute.rho_max) / ctx.compute.rho_max) / ctx.compute.rho_max
    return grad


def pg_compression(ctx: ProblemContext, u, rho, state: OptimizerState):
    """Compression block: projected gradient on rho with rate penalties."""
    rho_max = ctx.compute.rho_max
    active = ctx.frame_bits > 0
    pg_tol = max(0.05 * state.delta, 1e-6) * rho_max
    for _ in range(state.block_cap):
        if state.out_of_time():
            state.cap_exceeded = True
            break
        rho_prev = rho.copy()
        obj = _rho_objective(ctx, state, u, rho)
        step = max(state.step_rho, 1e-4)
        for _ in range(state.inner_cap):
            g = _rho_gradient(ctx, state, u, rho) * rho_max  # d/d(rho/rho_max)
            moved = False
            for _ in range(40):
                cand = np.clip(rho - step * g * rho_max * active, 1.0, rho_max)
                new_obj = _rho_objective(ctx, state, u, cand)
                gain = float((g * ((cand - rho) / rho_max)).sum())
                if new_obj <= obj + state.armijo * gain + 1e-15:
                    moved = True
                    break
                step *= state.shrink
            if not moved:
                break
            delta = float(np.linalg.norm((cand - rho) / rho_max))
            rho, obj = cand, new_obj
            step = min(step * 1.25, 1e6)
            if delta <= pg_tol / rho_max:
                break
        state.step_rho = step

        # Multiplier updates after refreshing frequencies (implicit) per block.
        resid = ctx.proc_residual_rel(u, rho)
        grow = resid > state.tau_proc
        state.lambda_proc = np.where(
            grow, state.lambda_proc, np.maximum(0.0, state.lambda_proc + state.alpha_proc * resid)
        )
        state.alpha_proc = np.where(grow, state.alpha_proc / state.beta, state.alpha_proc)
        dl_res, isl_res = ctx.rate_residuals_rel(u, rho)
        state.slack_dl = max(0.0, -dl_res)
        if dl_res > state.tau_rate:
            state.alpha_dl /= state.beta
        else:
            state.lambda_dl = max(0.0, state.lambda_dl + state.alpha_dl * dl_res)
        if len(ctx.edges):
            state.slack_isl = np.maximum(0.0, -isl_res)
            grow_e = isl_res > state.tau_rate
            state.lambda_isl = np.where(
                grow_e, state.lambda_isl, np.maximum(0.0, state.lambda_isl + state.alpha_isl * isl_res)
            )
            state.alpha_isl = np.where(grow_e, state.alpha_isl / state.beta, state.alpha_isl)
        cap_res = (rho - rho_max) / rho_max
        state.slack_rho = np.maximum(0.0, -cap_res)
        state.lambda_rho = np.maximum(0.0, state.lambda_rho + state.alpha_rho * cap_res)

        if float(np.linalg.norm((rho - rho_prev) / rho_max)) <= state.delta:
            break

    # Keep the allocation polytope non-empty: the fully processed plan must
    # still fit the downlink, otherwise no X can.
    min_dl = float((ctx.frame_bits[active] / rho[active]).sum())
    budget = ctx.dl_budget * (1 - RATE_MARGIN)
    if min_dl > budget and budget > 0:
        scale = min_dl / budget
        rho = np.where(active, np.minimum(rho * scale, rho_max), rho)
    return rho


# ---------------------------------------------------------------------------
# Feasibility probe and restoration (linear program over the allocation)
# ---------------------------------------------------------------------------


def probe_allocation(ctx: ProblemContext, rho: np.ndarray):
    """Max-placeable LP at fixed rho.

    Returns (feasible, x_bits_or_None, binding) where binding names the
    tightest constraint when the task cannot be fully placed.
    """
    from scipy.optimize import linprog

    k_frames, n = len(ctx.frame_bits), ctx.n_sats
    m = n + 1
    n_var = k_frames * m
    c = -np.ones(n_var)
    a_rows = []
    b_rows = []
    names = []

    for k in range(k_frames):
        row = np.zeros(n_var)
        row[k * m : (k + 1) * m] = 1.0
        a_rows.append(row)
        b_rows.append(ctx.frame_bits[k])
        names.append(f"placement[{k}]")

    cyc = ctx.cycles(rho)
    for sat in range(n):
        if ctx.col_caps[sat] == 0:
            continue
        row = np.zeros(n_var)
        for k in range(k_frames):
            row[k * m + sat] = cyc[k]
        a_rows.append(row)
        b_rows.append(ctx.cycles_cap)
        names.append(f"processing[{sat}]")

    row = np.zeros(n_var)
    for k in range(k_frames):
        row[k * m : k * m + n] = 1.0 / rho[k]
        row[k * m + n] = 1.0
    a_rows.append(row)
    b_rows.append(ctx.dl_budget * (1 - RATE_MARGIN))
    names.append("downlink")

    for j, edge in enumerate(ctx.edges):
        row = np.zeros(n_var)
        for k in range(k_frames):
            row[k * m : k * m + n] = ctx.edge_scat[j, k] + ctx.edge_gath[j, k] / rho[k]
            row[k * m + n] = ctx.edge_direct[j, k]
        a_rows.append(row)
        b_rows.append(ctx.isl_budget * (1 - RATE_MARGIN))
        names.append(f"isl[{edge[0]},{edge[1]:+d}]")

    bounds = []
    for k in range(k_frames):
        for col in range(m):
            cap = ctx.frame_bits[k] * ctx.col_caps[col] if col < n else ctx.frame_bits[k]
            bounds.append((0.0, cap))

    a_ub = np.array(a_rows)
    b_ub = np.array(b_rows)
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if not res.success:
        return False, None, "lp-failure"
    placed = -res.fun
    target = ctx.frame_bits.sum()
    if placed < target * (1 - 1e-9):
        marg = res.ineqlin.marginals
        binding = "downlink"
        worst = 0.0
        for i, name in enumerate(names):
            if name.startswith("placement"):
                continue
            if abs(marg[i]) > worst:
                worst = abs(marg[i])
                binding = name
        return False, None, binding

    # Second phase: among full placements, pick a cheap one (communication
    # cost plus a worst-case-clock processing linearization) so the iterative
    # solver starts near the optimum instead of at an arbitrary vertex.
    cost = np.empty((k_frames, m))
    cost[:, :] = ctx.scat_cost + ctx.gath_cost / rho[:, None]
    proc_lin = ctx.compute.nu * ctx.compute.f_cpu_hz**2 * cyc
    cost[:, :n] += proc_lin[:, None]
    res2 = linprog(
        cost.reshape(-1),
        A_ub=a_ub,
        b_ub=b_ub,
        A_eq=np.array([a_rows[k] for k in range(k_frames)]),
        b_eq=ctx.frame_bits,
        bounds=bounds,
        method="highs",
    )
    if res2.success:
        return True, res2.x.reshape(k_frames, m), ""
    return True, res.x.reshape(k_frames, m), ""


def _probe_rho_candidates(ctx: ProblemContext, rho0: np.ndarray):
    """Rho vectors worth probing when the initializer is not feasible."""
    cands = [rho0]
    active = ctx.frame_bits > 0
    if active.sum() <= 1 or len(set(np.round(rho0[active], 9))) == 1:
        for g in np.linspace(1.0, ctx.compute.rho_max, 80):
            cand = rho0.copy()
            cand[active] = np.clip(np.maximum(rho0[active], g), 1.0, ctx.compute.rho_max)
            cands.append(cand)
    else:
        for g in np.linspace(1.0, 2.0, 12):
            cands.append(np.clip(rho0 * g, 1.0, ctx.compute.rho_max))
    return cands


# ---------------------------------------------------------------------------
# Outer loop
# ---------------------------------------------------------------------------


def _assemble_plan(ctx: ProblemContext, u, rho, state: Optional[OptimizerState]) -> Plan:
    x = np.maximum(u, 0.0) * ctx.frame_bits[:, None]
    # Exact row sums: projection leaves at most float-level drift.
    sums = x.sum(axis=1)
    active = ctx.frame_bits > 0
    scale = np.ones_like(sums)
    scale[active] = ctx.frame_bits[active] / np.maximum(sums[active], 1e-300)
    x *= scale[:, None]
    f_mat, _ = optimal_frequencies(x, rho, ctx.compute, ctx.gtfp_s)
    plan = Plan(X=x, rho=rho.copy(), F=f_mat)
    total, breakdown = total_energy(plan, ctx.snapshots, ctx.link, ctx.compute)
    plan.energy_breakdown = breakdown
    report = check_feasibility(
        plan,
        ctx.snapshots,
        ctx.gtfp_s,
        ctx.link,
        ctx.compute,
        ctx.frame_bits,
        proc_tol_cycles=ctx.cycles_cap * 1e-6,
    )
    plan.feasible = report.feasible and math.isfinite(total)
    plan.violations = [c.name for c in report.violated()]
    if state is not None:
        plan.trace = state.trace
    return plan


def _record(ctx, state, it, u, rho, u_prev, rho_prev):
    e = ctx.energy(u, rho)
    proc = ctx.proc_residual_rel(u, rho)
    dl, isl = ctx.rate_residuals_rel(u, rho)
    state.trace.append(
        {
            "iteration": it,
            "objective_j": e,
            "proc_residual": float(proc.max(initial=-math.inf)),
            "downlink_residual": dl,
            "isl_residual": float(isl.max(initial=-math.inf)),
            "dx": float(np.linalg.norm(u - u_prev)),
            "drho": float(np.linalg.norm((rho - rho_prev) / ctx.compute.rho_max)),
        }
    )


def _is_near_feasible(ctx, state, u, rho) -> bool:
    proc = ctx.proc_residual_rel(u, rho)
    dl, isl = ctx.rate_residuals_rel(u, rho)
    return (
        float(proc.max(initial=-1)) <= state.tau_proc
        and dl <= state.tau_rate
        and float(isl.max(initial=-1)) <= state.tau_rate
    )


def bcd_solve(ctx: ProblemContext, state: Optional[OptimizerState] = None) -> Plan:
    """Alternating minimization over allocation and compression blocks.

    Raises Infeasible when no plan can satisfy the constraints (detected by
    the placement probe and confirmed by persistent residuals).
    """
    if state is None:
        state = OptimizerState()
    state.reset(ctx.n_sats, len(ctx.frame_bits), len(ctx.edges))

    if ctx.frame_bits.sum() == 0:
        u = np.zeros((len(ctx.frame_bits), ctx.n_sats + 1))
        rho = np.ones(len(ctx.frame_bits))
        return _assemble_plan(ctx, u, rho, state)

    rho = rho_init(ctx)
    # Start a hair inside the margined downlink boundary; the initializer
    # lands exactly on it whenever the slot rate is the binding resource.
    active = ctx.frame_bits > 0
    rho[active] = np.minimum(rho[active] * (1 + 3 * RATE_MARGIN), ctx.compute.rho_max)
    u = ctx.initial_shares()

    # Restoration: start from a placement-feasible point whenever the plain
    # all-at-source start violates a budget.
    if not _is_near_feasible(ctx, state, u, rho):
        feasible, x0, binding = probe_allocation(ctx, rho)
        if not feasible:
            for cand in _probe_rho_candidates(ctx, rho):
                feasible, x0, binding = probe_allocation(ctx, cand)
                if feasible:
                    rho = cand
                    break
        if not feasible:
            raise Infeasible(binding, "placement probe exhausted the compression range")
        u = x0 / np.maximum(ctx.frame_bits[:, None], 1e-300)
        u[ctx.frame_bits == 0] = 0.0

    best_u, best_rho = u.copy(), rho.copy()
    best_e = ctx.energy(u, rho) if _is_near_feasible(ctx, state, u, rho) else math.inf

    variants = [(u, rho)]
    if state.multi_start > 0:
        rng = np.random.default_rng(state.seed)
        for _ in range(state.multi_start):
            perturbed = u + 0.05 * rng.standard_normal(u.shape)
            variants.append((perturbed, rho.copy()))

    for u0, rho0 in variants:
        u_cur, rho_cur = _run_bcd_once(ctx, state, u0, rho0)
        if _is_near_feasible(ctx, state, u_cur, rho_cur):
            e_cur = ctx.energy(u_cur, rho_cur)
            if e_cur < best_e:
                best_u, best_rho, best_e = u_cur.copy(), rho_cur.copy(), e_cur

    if not math.isfinite(best_e):
        # The probe said a placement exists, so treat lingering residuals as
        # a solver cap rather than model infeasibility.
        if state.cap_exceeded:
            raise IterationCapExceeded("no feasible iterate within the iteration caps")
        raise Infeasible(_binding_from_residuals(ctx, state, u, rho))

    plan = _assemble_plan(ctx, best_u, best_rho, state)
    if not plan.feasible:
        plan = _exact_repair(ctx, state, best_u, best_rho)
    if not plan.feasible:
        raise Infeasible(plan.violations[0] if plan.violations else "unknown")
    return plan


def _run_bcd_once(ctx, state, u, rho):
    rho_max = ctx.compute.rho_max
    u_prev = np.zeros_like(u)
    rho_prev = np.zeros_like(rho)
    prev_feasible_e = math.inf
    for it in range(state.outer_cap):
        if state.out_of_time():
            state.cap_exceeded = True
            break
        u_before, rho_before = u.copy(), rho.copy()
        u, _ = ipdd_allocation(ctx, u, rho, state)
        if ctx.compute.complexity_model is not ComplexityModel.CONSTANT:
            rho = pg_compression(ctx, u, rho, state)
        else:
            rho = np.where(ctx.frame_bits > 0, rho_max, rho)

        # Monotone safeguard: never trade a feasible iterate for a costlier one.
        if _is_near_feasible(ctx, state, u, rho):
            e_now = ctx.energy(u, rho)
            if e_now > prev_feasible_e * (1 + 1e-9):
                u, rho = u_before, rho_before
                state.step_x *= 0.5
                state.step_rho *= 0.5
                e_now = prev_feasible_e
            prev_feasible_e = min(prev_feasible_e, e_now)

        _record(ctx, state, it, u, rho, u_prev, rho_prev)
        move = float(np.linalg.norm(u - u_before)) + float(np.linalg.norm((rho - rho_before) / rho_max))
        u_prev, rho_prev = u_before, rho_before
        if move <= state.delta:
            break
    else:
        state.cap_exceeded = True

    # Polish at a tighter tolerance, allocation last so the returned point
    # satisfies the rate polytope for the final rho.
    saved = state.delta
    state.delta = saved / 10.0
    if ctx.compute.complexity_model is not ComplexityModel.CONSTANT:
        rho = pg_compression(ctx, u, rho, state)
    u, _ = ipdd_allocation(ctx, u, rho, state)
    state.delta = saved
    return u, rho


def _binding_from_residuals(ctx, state, u, rho) -> str:
    proc = ctx.proc_residual_rel(u, rho)
    dl, isl = ctx.rate_residuals_rel(u, rho)
    worst = float(proc.max(initial=-math.inf))
    name = f"processing[{int(np.argmax(proc))}]"
    if dl > worst:
        worst, name = dl, "downlink"
    if len(ctx.edges) and float(isl.max()) > worst:
        j = int(np.argmax(isl))
        name = f"isl[{ctx.edges[j][0]},{ctx.edges[j][1]:+d}]"
    return name


def _exact_repair(ctx, state, u, rho) -> Plan:
    """Nudge a near-feasible iterate onto the exact constraint set."""
    rho_fix = rho.copy()
    active = ctx.frame_bits > 0
    for _ in range(4):
        plan = _assemble_plan(ctx, u, rho_fix, state)
        if plan.feasible:
            return plan
        dl, isl = ctx.rate_residuals_rel(u, rho_fix)
        bump = max(dl, float(isl.max(initial=0.0)), 0.0)
        if bump <= 0 or np.all(rho_fix[active] >= ctx.compute.rho_max):
            break
        rho_fix = np.where(active, np.minimum(rho_fix * (1 + 2 * bump + 1e-12), ctx.compute.rho_max), rho_fix)
        a_mat, b_vec = ctx.halfspaces(rho_fix)
        u, _, _ = _project_allocation(ctx, u, a_mat, b_vec)
    return _assemble_plan(ctx, u, rho_fix, state)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def baseline_direct(ctx: ProblemContext) -> Plan:
    """Everything straight to ground, no processing anywhere."""
    k_frames, n = len(ctx.frame_bits), ctx.n_sats
    u = np.zeros((k_frames, n + 1))
    u[ctx.frame_bits > 0, n] = 1.0
    rho = np.ones(k_frames)
    plan = _assemble_plan(ctx, u, rho, None)
    if not plan.feasible:
        raise Infeasible(plan.violations[0] if plan.violations else "downlink")
    return plan


def baseline_local(ctx: ProblemContext, state: Optional[OptimizerState] = None) -> Plan:
    """All processing at the source satellite; only rho is optimized."""
    if state is None:
        state = OptimizerState()
    state.reset(ctx.n_sats, len(ctx.frame_bits), len(ctx.edges))
    k_frames, n = len(ctx.frame_bits), ctx.n_sats
    u = ctx.initial_shares()
    if ctx.frame_bits.sum() == 0:
        return _assemble_plan(ctx, u, np.ones(k_frames), state)

    feasible, rho0 = _local_feasible_rho(ctx)
    if not feasible:
        raise Infeasible(rho0)  # rho0 carries the binding name in this branch
    rho = rho0
    if ctx.compute.complexity_model is ComplexityModel.CONSTANT:
        rho = np.where(ctx.frame_bits > 0, ctx.compute.rho_max, 1.0)
    else:
        for _ in range(3):
            rho = pg_compression(ctx, u, rho, state)
    plan = _assemble_plan(ctx, u, rho, state)
    if not plan.feasible:
        plan = _exact_repair(ctx, state, u, rho)
    if not plan.feasible:
        raise Infeasible(plan.violations[0] if plan.violations else "processing")
    return plan


def _local_feasible_rho(ctx: ProblemContext):
    """Exact feasibility for the all-at-source restriction.

    Feasibility couples only the source CPU budget and the downlink budget,
    both separable and convex in rho, so scanning the Pareto frontier via a
    common multiplier is exact. (The per-edge gather traffic is bounded by
    the downlink usage, which never exceeds the ISL budget while every
    downlink rate is below the ISL rate.)
    """
    active = ctx.frame_bits > 0
    d = ctx.frame_bits[active]
    if not len(d):
        return True, np.ones(len(ctx.frame_bits))
    rho_hi = np.full(len(d), ctx.compute.rho_max)
    eps = ctx.compute.epsilon
    model = ctx.compute.complexity_model

    def cpu_of(rho_vec):
        return float((d * compression_cycles(rho_vec, eps, model)).sum())

    def dl_of(rho_vec):
        return float((d / rho_vec).sum())

    budget_dl = ctx.dl_budget * (1 - RATE_MARGIN)

    def rho_for_mu(mu):
        # Per-frame argmin of D[C(rho) + mu/rho]: C'(rho) rho^2 = mu, which is
        # increasing in rho, so bisection in the box is exact.
        out = np.empty(len(d))
        for i in range(len(d)):
            lo, hi = 1.0, ctx.compute.rho_max
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                lhs = compression_cycles_deriv(mid, eps, model) * mid * mid
                if lhs < mu:
                    lo = mid
                else:
                    hi = mid
            out[i] = 0.5 * (lo + hi)
        return out

    if dl_of(rho_hi) > budget_dl:
        return False, "downlink"
    # Smallest downlink-feasible mu also minimizes the CPU load among
    # downlink-feasible points (CPU rises, downlink falls along mu).
    if dl_of(rho_for_mu(0.0)) <= budget_dl:
        rho = rho_for_mu(0.0)
    else:
        lo_mu, hi_mu = 0.0, 1.0
        while dl_of(rho_for_mu(hi_mu)) > budget_dl:
            hi_mu *= 4.0
            if hi_mu > 1e15:
                return False, "downlink"
        for _ in range(80):
            mid = 0.5 * (lo_mu + hi_mu)
            if dl_of(rho_for_mu(mid)) > budget_dl:
                lo_mu = mid
            else:
                hi_mu = mid
        rho = rho_for_mu(hi_mu)
    if cpu_of(rho) > ctx.cycles_cap * (1 + 1e-9):
        binding = f"processing[{ctx.snapshots[0].source_sat}]"
        return False, binding
    full = np.ones(len(ctx.frame_bits))
    full[active] = rho
    return True, full


# ---------------------------------------------------------------------------
# Independent grid-search oracle
# ---------------------------------------------------------------------------


def _frame_grid(ctx: ProblemContext, k: int, support, rho_grid, share_steps: int):
    """Enumerate one frame's grid points: shares over support+ground x rho."""
    n = ctx.n_sats
    cols = list(support) + [n]
    combos = []
    d_k = ctx.frame_bits[k]

    def rec(prefix, remaining):
        if len(prefix) == len(cols) - 1:
            combos.append(prefix + [remaining])
            return
        for take in range(remaining + 1):
            rec(prefix + [take], remaining - take)

    rec([], share_steps)
    shares = np.array(combos, dtype=float) / share_steps  # (n_combo, len(cols))
    n_combo = len(shares)
    rows = []
    for rho_k in rho_grid:
        x = np.zeros((n_combo, n + 1))
        for i, col in enumerate(cols):
            x[:, col] = shares[:, i] * d_k
        rows.append((rho_k, x))
    return rows


def _frame_metrics(ctx, k, x, rho_k):
    """Energy and resource usage columns for a batch of single-frame points."""
    n = ctx.n_sats
    cyc = float(compression_cycles(rho_k, ctx.compute.epsilon, ctx.compute.complexity_model))
    comm = x @ (ctx.scat_cost[k] + ctx.gath_cost[k] / rho_k)
    loads = x[:, :n] * cyc  # (n_combo, N)
    dl = x[:, n] + x[:, :n].sum(axis=1) / rho_k
    isl = np.zeros((len(x), len(ctx.edges)))
    for j in range(len(ctx.edges)):
        isl[:, j] = x[:, n] * ctx.edge_direct[j, k] + x[:, :n] @ (
            ctx.edge_scat[j, k] + ctx.edge_gath[j, k] / rho_k
        )
    return comm, loads, dl, isl


def _frame_points(ctx, k, support, rho_grid, share_steps):
    """Flattened grid for one frame: x rows plus per-point rho, energy-if-alone
    pieces and resource usage columns (support loads, downlink, ISL edges)."""
    n = ctx.n_sats
    xs, rhos, comms, loads, dls, isls = [], [], [], [], [], []
    for rho_k, x in _frame_grid(ctx, k, support, rho_grid, share_steps):
        comm, load, dl, isl = _frame_metrics(ctx, k, x, rho_k)
        xs.append(x)
        rhos.append(np.full(len(x), rho_k))
        comms.append(comm)
        loads.append(load[:, list(support)])
        dls.append(dl)
        isls.append(isl)
    return (
        np.vstack(xs),
        np.concatenate(rhos),
        np.concatenate(comms),
        np.vstack(loads),
        np.concatenate(dls),
        np.vstack(isls),
    )


def _pareto_keep(comm, resources):
    """Indices whose (energy, resources...) are not dominated by a cheaper point.

    Valid pruning for pairing because the paired energy is the sum of the
    frames' communication terms plus a processing term that increases in
    every per-satellite load, and feasibility tightens the same way.
    """
    order = np.argsort(comm, kind="stable")
    kept: list[int] = []
    kept_res = np.empty((len(order), resources.shape[1]))
    n_kept = 0
    for idx in order:
        r = resources[idx]
        if n_kept and bool(np.any(np.all(kept_res[:n_kept] <= r + 1e-12, axis=1))):
            continue
        kept_res[n_kept] = r
        kept.append(int(idx))
        n_kept += 1
    return np.array(kept, dtype=int)


def oracle_grid_search(
    ctx: ProblemContext,
    support: Sequence[int],
    rho_step: float = 0.25,
    share_steps: int = 20,
) -> Plan:
    """Exhaustive search over coarse allocation/compression grids.

    Only meant for tiny instances (K <= 2, a handful of satellites); verifies
    the iterative solver from a completely separate search path. Frequencies
    come from the closed form; feasibility is re-checked with the shared
    evaluator on the winning plan. Two-frame instances prune each frame's
    grid to its energy/resource Pareto front before pairing; a grid point
    that pruning removes is dominated, so the optimum over the grid survives.
    """
    k_frames, n = len(ctx.frame_bits), ctx.n_sats
    if k_frames > 2 or len(support) > 3:
        raise ValueError("oracle instances are limited to K <= 2 and <= 3 satellites")
    active_frames = [k for k in range(k_frames) if ctx.frame_bits[k] > 0]
    if not active_frames:
        u = np.zeros((k_frames, n + 1))
        return _assemble_plan(ctx, u, np.ones(k_frames), None)

    rho_grid = np.arange(1.0, ctx.compute.rho_max + 1e-9, rho_step)
    budget_dl = ctx.dl_budget
    budget_isl = ctx.isl_budget
    cap = ctx.cycles_cap * (1 + 1e-12)
    best = None  # (energy, X, rho)

    if len(active_frames) == 1:
        k = active_frames[0]
        x, rho_pts, comm, loads_s, dl, isl = _frame_points(ctx, k, support, rho_grid, share_steps)
        ok = (loads_s <= cap).all(axis=1) & (dl <= budget_dl) & (isl <= budget_isl).all(axis=1)
        if ok.any():
            full_loads = np.zeros((int(ok.sum()), n))
            full_loads[:, list(support)] = loads_s[ok]
            e = comm[ok] + ctx.proc_energy_of_load_rows(full_loads)
            i = int(np.argmin(e))
            idx = np.nonzero(ok)[0][i]
            x_full = np.zeros((k_frames, n + 1))
            x_full[k] = x[idx]
            rho_full = np.ones(k_frames)
            rho_full[k] = rho_pts[idx]
            best = (float(e[i]), x_full, rho_full)
    else:
        k1, k2 = active_frames
        pts = {}
        for k in (k1, k2):
            x, rho_pts, comm, loads_s, dl, isl = _frame_points(ctx, k, support, rho_grid, share_steps)
            res = np.hstack([loads_s, dl[:, None], isl])
            keep = _pareto_keep(comm, res)
            pts[k] = (x[keep], rho_pts[keep], comm[keep], loads_s[keep], dl[keep], isl[keep])
        x1, rho1, comm1, l1, dl1, isl1 = pts[k1]
        x2, rho2, comm2, l2, dl2, isl2 = pts[k2]
        for i1 in range(len(x1)):
            tot_loads = l1[i1][None, :] + l2
            ok = (
                (tot_loads <= cap).all(axis=1)
                & (dl1[i1] + dl2 <= budget_dl)
                & ((isl1[i1][None, :] + isl2) <= budget_isl).all(axis=1)
            )
            if not ok.any():
                continue
            idxs = np.nonzero(ok)[0]
            full_loads = np.zeros((len(idxs), n))
            full_loads[:, list(support)] = tot_loads[idxs]
            e = comm1[i1] + comm2[idxs] + ctx.proc_energy_of_load_rows(full_loads)
            i = int(np.argmin(e))
            if best is None or e[i] < best[0]:
                idx2 = idxs[i]
                x_full = np.zeros((k_frames, n + 1))
                x_full[k1] = x1[i1]
                x_full[k2] = x2[idx2]
                rho_full = np.ones(k_frames)
                rho_full[k1] = rho1[i1]
                rho_full[k2] = rho2[idx2]
                best = (float(e[i]), x_full, rho_full)

    if best is None:
        raise Infeasible("grid", "no grid point satisfied the constraints")
    _, x_best, rho_best = best
    u = x_best / np.maximum(ctx.frame_bits[:, None], 1e-300)
    u[ctx.frame_bits == 0] = 0.0
    return _assemble_plan(ctx, u, rho_best, None)
