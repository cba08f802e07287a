"""Energy and time models: compression cost, processing, RF and ISL transmission,
scatter/gather accounting, total-energy evaluation and feasibility checking.

Sign conventions used throughout: a constraint report carries
`usage`, `budget`, and `slack = budget - usage`; a plan satisfies a rate
constraint when slack >= 0. Static RF and ISL power draws are deliberately
outside the accounting: only transmission-attributable energy counts.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .linkbudget import LinkConfig
from .topology import TopologySnapshot


class ComplexityModel(enum.Enum):
    EXPONENTIAL = "exponential"
    CONSTANT = "constant"  # JPEG-style: cycle cost independent of the ratio


@dataclass(frozen=True)
class ComputeConfig:
    """Per-satellite processing payload and compression algorithm profile."""

    f_cpu_hz: float = 1.8e9
    n_cores: int = 4
    p_proc_max_w: float = 10.0
    epsilon: float = 0.1
    rho_max: float = 20.0
    complexity_model: ComplexityModel = ComplexityModel.EXPONENTIAL

    def __post_init__(self):
        if min(self.f_cpu_hz, self.n_cores, self.p_proc_max_w) <= 0:
            raise ValueError("cpu frequency, cores and power must be > 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.rho_max <= 1:
            raise ValueError("rho_max must exceed 1")

    @property
    def nu(self) -> float:
        """Effective capacitance coefficient [J s^2]."""
        return self.p_proc_max_w / self.f_cpu_hz**3


def compression_cycles(rho, eps: float, model: ComplexityModel = ComplexityModel.EXPONENTIAL):
    """CPU cycles per input bit to reach compression ratio rho.

    Exponential profile: exp(eps*rho) - exp(eps), zero at rho=1 (pass-through).
    Constant profile: eps, whatever the ratio. Accepts scalars or arrays.
    """
    rho_arr = np.asarray(rho, dtype=float)
    if np.any(rho_arr < 1.0):
        raise ValueError("rho must be >= 1")
    if model is ComplexityModel.CONSTANT:
        out = np.full_like(rho_arr, eps)
    else:
        # same exp implementation for both terms so C(1, eps) == 0 exactly
        out = np.exp(eps * rho_arr) - np.exp(eps)
    return out if out.ndim else float(out)


def compression_cycles_deriv(rho, eps: float, model: ComplexityModel = ComplexityModel.EXPONENTIAL):
    """d(cycles/bit)/d(rho); zero for the constant profile."""
    rho_arr = np.asarray(rho, dtype=float)
    if model is ComplexityModel.CONSTANT:
        out = np.zeros_like(rho_arr)
    else:
        out = eps * np.exp(eps * rho_arr)
    return out if out.ndim else float(out)


def processing_time(bits: float, rho: float, f_hz: float, cfg: ComputeConfig) -> float:
    """Wall time to compress `bits` at ratio rho on n_cores running at f_hz."""
    work = bits * compression_cycles(rho, cfg.epsilon, cfg.complexity_model)
    if work == 0:
        return 0.0
    if f_hz <= 0:
        return math.inf
    return work / (cfg.n_cores * f_hz)


def cycle_energy(f_hz: float, cfg: ComputeConfig) -> float:
    """Energy per CPU cycle at clock f_hz [J]."""
    if not 0 <= f_hz <= cfg.f_cpu_hz * (1 + 1e-12):
        raise ValueError("frequency outside [0, f_cpu]")
    return cfg.nu * f_hz**2


def e_proc(bits: float, rho: float, f_hz: float, cfg: ComputeConfig) -> float:
    """Energy to compress `bits` at ratio rho with clock f_hz [J]."""
    return bits * compression_cycles(rho, cfg.epsilon, cfg.complexity_model) * cycle_energy(f_hz, cfg)


def e_rf_trans(bits: float, rate_bps: float, cfg: LinkConfig) -> float:
    """Downlink transmission energy [J]; infinite when there is data but no link."""
    if bits == 0:
        return 0.0
    if rate_bps <= 0:
        return math.inf
    return cfg.amp_inefficiency_rf * cfg.tx_power_rf_w * bits / rate_bps


def e_isl_trans(bits: float, cfg: LinkConfig) -> float:
    """Single-hop ISL transmission energy [J]."""
    if bits < 0:
        raise ValueError("bits must be >= 0")
    return cfg.isl_tx_fraction * cfg.isl_power_w * bits / cfg.isl_rate_bps


@dataclass
class Plan:
    """One resolved schedule: allocation, compression ratios, CPU frequencies.

    X has K rows and N+1 columns; column N is the unprocessed direct-download
    share. rho[k] = 1 means frame k is forwarded uncompressed.
    """

    X: np.ndarray
    rho: np.ndarray
    F: np.ndarray
    energy_breakdown: dict = field(default_factory=lambda: {"scatter": 0.0, "gather": 0.0, "proc": 0.0})
    feasible: bool = False
    violations: list = field(default_factory=list)
    trace: list = field(default_factory=list)

    @property
    def n_frames(self) -> int:
        return self.X.shape[0]

    @property
    def n_sats(self) -> int:
        return self.X.shape[1] - 1

    def total_energy_j(self) -> float:
        b = self.energy_breakdown
        return b["scatter"] + b["gather"] + b["proc"]


def isl_bit_cost(link: LinkConfig) -> float:
    return link.isl_tx_fraction * link.isl_power_w / link.isl_rate_bps


def scatter_bit_costs(snap: TopologySnapshot, link: LinkConfig) -> np.ndarray:
    """Scatter-phase energy per raw bit, per destination column (N sats + g)."""
    n = snap.n_sats
    costs = np.empty(n + 1)
    costs[:n] = isl_bit_cost(link) * snap.hops_from_source
    if snap.dest_sat is None or snap.downlink_rate_bps <= 0:
        costs[n] = math.inf
    else:
        relay_hops = snap.hops_to_gs[snap.source_sat] - 1
        costs[n] = (
            link.amp_inefficiency_rf * link.tx_power_rf_w / snap.downlink_rate_bps
            + isl_bit_cost(link) * relay_hops
        )
    return costs


def gather_bit_costs(snap: TopologySnapshot, link: LinkConfig) -> np.ndarray:
    """Gather-phase energy per raw bit before the 1/rho compression factor."""
    n = snap.n_sats
    costs = np.empty(n + 1)
    if snap.dest_sat is None or snap.downlink_rate_bps <= 0:
        costs[:n] = math.inf
    else:
        costs[:n] = link.amp_inefficiency_rf * link.tx_power_rf_w / snap.downlink_rate_bps + isl_bit_cost(
            link
        ) * (snap.hops_to_gs - 1)
    costs[n] = 0.0
    return costs


def e_scatter(x_row: np.ndarray, snap: TopologySnapshot, link: LinkConfig) -> float:
    """Energy to distribute one frame's segments from the source [J]."""
    costs = scatter_bit_costs(snap, link)
    active = x_row > 0
    if not np.any(active):
        return 0.0
    return float(np.dot(x_row[active], costs[active]))


def e_gather(x_row: np.ndarray, rho_k: float, snap: TopologySnapshot, link: LinkConfig) -> float:
    """Energy to deliver one frame's compressed segments to the ground [J]."""
    if rho_k < 1:
        raise ValueError("rho must be >= 1")
    costs = gather_bit_costs(snap, link)
    active = x_row > 0
    if not np.any(active):
        return 0.0
    return float(np.dot(x_row[active], costs[active])) / rho_k


def total_energy(plan: Plan, snapshots: Sequence[TopologySnapshot], link: LinkConfig, compute: ComputeConfig):
    """Task energy [J] with a scatter/gather/proc breakdown.

    The returned total is exactly the sum of the breakdown entries.
    """
    if plan.n_frames != len(snapshots):
        raise ValueError("plan and snapshots disagree on frame count")
    n = plan.n_sats
    scatter = gather = proc = 0.0
    for k, snap in enumerate(snapshots):
        scatter += e_scatter(plan.X[k], snap, link)
        gather += e_gather(plan.X[k], plan.rho[k], snap, link)
        cycles_per_bit = compression_cycles(plan.rho[k], compute.epsilon, compute.complexity_model)
        for sat in range(n):
            bits = plan.X[k, sat]
            if bits <= 0:
                continue
            f = plan.F[k, sat]
            if f <= 0:
                proc = math.inf if cycles_per_bit > 0 else proc
                continue
            proc += bits * cycles_per_bit * compute.nu * f**2
    breakdown = {"scatter": scatter, "gather": gather, "proc": proc}
    return scatter + gather + proc, breakdown


@dataclass(frozen=True)
class ConstraintReport:
    name: str
    usage: float
    budget: float

    @property
    def slack(self) -> float:
        return self.budget - self.usage

    @property
    def ok(self) -> bool:
        return self.usage <= self.budget


@dataclass
class FeasibilityReport:
    constraints: list

    @property
    def feasible(self) -> bool:
        return all(c.ok for c in self.constraints)

    def violated(self) -> list:
        return [c for c in self.constraints if not c.ok]

    def by_name(self, name: str) -> ConstraintReport:
        for c in self.constraints:
            if c.name == name:
                return c
        raise KeyError(name)


def check_feasibility(
    plan: Plan,
    snapshots: Sequence[TopologySnapshot],
    gtfp_s: float,
    link: LinkConfig,
    compute: ComputeConfig,
    frame_bits: Sequence[float],
    proc_tol_cycles: float = 0.0,
) -> FeasibilityReport:
    """Evaluate every constraint of the plan and report per-constraint slack.

    Covers: per-satellite processing time, the aggregate downlink rate, the
    per-edge ISL rate on the enforced edges, and the box constraints on X,
    rho and F. `proc_tol_cycles` widens only the processing budget (the
    optimizer's own tolerance); rate budgets are never widened.
    """
    k_frames = plan.n_frames
    n = plan.n_sats
    reports: list[ConstraintReport] = []

    # Processing: sum_k x C(rho_k) / (n_cores f_k) <= K * T_GTF per satellite.
    cyc = np.asarray(compression_cycles(plan.rho, compute.epsilon, compute.complexity_model))
    for sat in range(n):
        t_needed = 0.0
        for k in range(k_frames):
            work = plan.X[k, sat] * cyc[k]
            if work == 0:
                continue
            f = plan.F[k, sat]
            t_needed += math.inf if f <= 0 else work / (compute.n_cores * f)
        reports.append(
            ConstraintReport(
                f"processing[{sat}]",
                t_needed,
                k_frames * gtfp_s + proc_tol_cycles / (compute.n_cores * compute.f_cpu_hz),
            )
        )

    # Downlink: sum_k (x_g + sum_n x_n / rho_k) <= T_GTF * sum_k R_k.
    usage_dl = sum(
        plan.X[k, n] + plan.X[k, :n].sum() / plan.rho[k] for k in range(k_frames)
    )
    budget_dl = gtfp_s * sum(s.downlink_rate_bps for s in snapshots)
    reports.append(ConstraintReport("downlink", usage_dl, budget_dl))

    # ISL edges: traffic from scatter, compressed gather, and direct relays.
    edges = snapshots[0].enforced_edges() if snapshots else []
    for edge in edges:
        usage = 0.0
        for k, snap in enumerate(snapshots):
            e = snap.edge_index(*edge)
            x = plan.X[k]
            usage += x[n] * snap.direct_edge_use[e]
            usage += float(np.dot(x[:n], snap.scatter_edge_use[e] + snap.gather_edge_use[e] / plan.rho[k]))
        reports.append(
            ConstraintReport(f"isl[{edge[0]},{edge[1]:+d}]", usage, k_frames * gtfp_s * link.isl_rate_bps)
        )

    # Box constraints and row sums.
    reports.append(ConstraintReport("x_nonneg", float(-plan.X.min(initial=0.0)), 0.0))
    row_err = max(
        (abs(plan.X[k].sum() - frame_bits[k]) for k in range(k_frames)), default=0.0
    )
    reports.append(ConstraintReport("row_sums", row_err, 1e-6 * max(max(frame_bits, default=1.0), 1.0)))
    reports.append(ConstraintReport("rho_box", float(np.max(np.abs(np.clip(plan.rho, 1.0, compute.rho_max) - plan.rho), initial=0.0)), 0.0))
    reports.append(ConstraintReport("f_box", float(np.max(plan.F, initial=0.0)), compute.f_cpu_hz * (1 + 1e-12)))

    return FeasibilityReport(reports)
