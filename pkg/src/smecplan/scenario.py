"""Scenario definition, file I/O, bundled reference scenarios, result CSVs.

Scenario files are a small human-editable text format: `[section]` headers
with `key = value` lines (ints, floats, booleans, quoted strings, or flat
lists). Frame-width profiles may live in a separate one-integer-per-line
file next to the scenario.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, replace
from importlib import resources as importlib_resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import linkbudget, orbital, topology
from .energymodel import ComplexityModel, ComputeConfig, Plan
from .linkbudget import LinkConfig, RateTable
from .optimizer import ProblemContext
from .orbital import ConstellationConfig, ImagingConfig, image_size_bits


class ScenarioError(Exception):
    pass


class SchemaError(ScenarioError):
    """A field failed to parse or took an out-of-range value."""


class InconsistencyError(ScenarioError):
    """Fields are individually valid but mutually impossible."""


class TopologyMode(enum.Enum):
    V_D_EQUALS_V0 = "v_d_equals_v0"
    V_D_OFFSET = "v_d_offset"
    DYNAMIC = "dynamic"


@dataclass(frozen=True)
class Task:
    """What to capture: which satellite, when, and how wide each frame is."""

    source_sat: int = 5
    start_time: float = 0.0
    frame_widths: tuple = (1,)

    def __post_init__(self):
        if len(self.frame_widths) < 1:
            raise SchemaError("task.frame_widths: need at least one frame")
        if any(w < 0 or int(w) != w for w in self.frame_widths):
            raise SchemaError("task.frame_widths: widths are non-negative integers")


@dataclass(frozen=True)
class ScenarioConfig:
    constellation: ConstellationConfig = ConstellationConfig()
    imaging: ImagingConfig = ImagingConfig()
    compute: ComputeConfig = ComputeConfig()
    link: LinkConfig = LinkConfig()
    task: Task = Task()
    topology_mode: TopologyMode = TopologyMode.V_D_EQUALS_V0
    vd_offset_hops: int = 5
    enforce_source_edges_only: bool = True
    optimizer_options: tuple = ()  # (key, value) pairs forwarded to the solver state

    def __post_init__(self):
        if not 0 <= self.task.source_sat < self.constellation.n_sats:
            raise InconsistencyError(
                f"task.source_sat {self.task.source_sat} outside constellation of {self.constellation.n_sats}"
            )
        if self.topology_mode is TopologyMode.V_D_OFFSET and self.vd_offset_hops < 0:
            raise SchemaError("vd_offset_hops must be >= 0")

    # -- derived quantities --------------------------------------------------

    def gtfp_s(self) -> float:
        return orbital.gtfp(self.imaging.height_px, self.imaging.gsd_m, self.constellation.altitude_m)

    def frame_bits(self) -> np.ndarray:
        d_img = image_size_bits(self.imaging)
        return np.array([w * d_img for w in self.task.frame_widths], dtype=float)

    def dest_index(self) -> int:
        n = self.constellation.n_sats
        if self.topology_mode is TopologyMode.V_D_OFFSET:
            return (self.task.source_sat + self.vd_offset_hops) % n
        return self.task.source_sat


def calibrate_geometry(cfg: ScenarioConfig, table: RateTable) -> ConstellationConfig:
    """Place the destination satellite at the edge of coverage, approaching.

    The edge range is the largest slant distance that still clears the
    highest rate-table threshold the default setup is calibrated to. When the
    ring is dense (half-spacing smaller than the edge central angle) the
    ground station moves off-plane by just enough latitude that the nearest
    satellite enters at that range; sparse rings keep the station in-plane.
    Dynamic mode uses the constellation as given.
    """
    if cfg.topology_mode is TopologyMode.DYNAMIC:
        return cfg.constellation
    con = cfg.constellation
    n = con.n_sats
    d_edge = linkbudget.edge_of_coverage_distance(cfg.link, table)
    gamma = orbital.edge_phase_angle(con, d_edge)
    half_spacing = math.pi / n
    if half_spacing >= gamma:
        beta = 0.0
        phi_start = -gamma * (1 - 1e-9)
    else:
        phi_start = -half_spacing * (1 - 1e-6)
        cos_beta = math.cos(gamma) / math.cos(phi_start)
        beta = math.acos(min(1.0, cos_beta))
    dest = cfg.dest_index()
    phase = phi_start - 2 * math.pi * dest / n
    return replace(con, gs_latitude_rad=beta, gs_longitude_rad=0.0, phase_offset_rad=phase)


def build_snapshots(cfg: ScenarioConfig, table: Optional[RateTable] = None) -> list:
    if table is None:
        table = RateTable.shannon_default()
    con = calibrate_geometry(cfg, table)
    t_gtf = cfg.gtfp_s()
    snaps = []
    for k in range(len(cfg.task.frame_widths)):
        snaps.append(
            topology.snapshot(
                k,
                cfg.task.start_time + k * t_gtf,
                t_gtf,
                cfg.task.source_sat,
                con,
                cfg.link,
                table,
                enforce_source_edges_only=cfg.enforce_source_edges_only,
            )
        )
    return snaps


def build_context(cfg: ScenarioConfig, table: Optional[RateTable] = None) -> ProblemContext:
    snaps = build_snapshots(cfg, table)
    return ProblemContext.build(cfg.frame_bits(), cfg.gtfp_s(), snaps, cfg.link, cfg.compute)


# ---------------------------------------------------------------------------
# Scenario file parsing / writing
# ---------------------------------------------------------------------------

_SECTIONS = ("constellation", "imaging", "compute", "link", "task", "topology", "optimizer")


def _parse_value(raw: str, where: str):
    raw = raw.strip()
    if not raw:
        raise SchemaError(f"{where}: empty value")
    if raw.startswith("[") and raw.endswith("]"):
        inner = raw[1:-1].strip()
        if not inner:
            return []
        return [_parse_value(part, where) for part in inner.split(",")]
    if raw.startswith('"') and raw.endswith('"') and len(raw) >= 2:
        return raw[1:-1]
    low = raw.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        if any(c in raw for c in ".eE") and not raw.lstrip("+-").isdigit():
            return float(raw)
        return int(raw)
    except ValueError:
        raise SchemaError(f"{where}: cannot parse {raw!r}") from None


def _parse_file(text: str, where: str) -> dict:
    data: dict = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        stripped = line.split("#", 1)[0].strip() if '"' not in line else line.strip()
        if stripped.startswith("#") or not stripped:
            continue
        if stripped.startswith("[") and stripped.endswith("]"):
            section = stripped[1:-1].strip()
            if section not in _SECTIONS:
                raise SchemaError(f"{where}:{lineno}: unknown section [{section}]")
            data.setdefault(section, {})
            continue
        if "=" not in stripped:
            raise SchemaError(f"{where}:{lineno}: expected key = value")
        if section is None:
            raise SchemaError(f"{where}:{lineno}: key outside any [section]")
        key, raw = stripped.split("=", 1)
        data[section][key.strip()] = _parse_value(raw, f"{where}:{lineno}")
    return data


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, str):
        return f'"{v}"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def load_scenario(path, widths_search_dir: Optional[Path] = None) -> ScenarioConfig:
    """Read a scenario file; omitted fields keep the library defaults."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    data = _parse_file(text, str(path))
    base_dir = widths_search_dir or path.parent
    return scenario_from_dict(data, base_dir)


def scenario_from_dict(data: dict, base_dir: Optional[Path] = None) -> ScenarioConfig:
    def section(name):
        return dict(data.get(name, {}))

    def build(cls, name, **extra):
        kwargs = section(name)
        kwargs.update(extra)
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise SchemaError(f"[{name}]: {exc}") from exc
        except ValueError as exc:
            raise SchemaError(f"[{name}]: {exc}") from exc

    compute_kwargs = section("compute")
    if "complexity_model" in compute_kwargs:
        try:
            compute_kwargs["complexity_model"] = ComplexityModel(compute_kwargs["complexity_model"])
        except ValueError as exc:
            raise SchemaError(f"[compute]: {exc}") from exc

    task_kwargs = section("task")
    widths_file = task_kwargs.pop("frame_widths_file", None)
    if widths_file is not None:
        widths_path = Path(widths_file)
        if not widths_path.is_absolute() and base_dir is not None:
            widths_path = Path(base_dir) / widths_path
        task_kwargs["frame_widths"] = load_width_profile(widths_path)
    if "frame_widths" in task_kwargs:
        task_kwargs["frame_widths"] = tuple(int(w) for w in task_kwargs["frame_widths"])

    topo = section("topology")
    mode_raw = topo.pop("mode", TopologyMode.V_D_EQUALS_V0.value)
    try:
        mode = TopologyMode(mode_raw)
    except ValueError as exc:
        raise SchemaError(f"[topology]: {exc}") from exc

    opt_items = tuple(sorted(section("optimizer").items()))

    try:
        return ScenarioConfig(
            constellation=build(ConstellationConfig, "constellation"),
            imaging=build(ImagingConfig, "imaging"),
            compute=ComputeConfig(**compute_kwargs) if compute_kwargs else ComputeConfig(),
            link=build(LinkConfig, "link"),
            task=Task(**task_kwargs) if task_kwargs else Task(),
            topology_mode=mode,
            vd_offset_hops=int(topo.pop("vd_offset_hops", 5)),
            enforce_source_edges_only=bool(topo.pop("enforce_source_edges_only", True)),
            optimizer_options=opt_items,
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def scenario_to_dict(cfg: ScenarioConfig) -> dict:
    return {
        "constellation": {
            "n_sats": cfg.constellation.n_sats,
            "altitude_m": cfg.constellation.altitude_m,
            "min_elevation_rad": cfg.constellation.min_elevation_rad,
            "gs_latitude_rad": cfg.constellation.gs_latitude_rad,
            "gs_longitude_rad": cfg.constellation.gs_longitude_rad,
            "phase_offset_rad": cfg.constellation.phase_offset_rad,
            "earth_rotation": cfg.constellation.earth_rotation,
        },
        "imaging": {
            "width_px": cfg.imaging.width_px,
            "height_px": cfg.imaging.height_px,
            "bits_per_px": cfg.imaging.bits_per_px,
            "gsd_m": cfg.imaging.gsd_m,
        },
        "compute": {
            "f_cpu_hz": cfg.compute.f_cpu_hz,
            "n_cores": cfg.compute.n_cores,
            "p_proc_max_w": cfg.compute.p_proc_max_w,
            "epsilon": cfg.compute.epsilon,
            "rho_max": cfg.compute.rho_max,
            "complexity_model": cfg.compute.complexity_model.value,
        },
        "link": {
            "tx_power_rf_w": cfg.link.tx_power_rf_w,
            "amp_inefficiency_rf": cfg.link.amp_inefficiency_rf,
            "gain_tx_dbi": cfg.link.gain_tx_dbi,
            "gain_rx_dbi": cfg.link.gain_rx_dbi,
            "carrier_hz": cfg.link.carrier_hz,
            "bandwidth_hz": cfg.link.bandwidth_hz,
            "noise_power_dbw": cfg.link.noise_power_dbw,
            "isl_rate_bps": cfg.link.isl_rate_bps,
            "isl_power_w": cfg.link.isl_power_w,
            "isl_tx_fraction": cfg.link.isl_tx_fraction,
        },
        "task": {
            "source_sat": cfg.task.source_sat,
            "start_time": cfg.task.start_time,
            "frame_widths": list(cfg.task.frame_widths),
        },
        "topology": {
            "mode": cfg.topology_mode.value,
            "vd_offset_hops": cfg.vd_offset_hops,
            "enforce_source_edges_only": cfg.enforce_source_edges_only,
        },
        "optimizer": dict(cfg.optimizer_options),
    }


def save_scenario(cfg: ScenarioConfig, path) -> None:
    data = scenario_to_dict(cfg)
    lines = []
    for sect in _SECTIONS:
        if sect not in data or not data[sect]:
            continue
        lines.append(f"[{sect}]")
        for key, val in data[sect].items():
            lines.append(f"{key} = {_fmt_value(val)}")
        lines.append("")
    Path(path).write_text("\n".join(lines))


def load_width_profile(path) -> tuple:
    """One integer per line; blank lines and # comments are skipped."""
    widths = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read width profile {path}: {exc}") from exc
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            widths.append(int(line))
    if not widths:
        raise SchemaError(f"width profile {path} is empty")
    return tuple(widths)


# ---------------------------------------------------------------------------
# Bundled scenarios
# ---------------------------------------------------------------------------


def lapalma_widths() -> tuple:
    """Frame-width profile for the island-scan task (82 frames, widths 1..29).

    Digitized from the island's east-west extent sampled every ~540 m going
    north to south: broad in the north, tapering to the southern ridge. The
    exact per-frame values are approximate; comparisons against this task are
    relative, never absolute joules.
    """
    ref = importlib_resources.files("smecplan.data").joinpath("lapalma_widths.txt")
    widths = []
    for line in ref.read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            widths.append(int(line))
    return tuple(widths)


def builtin_scenarios() -> dict:
    """Named reference scenarios shipped with the package."""
    out = {}
    out["default"] = ScenarioConfig()
    for eta_tag, eta in (("eta1", 1.0), ("eta01", 0.1)):
        link = LinkConfig(isl_tx_fraction=eta)
        out[f"sweep-v0-{eta_tag}"] = ScenarioConfig(link=link, topology_mode=TopologyMode.V_D_EQUALS_V0)
        out[f"sweep-v5-{eta_tag}"] = ScenarioConfig(
            link=link, topology_mode=TopologyMode.V_D_OFFSET, vd_offset_hops=5
        )
    empty_widths = (20, 0, 0, 0, 0)
    out["empty-frames-v0"] = ScenarioConfig(task=Task(frame_widths=empty_widths))
    out["empty-frames-v5"] = ScenarioConfig(
        task=Task(frame_widths=empty_widths), topology_mode=TopologyMode.V_D_OFFSET, vd_offset_hops=5
    )
    out["empty-task"] = ScenarioConfig(task=Task(frame_widths=(0,)))
    out["lapalma"] = ScenarioConfig(
        task=Task(frame_widths=lapalma_widths()),
        topology_mode=TopologyMode.V_D_OFFSET,
        vd_offset_hops=5,
    )
    return out


# ---------------------------------------------------------------------------
# Result emission
# ---------------------------------------------------------------------------


@dataclass
class LabeledResult:
    """One solve outcome, labeled for the CSV summaries."""

    scenario: str
    strategy: str
    param: str  # e.g. "W=12" or "K=3"
    images: int
    plan: Optional[Plan] = None
    infeasible_binding: str = ""
    error: str = ""

    @property
    def feasible(self) -> bool:
        return self.plan is not None and self.plan.feasible


def emit_results(results: Sequence[LabeledResult], out_dir) -> dict:
    """Write summary.csv / allocation.csv / trace.csv under out_dir."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ScenarioError(f"cannot create output dir {out}: {exc}") from exc

    paths = {name: out / f"{name}.csv" for name in ("summary", "allocation", "trace")}
    try:
        with open(paths["summary"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                [
                    "scenario",
                    "strategy",
                    "param",
                    "feasible",
                    "total_mbits",
                    "total_j",
                    "j_per_image",
                    "rho_min",
                    "rho_max",
                    "violated",
                ]
            )
            for r in results:
                if r.error:
                    w.writerow([r.scenario, r.strategy, r.param, "error", "", "", "", "", "", r.error])
                    continue
                if not r.feasible:
                    w.writerow(
                        [r.scenario, r.strategy, r.param, "no", "", "", "", "", "", r.infeasible_binding]
                    )
                    continue
                plan = r.plan
                total = plan.total_energy_j()
                per_img = total / r.images if r.images else 0.0
                active = plan.X.sum(axis=1) > 0
                rho_act = plan.rho[active] if active.any() else plan.rho[:1]
                w.writerow(
                    [
                        r.scenario,
                        r.strategy,
                        r.param,
                        "yes",
                        f"{plan.X.sum() / 1e6:.6f}",
                        f"{total:.9g}",
                        f"{per_img:.9g}",
                        f"{rho_act.min():.6f}",
                        f"{rho_act.max():.6f}",
                        "",
                    ]
                )

        with open(paths["allocation"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["scenario", "strategy", "param", "k", "n", "x_bits", "f_hz"])
            for r in results:
                if not r.feasible:
                    continue
                plan = r.plan
                for k in range(plan.n_frames):
                    for sat in range(plan.n_sats):
                        if plan.X[k, sat] > 0:
                            w.writerow(
                                [r.scenario, r.strategy, r.param, k, sat, f"{plan.X[k, sat]:.6f}", f"{plan.F[k, sat]:.6f}"]
                            )
                    if plan.X[k, plan.n_sats] > 0:
                        w.writerow(
                            [r.scenario, r.strategy, r.param, k, "g", f"{plan.X[k, plan.n_sats]:.6f}", ""]
                        )

        with open(paths["trace"], "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                [
                    "scenario",
                    "strategy",
                    "param",
                    "iteration",
                    "objective_j",
                    "proc_residual",
                    "downlink_residual",
                    "isl_residual",
                    "dx",
                    "drho",
                ]
            )
            for r in results:
                if r.plan is None:
                    continue
                for row in r.plan.trace:
                    w.writerow(
                        [
                            r.scenario,
                            r.strategy,
                            r.param,
                            row["iteration"],
                            f"{row['objective_j']:.9g}",
                            f"{row['proc_residual']:.3e}",
                            f"{row['downlink_residual']:.3e}",
                            f"{row['isl_residual']:.3e}",
                            f"{row['dx']:.3e}",
                            f"{row['drho']:.3e}",
                        ]
                    )
    except OSError as exc:
        raise ScenarioError(f"cannot write results under {out}: {exc}") from exc
    return paths
